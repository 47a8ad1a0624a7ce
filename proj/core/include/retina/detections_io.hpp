#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "retina/postprocess.hpp"

namespace retina {

/// JSONL, one {"image_id": int, "box": [x1,y1,x2,y2], "score": f, "class": int}
/// per line. Floats are written so that reading recovers them exactly.
std::string format_detections(const std::vector<Detection>& dets);
std::vector<Detection> parse_detections(const std::string& text);

void write_detections(const std::vector<Detection>& dets, const std::filesystem::path& path);
std::vector<Detection> read_detections(const std::filesystem::path& path);

}  // namespace retina
