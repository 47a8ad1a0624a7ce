#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "retina/boxes.hpp"

namespace retina {

struct SampleRecord {
  /// As written in the manifest; relative paths resolve against the
  /// manifest's directory.
  std::string image_path;
  std::vector<BBox> boxes;
  std::vector<int> labels;

  void validate() const;
  bool operator==(const SampleRecord&) const = default;
};

/// One JSON object per line:
///   {"image": "...", "boxes": [[x1,y1,x2,y2], ...], "labels": [0, ...]}
std::vector<SampleRecord> parse_manifest(const std::string& text);
std::string format_manifest(const std::vector<SampleRecord>& records);

std::vector<SampleRecord> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::vector<SampleRecord>& records, const std::filesystem::path& path);

std::filesystem::path resolve_image_path(const std::filesystem::path& manifest_path,
                                         const std::string& image_path);

}  // namespace retina
