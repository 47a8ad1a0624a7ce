#include "retina/detections_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "json_util.hpp"
#include "retina/errors.hpp"

namespace retina {

using nlohmann::ordered_json;

std::string format_detections(const std::vector<Detection>& dets) {
  std::string out;
  for (const auto& d : dets) {
    ordered_json j;
    j["image_id"] = d.image_id;
    j["box"] = {detail::json_float(d.box.x1()), detail::json_float(d.box.y1()),
                detail::json_float(d.box.x2()), detail::json_float(d.box.y2())};
    j["score"] = detail::json_float(d.score);
    j["class"] = d.class_id;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<Detection> parse_detections(const std::string& text) {
  std::vector<Detection> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = ordered_json::parse(line);
      const auto& b = j.at("box");
      if (!b.is_array() || b.size() != 4) throw InvalidInput("box must be [x1,y1,x2,y2]");
      Detection d;
      d.image_id = j.at("image_id").get<std::int64_t>();
      d.box = BBox(b[0].get<float>(), b[1].get<float>(), b[2].get<float>(), b[3].get<float>());
      d.score = j.at("score").get<float>();
      d.class_id = j.at("class").get<int>();
      if (!(d.score >= 0.f && d.score <= 1.f)) throw InvalidInput("score must be in [0, 1]");
      out.push_back(d);
    } catch (const ordered_json::exception& e) {
      throw ParseError(ParseError::Kind::kMalformedRecord, line_no,
                       "detections line " + std::to_string(line_no) + ": " + e.what());
    } catch (const InvalidInput& e) {
      throw ParseError(ParseError::Kind::kMalformedRecord, line_no,
                       "detections line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_detections(const std::vector<Detection>& dets, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open detections for writing: " + path.string());
  out << format_detections(dets);
  if (!out) throw IoError("failed writing detections: " + path.string());
}

std::vector<Detection> read_detections(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open detections: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_detections(ss.str());
}

}  // namespace retina
