#include "retina/manifest.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "retina/errors.hpp"
#include "json_util.hpp"

namespace retina {

using nlohmann::json;

void SampleRecord::validate() const {
  if (image_path.empty()) throw InvalidInput("record has an empty image path");
  if (boxes.size() != labels.size()) {
    throw InvalidInput("record '" + image_path + "' has " + std::to_string(boxes.size()) +
                       " boxes but " + std::to_string(labels.size()) + " labels");
  }
  for (const auto& b : boxes) {
    if (!(b.width() > 0.f && b.height() > 0.f)) {
      throw InvalidInput("record '" + image_path + "' has a box with non-positive area");
    }
  }
}

namespace {

SampleRecord record_from_json(const json& j) {
  SampleRecord r;
  r.image_path = j.at("image").get<std::string>();
  for (const auto& b : j.at("boxes")) {
    if (!b.is_array() || b.size() != 4) throw InvalidInput("box must be [x1,y1,x2,y2]");
    r.boxes.emplace_back(b[0].get<float>(), b[1].get<float>(), b[2].get<float>(),
                         b[3].get<float>());
  }
  r.labels = j.at("labels").get<std::vector<int>>();
  r.validate();
  return r;
}

}  // namespace

std::vector<SampleRecord> parse_manifest(const std::string& text) {
  std::vector<SampleRecord> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(record_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ParseError(ParseError::Kind::kMalformedRecord, line_no,
                       "manifest line " + std::to_string(line_no) + ": " + e.what());
    } catch (const InvalidInput& e) {
      throw ParseError(ParseError::Kind::kMalformedRecord, line_no,
                       "manifest line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::string format_manifest(const std::vector<SampleRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    r.validate();
    json boxes = json::array();
    for (const auto& b : r.boxes) boxes.push_back({detail::json_float(b.x1()), detail::json_float(b.y1()),
                       detail::json_float(b.x2()), detail::json_float(b.y2())});
    json j = {{"image", r.image_path}, {"boxes", std::move(boxes)}, {"labels", r.labels}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<SampleRecord> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str());
}

void write_manifest(const std::vector<SampleRecord>& records, const std::filesystem::path& path) {
  const std::string text = format_manifest(records);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open manifest for writing: " + path.string());
  out << text;
  if (!out) throw IoError("failed writing manifest: " + path.string());
}

std::filesystem::path resolve_image_path(const std::filesystem::path& manifest_path,
                                         const std::string& image_path) {
  const std::filesystem::path p(image_path);
  if (p.is_absolute()) return p;
  return manifest_path.parent_path() / p;
}

}  // namespace retina
