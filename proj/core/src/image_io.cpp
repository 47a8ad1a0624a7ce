#include "retina/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

namespace retina {

namespace {

using Kind = ParseError::Kind;

class HeaderParser {
 public:
  explicit HeaderParser(const std::vector<std::uint8_t>& bytes) : b_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < b_.size()) {
      if (std::isspace(b_[pos_])) {
        ++pos_;
      } else if (b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  long number(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    long value = 0;
    while (pos_ < b_.size() && std::isdigit(b_[pos_])) {
      value = value * 10 + (b_[pos_] - '0');
      if (value > 1'000'000) {
        throw ParseError(Kind::kMalformedHeader, start, std::string("PPM ") + what + " too large");
      }
      ++pos_;
    }
    if (pos_ == start) {
      if (pos_ >= b_.size()) {
        throw ParseError(Kind::kTruncated, pos_, std::string("PPM header ends before ") + what);
      }
      throw ParseError(Kind::kMalformedHeader, pos_, std::string("PPM header: expected ") + what);
    }
    return value;
  }

  std::size_t pos_ = 0;
  const std::vector<std::uint8_t>& b_;
};

}  // namespace

Tensor decode_ppm(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 2) throw ParseError(Kind::kTruncated, bytes.size(), "PPM file too short");
  if (bytes[0] != 'P') throw ParseError(Kind::kMalformedHeader, 0, "missing PPM magic");
  if (bytes[1] != '6') {
    throw ParseError(Kind::kUnsupportedVariant, 1,
                     std::string("unsupported PNM variant P") + static_cast<char>(bytes[1]) +
                         "; only binary P6 is supported");
  }
  HeaderParser p(bytes);
  p.pos_ = 2;
  const long width = p.number("width");
  const long height = p.number("height");
  const std::size_t maxval_at = p.pos_;
  const long maxval = p.number("maxval");
  if (width <= 0 || height <= 0) {
    throw ParseError(Kind::kMalformedHeader, maxval_at, "PPM dimensions must be positive");
  }
  if (maxval != 255) {
    throw ParseError(Kind::kUnsupportedMaxval, maxval_at,
                     "unsupported PPM maxval " + std::to_string(maxval));
  }
  if (p.pos_ >= bytes.size() || !std::isspace(bytes[p.pos_])) {
    throw ParseError(p.pos_ >= bytes.size() ? Kind::kTruncated : Kind::kMalformedHeader, p.pos_,
                     "PPM header must end with a single whitespace byte");
  }
  ++p.pos_;

  const auto w = static_cast<std::size_t>(width);
  const auto h = static_cast<std::size_t>(height);
  const std::size_t need = 3 * w * h;
  if (bytes.size() - p.pos_ < need) {
    throw ParseError(Kind::kTruncated, bytes.size(),
                     "PPM payload truncated: expected " + std::to_string(need) + " bytes, found " +
                         std::to_string(bytes.size() - p.pos_));
  }
  Tensor image({3, h, w});
  const std::uint8_t* px = bytes.data() + p.pos_;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) image.at(c, y, x) = px[(y * w + x) * 3 + c];
    }
  }
  return image;
}

Tensor load_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_ppm(bytes);
}

std::vector<std::uint8_t> encode_ppm(const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw InvalidInput("save_ppm: image must be [3,H,W], got " + shape_to_string(image.shape()));
  }
  const std::size_t h = image.dim(1), w = image.dim(2);
  const std::string header = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(header.size() + 3 * w * h);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        const float v = std::clamp(std::nearbyint(image.at(c, y, x)), 0.f, 255.f);
        out.push_back(static_cast<std::uint8_t>(v));
      }
    }
  }
  return out;
}

void save_ppm(const Tensor& image, const std::filesystem::path& path) {
  const auto bytes = encode_ppm(image);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open image for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing image: " + path.string());
}

}  // namespace retina
