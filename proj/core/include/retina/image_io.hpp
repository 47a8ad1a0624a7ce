#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "retina/tensor.hpp"

namespace retina {

/// Binary PPM (P6, maxval 255) to a [3,H,W] tensor with values in [0,255].
Tensor load_ppm(const std::filesystem::path& path);
Tensor decode_ppm(const std::vector<std::uint8_t>& bytes);

/// Values are rounded to the nearest integer and clamped to [0,255].
void save_ppm(const Tensor& image, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_ppm(const Tensor& image);

}  // namespace retina
