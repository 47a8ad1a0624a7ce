#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "retina/boxes.hpp"
#include "retina/manifest.hpp"
#include "retina/tensor.hpp"

namespace retina {

enum class Background { kFlat, kGradient };

struct SynthConfig {
  int image_width = 64;
  int image_height = 64;
  int num_images = 300;
  int min_pedestrians = 1;
  int max_pedestrians = 3;
  /// height / width of each template
  float min_aspect = 2.0f;
  float max_aspect = 3.5f;
  float min_height_px = 16.f;
  float max_height_px = 40.f;
  /// White-noise standard deviation on the [0,1] intensity scale.
  float noise_std = 0.05f;
  Background background = Background::kFlat;
  std::uint64_t seed = 7;

  void validate() const;
  bool operator==(const SynthConfig&) const = default;
};

/// One pasted template: its integer paste rectangle and grey levels.
struct TemplatePlacement {
  BBox box;
  float body_level = 0.f;
  float head_level = 0.f;
};

struct ScenePlan {
  std::vector<TemplatePlacement> templates;
  float background_top = 127.5f;
  float background_bottom = 127.5f;
};

/// The placement draws for image `index`; a pure function of (config, index).
ScenePlan plan_scene(const SynthConfig& config, int index);

/// Renders a plan (background, templates, then clamped white noise) to a
/// [3,H,W] tensor of integer values in [0,255].
Tensor render_scene(const SynthConfig& config, const ScenePlan& plan, int index);

/// Writes img_NNNNN.ppm files and manifest.jsonl into `out_dir` and returns
/// the records (image paths relative to `out_dir`).
std::vector<SampleRecord> synth_generate(const SynthConfig& config,
                                         const std::filesystem::path& out_dir);

}  // namespace retina
