#include "retina/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "retina/errors.hpp"
#include "retina/image_io.hpp"
#include "retina/rng.hpp"

namespace retina {

namespace {

constexpr std::uint64_t kPlanStream = 1;
constexpr std::uint64_t kNoiseStream = 2;

}  // namespace

void SynthConfig::validate() const {
  if (image_width <= 0 || image_height <= 0) throw InvalidInput("synth: image size must be positive");
  if (num_images < 0) throw InvalidInput("synth: num_images must be >= 0");
  if (min_pedestrians < 0 || min_pedestrians > max_pedestrians) {
    throw InvalidInput("synth: require 0 <= min_pedestrians <= max_pedestrians");
  }
  if (!(min_aspect > 0.f && min_aspect <= max_aspect)) {
    throw InvalidInput("synth: require 0 < min_aspect <= max_aspect");
  }
  if (!(min_height_px > 0.f && min_height_px <= max_height_px)) {
    throw InvalidInput("synth: require 0 < min_height_px <= max_height_px");
  }
  if (!(noise_std >= 0.f)) throw InvalidInput("synth: noise_std must be >= 0");
  if (max_pedestrians > 0) {
    const float widest = std::max(2.f, std::round(max_height_px / min_aspect));
    if (std::round(max_height_px) > static_cast<float>(image_height) ||
        widest > static_cast<float>(image_width)) {
      throw InvalidInput("synth: template larger than image (max template " +
                         std::to_string(static_cast<int>(widest)) + "x" +
                         std::to_string(static_cast<int>(std::round(max_height_px))) +
                         " does not fit in " + std::to_string(image_width) + "x" +
                         std::to_string(image_height) + ")");
    }
  }
}

ScenePlan plan_scene(const SynthConfig& config, int index) {
  Rng rng(derive_seed(config.seed, kPlanStream, static_cast<std::uint64_t>(index)));
  ScenePlan plan;
  if (config.background == Background::kGradient) {
    plan.background_top = static_cast<float>(rng.uniform(0.3, 0.7) * 255.0);
    plan.background_bottom = static_cast<float>(rng.uniform(0.3, 0.7) * 255.0);
  }
  const auto count = rng.uniform_int(config.min_pedestrians, config.max_pedestrians);
  for (std::int64_t i = 0; i < count; ++i) {
    const double height = std::round(rng.uniform(config.min_height_px, config.max_height_px));
    const double aspect = rng.uniform(config.min_aspect, config.max_aspect);
    const double width = std::max(2.0, std::round(height / aspect));
    const auto x1 = rng.uniform_int(0, config.image_width - static_cast<std::int64_t>(width));
    const auto y1 = rng.uniform_int(0, config.image_height - static_cast<std::int64_t>(height));
    // Dark or bright band, so templates contrast with the mid-grey ground.
    const bool bright = rng.bernoulli(0.5);
    const double body = bright ? rng.uniform(0.72, 0.92) : rng.uniform(0.08, 0.28);
    const double head = std::clamp(body + rng.uniform(-0.06, 0.06), 0.0, 1.0);
    TemplatePlacement t;
    t.box = BBox(static_cast<float>(x1), static_cast<float>(y1), static_cast<float>(x1 + width),
                 static_cast<float>(y1 + height));
    t.body_level = static_cast<float>(body * 255.0);
    t.head_level = static_cast<float>(head * 255.0);
    plan.templates.push_back(t);
  }
  return plan;
}

namespace {

/// Body: rounded rectangle under the head. Head: ellipse spanning the full
/// template width in the top quarter. Together they touch all four sides
/// of the paste rectangle, so it is the tight box.
void paint_template(Tensor& image, const TemplatePlacement& t) {
  const double x1 = t.box.x1(), y1 = t.box.y1(), w = t.box.width(), h = t.box.height();
  const double head_h = std::max(2.0, std::round(h * 0.25));
  const double radius = std::min(w, h - head_h) * 0.3;
  const auto px0 = static_cast<std::size_t>(x1);
  const auto py0 = static_cast<std::size_t>(y1);
  const auto pw = static_cast<std::size_t>(w);
  const auto ph = static_cast<std::size_t>(h);
  for (std::size_t dy = 0; dy < ph; ++dy) {
    for (std::size_t dx = 0; dx < pw; ++dx) {
      const double cx = static_cast<double>(dx) + 0.5;
      const double cy = static_cast<double>(dy) + 0.5;
      float level = -1.f;
      if (cy < head_h) {
        const double ex = (cx - 0.5 * w) / (0.5 * w);
        const double ey = (cy - 0.5 * head_h) / (0.5 * head_h);
        // The centre column keeps tiny heads connected to the top edge.
        if (ex * ex + ey * ey <= 1.0 || dx == pw / 2) {
          level = t.head_level;
        }
      } else {
        const double by = cy - head_h;
        const double bh = h - head_h;
        const double qx = std::max({radius - cx, cx - (w - radius), 0.0});
        const double qy = std::max({radius - by, by - (bh - radius), 0.0});
        if (qx * qx + qy * qy <= radius * radius || qx == 0.0 || qy == 0.0) {
          level = t.body_level;
        }
      }
      if (level < 0.f) continue;
      for (std::size_t c = 0; c < 3; ++c) image.at(c, py0 + dy, px0 + dx) = level;
    }
  }
}

}  // namespace

Tensor render_scene(const SynthConfig& config, const ScenePlan& plan, int index) {
  const auto w = static_cast<std::size_t>(config.image_width);
  const auto h = static_cast<std::size_t>(config.image_height);
  Tensor image({3, h, w});
  for (std::size_t y = 0; y < h; ++y) {
    const double f = h > 1 ? static_cast<double>(y) / static_cast<double>(h - 1) : 0.0;
    const auto level = static_cast<float>(plan.background_top * (1.0 - f) +
                                          plan.background_bottom * f);
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) image.at(c, y, x) = level;
    }
  }
  for (const auto& t : plan.templates) paint_template(image, t);

  Rng noise(derive_seed(config.seed, kNoiseStream, static_cast<std::uint64_t>(index)));
  const double sigma = static_cast<double>(config.noise_std) * 255.0;
  for (auto& v : image.data()) {
    const double n = sigma > 0.0 ? sigma * noise.normal() : 0.0;
    v = static_cast<float>(std::clamp(std::nearbyint(v + n), 0.0, 255.0));
  }
  return image;
}

std::vector<SampleRecord> synth_generate(const SynthConfig& config,
                                         const std::filesystem::path& out_dir) {
  config.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir)) {
    throw IoError("cannot create output directory: " + out_dir.string());
  }
  std::vector<SampleRecord> records;
  for (int i = 0; i < config.num_images; ++i) {
    const ScenePlan plan = plan_scene(config, i);
    char name[32];
    std::snprintf(name, sizeof(name), "img_%05d.ppm", i);
    save_ppm(render_scene(config, plan, i), out_dir / name);
    SampleRecord r;
    r.image_path = name;
    for (const auto& t : plan.templates) {
      r.boxes.push_back(t.box);
      r.labels.push_back(0);
    }
    records.push_back(std::move(r));
  }
  write_manifest(records, out_dir / "manifest.jsonl");
  return records;
}

}  // namespace retina
