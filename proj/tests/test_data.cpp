#include <algorithm>
#include <cmath>
#include <fstream>

#include <gtest/gtest.h>

#include "retina/augment.hpp"
#include "retina/errors.hpp"
#include "retina/image_io.hpp"
#include "retina/manifest.hpp"
#include "retina/preprocess.hpp"
#include "retina/synth.hpp"
#include "support/oracles.hpp"

using retina::AffineTransform;
using retina::AugmentConfig;
using retina::BBox;
using retina::ParseError;
using retina::Tensor;

namespace {

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

Tensor random_image(retina::Rng& rng, std::size_t h, std::size_t w) {
  Tensor t({3, h, w});
  for (auto& v : t.data()) v = static_cast<float>(rng.uniform_int(0, 255));
  return t;
}

ParseError::Kind parse_kind(const std::string& text) {
  try {
    retina::decode_ppm(bytes_of(text));
  } catch (const ParseError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no parse error for " << text.substr(0, 16);
  return ParseError::Kind::kBadMagic;
}

}  // namespace

TEST(Ppm, SingleRedPixel) {
  const Tensor t = retina::decode_ppm(bytes_of(std::string("P6\n1 1\n255\n") + "\xff" + '\0' + '\0'));
  ASSERT_EQ(t.shape(), (retina::Shape{3, 1, 1}));
  EXPECT_EQ(t.values(), (std::vector<float>{255.f, 0.f, 0.f}));
}

TEST(Ppm, CommentsInHeader) {
  const Tensor t = retina::decode_ppm(bytes_of(std::string("P6 # c\n2 # w\n1\n255\n") + "abcdef"));
  EXPECT_EQ(t.shape(), (retina::Shape{3, 1, 2}));
  EXPECT_EQ(t.at(0, 0, 1), static_cast<float>('d'));
}

TEST(Ppm, RoundTripRandom) {
  retina::Rng rng(1);
  const Tensor img = random_image(rng, 13, 7);
  const auto dir = oracle::temp_dir("ppm");
  retina::save_ppm(img, dir / "a.ppm");
  EXPECT_EQ(retina::load_ppm(dir / "a.ppm"), img);
  EXPECT_EQ(retina::decode_ppm(retina::encode_ppm(img)), img);
}

TEST(Ppm, DistinctErrors) {
  EXPECT_EQ(parse_kind("P3\n1 1\n255\n0 0 0\n"), ParseError::Kind::kUnsupportedVariant);
  EXPECT_EQ(parse_kind("P6\n1 1\n65535\n......"), ParseError::Kind::kUnsupportedMaxval);
  EXPECT_EQ(parse_kind("P6\n2 2\n255\nabc"), ParseError::Kind::kTruncated);
  EXPECT_EQ(parse_kind("P6\nx 2\n255\n"), ParseError::Kind::kMalformedHeader);
  EXPECT_EQ(parse_kind("Q6\n1 1\n255\nabc"), ParseError::Kind::kMalformedHeader);
}

TEST(Ppm, ErrorCarriesOffset) {
  try {
    retina::decode_ppm(bytes_of("P6\n2 2\n255\nabc"));
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.position(), 14u);
  }
}

TEST(Ppm, MissingFileIsIoError) {
  EXPECT_THROW(retina::load_ppm("/nonexistent/a.ppm"), retina::IoError);
}

TEST(Preprocess, ZeroAndFullImages) {
  const Tensor zero = retina::preprocess(Tensor({3, 8, 8}, 0.f), 16, 16);
  const Tensor full = retina::preprocess(Tensor({3, 8, 8}, 255.f), 16, 16);
  ASSERT_EQ(zero.shape(), (retina::Shape{3, 16, 16}));
  const float lo[3] = {-0.485f, -0.456f, -0.406f};
  const float hi[3] = {0.515f, 0.544f, 0.594f};
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < 256; ++i) {
      EXPECT_NEAR(zero[c * 256 + i], lo[c], 1e-6);
      EXPECT_NEAR(full[c * 256 + i], hi[c], 1e-6);
    }
  }
}

TEST(Preprocess, ResizeKeepsConstant) {
  const Tensor out = retina::bilinear_resize(Tensor({3, 7, 11}, 0.3f), 24, 40);
  ASSERT_EQ(out.shape(), (retina::Shape{3, 40, 24}));
  for (float v : out.data()) EXPECT_NEAR(v, 0.3f, 1e-6);
}

TEST(Preprocess, OutputBounded) {
  retina::Rng rng(2);
  for (int i = 0; i < 20; ++i) {
    const Tensor out = retina::preprocess(random_image(rng, 20, 30), 32, 16);
    for (float v : out.data()) {
      ASSERT_GE(v, -0.6f);
      ASSERT_LE(v, 0.6f);
    }
  }
}

TEST(Preprocess, RejectsZeroTarget) {
  EXPECT_THROW(retina::preprocess(Tensor({3, 4, 4}), 0, 4), retina::InvalidInput);
}

TEST(Preprocess, ScaleBoxes) {
  const std::vector<BBox> in{BBox(10, 20, 30, 40)};
  const auto out = retina::scale_boxes(in, 128, 64, 64, 64);
  EXPECT_EQ(out[0], BBox(5, 20, 15, 40));
}

TEST(Augment, IdentityConfigIsExact) {
  retina::Rng rng(3);
  const Tensor img = random_image(rng, 32, 48);
  const std::vector<BBox> boxes{BBox(1.25f, 2, 30, 31), BBox(40, 0, 48, 9.5f)};
  retina::Rng a(99);
  const auto r = retina::augment(img, boxes, AugmentConfig::identity(), a);
  EXPECT_EQ(r.image, img);
  EXPECT_EQ(r.boxes, boxes);
  EXPECT_EQ(r.kept, (std::vector<std::size_t>{0, 1}));
}

TEST(Augment, PureTranslationShiftsBoxes) {
  retina::Rng rng(4);
  const Tensor img = random_image(rng, 32, 32);
  const std::vector<BBox> boxes{BBox(4, 6, 12, 20), BBox(15, 9, 25, 28)};
  const auto r = retina::apply_augmentation(img, boxes, AffineTransform::translation(3, -2),
                                            AugmentConfig{});
  ASSERT_EQ(r.boxes.size(), 2u);
  EXPECT_EQ(r.boxes[0], BBox(7, 4, 15, 18));
  EXPECT_EQ(r.boxes[1], BBox(18, 7, 28, 26));
  // Integer shift moves pixels exactly.
  EXPECT_EQ(r.image.at(1, 10, 10), img.at(1, 12, 7));
  EXPECT_EQ(r.image.at(0, 31, 0), 0.f);
}

TEST(Augment, HorizontalFlipClosedForm) {
  retina::Rng rng(5);
  const Tensor img = random_image(rng, 16, 64);
  const std::vector<BBox> boxes{BBox(10, 0, 20, 5)};
  const auto r = retina::apply_augmentation(img, boxes, AffineTransform::horizontal_flip(64),
                                            AugmentConfig{});
  ASSERT_EQ(r.boxes.size(), 1u);
  EXPECT_EQ(r.boxes[0], BBox(44, 0, 54, 5));
  // Pixel centres mirror: x + 0.5 -> 64 - (x + 0.5).
  EXPECT_EQ(r.image.at(2, 3, 0), img.at(2, 3, 63));
  EXPECT_EQ(r.image.at(0, 7, 20), img.at(0, 7, 43));
}

TEST(Augment, DropsOffFrameBoxes) {
  const Tensor img({3, 32, 32});
  const std::vector<BBox> boxes{BBox(0, 0, 10, 10), BBox(20, 20, 30, 30)};
  const auto r = retina::apply_augmentation(img, boxes, AffineTransform::translation(-8, 0),
                                            AugmentConfig{});
  // First box keeps 2x10 = 20 px of 100: below the visibility floor.
  ASSERT_EQ(r.kept, (std::vector<std::size_t>{1}));
  EXPECT_EQ(r.boxes[0], BBox(12, 20, 22, 30));
}

TEST(Augment, RandomOutputsStayInBounds) {
  retina::Rng rng(6);
  AugmentConfig c;
  c.translate_frac = 0.3f;
  c.max_rot_deg = 15.f;
  for (int i = 0; i < 1000; ++i) {
    std::vector<BBox> boxes;
    for (int b = 0; b < 3; ++b) boxes.push_back(oracle::random_box(rng, -5, 50, 2, 30));
    const auto t = retina::sample_augmentation(c, 64, 48, rng);
    const auto r = retina::apply_augmentation(Tensor({1, 48, 64}), boxes, t, c);
    ASSERT_EQ(r.boxes.size(), r.kept.size());
    for (const auto& b : r.boxes) {
      ASSERT_GE(b.x1(), 0.f);
      ASSERT_GE(b.y1(), 0.f);
      ASSERT_LE(b.x2(), 64.f);
      ASSERT_LE(b.y2(), 48.f);
      ASSERT_GT(b.area(), 0.f);
      ASSERT_GE(b.area(), c.min_box_area_px);
    }
  }
}

TEST(Augment, DeterministicGivenSeed) {
  retina::Rng rng(7);
  const Tensor img = random_image(rng, 32, 32);
  const std::vector<BBox> boxes{BBox(5, 5, 20, 25)};
  retina::Rng a(42), b(42);
  const auto x = retina::augment(img, boxes, AugmentConfig{}, a);
  const auto y = retina::augment(img, boxes, AugmentConfig{}, b);
  EXPECT_EQ(x.image, y.image);
  EXPECT_EQ(x.boxes, y.boxes);
}

TEST(Augment, ConfigValidation) {
  AugmentConfig c;
  c.translate_frac = 1.f;
  EXPECT_THROW(c.validate(), retina::InvalidInput);
  c = {};
  c.scale_min = 1.2f;
  EXPECT_THROW(c.validate(), retina::InvalidInput);
  c = {};
  c.hflip_prob = 1.5f;
  EXPECT_THROW(c.validate(), retina::InvalidInput);
}

TEST(Synth, EmptyScenes) {
  retina::SynthConfig c;
  c.num_images = 4;
  c.min_pedestrians = 0;
  c.max_pedestrians = 0;
  const auto records = retina::synth_generate(c, oracle::temp_dir("synth_empty"));
  ASSERT_EQ(records.size(), 4u);
  for (const auto& r : records) EXPECT_TRUE(r.boxes.empty());
}

TEST(Synth, DeterministicOutputTree) {
  retina::SynthConfig c;
  c.num_images = 5;
  c.background = retina::Background::kGradient;
  const auto a = oracle::temp_dir("synth_a");
  const auto b = oracle::temp_dir("synth_b");
  retina::synth_generate(c, a);
  retina::synth_generate(c, b);
  for (const auto& entry : std::filesystem::directory_iterator(a)) {
    const auto name = entry.path().filename();
    EXPECT_EQ(oracle::read_bytes(entry.path()), oracle::read_bytes(b / name)) << name;
  }
  EXPECT_TRUE(std::filesystem::exists(a / "manifest.jsonl"));
  EXPECT_TRUE(std::filesystem::exists(a / "img_00004.ppm"));
}

TEST(Synth, PlacementMatchesSeededTrace) {
  retina::SynthConfig c;
  c.min_pedestrians = c.max_pedestrians = 1;
  c.noise_std = 0.f;
  for (int index = 0; index < 20; ++index) {
    // Replay the draws: count, height, aspect, x1, y1.
    retina::Rng rng(retina::derive_seed(c.seed, 1, static_cast<std::uint64_t>(index)));
    ASSERT_EQ(rng.uniform_int(1, 1), 1);
    const double h = std::round(rng.uniform(c.min_height_px, c.max_height_px));
    const double w = std::max(2.0, std::round(h / rng.uniform(c.min_aspect, c.max_aspect)));
    const auto x1 = static_cast<float>(rng.uniform_int(0, 64 - static_cast<std::int64_t>(w)));
    const auto y1 = static_cast<float>(rng.uniform_int(0, 64 - static_cast<std::int64_t>(h)));
    const BBox want(x1, y1, x1 + static_cast<float>(w), y1 + static_cast<float>(h));
    const auto plan = retina::plan_scene(c, index);
    ASSERT_EQ(plan.templates.size(), 1u);
    EXPECT_EQ(plan.templates[0].box, want);

    // The painted pixels span exactly the recorded box.
    const Tensor img = retina::render_scene(c, plan, index);
    std::size_t x_lo = 64, y_lo = 64, x_hi = 0, y_hi = 0;
    for (std::size_t y = 0; y < 64; ++y) {
      for (std::size_t x = 0; x < 64; ++x) {
        if (img.at(0, y, x) == std::nearbyint(127.5f)) continue;
        x_lo = std::min(x_lo, x);
        y_lo = std::min(y_lo, y);
        x_hi = std::max(x_hi, x + 1);
        y_hi = std::max(y_hi, y + 1);
      }
    }
    EXPECT_EQ(BBox(static_cast<float>(x_lo), static_cast<float>(y_lo), static_cast<float>(x_hi),
                   static_cast<float>(y_hi)),
              want)
        << "image " << index;
  }
}

TEST(Synth, BoxesInRangeAndInside) {
  retina::SynthConfig c;
  c.image_width = 96;
  c.image_height = 64;
  c.min_pedestrians = 2;
  c.max_pedestrians = 4;
  for (int i = 0; i < 200; ++i) {
    const auto plan = retina::plan_scene(c, i);
    ASSERT_GE(plan.templates.size(), 2u);
    ASSERT_LE(plan.templates.size(), 4u);
    for (const auto& t : plan.templates) {
      EXPECT_GE(t.box.x1(), 0.f);
      EXPECT_GE(t.box.y1(), 0.f);
      EXPECT_LE(t.box.x2(), 96.f);
      EXPECT_LE(t.box.y2(), 64.f);
      EXPECT_GT(t.box.area(), 0.f);
    }
  }
}

TEST(Synth, TemplateLargerThanImageRejected) {
  retina::SynthConfig c;
  c.max_height_px = 80;
  try {
    c.validate();
    FAIL();
  } catch (const retina::InvalidInput& e) {
    EXPECT_NE(std::string(e.what()).find("template larger than image"), std::string::npos) << e.what();
  }
}

TEST(Manifest, EmptyText) { EXPECT_TRUE(retina::parse_manifest("").empty()); }

TEST(Manifest, RoundTripRandomRecords) {
  retina::Rng rng(8);
  std::vector<retina::SampleRecord> records;
  for (int i = 0; i < 100; ++i) {
    retina::SampleRecord r;
    r.image_path = "dir/img_" + std::to_string(i) + ".ppm";
    const auto n = rng.uniform_int(0, 4);
    for (std::int64_t b = 0; b < n; ++b) {
      r.boxes.push_back(oracle::random_box(rng, -3, 500, 0.001, 300));
      r.labels.push_back(static_cast<int>(rng.uniform_int(0, 2)));
    }
    records.push_back(r);
  }
  const auto dir = oracle::temp_dir("manifest");
  retina::write_manifest(records, dir / "m.jsonl");
  const auto back = retina::read_manifest(dir / "m.jsonl");
  ASSERT_EQ(back.size(), records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    EXPECT_EQ(back[i].image_path, records[i].image_path);
    EXPECT_EQ(back[i].boxes, records[i].boxes);
    EXPECT_EQ(back[i].labels, records[i].labels);
  }
}

TEST(Manifest, InvertedBoxNamesLine) {
  const std::string text =
      "{\"image\": \"a.ppm\", \"boxes\": [[0,0,4,4]], \"labels\": [0]}\n"
      "{\"image\": \"b.ppm\", \"boxes\": [[5,0,4,4]], \"labels\": [0]}\n";
  try {
    retina::parse_manifest(text);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.position(), 2u);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(Manifest, MalformedLineAndLabelMismatch) {
  EXPECT_THROW(retina::parse_manifest("{\"image\": \"a.ppm\", \"boxes\": [[0,0"), ParseError);
  EXPECT_THROW(retina::parse_manifest("{\"image\": \"a.ppm\", \"boxes\": [[0,0,1,1]], \"labels\": []}"),
               retina::InvalidInput);
}

TEST(Manifest, ResolvesRelativePaths) {
  EXPECT_EQ(retina::resolve_image_path("/data/set/manifest.jsonl", "img.ppm"),
            std::filesystem::path("/data/set/img.ppm"));
  EXPECT_EQ(retina::resolve_image_path("/data/set/manifest.jsonl", "/abs/img.ppm"),
            std::filesystem::path("/abs/img.ppm"));
}
