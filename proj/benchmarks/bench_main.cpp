#include <benchmark/benchmark.h>

#include "retina/anchors.hpp"
#include "retina/evaluate.hpp"
#include "retina/layers.hpp"
#include "retina/network.hpp"
#include "retina/postprocess.hpp"
#include "retina/rng.hpp"

namespace {

retina::Tensor random_tensor(retina::Shape shape, retina::Rng& rng) {
  retina::Tensor t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<float>(rng.normal());
  return t;
}

std::vector<retina::Detection> random_dets(std::size_t n, retina::Rng& rng, std::int64_t images) {
  std::vector<retina::Detection> d;
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = static_cast<float>(rng.uniform(0, 200));
    const auto y = static_cast<float>(rng.uniform(0, 200));
    const auto w = static_cast<float>(rng.uniform(5, 60));
    const auto h = static_cast<float>(rng.uniform(5, 60));
    d.push_back({retina::BBox(x, y, x + w, y + h), static_cast<float>(rng.uniform()), 0,
                 rng.uniform_int(0, images - 1)});
  }
  return d;
}

void BM_Conv3x3(benchmark::State& state) {
  retina::Rng rng(1);
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto x = random_tensor({c, 32, 32}, rng);
  const auto w = random_tensor({c, c, 3, 3}, rng);
  const auto b = random_tensor({c}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(retina::conv2d_forward(x, w, b, 1));
}
BENCHMARK(BM_Conv3x3)->Arg(8)->Arg(32);

void BM_IouMatrix(benchmark::State& state) {
  retina::Rng rng(2);
  const auto grid = retina::generate_anchors(retina::AnchorConfig{}, 64, 64);
  std::vector<retina::BBox> gts;
  for (const auto& d : random_dets(3, rng, 1)) gts.push_back(d.box);
  for (auto _ : state) benchmark::DoNotOptimize(retina::iou_matrix(grid.anchors, gts));
}
BENCHMARK(BM_IouMatrix);

void BM_Nms(benchmark::State& state) {
  retina::Rng rng(3);
  const auto dets = random_dets(static_cast<std::size_t>(state.range(0)), rng, 1);
  for (auto _ : state) benchmark::DoNotOptimize(retina::nms(dets, 0.5f, 100));
}
BENCHMARK(BM_Nms)->Arg(100)->Arg(1000);

void BM_CocoMap(benchmark::State& state) {
  retina::Rng rng(4);
  const auto dets = random_dets(2000, rng, 50);
  retina::GroundTruthSet gts;
  for (std::int64_t i = 0; i < 50; ++i) {
    for (const auto& d : random_dets(3, rng, 1)) gts[i].push_back(d.box);
  }
  for (auto _ : state) benchmark::DoNotOptimize(retina::coco_map(dets, gts, retina::EvalConfig{}));
}
BENCHMARK(BM_CocoMap);

void BM_TinyNetStep(benchmark::State& state) {
  const retina::TinyNet net(retina::NetworkConfig{}, {8, 16});
  const auto params = net.initialize(5);
  retina::Rng rng(5);
  const auto image = random_tensor({3, 64, 64}, rng);
  for (auto _ : state) {
    retina::ForwardRecord<float> rec;
    const auto out = net.forward(params, image, &rec);
    benchmark::DoNotOptimize(net.backward(params, rec, out));
  }
}
BENCHMARK(BM_TinyNetStep);

}  // namespace

BENCHMARK_MAIN();
