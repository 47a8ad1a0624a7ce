#include "retina/trainer.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "retina/augment.hpp"
#include "retina/head_layout.hpp"
#include "retina/image_io.hpp"
#include "retina/losses.hpp"
#include "retina/optimizer.hpp"
#include "retina/parallel.hpp"
#include "retina/preprocess.hpp"
#include "retina/rng.hpp"

namespace retina {

namespace {

constexpr std::uint64_t kInitStream = 11;
constexpr std::uint64_t kShuffleStream = 12;
constexpr std::uint64_t kAugmentStream = 13;

}  // namespace

PreparedSample prepare_sample(const SampleRecord& record, const std::filesystem::path& manifest,
                              const RunConfig& config) {
  record.validate();
  const auto path = resolve_image_path(manifest, record.image_path);
  if (!std::filesystem::exists(path)) throw IoError("missing image: " + path.string());
  const Tensor raw = load_ppm(path);
  PreparedSample s;
  s.original_width = static_cast<int>(raw.dim(2));
  s.original_height = static_cast<int>(raw.dim(1));
  const int w = config.training.input_width;
  const int h = config.training.input_height;
  s.input = preprocess(raw, w, h);
  s.boxes = scale_boxes(record.boxes, s.original_width, s.original_height, w, h);
  s.labels = record.labels;
  s.original_boxes = record.boxes;
  return s;
}

std::vector<PreparedSample> prepare_dataset(const std::vector<SampleRecord>& records,
                                            const std::filesystem::path& manifest,
                                            const RunConfig& config, int threads) {
  std::vector<PreparedSample> out(records.size());
  parallel_for(records.size(), threads,
               [&](std::size_t i) { out[i] = prepare_sample(records[i], manifest, config); });
  return out;
}

std::vector<int> anchor_strides(const AnchorConfig& config) {
  std::vector<int> s;
  for (const auto& l : config.levels) s.push_back(l.stride);
  return s;
}

TinyNet make_network(const RunConfig& config) {
  return TinyNet(config.network, anchor_strides(config.anchors));
}

std::vector<Detection> detect(const TinyNet& net, const Parameters& params,
                              const AnchorGrid& grid, const RunConfig& config,
                              const PreparedSample& sample, std::int64_t image_id) {
  const auto out = net.forward(params, sample.input);
  const int w = config.training.input_width;
  const int h = config.training.input_height;
  auto dets = decode_detections(out.cls, out.box, grid, config.eval, w, h, image_id);
  if (sample.original_width != w || sample.original_height != h) {
    const double sx = static_cast<double>(sample.original_width) / w;
    const double sy = static_cast<double>(sample.original_height) / h;
    for (auto& d : dets) {
      d.box = BBox(static_cast<float>(d.box.x1() * sx), static_cast<float>(d.box.y1() * sy),
                   static_cast<float>(d.box.x2() * sx), static_cast<float>(d.box.y2() * sy));
    }
  }
  return dets;
}

GroundTruthSet ground_truth_of(const std::vector<PreparedSample>& samples) {
  GroundTruthSet gts;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    gts[static_cast<std::int64_t>(i)] = samples[i].original_boxes;
  }
  return gts;
}

DatasetEvaluation evaluate_dataset(const TinyNet& net, const Parameters& params,
                                   const RunConfig& config,
                                   const std::vector<PreparedSample>& samples, int threads) {
  const AnchorGrid grid = generate_anchors(config.anchors, config.training.input_width,
                                           config.training.input_height);
  std::vector<std::vector<Detection>> per_image(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t i) {
    per_image[i] = detect(net, params, grid, config, samples[i], static_cast<std::int64_t>(i));
  });
  DatasetEvaluation ev;
  for (auto& d : per_image) ev.detections.insert(ev.detections.end(), d.begin(), d.end());
  ev.report = coco_map(ev.detections, ground_truth_of(samples), config.eval);
  return ev;
}

SampleGradient sample_gradient(const TinyNet& net, const Parameters& params,
                               const AnchorGrid& grid, const RunConfig& config,
                               const Tensor& input, const std::vector<BBox>& boxes,
                               const std::vector<int>& labels) {
  ForwardRecord<float> record;
  const auto out = net.forward(params, input, &record);
  const auto assignment = assign_targets(grid, boxes, config.anchors);
  const std::size_t k = static_cast<std::size_t>(config.network.num_classes);
  const auto loss = total_detection_loss(flatten_head(out.cls, grid, k),
                                         flatten_head(out.box, grid, 4), assignment,
                                         config.loss, labels);
  HeadOutputs<float> grads{unflatten_head(loss.grad_cls, grid, k),
                           unflatten_head(loss.grad_box, grid, 4)};
  return {loss.total, net.backward(params, record, grads)};
}

std::string format_metrics_line(const EpochMetrics& m) {
  nlohmann::ordered_json j;
  j["epoch"] = m.epoch;
  j["train_loss"] = m.train_loss;
  if (m.val_map) j["val_map"] = *m.val_map;
  if (m.val_ap50) j["val_ap50"] = *m.val_ap50;
  return j.dump();
}

TrainResult train(const RunConfig& config, const std::vector<PreparedSample>& train_set,
                  const std::vector<PreparedSample>& val_set, const TrainOptions& options) {
  config.validate();
  const TinyNet net = make_network(config);
  const AnchorGrid grid = generate_anchors(config.anchors, config.training.input_width,
                                           config.training.input_height);
  const std::string config_json = run_config_to_json(config);
  const auto partial = std::filesystem::path(options.checkpoint_path.string() + ".partial");

  TrainResult result;
  Checkpoint& ck = result.checkpoint;
  const std::size_t n = train_set.size();
  const auto batch = static_cast<std::size_t>(config.training.batch_size);
  const std::size_t batches_per_epoch = (n + batch - 1) / batch;

  int start_epoch = 0;
  std::filesystem::path resume_from;
  if (options.resume) {
    // An interrupted run leaves only the partial file behind.
    if (std::filesystem::exists(options.checkpoint_path)) {
      resume_from = options.checkpoint_path;
    } else if (std::filesystem::exists(partial)) {
      resume_from = partial;
    }
  }
  if (!resume_from.empty()) {
    ck = load_checkpoint(resume_from);
    net.check_parameters(ck.params);
    if (batches_per_epoch > 0) {
      start_epoch = static_cast<int>(ck.adam.step / batches_per_epoch);
    }
  } else {
    ck.params = net.initialize(derive_seed(config.seed, kInitStream));
    ck.adam = AdamState::zeros_like(ck.params);
  }
  ck.config_json = config_json;

  std::ofstream metrics;
  if (!options.metrics_path.empty()) {
    // Keep the lines of epochs the checkpoint already covers.
    std::string kept;
    if (start_epoch > 0) {
      std::ifstream old(options.metrics_path);
      std::string line;
      for (int i = 0; i < start_epoch && std::getline(old, line); ++i) kept += line + '\n';
    }
    metrics.open(options.metrics_path, std::ios::trunc);
    if (!metrics) throw IoError("cannot open metrics file: " + options.metrics_path.string());
    metrics << kept;
  }

  const AdamConfig adam = config.adam();
  for (int epoch = start_epoch; epoch < config.training.epochs; ++epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle(derive_seed(config.seed, kShuffleStream, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = n; i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle.uniform_int(0, i - 1))]);
    }

    double loss_sum = 0.0;
    for (std::size_t b = 0; b < batches_per_epoch; ++b) {
      const std::size_t begin = b * batch;
      const std::size_t count = std::min(batch, n - begin);
      std::vector<SampleGradient> slots(count);
      parallel_for(count, options.threads, [&](std::size_t j) {
        const std::size_t idx = order[begin + j];
        const auto& s = train_set[idx];
        if (config.training.augment) {
          Rng rng(derive_seed(config.seed, kAugmentStream,
                              static_cast<std::uint64_t>(epoch) * 1'000'003ULL + idx));
          const auto aug = augment(s.input, s.boxes, config.augment, rng);
          std::vector<int> labels;
          for (std::size_t k : aug.kept) labels.push_back(s.labels[k]);
          slots[j] = sample_gradient(net, ck.params, grid, config, aug.image, aug.boxes, labels);
        } else {
          slots[j] = sample_gradient(net, ck.params, grid, config, s.input, s.boxes, s.labels);
        }
      });

      Parameters grads = std::move(slots[0].grads);
      double batch_loss = slots[0].loss;
      for (std::size_t j = 1; j < count; ++j) {
        batch_loss += slots[j].loss;
        for (std::size_t p = 0; p < grads.size(); ++p) {
          auto dst = grads.tensors[p].data();
          auto src = slots[j].grads.tensors[p].data();
          for (std::size_t e = 0; e < dst.size(); ++e) dst[e] += src[e];
        }
      }
      if (!std::isfinite(batch_loss)) {
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch + 1) +
                           ", batch " + std::to_string(b + 1));
      }
      const float inv = 1.f / static_cast<float>(count);
      for (auto& t : grads.tensors) {
        for (auto& v : t.data()) v *= inv;
      }
      try {
        adam_step(ck.params, grads, ck.adam, adam);
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " (epoch " + std::to_string(epoch + 1) +
                           ", batch " + std::to_string(b + 1) + ")");
      }
      loss_sum += batch_loss;
    }

    EpochMetrics m;
    m.epoch = epoch + 1;
    m.train_loss = n > 0 ? loss_sum / static_cast<double>(n) : 0.0;
    const bool scheduled =
        (epoch + 1) % config.training.eval_every == 0 || epoch + 1 == config.training.epochs;
    if (scheduled) {
      if (!val_set.empty()) {
        const auto ev = evaluate_dataset(net, ck.params, config, val_set, options.threads);
        m.val_map = ev.report.map;
        m.val_ap50 = ev.report.ap50;
      }
      save_checkpoint(ck, partial);
    }
    if (metrics.is_open()) {
      metrics << format_metrics_line(m) << '\n';
      metrics.flush();
    }
    result.metrics.push_back(m);
  }

  save_checkpoint(ck, partial);
  std::error_code ec;
  std::filesystem::rename(partial, options.checkpoint_path, ec);
  if (ec) throw IoError("cannot move checkpoint into place: " + options.checkpoint_path.string());
  return result;
}

}  // namespace retina
