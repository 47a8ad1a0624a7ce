#include "retina/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>

#include <json.hpp>

#include "retina/checkpoint.hpp"
#include "retina/detections_io.hpp"
#include "retina/errors.hpp"
#include "retina/gradcheck.hpp"
#include "retina/image_io.hpp"
#include "retina/manifest.hpp"
#include "retina/parallel.hpp"
#include "retina/preprocess.hpp"
#include "retina/run_config.hpp"
#include "retina/synth.hpp"
#include "retina/trainer.hpp"
#include "json_util.hpp"

namespace retina {

namespace {

using ordered_json = nlohmann::ordered_json;

void require(const std::filesystem::path& p, const char* flag) {
  if (p.empty()) throw InvalidInput(std::string("missing required option ") + flag);
}

RunConfig load_config(const CliOptions& o) {
  require(o.config, "--config");
  RunConfig c = load_run_config(o.config);
  if (o.seed) {
    c.seed = *o.seed;
    c.synth.seed = *o.seed;
  }
  if (o.num_images) c.synth.num_images = *o.num_images;
  c.validate();
  return c;
}

int threads_of(const CliOptions& o) { return o.threads > 0 ? o.threads : worker_threads(); }

void make_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory: " + dir.string());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  f << text;
  if (!f) throw IoError("write failed: " + path.string());
}

std::vector<PreparedSample> load_split(const std::filesystem::path& manifest,
                                       const RunConfig& config, int threads) {
  if (!std::filesystem::exists(manifest)) throw IoError("missing manifest: " + manifest.string());
  return prepare_dataset(read_manifest(manifest), manifest, config, threads);
}

Checkpoint load_checked_checkpoint(const CliOptions& o, const TinyNet& net) {
  require(o.checkpoint, "--checkpoint");
  Checkpoint ck = load_checkpoint(o.checkpoint);
  net.check_parameters(ck.params);
  return ck;
}

ordered_json config_json(const RunConfig& c) { return ordered_json::parse(run_config_to_json(c)); }

}  // namespace

void draw_boxes(Tensor& image, std::span<const Detection> dets) {
  const int h = static_cast<int>(image.dim(1));
  const int w = static_cast<int>(image.dim(2));
  if (w == 0 || h == 0) return;
  const float color[3] = {255.f, 0.f, 0.f};
  const auto put = [&](int x, int y) {
    for (std::size_t c = 0; c < 3; ++c) {
      image.at(c, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = color[c];
    }
  };
  for (const auto& d : dets) {
    const int x1 = std::clamp(static_cast<int>(std::floor(d.box.x1())), 0, w - 1);
    const int y1 = std::clamp(static_cast<int>(std::floor(d.box.y1())), 0, h - 1);
    const int x2 = std::clamp(static_cast<int>(std::ceil(d.box.x2())) - 1, x1, w - 1);
    const int y2 = std::clamp(static_cast<int>(std::ceil(d.box.y2())) - 1, y1, h - 1);
    for (int x = x1; x <= x2; ++x) {
      put(x, y1);
      put(x, y2);
    }
    for (int y = y1; y <= y2; ++y) {
      put(x1, y);
      put(x2, y);
    }
  }
}

int cmd_synth(const CliOptions& o, std::ostream& out) {
  const RunConfig config = load_config(o);
  make_dir(o.out);
  const auto records = synth_generate(config.synth, o.out);
  out << "wrote " << records.size() << " images to " << o.out.string() << '\n';
  return 0;
}

int cmd_train(const CliOptions& o, std::ostream& out) {
  const RunConfig config = load_config(o);
  require(o.manifest, "--manifest");
  const int threads = threads_of(o);
  const auto train_set = load_split(o.manifest, config, threads);
  std::vector<PreparedSample> val_set;
  if (!o.val_manifest.empty()) val_set = load_split(o.val_manifest, config, threads);

  TrainOptions opts;
  std::filesystem::path ck = o.checkpoint.empty()
                                 ? std::filesystem::path(config.training.checkpoint_path)
                                 : o.checkpoint;
  if (ck.is_relative() && o.checkpoint.empty()) ck = o.out / ck;
  opts.checkpoint_path = ck;
  opts.metrics_path = o.out / "metrics.jsonl";
  opts.resume = o.resume;
  opts.threads = threads;

  make_dir(o.out);
  if (ck.has_parent_path()) make_dir(ck.parent_path());
  const auto result = train(config, train_set, val_set, opts);

  ordered_json summary;
  summary["checkpoint"] = ck.string();
  summary["metrics"] = opts.metrics_path.string();
  summary["epochs"] = result.metrics.size();
  if (!result.metrics.empty()) {
    summary["last"] = ordered_json::parse(format_metrics_line(result.metrics.back()));
  }
  out << summary.dump(2) << '\n';
  return 0;
}

int cmd_eval(const CliOptions& o, std::ostream& out) {
  const RunConfig config = load_config(o);
  require(o.manifest, "--manifest");
  const TinyNet net = make_network(config);
  const int threads = threads_of(o);
  const auto samples = load_split(o.manifest, config, threads);

  DatasetEvaluation ev;
  if (o.replay_gt) {
    const auto gts = ground_truth_of(samples);
    for (const auto& [id, boxes] : gts) {
      for (const auto& b : boxes) ev.detections.push_back({b, 1.f, 0, id});
    }
    ev.report = coco_map(ev.detections, gts, config.eval);
  } else {
    const Checkpoint ck = load_checked_checkpoint(o, net);
    ev = evaluate_dataset(net, ck.params, config, samples, threads);
  }

  const auto& r = ev.report;
  ordered_json j;
  j["config"] = config_json(config);
  j["iou_thresholds"] = ordered_json::array();
  for (float t : r.iou_thresholds) j["iou_thresholds"].push_back(detail::json_float(t));
  j["ap"] = r.ap;
  j["map"] = r.map;
  j["ap50"] = r.ap50 ? ordered_json(*r.ap50) : ordered_json(nullptr);
  j["ap75"] = r.ap75 ? ordered_json(*r.ap75) : ordered_json(nullptr);
  j["num_images"] = r.num_images;
  j["num_detections"] = r.num_detections;
  j["num_ground_truth"] = r.num_ground_truth;
  j["undefined"] = r.undefined;
  if (samples.empty()) {
    j["warning"] = "manifest has no images; mAP reported as 0";
  } else if (r.undefined) {
    j["warning"] = "manifest has no ground truth boxes; AP is undefined and reported as 0";
  }
  j["replay_gt"] = o.replay_gt;
  j["detections"] = "detections.jsonl";

  make_dir(o.out);
  write_detections(ev.detections, o.out / "detections.jsonl");
  const std::string text = j.dump(2) + "\n";
  write_text(o.out / "report.json", text);
  out << text;
  return 0;
}

int cmd_detect(const CliOptions& o, std::ostream& out) {
  const RunConfig config = load_config(o);
  require(o.image, "--image");
  const TinyNet net = make_network(config);
  const Checkpoint ck = load_checked_checkpoint(o, net);
  const Tensor raw = load_ppm(o.image);

  PreparedSample s;
  s.original_width = static_cast<int>(raw.dim(2));
  s.original_height = static_cast<int>(raw.dim(1));
  s.input = preprocess(raw, config.training.input_width, config.training.input_height);
  const AnchorGrid grid = generate_anchors(config.anchors, config.training.input_width,
                                           config.training.input_height);
  auto dets = detect(net, ck.params, grid, config, s, 0);
  // Boxes were clipped at network resolution; clip again after rescaling.
  for (auto& d : dets) {
    d.box = clip_to_image(d.box, static_cast<float>(s.original_width),
                          static_cast<float>(s.original_height));
  }

  make_dir(o.out);
  write_detections(dets, o.out / "detections.jsonl");
  if (o.annotate) {
    Tensor annotated = raw;
    draw_boxes(annotated, dets);
    save_ppm(annotated, o.out / "annotated.ppm");
  }
  out << format_detections(dets);
  return 0;
}

int cmd_gradcheck(const CliOptions& o, std::ostream& out, std::ostream& err) {
  const RunConfig config = load_config(o);
  GradcheckOptions g;
  g.sabotage_suite = o.sabotage;
  const auto report = run_gradcheck(config, g);
  const std::string text = report.to_json() + "\n";
  if (!o.out.empty() && o.out != ".") {
    make_dir(o.out);
    write_text(o.out / "gradcheck.json", text);
  }
  out << text;
  if (report.passed()) return 0;
  for (const auto& s : report.suites) {
    if (!s.passed) {
      err << "gradcheck failed: " << s.name << " max relative error " << s.max_rel_error
          << " (tolerance " << s.tolerance << ")\n";
    }
  }
  return static_cast<int>(ExitCode::kRuntime);
}

int run_command(const CliOptions& o, std::ostream& out, std::ostream& err) {
  try {
    if (o.command == "synth") return cmd_synth(o, out);
    if (o.command == "train") return cmd_train(o, out);
    if (o.command == "eval") return cmd_eval(o, out);
    if (o.command == "detect") return cmd_detect(o, out);
    if (o.command == "gradcheck") return cmd_gradcheck(o, out, err);
    err << "error: unknown command '" << o.command << "'\n";
    return static_cast<int>(ExitCode::kValidation);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(e.exit_code());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kIo);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kRuntime);
  }
}

}  // namespace retina
