#include "retina/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "retina/errors.hpp"
#include "json_util.hpp"

namespace retina {

using nlohmann::ordered_json;

void RunConfig::validate() const {
  anchors.validate();
  loss.validate();
  network.validate();
  augment.validate();
  synth.validate();
  eval.validate();
  if (!(training.lr > 0.f)) throw InvalidInput("training: lr must be positive");
  if (training.batch_size <= 0) throw InvalidInput("training: batch_size must be positive");
  if (training.epochs < 0) throw InvalidInput("training: epochs must be >= 0");
  if (training.eval_every <= 0) throw InvalidInput("training: eval_every must be positive");
  if (training.input_width <= 0 || training.input_height <= 0) {
    throw InvalidInput("training: input size must be positive");
  }
  const int max_stride = anchors.max_stride();
  if (training.input_width % max_stride || training.input_height % max_stride) {
    throw InvalidInput("config: input size " + std::to_string(training.input_width) + "x" +
                       std::to_string(training.input_height) +
                       " is not divisible by the largest anchor stride " +
                       std::to_string(max_stride));
  }
  if (static_cast<std::size_t>(network.num_anchors_per_cell) != anchors.anchors_per_cell()) {
    throw InvalidInput("config: network.num_anchors_per_cell (" +
                       std::to_string(network.num_anchors_per_cell) +
                       ") must equal |scales| x |ratios| (" +
                       std::to_string(anchors.anchors_per_cell()) + ")");
  }
  std::vector<int> strides;
  for (const auto& l : anchors.levels) strides.push_back(l.stride);
  TinyNet probe(network, strides);  // throws on stride/stem mismatch
}

AdamConfig RunConfig::adam() const {
  AdamConfig a;
  a.lr = training.lr;
  return a;
}

namespace {

/// Reads keys from one JSON object, tracking which were consumed.
class Section {
 public:
  Section(const ordered_json& parent, const char* name) : name_(name) {
    if (parent.contains(name)) {
      obj_ = &parent.at(name);
      if (!obj_->is_object()) throw InvalidInput(std::string("config: '") + name + "' must be an object");
    }
  }

  template <typename U>
  void get(const char* key, U& out) {
    seen_.insert(key);
    if (!obj_ || !obj_->contains(key)) return;
    try {
      out = obj_->at(key).get<U>();
    } catch (const ordered_json::exception& e) {
      throw InvalidInput("config: " + name_ + "." + key + ": " + e.what());
    }
  }

  const ordered_json* raw(const char* key) {
    seen_.insert(key);
    if (!obj_ || !obj_->contains(key)) return nullptr;
    return &obj_->at(key);
  }

  void finish() const {
    if (!obj_) return;
    for (const auto& [key, value] : obj_->items()) {
      if (!seen_.contains(key)) throw InvalidInput("config: unknown key '" + name_ + "." + key + "'");
    }
  }

 private:
  std::string name_;
  const ordered_json* obj_ = nullptr;
  std::set<std::string> seen_;
};

const char* background_name(Background b) { return b == Background::kFlat ? "flat" : "gradient"; }
const char* init_name(WeightInit w) {
  return w == WeightInit::kGaussian ? "gaussian" : "he_backbone";
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  ordered_json root;
  try {
    root = ordered_json::parse(json_text);
  } catch (const ordered_json::exception& e) {
    throw InvalidInput(std::string("config: invalid JSON: ") + e.what());
  }
  if (!root.is_object()) throw InvalidInput("config: top level must be an object");
  static const std::set<std::string> kSections{"seed",    "anchors", "loss", "network",
                                               "augment", "synth",   "eval", "training"};
  for (const auto& [key, value] : root.items()) {
    if (!kSections.contains(key)) throw InvalidInput("config: unknown section '" + key + "'");
  }

  RunConfig c;
  if (root.contains("seed")) c.seed = root.at("seed").get<std::uint64_t>();

  {
    Section s(root, "anchors");
    if (const auto* levels = s.raw("levels")) {
      c.anchors.levels.clear();
      for (const auto& l : *levels) {
        c.anchors.levels.push_back({l.at("stride").get<int>(), l.at("base_size").get<float>()});
      }
    }
    s.get("scales", c.anchors.scales);
    s.get("ratios", c.anchors.ratios);
    s.get("pos_iou", c.anchors.pos_iou);
    s.get("neg_iou", c.anchors.neg_iou);
    s.get("force_match", c.anchors.force_match);
    s.finish();
  }
  {
    Section s(root, "loss");
    s.get("gamma", c.loss.gamma);
    s.get("alpha", c.loss.alpha);
    s.get("smooth_l1_beta", c.loss.smooth_l1_beta);
    s.finish();
  }
  {
    Section s(root, "network");
    s.get("input_channels", c.network.input_channels);
    s.get("stem_channels", c.network.stem_channels);
    s.get("fpn_channels", c.network.fpn_channels);
    s.get("head_depth", c.network.head_depth);
    s.get("num_anchors_per_cell", c.network.num_anchors_per_cell);
    s.get("num_classes", c.network.num_classes);
    s.get("prior_prob", c.network.prior_prob);
    s.get("init_std", c.network.init_std);
    if (const auto* init = s.raw("init")) {
      const auto v = init->get<std::string>();
      if (v == "gaussian") {
        c.network.init = WeightInit::kGaussian;
      } else if (v == "he_backbone") {
        c.network.init = WeightInit::kHeBackbone;
      } else {
        throw InvalidInput("config: network.init must be 'gaussian' or 'he_backbone'");
      }
    }
    s.finish();
  }
  {
    Section s(root, "augment");
    s.get("translate_frac", c.augment.translate_frac);
    s.get("max_rot_deg", c.augment.max_rot_deg);
    s.get("scale_min", c.augment.scale_min);
    s.get("scale_max", c.augment.scale_max);
    s.get("hflip_prob", c.augment.hflip_prob);
    s.get("min_box_area_px", c.augment.min_box_area_px);
    s.get("min_visible_frac", c.augment.min_visible_frac);
    s.finish();
  }
  {
    Section s(root, "synth");
    s.get("image_width", c.synth.image_width);
    s.get("image_height", c.synth.image_height);
    s.get("num_images", c.synth.num_images);
    s.get("min_pedestrians", c.synth.min_pedestrians);
    s.get("max_pedestrians", c.synth.max_pedestrians);
    s.get("min_aspect", c.synth.min_aspect);
    s.get("max_aspect", c.synth.max_aspect);
    s.get("min_height_px", c.synth.min_height_px);
    s.get("max_height_px", c.synth.max_height_px);
    s.get("noise_std", c.synth.noise_std);
    s.get("seed", c.synth.seed);
    if (const auto* bg = s.raw("background")) {
      const auto v = bg->get<std::string>();
      if (v == "flat") {
        c.synth.background = Background::kFlat;
      } else if (v == "gradient") {
        c.synth.background = Background::kGradient;
      } else {
        throw InvalidInput("config: synth.background must be 'flat' or 'gradient'");
      }
    }
    s.finish();
  }
  {
    Section s(root, "eval");
    s.get("iou_thresholds", c.eval.iou_thresholds);
    s.get("score_threshold", c.eval.score_threshold);
    s.get("pre_nms_topk", c.eval.pre_nms_topk);
    s.get("nms_iou", c.eval.nms_iou);
    s.get("max_detections_per_image", c.eval.max_detections_per_image);
    s.finish();
  }
  {
    Section s(root, "training");
    s.get("lr", c.training.lr);
    s.get("batch_size", c.training.batch_size);
    s.get("epochs", c.training.epochs);
    s.get("eval_every", c.training.eval_every);
    s.get("input_width", c.training.input_width);
    s.get("input_height", c.training.input_height);
    s.get("augment", c.training.augment);
    s.get("checkpoint_path", c.training.checkpoint_path);
    s.finish();
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string run_config_to_json(const RunConfig& c, int indent) {
  ordered_json levels = ordered_json::array();
  for (const auto& l : c.anchors.levels) {
    levels.push_back({{"stride", l.stride}, {"base_size", detail::json_float(l.base_size)}});
  }
  ordered_json root;
  root["seed"] = c.seed;
  root["anchors"] = {{"levels", levels},
                     {"scales", detail::json_floats(c.anchors.scales)},
                     {"ratios", detail::json_floats(c.anchors.ratios)},
                     {"pos_iou", detail::json_float(c.anchors.pos_iou)},
                     {"neg_iou", detail::json_float(c.anchors.neg_iou)},
                     {"force_match", c.anchors.force_match}};
  root["loss"] = {{"gamma", detail::json_float(c.loss.gamma)},
                  {"alpha", detail::json_float(c.loss.alpha)},
                  {"smooth_l1_beta", detail::json_float(c.loss.smooth_l1_beta)}};
  root["network"] = {{"input_channels", c.network.input_channels},
                     {"stem_channels", c.network.stem_channels},
                     {"fpn_channels", c.network.fpn_channels},
                     {"head_depth", c.network.head_depth},
                     {"num_anchors_per_cell", c.network.num_anchors_per_cell},
                     {"num_classes", c.network.num_classes},
                     {"prior_prob", detail::json_float(c.network.prior_prob)},
                     {"init", init_name(c.network.init)},
                     {"init_std", detail::json_float(c.network.init_std)}};
  root["augment"] = {{"translate_frac", detail::json_float(c.augment.translate_frac)},
                     {"max_rot_deg", detail::json_float(c.augment.max_rot_deg)},
                     {"scale_min", detail::json_float(c.augment.scale_min)},
                     {"scale_max", detail::json_float(c.augment.scale_max)},
                     {"hflip_prob", detail::json_float(c.augment.hflip_prob)},
                     {"min_box_area_px", detail::json_float(c.augment.min_box_area_px)},
                     {"min_visible_frac", detail::json_float(c.augment.min_visible_frac)}};
  root["synth"] = {{"image_width", c.synth.image_width},
                   {"image_height", c.synth.image_height},
                   {"num_images", c.synth.num_images},
                   {"min_pedestrians", c.synth.min_pedestrians},
                   {"max_pedestrians", c.synth.max_pedestrians},
                   {"min_aspect", detail::json_float(c.synth.min_aspect)},
                   {"max_aspect", detail::json_float(c.synth.max_aspect)},
                   {"min_height_px", detail::json_float(c.synth.min_height_px)},
                   {"max_height_px", detail::json_float(c.synth.max_height_px)},
                   {"noise_std", detail::json_float(c.synth.noise_std)},
                   {"background", background_name(c.synth.background)},
                   {"seed", c.synth.seed}};
  root["eval"] = {{"iou_thresholds", detail::json_floats(c.eval.iou_thresholds)},
                  {"score_threshold", detail::json_float(c.eval.score_threshold)},
                  {"pre_nms_topk", c.eval.pre_nms_topk},
                  {"nms_iou", detail::json_float(c.eval.nms_iou)},
                  {"max_detections_per_image", c.eval.max_detections_per_image}};
  root["training"] = {{"lr", detail::json_float(c.training.lr)},
                      {"batch_size", c.training.batch_size},
                      {"epochs", c.training.epochs},
                      {"eval_every", c.training.eval_every},
                      {"input_width", c.training.input_width},
                      {"input_height", c.training.input_height},
                      {"augment", c.training.augment},
                      {"checkpoint_path", c.training.checkpoint_path}};
  return root.dump(indent);
}

}  // namespace retina
