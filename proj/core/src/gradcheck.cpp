#include "retina/gradcheck.hpp"

#include <chrono>
#include <cmath>
#include <functional>

#include <json.hpp>

#include "retina/head_layout.hpp"
#include "retina/layers.hpp"
#include "retina/losses.hpp"
#include "retina/network.hpp"
#include "retina/rng.hpp"

namespace retina {

namespace {

using D = BasicTensor<double>;

constexpr double kStep = 1e-5;
constexpr double kSabotage = 1e-2;

struct SuiteBuilder {
  GradcheckSuite suite;
  bool sabotage = false;
  double floor = 1e-6;

  void check(double analytic, double numeric) {
    if (sabotage) {
      analytic += kSabotage;
      sabotage = false;
    }
    suite.max_rel_error = std::max(suite.max_rel_error, relative_error(analytic, numeric, floor));
    ++suite.checks;
  }

  GradcheckSuite finish() {
    suite.passed = suite.checks > 0 && suite.max_rel_error < suite.tolerance;
    return suite;
  }
};

SuiteBuilder make_suite(const std::string& name, double tol, double floor,
                        const GradcheckOptions& options) {
  SuiteBuilder b;
  b.suite.name = name;
  b.suite.tolerance = tol;
  b.floor = floor;
  b.sabotage = options.sabotage_suite == name;
  return b;
}

D random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  D t(std::move(shape));
  for (auto& v : t.data()) v = scale * rng.normal();
  return t;
}

double dot(const D& a, const D& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// Central difference of f with respect to x[i].
double central_difference(D& x, std::size_t i, const std::function<double()>& f) {
  const double orig = x[i];
  x[i] = orig + kStep;
  const double up = f();
  x[i] = orig - kStep;
  const double down = f();
  x[i] = orig;
  return (up - down) / (2.0 * kStep);
}

GradcheckSuite focal_suite(Rng& rng, const GradcheckOptions& options) {
  auto b = make_suite("focal_loss", 1e-6, 1e-4, options);
  const double gammas[] = {0.0, 1.0, 2.0};
  const double alphas[] = {0.25, 0.5};
  for (int i = 0; i < 100; ++i) {
    const double x = rng.uniform(-8.0, 8.0);
    const bool pos = rng.bernoulli(0.5);
    const double gamma = gammas[rng.uniform_int(0, 2)];
    const double alpha = alphas[rng.uniform_int(0, 1)];
    const double analytic = focal_loss_element(x, pos, gamma, alpha).grad;
    const double numeric = (focal_loss_element(x + kStep, pos, gamma, alpha).loss -
                            focal_loss_element(x - kStep, pos, gamma, alpha).loss) /
                           (2.0 * kStep);
    b.check(analytic, numeric);
  }
  return b.finish();
}

GradcheckSuite smooth_l1_suite(Rng& rng, const GradcheckOptions& options) {
  auto b = make_suite("smooth_l1", 1e-6, 1e-4, options);
  const double beta = 1.0 / 9.0;
  for (int i = 0; i < 100; ++i) {
    double d = rng.uniform(-1.0, 1.0);
    // Stay clear of the branch switch so the difference quotient is smooth.
    while (std::abs(std::abs(d) - beta) < 10 * kStep) d = rng.uniform(-1.0, 1.0);
    const double numeric =
        (smooth_l1_element(d + kStep, beta).loss - smooth_l1_element(d - kStep, beta).loss) /
        (2.0 * kStep);
    b.check(smooth_l1_element(d, beta).grad, numeric);
  }
  return b.finish();
}

GradcheckSuite conv_suite(Rng& rng, const GradcheckOptions& options) {
  auto b = make_suite("conv2d", 1e-4, 1e-6, options);
  struct Case {
    std::size_t cin, cout, h, w, k;
    int stride;
  };
  const Case cases[] = {{2, 3, 5, 6, 3, 1}, {3, 2, 6, 7, 3, 2}, {3, 4, 4, 4, 1, 1}};
  for (const auto& c : cases) {
    D x = random_tensor({c.cin, c.h, c.w}, rng);
    D w = random_tensor({c.cout, c.cin, c.k, c.k}, rng, 0.5);
    D bias = random_tensor({c.cout}, rng, 0.5);
    const D probe_out = conv2d_forward(x, w, bias, c.stride);
    const D r = random_tensor(probe_out.shape(), rng);
    const auto loss = [&] { return dot(conv2d_forward(x, w, bias, c.stride), r); };
    const auto g = conv2d_backward(x, w, c.stride, r);
    for (std::size_t i = 0; i < x.size(); ++i) b.check(g.input[i], central_difference(x, i, loss));
    for (std::size_t i = 0; i < w.size(); ++i) b.check(g.weights[i], central_difference(w, i, loss));
    for (std::size_t i = 0; i < bias.size(); ++i) {
      b.check(g.bias[i], central_difference(bias, i, loss));
    }
  }
  return b.finish();
}

GradcheckSuite relu_suite(Rng& rng, const GradcheckOptions& options) {
  auto b = make_suite("relu", 1e-4, 1e-6, options);
  D x = random_tensor({2, 4, 4}, rng);
  for (auto& v : x.data()) {
    if (std::abs(v) < 0.05) v = v < 0 ? -0.05 : 0.05;
  }
  const D r = random_tensor(x.shape(), rng);
  const auto loss = [&] { return dot(relu(x), r); };
  const D g = relu_backward(x, r);
  for (std::size_t i = 0; i < x.size(); ++i) b.check(g[i], central_difference(x, i, loss));
  return b.finish();
}

GradcheckSuite upsample_suite(Rng& rng, const GradcheckOptions& options) {
  auto b = make_suite("upsample", 1e-4, 1e-6, options);
  D x = random_tensor({2, 3, 4}, rng);
  const D r = random_tensor({2, 6, 8}, rng);
  const auto loss = [&] { return dot(upsample_nearest_x2(x), r); };
  const D g = upsample_nearest_x2_backward(r);
  for (std::size_t i = 0; i < x.size(); ++i) b.check(g[i], central_difference(x, i, loss));
  return b.finish();
}

GradcheckSuite add_suite(Rng& rng, const GradcheckOptions& options) {
  auto b = make_suite("add", 1e-4, 1e-6, options);
  D x = random_tensor({2, 3, 3}, rng);
  D y = random_tensor({2, 3, 3}, rng);
  const D r = random_tensor({2, 3, 3}, rng);
  const auto loss = [&] { return dot(elementwise_add(x, y), r); };
  const auto g = elementwise_add_backward(r);
  for (std::size_t i = 0; i < x.size(); ++i) b.check(g.a[i], central_difference(x, i, loss));
  for (std::size_t i = 0; i < y.size(); ++i) b.check(g.b[i], central_difference(y, i, loss));
  return b.finish();
}

/// 20 random anchors, 2 ground truths, K = 1.
GradcheckSuite detection_loss_suite(const RunConfig& config, Rng& rng,
                                    const GradcheckOptions& options) {
  auto b = make_suite("detection_loss", 1e-4, 1e-6, options);
  AnchorGrid grid;
  for (int i = 0; i < 20; ++i) {
    const double x = rng.uniform(0, 40), y = rng.uniform(0, 40);
    grid.anchors.emplace_back(static_cast<float>(x), static_cast<float>(y),
                              static_cast<float>(x + rng.uniform(6, 24)),
                              static_cast<float>(y + rng.uniform(6, 24)));
  }
  const std::vector<BBox> gts{BBox(5, 5, 20, 25), BBox(22, 18, 40, 44)};
  AnchorConfig ac = config.anchors;
  ac.pos_iou = 0.3f;
  ac.neg_iou = 0.2f;
  const auto assignment = assign_targets(grid, gts, ac);

  D logits = random_tensor({20, 1}, rng, 2.0);
  D deltas = random_tensor({20, 4}, rng, 0.5);
  const double beta = config.loss.smooth_l1_beta;
  for (std::size_t a = 0; a < 20; ++a) {
    const auto& t = assignment.regression_targets[a];
    const double goal[4] = {t.tx, t.ty, t.tw, t.th};
    for (std::size_t j = 0; j < 4; ++j) {
      if (std::abs(std::abs(deltas[a * 4 + j] - goal[j]) - beta) < 10 * kStep) {
        deltas[a * 4 + j] += 0.05;
      }
    }
  }
  const auto loss = [&] { return total_detection_loss(logits, deltas, assignment, config.loss).total; };
  const auto res = total_detection_loss(logits, deltas, assignment, config.loss);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    b.check(res.grad_cls[i], central_difference(logits, i, loss));
  }
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    b.check(res.grad_box[i], central_difference(deltas, i, loss));
  }
  return b.finish();
}

/// Branch decisions of every piecewise op; a probe whose perturbation flips
/// any of them straddles a kink and is skipped.
std::vector<bool> branch_signature(const ForwardRecord<double>& rec, const D& box_flat,
                                   const AnchorAssignment& assignment, double beta) {
  std::vector<bool> sig;
  const auto add = [&](const D& t) {
    for (double v : t.data()) sig.push_back(v > 0.0);
  };
  for (const auto& s : rec.stages) add(s);
  for (const auto& level : rec.cls_hidden) {
    for (const auto& h : level) add(h);
  }
  for (const auto& level : rec.box_hidden) {
    for (const auto& h : level) add(h);
  }
  for (std::size_t a = 0; a < assignment.targets.size(); ++a) {
    if (assignment.targets[a].label != AnchorLabel::kPositive) continue;
    const auto& t = assignment.regression_targets[a];
    const double goal[4] = {t.tx, t.ty, t.tw, t.th};
    for (std::size_t j = 0; j < 4; ++j) {
      sig.push_back(std::abs(box_flat[a * 4 + j] - goal[j]) < beta);
    }
  }
  return sig;
}

GradcheckSuite end_to_end_suite(const RunConfig& config, Rng& rng,
                                const GradcheckOptions& options) {
  auto b = make_suite("end_to_end", 1e-3, 1e-6, options);
  std::vector<int> strides;
  for (const auto& l : config.anchors.levels) strides.push_back(l.stride);
  const TinyNet net(config.network, strides);
  const int side = 16;
  const AnchorGrid grid = generate_anchors(config.anchors, side, side);

  // Fan-in scaled weights keep activations O(1) so the difference
  // quotients resolve every layer.
  NamedTensors<double> params;
  params.names = net.parameter_names();
  for (const auto& shape : net.parameter_shapes()) {
    const double fan_in = shape.size() == 4 ? static_cast<double>(shape[1] * shape[2] * shape[3]) : 1.0;
    params.tensors.push_back(random_tensor(shape, rng, shape.size() == 4 ? std::sqrt(2.0 / fan_in) : 0.1));
  }
  const D image = random_tensor({static_cast<std::size_t>(config.network.input_channels), side, side}, rng, 0.5);
  const std::vector<BBox> gts{BBox(2, 1, 9, 14), BBox(8, 4, 15, 12)};
  const auto assignment = assign_targets(grid, gts, config.anchors);
  const auto k = static_cast<std::size_t>(config.network.num_classes);
  const double beta = config.loss.smooth_l1_beta;

  struct Eval {
    double loss;
    std::vector<bool> signature;
  };
  const auto evaluate = [&](ForwardRecord<double>* keep, DetectionLoss<double>* loss_out) {
    ForwardRecord<double> rec;
    const auto out = net.forward(params, image, &rec);
    const D box_flat = flatten_head(out.box, grid, 4);
    auto loss = total_detection_loss(flatten_head(out.cls, grid, k), box_flat, assignment, config.loss);
    Eval e{loss.total, branch_signature(rec, box_flat, assignment, beta)};
    if (keep) *keep = std::move(rec);
    if (loss_out) *loss_out = std::move(loss);
    return e;
  };

  ForwardRecord<double> rec;
  DetectionLoss<double> loss;
  const Eval base = evaluate(&rec, &loss);
  const HeadOutputs<double> head_grads{unflatten_head(loss.grad_cls, grid, k),
                                       unflatten_head(loss.grad_box, grid, 4)};
  const auto grads = net.backward(params, rec, head_grads);

  std::size_t total = params.parameter_count();
  std::size_t probes = 0;
  std::size_t attempts = 0;
  while (probes < options.end_to_end_params && attempts < 20 * options.end_to_end_params) {
    ++attempts;
    auto flat = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(total) - 1));
    std::size_t p = 0;
    while (flat >= params.tensors[p].size()) flat -= params.tensors[p++].size();
    double& value = params.tensors[p][flat];
    const double orig = value;
    value = orig + kStep;
    const Eval up = evaluate(nullptr, nullptr);
    value = orig - kStep;
    const Eval down = evaluate(nullptr, nullptr);
    value = orig;
    if (up.signature != base.signature || down.signature != base.signature) continue;
    b.check(grads.tensors[p][flat], (up.loss - down.loss) / (2.0 * kStep));
    ++probes;
  }
  if (probes < options.end_to_end_params) b.suite.checks = 0;  // forces failure
  return b.finish();
}

}  // namespace

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

bool GradcheckReport::passed() const {
  if (suites.empty()) return false;
  for (const auto& s : suites) {
    if (!s.passed) return false;
  }
  return true;
}

std::string GradcheckReport::to_json() const {
  nlohmann::ordered_json j;
  j["passed"] = passed();
  j["seconds"] = seconds;
  j["suites"] = nlohmann::ordered_json::array();
  for (const auto& s : suites) {
    j["suites"].push_back({{"name", s.name},
                           {"max_rel_error", s.max_rel_error},
                           {"tolerance", s.tolerance},
                           {"checks", s.checks},
                           {"passed", s.passed}});
  }
  return j.dump(2);
}

GradcheckReport run_gradcheck(const RunConfig& config, const GradcheckOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(derive_seed(config.seed, 0x6c9a));
  GradcheckReport r;
  r.suites.push_back(focal_suite(rng, options));
  r.suites.push_back(smooth_l1_suite(rng, options));
  r.suites.push_back(conv_suite(rng, options));
  r.suites.push_back(relu_suite(rng, options));
  r.suites.push_back(upsample_suite(rng, options));
  r.suites.push_back(add_suite(rng, options));
  r.suites.push_back(detection_loss_suite(config, rng, options));
  r.suites.push_back(end_to_end_suite(config, rng, options));
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace retina
