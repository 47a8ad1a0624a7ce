#include "retina/losses.hpp"

#include <cmath>
#include <string>

namespace retina {

void LossConfig::validate() const {
  if (!(gamma >= 0.f)) throw InvalidInput("loss: gamma must be >= 0");
  if (!((alpha > 0.f && alpha < 1.f) || alpha == 1.f)) {
    throw InvalidInput("loss: alpha must be in (0, 1) or exactly 1");
  }
  if (!(smooth_l1_beta > 0.f)) throw InvalidInput("loss: smooth_l1_beta must be > 0");
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

ElementLoss focal_loss_element(double logit, bool positive, double gamma, double alpha) {
  // Work in z, the logit signed toward the true class: p_t = sigmoid(z).
  const double z = positive ? logit : -logit;
  const double alpha_t = positive ? alpha : 1.0 - alpha;
  const double q = sigmoid(-z);          // 1 - p_t
  const double nll = softplus(-z);       // -ln p_t
  const double mod = gamma == 0.0 ? 1.0 : std::pow(q, gamma);
  const double loss = alpha_t * mod * nll;
  // d/dz = -alpha_t q^gamma (gamma p_t (-ln p_t) + q)
  const double dz = -alpha_t * mod * (gamma * sigmoid(z) * nll + q);
  return {loss, positive ? dz : -dz};
}

ElementLoss smooth_l1_element(double diff, double beta) {
  const double ad = std::abs(diff);
  if (ad < beta) return {0.5 * diff * diff / beta, diff / beta};
  return {ad - 0.5 * beta, diff > 0.0 ? 1.0 : -1.0};
}

template <typename T>
ElementwiseLoss<T> sigmoid_focal_loss(const BasicTensor<T>& logits, const BasicTensor<T>& targets,
                                      const LossConfig& config) {
  require_same_shape(logits, targets, "sigmoid_focal_loss");
  ElementwiseLoss<T> out{BasicTensor<T>(logits.shape()), BasicTensor<T>(logits.shape())};
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const T t = targets[i];
    if (t != T{0} && t != T{1}) {
      throw InvalidInput("sigmoid_focal_loss: targets must be 0 or 1");
    }
    const auto e = focal_loss_element(static_cast<double>(logits[i]), t == T{1}, config.gamma,
                                      config.alpha);
    out.loss[i] = static_cast<T>(e.loss);
    out.grad[i] = static_cast<T>(e.grad);
  }
  return out;
}

template <typename T>
ElementwiseLoss<T> smooth_l1(const BasicTensor<T>& pred, const BasicTensor<T>& target, T beta) {
  require_same_shape(pred, target, "smooth_l1");
  if (!(beta > T{0})) throw InvalidInput("smooth_l1: beta must be > 0");
  ElementwiseLoss<T> out{BasicTensor<T>(pred.shape()), BasicTensor<T>(pred.shape())};
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto e = smooth_l1_element(static_cast<double>(pred[i]) - static_cast<double>(target[i]),
                                     static_cast<double>(beta));
    out.loss[i] = static_cast<T>(e.loss);
    out.grad[i] = static_cast<T>(e.grad);
  }
  return out;
}

template <typename T>
DetectionLoss<T> total_detection_loss(const BasicTensor<T>& cls_logits,
                                      const BasicTensor<T>& box_deltas,
                                      const AnchorAssignment& assignment,
                                      const LossConfig& config,
                                      std::span<const int> gt_classes) {
  const std::size_t n = assignment.targets.size();
  if (cls_logits.rank() != 2 || cls_logits.dim(0) != n) {
    throw InvalidInput("total_detection_loss: cls_logits must be [" + std::to_string(n) +
                       ", K], got " + shape_to_string(cls_logits.shape()));
  }
  if (box_deltas.rank() != 2 || box_deltas.dim(0) != n || box_deltas.dim(1) != 4) {
    throw InvalidInput("total_detection_loss: box_deltas must be [" + std::to_string(n) +
                       ", 4], got " + shape_to_string(box_deltas.shape()));
  }
  const std::size_t k = cls_logits.dim(1);
  const double gamma = config.gamma;
  const double alpha = config.alpha;
  const double beta = config.smooth_l1_beta;

  DetectionLoss<T> out;
  out.grad_cls = BasicTensor<T>(cls_logits.shape());
  out.grad_box = BasicTensor<T>(box_deltas.shape());
  out.normalizer = std::max<double>(1.0, static_cast<double>(assignment.num_positive));
  const double inv = 1.0 / out.normalizer;

  // Sequential accumulation in anchor order keeps the sums bit-stable.
  for (std::size_t a = 0; a < n; ++a) {
    const auto& target = assignment.targets[a];
    if (target.label == AnchorLabel::kIgnore) continue;
    int cls = -1;
    if (target.label == AnchorLabel::kPositive) {
      const auto g = static_cast<std::size_t>(target.gt_index);
      cls = gt_classes.empty() ? 0 : gt_classes[g];
      if (cls < 0 || static_cast<std::size_t>(cls) >= k) {
        throw InvalidInput("total_detection_loss: ground-truth class out of range");
      }
    }
    for (std::size_t c = 0; c < k; ++c) {
      const auto e = focal_loss_element(static_cast<double>(cls_logits[a * k + c]),
                                        static_cast<int>(c) == cls, gamma, alpha);
      out.classification += e.loss;
      out.grad_cls[a * k + c] = static_cast<T>(e.grad * inv);
    }
    if (target.label != AnchorLabel::kPositive) continue;
    const auto& d = assignment.regression_targets[a];
    const double goal[4] = {d.tx, d.ty, d.tw, d.th};
    for (std::size_t j = 0; j < 4; ++j) {
      const auto e = smooth_l1_element(static_cast<double>(box_deltas[a * 4 + j]) - goal[j], beta);
      out.regression += e.loss;
      out.grad_box[a * 4 + j] = static_cast<T>(e.grad * inv);
    }
  }
  out.total = (out.classification + out.regression) * inv;
  return out;
}

template ElementwiseLoss<float> sigmoid_focal_loss(const Tensor&, const Tensor&, const LossConfig&);
template ElementwiseLoss<double> sigmoid_focal_loss(const BasicTensor<double>&,
                                                    const BasicTensor<double>&, const LossConfig&);
template ElementwiseLoss<float> smooth_l1(const Tensor&, const Tensor&, float);
template ElementwiseLoss<double> smooth_l1(const BasicTensor<double>&, const BasicTensor<double>&,
                                           double);
template DetectionLoss<float> total_detection_loss(const Tensor&, const Tensor&,
                                                   const AnchorAssignment&, const LossConfig&,
                                                   std::span<const int>);
template DetectionLoss<double> total_detection_loss(const BasicTensor<double>&,
                                                    const BasicTensor<double>&,
                                                    const AnchorAssignment&, const LossConfig&,
                                                    std::span<const int>);

}  // namespace retina
