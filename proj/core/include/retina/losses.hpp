#pragma once

#include <span>
#include <vector>

#include "retina/anchors.hpp"
#include "retina/tensor.hpp"

namespace retina {

struct LossConfig {
  float gamma = 2.f;
  float alpha = 0.25f;
  float smooth_l1_beta = 1.f / 9.f;

  void validate() const;
  bool operator==(const LossConfig&) const = default;
};

/// Loss value and derivative for one scalar element.
struct ElementLoss {
  double loss = 0.0;
  double grad = 0.0;
};

/// -alpha_t (1 - p_t)^gamma ln(p_t) with p = sigmoid(logit), evaluated via
/// log-sigmoid so it stays finite for |logit| well beyond 80.
ElementLoss focal_loss_element(double logit, bool positive, double gamma, double alpha);

ElementLoss smooth_l1_element(double diff, double beta);

double sigmoid(double x);
/// ln(1 + e^x) without overflow.
double softplus(double x);

template <typename T>
struct ElementwiseLoss {
  BasicTensor<T> loss;
  BasicTensor<T> grad;
};

template <typename T>
ElementwiseLoss<T> sigmoid_focal_loss(const BasicTensor<T>& logits, const BasicTensor<T>& targets,
                                      const LossConfig& config);

template <typename T>
ElementwiseLoss<T> smooth_l1(const BasicTensor<T>& pred, const BasicTensor<T>& target, T beta);

template <typename T>
struct DetectionLoss {
  double total = 0.0;
  double classification = 0.0;  // unnormalized sum
  double regression = 0.0;      // unnormalized sum
  double normalizer = 1.0;
  BasicTensor<T> grad_cls;
  BasicTensor<T> grad_box;
};

/// Focal loss over positive and negative anchors plus smooth-L1 over
/// positives, both divided by max(1, num_positive).
///
/// `cls_logits` is [num_anchors, num_classes] and `box_deltas` is
/// [num_anchors, 4], both in AnchorGrid order. `gt_classes` gives the class
/// of each ground truth; when empty every ground truth is class 0.
template <typename T>
DetectionLoss<T> total_detection_loss(const BasicTensor<T>& cls_logits,
                                      const BasicTensor<T>& box_deltas,
                                      const AnchorAssignment& assignment,
                                      const LossConfig& config,
                                      std::span<const int> gt_classes = {});

}  // namespace retina
