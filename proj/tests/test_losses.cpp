#include <cmath>
#include <functional>

#include <gtest/gtest.h>

#include "retina/errors.hpp"
#include "retina/losses.hpp"
#include "support/oracles.hpp"

using retina::AnchorAssignment;
using retina::AnchorLabel;
using retina::LossConfig;
using D = retina::BasicTensor<double>;

namespace {

// -alpha_t * ln(p_t), written from the plain definition.
double weighted_bce(double logit, bool positive, double alpha) {
  const double z = positive ? logit : -logit;
  const double alpha_t = positive ? alpha : 1.0 - alpha;
  return alpha_t * std::log(1.0 + std::exp(-z));
}

double fd(const std::function<double(double)>& f, double x, double h = 1e-5) {
  return (f(x + h) - f(x - h)) / (2 * h);
}

AnchorAssignment make_assignment(const std::vector<AnchorLabel>& labels) {
  AnchorAssignment a;
  for (auto l : labels) {
    retina::AnchorTarget t;
    t.label = l;
    if (l == AnchorLabel::kPositive) {
      t.gt_index = 0;
      ++a.num_positive;
    }
    a.targets.push_back(t);
  }
  a.regression_targets.resize(labels.size());
  return a;
}

}  // namespace

TEST(LossConfig, Validation) {
  LossConfig c;
  EXPECT_NO_THROW(c.validate());
  c.gamma = -1;
  EXPECT_THROW(c.validate(), retina::InvalidInput);
  c = {};
  c.alpha = 0;
  EXPECT_THROW(c.validate(), retina::InvalidInput);
  c.alpha = 1;
  EXPECT_NO_THROW(c.validate());
  c.alpha = 1.2f;
  EXPECT_THROW(c.validate(), retina::InvalidInput);
  c = {};
  c.smooth_l1_beta = 0;
  EXPECT_THROW(c.validate(), retina::InvalidInput);
}

TEST(FocalLoss, GammaZeroLogitZeroIsLogTwo) {
  EXPECT_NEAR(retina::focal_loss_element(0.0, true, 0.0, 1.0).loss, std::log(2.0), 1e-15);
  // alpha = 0.5 halves both classes.
  EXPECT_NEAR(2 * retina::focal_loss_element(0.0, false, 0.0, 0.5).loss, 0.693147, 1e-6);
}

TEST(FocalLoss, WellClassifiedPositive) {
  const double loss = retina::focal_loss_element(std::log(9.0), true, 2.0, 0.25).loss;
  EXPECT_NEAR(loss, 0.25 * 0.01 * -std::log(0.9), 1e-15);
  EXPECT_NEAR(loss, 2.6341e-4, 1e-8);
}

TEST(FocalLoss, SaturatedLogitTiny) {
  const auto e = retina::focal_loss_element(40.0, true, 2.0, 0.25);
  EXPECT_TRUE(std::isfinite(e.loss));
  EXPECT_LT(e.loss, 1e-15);
}

TEST(FocalLoss, GammaZeroEqualsWeightedBce) {
  retina::Rng rng(31);
  for (int i = 0; i < 10000; ++i) {
    const double x = rng.uniform(-30, 30);
    const bool pos = rng.bernoulli(0.5);
    const double alpha = rng.uniform(0.05, 0.95);
    EXPECT_NEAR(retina::focal_loss_element(x, pos, 0.0, alpha).loss, weighted_bce(x, pos, alpha), 1e-12);
  }
}

TEST(FocalLoss, GammaReducesConfidentLoss) {
  retina::Rng rng(2);
  for (int i = 0; i < 1000; ++i) {
    // p_t >= 0.5 means the signed logit is non-negative.
    const double z = rng.uniform(0, 20);
    const bool pos = rng.bernoulli(0.5);
    const double x = pos ? z : -z;
    EXPECT_LE(retina::focal_loss_element(x, pos, 2.0, 0.25).loss,
              retina::focal_loss_element(x, pos, 0.0, 0.25).loss);
  }
}

TEST(FocalLoss, GradientMatchesFiniteDifference) {
  retina::Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const double x = rng.uniform(-8, 8);
    const bool pos = rng.bernoulli(0.5);
    const double gamma = static_cast<double>(rng.uniform_int(0, 2));
    const double alpha = rng.bernoulli(0.5) ? 0.25 : 0.5;
    const auto f = [&](double v) { return retina::focal_loss_element(v, pos, gamma, alpha).loss; };
    const double a = retina::focal_loss_element(x, pos, gamma, alpha).grad;
    const double n = fd(f, x);
    EXPECT_LT(std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-4}), 1e-6) << x;
  }
}

TEST(FocalLoss, FiniteOverWideRange) {
  for (double x = -80; x <= 80; x += 0.25) {
    for (bool pos : {false, true}) {
      for (double gamma : {0.0, 0.5, 2.0}) {
        const auto e = retina::focal_loss_element(x, pos, gamma, 0.25);
        ASSERT_TRUE(std::isfinite(e.loss) && std::isfinite(e.grad)) << x;
        ASSERT_GE(e.loss, 0.0);
      }
    }
  }
}

TEST(FocalLoss, TensorVersionMatchesElements) {
  retina::Rng rng(6);
  D logits({4, 5}), targets({4, 5});
  for (std::size_t i = 0; i < logits.size(); ++i) {
    logits[i] = rng.uniform(-5, 5);
    targets[i] = rng.bernoulli(0.3) ? 1.0 : 0.0;
  }
  const LossConfig c;
  const auto r = retina::sigmoid_focal_loss(logits, targets, c);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const auto e = retina::focal_loss_element(logits[i], targets[i] == 1.0, c.gamma, c.alpha);
    EXPECT_EQ(r.loss[i], e.loss);
    EXPECT_EQ(r.grad[i], e.grad);
  }
  EXPECT_THROW(retina::sigmoid_focal_loss(logits, D({5, 4}), c), retina::InvalidInput);
}

TEST(SmoothL1, ZeroDiff) {
  const auto e = retina::smooth_l1_element(0.0, 1.0 / 9);
  EXPECT_EQ(e.loss, 0.0);
  EXPECT_EQ(e.grad, 0.0);
}

TEST(SmoothL1, ContinuousAtBeta) {
  const double beta = 0.25;
  const auto e = retina::smooth_l1_element(beta, beta);
  EXPECT_DOUBLE_EQ(e.loss, beta / 2);
  EXPECT_DOUBLE_EQ(e.grad, 1.0);
  const auto below = retina::smooth_l1_element(std::nextafter(beta, 0.0), beta);
  EXPECT_NEAR(below.loss, beta / 2, 1e-15);
  EXPECT_NEAR(below.grad, 1.0, 1e-14);
}

TEST(SmoothL1, LinearBranch) {
  const auto e = retina::smooth_l1_element(1.0, 1.0 / 9);
  EXPECT_NEAR(e.loss, 1 - 1.0 / 18, 1e-15);
  EXPECT_EQ(e.grad, 1.0);
  EXPECT_EQ(retina::smooth_l1_element(-2.0, 1.0 / 9).grad, -1.0);
}

TEST(SmoothL1, GradientMatchesFiniteDifference) {
  retina::Rng rng(7);
  const double beta = 1.0 / 9;
  for (int i = 0; i < 100; ++i) {
    double d = rng.uniform(-1, 1);
    if (std::abs(std::abs(d) - beta) < 1e-3) continue;
    const auto f = [&](double v) { return retina::smooth_l1_element(v, beta).loss; };
    const double a = retina::smooth_l1_element(d, beta).grad;
    const double n = fd(f, d);
    EXPECT_LT(std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-4}), 1e-6);
  }
}

TEST(SmoothL1, TensorShapeMismatch) {
  EXPECT_THROW(retina::smooth_l1(D({3}), D({4}), 0.1), retina::InvalidInput);
}

TEST(DetectionLoss, EmptySceneConfidentNegatives) {
  const std::size_t n = 50;
  const auto a = make_assignment(std::vector<AnchorLabel>(n, AnchorLabel::kNegative));
  D cls({n, 1}), box({n, 4});
  cls.fill(-40);
  const auto r = retina::total_detection_loss(cls, box, a, LossConfig{});
  EXPECT_LT(r.total, 1e-10);
  EXPECT_EQ(r.normalizer, 1.0);
}

TEST(DetectionLoss, PerfectPositive) {
  auto a = make_assignment({AnchorLabel::kPositive, AnchorLabel::kNegative});
  a.regression_targets[0] = {0.1f, -0.2f, 0.3f, 0.05f};
  D cls({2, 1}), box({2, 4});
  cls[0] = 40;
  cls[1] = -40;
  box[0] = 0.1f;
  box[1] = -0.2f;
  box[2] = 0.3f;
  box[3] = 0.05f;
  EXPECT_LT(retina::total_detection_loss(cls, box, a, LossConfig{}).total, 1e-12);
}

TEST(DetectionLoss, IgnoreAnchorsInert) {
  retina::Rng rng(9);
  auto a = make_assignment({AnchorLabel::kPositive, AnchorLabel::kIgnore, AnchorLabel::kNegative,
                            AnchorLabel::kIgnore});
  D cls({4, 1}), box({4, 4});
  for (auto& v : cls.data()) v = rng.normal();
  for (auto& v : box.data()) v = rng.normal();
  const auto base = retina::total_detection_loss(cls, box, a, LossConfig{});
  cls[1] += 3.0;
  cls[3] -= 7.0;
  box[5] += 1.0;
  const auto moved = retina::total_detection_loss(cls, box, a, LossConfig{});
  EXPECT_EQ(base.total, moved.total);
  EXPECT_EQ(base.grad_cls, moved.grad_cls);
  EXPECT_EQ(base.grad_box, moved.grad_box);
  EXPECT_EQ(base.grad_cls[1], 0.0);
}

TEST(DetectionLoss, NormalizedByPositives) {
  auto a = make_assignment({AnchorLabel::kPositive, AnchorLabel::kPositive, AnchorLabel::kNegative});
  D cls({3, 1}), box({3, 4});
  const LossConfig c;
  const auto r = retina::total_detection_loss(cls, box, a, c);
  EXPECT_EQ(r.normalizer, 2.0);
  EXPECT_NEAR(r.total, (r.classification + r.regression) / 2.0, 1e-15);
  const double neg = retina::focal_loss_element(0.0, false, c.gamma, c.alpha).loss;
  const double pos = retina::focal_loss_element(0.0, true, c.gamma, c.alpha).loss;
  EXPECT_NEAR(r.classification, 2 * pos + neg, 1e-15);
}

TEST(DetectionLoss, RandomInstanceMatchesFiniteDifference) {
  retina::Rng rng(10);
  retina::AnchorGrid grid;
  for (int i = 0; i < 20; ++i) grid.anchors.push_back(oracle::random_box(rng, 0, 40, 6, 24));
  const std::vector<retina::BBox> gts{retina::BBox(5, 5, 20, 25), retina::BBox(22, 18, 40, 44)};
  retina::AnchorConfig ac;
  ac.pos_iou = 0.3f;
  ac.neg_iou = 0.2f;
  const auto a = retina::assign_targets(grid, gts, ac);
  ASSERT_GT(a.num_positive, 0u);
  D cls({20, 1}), box({20, 4});
  for (auto& v : cls.data()) v = rng.uniform(-3, 3);
  for (auto& v : box.data()) v = rng.uniform(-1, 1);
  const LossConfig c;
  const auto r = retina::total_detection_loss(cls, box, a, c);
  const auto check = [&](D& t, const D& g) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double orig = t[i];
      t[i] = orig + 1e-5;
      const double up = retina::total_detection_loss(cls, box, a, c).total;
      t[i] = orig - 1e-5;
      const double down = retina::total_detection_loss(cls, box, a, c).total;
      t[i] = orig;
      const double n = (up - down) / 2e-5;
      EXPECT_LT(std::abs(g[i] - n) / std::max({std::abs(g[i]), std::abs(n), 1e-6}), 1e-4) << i;
    }
  };
  check(cls, r.grad_cls);
  check(box, r.grad_box);
}

TEST(DetectionLoss, ShapeMismatch) {
  const auto a = make_assignment({AnchorLabel::kNegative, AnchorLabel::kNegative});
  EXPECT_THROW(retina::total_detection_loss(D({3, 1}), D({2, 4}), a, LossConfig{}), retina::InvalidInput);
  EXPECT_THROW(retina::total_detection_loss(D({2, 1}), D({2, 3}), a, LossConfig{}), retina::InvalidInput);
}
