#pragma once

#include <string>
#include <vector>

#include "retina/run_config.hpp"

namespace retina {

struct GradcheckSuite {
  std::string name;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  std::size_t checks = 0;
  bool passed = false;
};

struct GradcheckReport {
  std::vector<GradcheckSuite> suites;
  double seconds = 0.0;

  bool passed() const;
  std::string to_json() const;
};

struct GradcheckOptions {
  /// Test hook: adds 1e-2 to one analytic gradient of the named suite.
  std::string sabotage_suite;
  /// Random parameters probed by the end-to-end suite.
  std::size_t end_to_end_params = 200;
};

/// |a - n| / max(|a|, |n|, floor).
double relative_error(double analytic, double numeric, double floor);

/// Central finite-difference checks, all in 64-bit:
///   focal_loss, smooth_l1 (tol 1e-6), conv2d, relu, upsample, add,
///   detection_loss (tol 1e-4), end_to_end on a 16x16 input (tol 1e-3).
GradcheckReport run_gradcheck(const RunConfig& config, const GradcheckOptions& options = {});

}  // namespace retina
