#pragma once

#include <functional>
#include <map>
#include <string>

#include "gennli/tape.hpp"

namespace gennli::ad {

using ParamMap = std::map<std::string, Tensor>;

/// Callable under test: evaluates the scalar loss at `params` and, when
/// `grads_out` is non-null, also fills in analytic gradients.
using LossWithGrad = std::function<double(const ParamMap& params, Gradients* grads_out)>;

struct FdOptions {
  double epsilon = 1e-5;
  int max_coords_per_tensor = 200;
  uint64_t sample_seed = 0x5eed;
};

struct FdReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  int worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::map<std::string, double> per_param;
};

/// Central-difference check of analytic gradients. Samples at most
/// `max_coords_per_tensor` coordinates per tensor (seeded, deterministic).
/// Relative error is |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
/// A loss whose two evaluations at the same point differ is rejected.
FdReport finite_difference_check(const LossWithGrad& loss, ParamMap params, const FdOptions& opts = {});

}  // namespace gennli::ad
