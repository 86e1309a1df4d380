#include "gennli/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

#include "gennli/rng.hpp"

namespace gennli::ad {

FdReport finite_difference_check(const LossWithGrad& loss, ParamMap params, const FdOptions& opts) {
  if (!(opts.epsilon > 0.0) || opts.epsilon >= 1e-2) {
    throw std::invalid_argument("finite_difference_check: epsilon must lie in (0, 1e-2)");
  }
  Gradients analytic;
  const double base = loss(params, &analytic);
  const double repeat = loss(params, nullptr);
  if (base != repeat) {
    throw std::invalid_argument("finite_difference_check: loss is not deterministic (" + std::to_string(base) +
                                " vs " + std::to_string(repeat) + ")");
  }

  FdReport report;
  for (auto& [name, tensor] : params) {
    auto it = analytic.find(name);
    if (it == analytic.end()) {
      throw std::invalid_argument("finite_difference_check: no analytic gradient for parameter '" + name + "'");
    }
    const Tensor& grad = it->second;
    if (!grad.same_shape(tensor)) {
      throw std::invalid_argument("finite_difference_check: gradient shape mismatch for '" + name + "'");
    }

    const int n = static_cast<int>(tensor.numel());
    std::vector<int> coords;
    if (n <= opts.max_coords_per_tensor) {
      coords.resize(static_cast<size_t>(n));
      for (int i = 0; i < n; ++i) coords[static_cast<size_t>(i)] = i;
    } else {
      Rng rng(mix_seed(opts.sample_seed, std::hash<std::string>{}(name)));
      coords = rng.sample_without_replacement(n, opts.max_coords_per_tensor);
    }

    double tensor_max = 0.0;
    for (int i : coords) {
      const double saved = tensor.data()[static_cast<size_t>(i)];
      tensor.data()[static_cast<size_t>(i)] = saved + opts.epsilon;
      const double up = loss(params, nullptr);
      tensor.data()[static_cast<size_t>(i)] = saved - opts.epsilon;
      const double down = loss(params, nullptr);
      tensor.data()[static_cast<size_t>(i)] = saved;

      const double numeric = (up - down) / (2.0 * opts.epsilon);
      const double a = grad.data()[static_cast<size_t>(i)];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      tensor_max = std::max(tensor_max, rel);
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = name;
        report.worst_index = i;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
    report.per_param[name] = tensor_max;
  }
  return report;
}

}  // namespace gennli::ad
