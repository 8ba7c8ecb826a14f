#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "satire/graph.hpp"

namespace satire {

struct GradCheckOptions {
  double eps = 1e-5;
  // Coordinates sampled per parameter tensor; smaller tensors are checked
  // exhaustively.
  std::size_t coords_per_tensor = 64;
  std::uint64_t seed = 0;
  // Denominator floor of the relative error, so that gradients that are zero
  // up to roundoff do not produce spurious huge ratios.
  double floor = 1e-6;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coords_checked = 0;
};

using LossClosure = std::function<Var<double>(Graph<double>&)>;
using NamedParams = std::vector<std::pair<std::string, Tensor<double>*>>;

// Compares the backward pass of `loss` against central differences
// (f(p + eps) - f(p - eps)) / 2eps for sampled coordinates of every listed
// parameter. The closure must build a fresh graph deterministically.
GradCheckResult gradient_check(const LossClosure& loss, const NamedParams& params,
                               const GradCheckOptions& options = {});

}  // namespace satire
