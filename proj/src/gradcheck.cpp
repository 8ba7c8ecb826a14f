#include "satire/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "satire/rng.hpp"

namespace satire {

namespace {

double evaluate(const LossClosure& loss) {
  Graph<double> g;
  const double v = loss(g).item();
  if (!std::isfinite(v)) throw NumericError("gradient_check: loss is not finite");
  return v;
}

}  // namespace

GradCheckResult gradient_check(const LossClosure& loss, const NamedParams& params,
                               const GradCheckOptions& options) {
  for (auto& [_, p] : params) p->zero_grad();
  {
    Graph<double> g;
    auto l = loss(g);
    if (!std::isfinite(l.item())) throw NumericError("gradient_check: loss is not finite");
    g.backward(l);
  }

  GradCheckResult result;
  Rng rng(options.seed);
  for (auto& [name, p] : params) {
    std::vector<double> analytic = p->grad ? *p->grad : std::vector<double>(p->size(), 0.0);

    std::vector<std::size_t> coords(p->size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (coords.size() > options.coords_per_tensor) {
      rng.shuffle(coords);
      coords.resize(options.coords_per_tensor);
      std::sort(coords.begin(), coords.end());
    }

    for (std::size_t idx : coords) {
      const double saved = p->data[idx];
      p->data[idx] = saved + options.eps;
      const double up = evaluate(loss);
      p->data[idx] = saved - options.eps;
      const double down = evaluate(loss);
      p->data[idx] = saved;

      const double numeric = (up - down) / (2.0 * options.eps);
      const double a = analytic[idx];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
      const double rel = std::abs(a - numeric) / denom;
      ++result.coords_checked;
      if (rel > result.max_rel_error || result.worst_param.empty()) {
        result.max_rel_error = std::max(rel, result.max_rel_error);
        result.worst_param = name;
        result.worst_index = idx;
        result.analytic = a;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace satire
