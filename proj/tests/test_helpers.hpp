#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "idql/param_set.hpp"
#include "idql/tensor.hpp"

namespace idql::testing {

// Central finite-difference audit of every parameter in the set against the
// tape's analytic gradients. build_loss must be a deterministic function of
// the current parameter values (re-seed any internal RNG per call).
struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst_param;
};

inline GradCheckResult check_gradients(const std::function<Tensor(Graph&)>& build_loss,
                                       ParamSet& params, double h = 1e-5) {
  params.zero_grad();
  {
    Graph g;
    Tensor loss = build_loss(g);
    g.backward(loss);
  }
  std::vector<std::pair<std::string, std::vector<double>>> analytic;
  for (auto& [path, t] : params) analytic.emplace_back(path, t.grad());
  params.zero_grad();

  auto eval = [&]() {
    Graph g;
    return build_loss(g).item();
  };

  GradCheckResult result;
  std::size_t pi = 0;
  for (auto& [path, t] : params) {
    auto& vals = t.values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double saved = vals[i];
      vals[i] = saved + h;
      const double fp = eval();
      vals[i] = saved - h;
      const double fm = eval();
      vals[i] = saved;
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[pi].second[i];
      const double rel =
          std::fabs(a - numeric) / std::max({std::fabs(a), std::fabs(numeric), 1e-3});
      if (rel > result.max_rel_err) {
        result.max_rel_err = rel;
        result.worst_param = path + "[" + std::to_string(i) + "]";
      }
    }
    ++pi;
  }
  return result;
}

inline ParamSet single_param(const std::string& name, Tensor t) {
  ParamSet ps;
  ps.add(name, std::move(t));
  return ps;
}

}  // namespace idql::testing
