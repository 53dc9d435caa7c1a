#include "idql/extraction.hpp"

#include <cmath>

namespace idql {

ExtractionMode extraction_mode_from_string(const std::string& s) {
  if (s == "implicit") return ExtractionMode::implicit_resample;
  if (s == "greedy") return ExtractionMode::greedy;
  fail("unknown extraction mode '" + s + "' (expected implicit|greedy)");
}

std::string to_string(ExtractionMode m) {
  return m == ExtractionMode::greedy ? "greedy" : "implicit";
}

void ExtractionSpec::validate() const {
  check(n_samples >= 1, "ExtractionSpec: n_samples must be >= 1");
}

std::vector<double> act(const ExtractionSpec& spec, const std::vector<double>& state,
                        const BehaviorModel& behavior, const CriticNets& critic, Rng& rng,
                        ActDiagnostics* diag) {
  spec.validate();
  const std::size_t n = spec.n_samples;
  const std::size_t da = behavior.config().action_dim;
  const std::vector<double> candidates =
      behavior.sample(state, n, rng, spec.sample_options);

  // q = min over twins at each candidate, v = V(s)
  std::vector<double> sa_rows;
  sa_rows.reserve(n * (state.size() + da));
  for (std::size_t i = 0; i < n; ++i) {
    sa_rows.insert(sa_rows.end(), state.begin(), state.end());
    sa_rows.insert(sa_rows.end(), candidates.begin() + i * da,
                   candidates.begin() + (i + 1) * da);
  }
  const std::vector<double> q = critic.q_min_batch(sa_rows, n);

  std::size_t chosen = 0;
  if (spec.mode == ExtractionMode::greedy) {
    for (std::size_t i = 1; i < n; ++i)
      if (q[i] > q[chosen]) chosen = i;
  } else {
    const double v = critic.v(state);
    std::vector<double> w(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = implicit_weight(spec.loss, q[i], v);
      total += w[i];
    }
    if (total <= 0.0) {
      if (diag) ++diag->zero_weight_fallbacks;
      std::fill(w.begin(), w.end(), 1.0);
    }
    chosen = rng.categorical(w);
  }
  return std::vector<double>(candidates.begin() + chosen * da,
                             candidates.begin() + (chosen + 1) * da);
}

EvalStats evaluate_policy(const ExtractionSpec& spec, Env& env,
                          const BehaviorModel& behavior, const CriticNets& critic,
                          std::size_t episodes, Rng& rng, std::size_t step_cap,
                          double discount) {
  check(episodes >= 1, "evaluate_policy: episodes must be >= 1");
  EvalStats stats;
  stats.episodes = episodes;
  std::vector<double> returns(episodes);
  for (std::size_t e = 0; e < episodes; ++e) {
    auto state = env.reset(rng);
    double ret = 0.0, dret = 0.0, disc = 1.0;
    bool done = false;
    for (std::size_t t = 0; t < step_cap; ++t) {
      const auto action = act(spec, state, behavior, critic, rng);
      auto res = env.step(action, rng);
      ret += res.reward;
      dret += disc * res.reward;
      disc *= discount;
      state = res.state;
      if (res.done) {
        done = true;
        break;
      }
    }
    if (!done) ++stats.truncated;
    returns[e] = ret;
    stats.mean_return += ret;
    stats.mean_discounted_return += dret;
  }
  stats.mean_return /= static_cast<double>(episodes);
  stats.mean_discounted_return /= static_cast<double>(episodes);
  double var = 0.0;
  for (double r : returns) {
    const double d = r - stats.mean_return;
    var += d * d;
  }
  stats.std_return = std::sqrt(var / static_cast<double>(episodes));
  return stats;
}

GaussianFit fit_weighted_gaussian(const std::vector<double>& action_rows,
                                  std::size_t n_rows, std::size_t dim,
                                  const std::vector<double>& weights) {
  check(n_rows > 0 && action_rows.size() == n_rows * dim,
        "fit_weighted_gaussian: bad row layout");
  check(weights.size() == n_rows, "fit_weighted_gaussian: weight count mismatch");
  double total = 0.0;
  for (double w : weights) {
    check(w >= 0.0, "fit_weighted_gaussian: negative weight");
    total += w;
  }
  check(total > 0.0, "fit_weighted_gaussian: all weights zero");

  GaussianFit fit;
  fit.mean.assign(dim, 0.0);
  fit.var.assign(dim, 0.0);
  for (std::size_t i = 0; i < n_rows; ++i)
    for (std::size_t d = 0; d < dim; ++d)
      fit.mean[d] += weights[i] * action_rows[i * dim + d];
  for (double& m : fit.mean) m /= total;
  for (std::size_t i = 0; i < n_rows; ++i)
    for (std::size_t d = 0; d < dim; ++d) {
      const double diff = action_rows[i * dim + d] - fit.mean[d];
      fit.var[d] += weights[i] * diff * diff;
    }
  for (double& v : fit.var) v /= total;
  return fit;
}

}  // namespace idql
