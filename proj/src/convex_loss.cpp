#include "idql/convex_loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace idql {

LossKind loss_kind_from_string(const std::string& s) {
  if (s == "expectile") return LossKind::expectile;
  if (s == "quantile") return LossKind::quantile;
  if (s == "exponential") return LossKind::exponential;
  fail("unknown loss family '" + s + "' (expected expectile|quantile|exponential)");
}

std::string to_string(LossKind k) {
  switch (k) {
    case LossKind::expectile: return "expectile";
    case LossKind::quantile: return "quantile";
    case LossKind::exponential: return "exponential";
  }
  return "expectile";
}

ConvexLoss ConvexLoss::expectile(double tau) {
  check(tau > 0.0 && tau < 1.0,
        "expectile: tau = " + std::to_string(tau) + " outside (0,1)");
  return ConvexLoss{LossKind::expectile, tau};
}

ConvexLoss ConvexLoss::quantile(double tau) {
  check(tau > 0.0 && tau < 1.0,
        "quantile: tau = " + std::to_string(tau) + " outside (0,1)");
  return ConvexLoss{LossKind::quantile, tau};
}

ConvexLoss ConvexLoss::exponential(double alpha) {
  check(alpha > 0.0 && std::isfinite(alpha),
        "exponential: alpha = " + std::to_string(alpha) + " outside (0,inf)");
  return ConvexLoss{LossKind::exponential, alpha};
}

ConvexLoss ConvexLoss::make(LossKind kind, double param) {
  switch (kind) {
    case LossKind::expectile: return expectile(param);
    case LossKind::quantile: return quantile(param);
    case LossKind::exponential: return exponential(param);
  }
  fail("ConvexLoss::make: bad kind");
}

std::string ConvexLoss::describe() const {
  return to_string(kind) + "(" + std::to_string(param) + ")";
}

void DiscreteActionDistribution::validate() const {
  check(!q_values.empty(), "DiscreteActionDistribution: empty distribution");
  check(q_values.size() == probs.size(),
        "DiscreteActionDistribution: " + std::to_string(q_values.size()) +
            " q-values vs " + std::to_string(probs.size()) + " probabilities");
  double total = 0.0;
  for (double p : probs) {
    check(p >= 0.0, "DiscreteActionDistribution: negative probability");
    total += p;
  }
  check(std::fabs(total - 1.0) <= 1e-12,
        "DiscreteActionDistribution: probabilities sum to " + std::to_string(total));
  for (double q : q_values)
    check(std::isfinite(q), "DiscreteActionDistribution: non-finite q-value");
}

double DiscreteActionDistribution::mean_q() const {
  double m = 0.0;
  for (std::size_t i = 0; i < q_values.size(); ++i) m += probs[i] * q_values[i];
  return m;
}

double DiscreteActionDistribution::min_q() const {
  return *std::min_element(q_values.begin(), q_values.end());
}

double DiscreteActionDistribution::max_q() const {
  return *std::max_element(q_values.begin(), q_values.end());
}

double loss_value(const ConvexLoss& loss, double u) {
  check(std::isfinite(u), "loss_value: non-finite argument");
  switch (loss.kind) {
    case LossKind::expectile: {
      const double w = std::fabs(loss.param - (u < 0.0 ? 1.0 : 0.0));
      return w * u * u;
    }
    case LossKind::quantile: {
      const double w = std::fabs(loss.param - (u < 0.0 ? 1.0 : 0.0));
      return w * std::fabs(u);
    }
    case LossKind::exponential: {
      const double a = loss.param;
      check(a * u <= 700.0, "loss_value: exponential overflow at alpha*u = " +
                                std::to_string(a * u) + "; rescale the Q-values");
      return a * std::exp(a * u) - a * a * u;
    }
  }
  fail("loss_value: bad kind");
}

double loss_deriv(const ConvexLoss& loss, double u) {
  check(std::isfinite(u), "loss_deriv: non-finite argument");
  switch (loss.kind) {
    case LossKind::expectile: {
      const double w = std::fabs(loss.param - (u < 0.0 ? 1.0 : 0.0));
      return 2.0 * w * u;
    }
    case LossKind::quantile: {
      if (u == 0.0) return 0.0;  // subgradient convention at the kink
      return u > 0.0 ? loss.param : loss.param - 1.0;
    }
    case LossKind::exponential: {
      const double a = loss.param;
      check(a * u <= 700.0, "loss_deriv: exponential overflow at alpha*u = " +
                                std::to_string(a * u) + "; rescale the Q-values");
      return a * a * (std::exp(a * u) - 1.0);
    }
  }
  fail("loss_deriv: bad kind");
}

namespace {

// Expectile value: E_mu[f'(Q - V)] is continuous and strictly decreasing in
// V, so the stationary point is found by bisection to machine precision.
double solve_expectile(double tau, const DiscreteActionDistribution& dist) {
  const ConvexLoss loss = ConvexLoss::expectile(tau);
  double lo = dist.min_q(), hi = dist.max_q();
  if (lo == hi) return lo;
  auto g = [&](double v) { return stationarity_residual(loss, dist, v); };
  for (int iter = 0; iter < 200 && hi - lo > 1e-15 * (1.0 + std::fabs(lo)); ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (g(mid) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

// Quantile value: the objective is piecewise linear; the argmin set follows
// from the weighted CDF. A tie (cumulative mass hitting tau exactly) gives a
// plateau of minimizers whose midpoint is returned.
double solve_quantile(double tau, const DiscreteActionDistribution& dist) {
  const std::size_t n = dist.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dist.q_values[a] < dist.q_values[b];
  });
  double cum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cum += dist.probs[order[i]];
    if (cum >= tau - 1e-15) {
      const double atom = dist.q_values[order[i]];
      if (std::fabs(cum - tau) <= 1e-15 && i + 1 < n) {
        // slope is zero on [atom, next); return the plateau midpoint
        return 0.5 * (atom + dist.q_values[order[i + 1]]);
      }
      return atom;
    }
  }
  return dist.q_values[order[n - 1]];
}

// log sum_a exp(x_a) with the usual max shift; entries may be -inf.
double log_sum_exp(const std::vector<double>& xs) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : xs) mx = std::max(mx, x);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - mx);
  return mx + std::log(s);
}

double solve_exponential(double alpha, const DiscreteActionDistribution& dist) {
  std::vector<double> terms(dist.size());
  for (std::size_t i = 0; i < dist.size(); ++i) {
    terms[i] = dist.probs[i] > 0.0
                   ? alpha * dist.q_values[i] + std::log(dist.probs[i])
                   : -std::numeric_limits<double>::infinity();
  }
  return log_sum_exp(terms) / alpha;
}

}  // namespace

double solve_value(const ConvexLoss& loss, const DiscreteActionDistribution& dist) {
  dist.validate();
  double v = 0.0;
  switch (loss.kind) {
    case LossKind::expectile: v = solve_expectile(loss.param, dist); break;
    case LossKind::quantile: v = solve_quantile(loss.param, dist); break;
    case LossKind::exponential: v = solve_exponential(loss.param, dist); break;
  }
  // clamp against the attainable range (guards rounding at the extremes)
  return std::min(std::max(v, dist.min_q()), dist.max_q());
}

double implicit_weight(const ConvexLoss& loss, double q, double v, double eps) {
  check(std::isfinite(q) && std::isfinite(v), "implicit_weight: non-finite input");
  const double u = q - v;
  switch (loss.kind) {
    case LossKind::expectile:
      return std::fabs(loss.param - (u < 0.0 ? 1.0 : 0.0));
    case LossKind::quantile:
      return std::fabs(loss.param - (u < 0.0 ? 1.0 : 0.0)) / std::max(std::fabs(u), eps);
    case LossKind::exponential: {
      const double a = loss.param;
      if (std::fabs(u) < eps) return a * a;  // analytic limit of the 0/0 form
      check(a * u <= 700.0, "implicit_weight: exponential overflow at alpha*u = " +
                                std::to_string(a * u) + "; rescale the Q-values");
      return a * std::fabs(std::exp(a * u) - 1.0) / std::fabs(u);
    }
  }
  fail("implicit_weight: bad kind");
}

std::vector<double> implicit_policy(const ConvexLoss& loss,
                                    const DiscreteActionDistribution& dist) {
  const double v = solve_value(loss, dist);
  std::vector<double> pi(dist.size());
  double z = 0.0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    pi[i] = dist.probs[i] * implicit_weight(loss, dist.q_values[i], v);
    z += pi[i];
  }
  check(z > 0.0, "implicit_policy: all importance weights are zero");
  for (double& p : pi) p /= z;
  return pi;
}

KlResult kl_behavior_to_awr(double alpha, const DiscreteActionDistribution& dist) {
  dist.validate();
  check(alpha >= 0.0, "kl_behavior_to_awr: alpha must be nonnegative");
  if (alpha == 0.0) return KlResult{0.0, 0.0};

  const double v_exp = solve_exponential(alpha, dist);
  // log Z of the tilted policy; pi_exp(a) = exp(alpha q_a + log mu_a - log Z)
  const double log_z = alpha * v_exp;
  double direct = 0.0, closed = 0.0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    const double mu = dist.probs[i];
    if (mu <= 0.0) continue;
    const double log_pi = alpha * dist.q_values[i] + std::log(mu) - log_z;
    direct += mu * (std::log(mu) - log_pi);
    closed += mu * alpha * (v_exp - dist.q_values[i]);
  }
  return KlResult{direct, closed};
}

double stationarity_residual(const ConvexLoss& loss,
                             const DiscreteActionDistribution& dist, double v) {
  double s = 0.0;
  for (std::size_t i = 0; i < dist.size(); ++i)
    s += dist.probs[i] * loss_deriv(loss, dist.q_values[i] - v);
  return s;
}

}  // namespace idql
