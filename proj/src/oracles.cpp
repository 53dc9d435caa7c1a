#include "idql/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace idql::oracles {

long double minimize_1d_convex(const std::function<long double(long double)>& objective,
                               long double lo, long double hi, long double tol) {
  check(lo < hi, "minimize_1d_convex: lo must be below hi");
  check(tol > 0.0L, "minimize_1d_convex: tol must be positive");
  const long double inv_phi = 0.6180339887498948482045868343656L;
  long double a = lo, b = hi;
  long double x1 = b - inv_phi * (b - a);
  long double x2 = a + inv_phi * (b - a);
  long double f1 = objective(x1);
  long double f2 = objective(x2);
  while (b - a > tol) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = objective(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = objective(x2);
    }
  }
  return 0.5L * (a + b);
}

double minimize_1d_convex(const std::function<double(double)>& objective, double lo,
                          double hi, double tol) {
  auto wrapped = [&](long double x) -> long double {
    return objective(static_cast<double>(x));
  };
  return static_cast<double>(minimize_1d_convex(
      wrapped, static_cast<long double>(lo), static_cast<long double>(hi),
      static_cast<long double>(tol)));
}

ValueIterationResult value_iteration(const GridWorld& grid, double tol) {
  grid.validate();
  const std::size_t n = grid.num_states();
  ValueIterationResult res;
  res.v.assign(n, 0.0);
  res.policy.assign(n, 0);

  // precompute transition lists once
  std::vector<std::vector<std::pair<std::size_t, double>>> trans(n * GridWorld::kActions);
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t a = 0; a < GridWorld::kActions; ++a)
      trans[s * GridWorld::kActions + a] = grid.transitions(s, a);

  double delta = tol + 1.0;
  while (delta > tol) {
    delta = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      std::size_t best_a = 0;
      if (s == grid.goal) {
        // absorbing exit: one final reward, then the episode ends
        best = grid.goal_reward;
        best_a = 0;
      } else {
        for (std::size_t a = 0; a < GridWorld::kActions; ++a) {
          double q = grid.step_reward;
          for (const auto& [s2, p] : trans[s * GridWorld::kActions + a])
            q += grid.gamma * p * res.v[s2];
          if (q > best) {
            best = q;
            best_a = a;
          }
        }
      }
      delta = std::max(delta, std::fabs(best - res.v[s]));
      res.v[s] = best;
      res.policy[s] = best_a;
    }
    ++res.sweeps;
    check(res.sweeps < 1000000, "value_iteration: failed to converge");
  }
  return res;
}

double policy_return_mc(const GridWorld& grid, const std::vector<std::size_t>& policy,
                        std::size_t episodes, Rng& rng, std::size_t step_cap) {
  check(policy.size() == grid.num_states(), "policy_return_mc: policy size mismatch");
  check(episodes >= 1, "policy_return_mc: episodes must be >= 1");
  GridEnv env(grid);
  double total = 0.0;
  for (std::size_t e = 0; e < episodes; ++e) {
    env.reset(rng);
    double ret = 0.0;
    for (std::size_t t = 0; t < step_cap; ++t) {
      std::vector<double> a(GridWorld::kActions, 0.0);
      a[policy[env.current_cell()]] = 1.0;
      auto res = env.step(a, rng);
      ret += res.reward;
      if (res.done) break;
    }
    total += ret;
  }
  return total / static_cast<double>(episodes);
}

double policy_value_mc(const GridWorld& grid, const std::vector<std::vector<double>>& policy,
                       std::size_t start_cell, std::size_t episodes, Rng& rng,
                       std::size_t step_cap) {
  check(policy.size() == grid.num_states(), "policy_value_mc: policy size mismatch");
  GridWorld g2 = grid;
  g2.start = start_cell == grid.goal ? grid.start : start_cell;
  check(start_cell != grid.goal, "policy_value_mc: start at goal");
  GridEnv env(g2);
  double total = 0.0;
  for (std::size_t e = 0; e < episodes; ++e) {
    env.reset(rng);
    double ret = 0.0, disc = 1.0;
    for (std::size_t t = 0; t < step_cap; ++t) {
      std::vector<double> pw = policy[env.current_cell()];
      const std::size_t ai = rng.categorical(pw);
      std::vector<double> a(GridWorld::kActions, 0.0);
      a[ai] = 1.0;
      auto res = env.step(a, rng);
      ret += disc * res.reward;
      disc *= grid.gamma;
      if (res.done) break;
    }
    total += ret;
  }
  return total / static_cast<double>(episodes);
}

namespace {

// Local loss evaluations, deliberately written independently of
// idql::loss_value / idql::loss_deriv.
long double oracle_f(const ConvexLoss& loss, long double u) {
  switch (loss.kind) {
    case LossKind::expectile: {
      const long double w = u < 0.0L ? 1.0L - loss.param : loss.param;
      return w * u * u;
    }
    case LossKind::quantile: {
      const long double w = u < 0.0L ? 1.0L - loss.param : loss.param;
      return w * fabsl(u);
    }
    case LossKind::exponential: {
      const long double a = loss.param;
      return a * expl(a * u) - a * a * u;
    }
  }
  return 0.0L;
}

double oracle_f_deriv(const ConvexLoss& loss, double u) {
  switch (loss.kind) {
    case LossKind::expectile:
      return 2.0 * (u < 0.0 ? 1.0 - loss.param : loss.param) * u;
    case LossKind::quantile:
      if (u == 0.0) return 0.0;
      return u > 0.0 ? loss.param : loss.param - 1.0;
    case LossKind::exponential:
      return loss.param * loss.param * (std::exp(loss.param * u) - 1.0);
  }
  return 0.0;
}

}  // namespace

bool Theorem1Report::stationarity_ok(double tol) const {
  return stationarity_residual <= atom_mass_at_v + tol;
}

Theorem1Report theorem1_audit(const ConvexLoss& loss,
                              const DiscreteActionDistribution& dist) {
  dist.validate();
  Theorem1Report rep;
  rep.v_solver = solve_value(loss, dist);

  auto objective = [&](long double v) -> long double {
    long double s = 0.0L;
    for (std::size_t i = 0; i < dist.size(); ++i)
      s += static_cast<long double>(dist.probs[i]) *
           oracle_f(loss, static_cast<long double>(dist.q_values[i]) - v);
    return s;
  };
  rep.v_oracle = static_cast<double>(minimize_1d_convex(
      objective, static_cast<long double>(dist.min_q()),
      static_cast<long double>(dist.max_q()), 1e-10L));
  rep.solver_vs_oracle = std::fabs(rep.v_solver - rep.v_oracle);

  const auto pi = implicit_policy(loss, dist);
  double e_pi_q = 0.0;
  for (std::size_t i = 0; i < dist.size(); ++i) e_pi_q += pi[i] * dist.q_values[i];
  rep.fixed_point_residual = std::fabs(e_pi_q - rep.v_solver);

  double stat = 0.0, atom = 0.0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    const double u = dist.q_values[i] - rep.v_solver;
    if (std::fabs(u) <= 1e-9)
      atom += dist.probs[i];
    else
      stat += dist.probs[i] * oracle_f_deriv(loss, u);
  }
  rep.stationarity_residual = std::fabs(stat);
  rep.atom_mass_at_v = loss.kind == LossKind::quantile ? atom : 0.0;
  return rep;
}

DiscreteActionDistribution random_distribution(Rng& rng, std::size_t min_actions,
                                               std::size_t max_actions, double q_lo,
                                               double q_hi) {
  const std::size_t n = min_actions + rng.uniform_index(max_actions - min_actions + 1);
  DiscreteActionDistribution dist;
  dist.q_values.resize(n);
  dist.probs.resize(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    dist.q_values[i] = rng.uniform(q_lo, q_hi);
    dist.probs[i] = 0.05 + rng.uniform();  // bounded away from zero mass
    total += dist.probs[i];
  }
  for (double& p : dist.probs) p /= total;
  // renormalize exactly so validate()'s 1e-12 sum check holds
  double s = 0.0;
  for (double p : dist.probs) s += p;
  dist.probs[0] += 1.0 - s;
  return dist;
}

}  // namespace idql::oracles
