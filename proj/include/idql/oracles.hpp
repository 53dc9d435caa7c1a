#pragma once

#include <functional>
#include <vector>

#include "idql/convex_loss.hpp"
#include "idql/envs.hpp"
#include "idql/rng.hpp"

namespace idql::oracles {

// Golden-section search to interval width tol, returning the bracket
// midpoint. Runs in extended precision so that smooth objectives are located
// well below the double-precision comparison floor.
long double minimize_1d_convex(const std::function<long double(long double)>& objective,
                               long double lo, long double hi, long double tol);

double minimize_1d_convex(const std::function<double(double)>& objective, double lo,
                          double hi, double tol);

struct ValueIterationResult {
  std::vector<double> v;                // discounted optimal value per cell
  std::vector<std::size_t> policy;      // greedy action per cell
  std::size_t sweeps = 0;
};

// Bellman-optimal values for the gridworld by sup-norm contraction.
ValueIterationResult value_iteration(const GridWorld& grid, double tol = 1e-10);

// Mean undiscounted episode return of a deterministic cell->action table,
// estimated by Monte-Carlo rollouts.
double policy_return_mc(const GridWorld& grid, const std::vector<std::size_t>& policy,
                        std::size_t episodes, Rng& rng, std::size_t step_cap = 1000);

// Discounted value of a stochastic policy (per-cell action distribution)
// from a given start cell, by Monte-Carlo.
double policy_value_mc(const GridWorld& grid, const std::vector<std::vector<double>>& policy,
                       std::size_t start_cell, std::size_t episodes, Rng& rng,
                       std::size_t step_cap = 1000);

struct Theorem1Report {
  double v_solver = 0.0;            // family solver / closed form
  double v_oracle = 0.0;            // independent golden-section minimizer
  double solver_vs_oracle = 0.0;    // |v_solver - v_oracle|
  double fixed_point_residual = 0.0;   // |E_pi_imp[Q] - v_solver|
  double stationarity_residual = 0.0;  // |E_mu[f'(Q - v_solver)]|
  double atom_mass_at_v = 0.0;      // behavior mass within 1e-9 of v_solver
  bool stationarity_ok(double tol) const;
};

// Cross-checks the value solver and the implicit policy of a loss family on
// one discrete distribution: solver vs brute-force minimizer, the value
// fixed point E_pi[Q] = V*, and the first-order optimality condition (the
// quantile kink is certified by the subgradient bound |E_mu[f']| <= atom
// mass at V*).
Theorem1Report theorem1_audit(const ConvexLoss& loss,
                              const DiscreteActionDistribution& dist);

DiscreteActionDistribution random_distribution(Rng& rng, std::size_t min_actions = 2,
                                               std::size_t max_actions = 32,
                                               double q_lo = -5.0, double q_hi = 5.0);

}  // namespace idql::oracles
