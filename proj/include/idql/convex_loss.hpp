#pragma once

#include <string>
#include <vector>

#include "idql/util.hpp"

namespace idql {

enum class LossKind { expectile, quantile, exponential };

LossKind loss_kind_from_string(const std::string& s);
std::string to_string(LossKind k);

// Asymmetric convex loss family used by the generalized critic update.
//   expectile:    f(u) = |tau - 1(u<0)| u^2
//   quantile:     f(u) = |tau - 1(u<0)| |u|          (f'(0) taken as 0)
//   exponential:  f(u) = alpha exp(alpha u) - alpha^2 u   (linex)
// Each f is convex with f'(0) = 0, so the induced implicit policy of
// implicit_policy() satisfies the value fixed point E_pi[Q] = V*.
struct ConvexLoss {
  LossKind kind = LossKind::expectile;
  double param = 0.7;  // tau in (0,1) or alpha in (0,inf)

  static ConvexLoss expectile(double tau);
  static ConvexLoss quantile(double tau);
  static ConvexLoss exponential(double alpha);
  static ConvexLoss make(LossKind kind, double param);

  std::string describe() const;
};

// Finite set of actions with Q-values and behavior probabilities; the
// discrete setting where the value solvers and implicit policies are exact.
struct DiscreteActionDistribution {
  std::vector<double> q_values;
  std::vector<double> probs;

  void validate() const;
  std::size_t size() const { return q_values.size(); }
  double mean_q() const;
  double min_q() const;
  double max_q() const;
};

double loss_value(const ConvexLoss& loss, double u);
double loss_deriv(const ConvexLoss& loss, double u);

// V* = argmin_V E_mu[f(Q - V)].
//   expectile:   bisection on the stationarity condition E_mu[f'(Q-V)] = 0.
//   quantile:    exact weighted-CDF argmin; plateau of minimizers -> midpoint.
//   exponential: closed form (1/alpha) log sum_a exp(alpha Q_a + log mu_a),
//                evaluated with a log-sum-exp shift.
double solve_value(const ConvexLoss& loss, const DiscreteActionDistribution& dist);

// Importance weight w(q, v) relating the implicit actor to the behavior
// policy. The denominator is clamped at eps; the exponential weight switches
// to its analytic limit alpha^2 when |q - v| < eps.
double implicit_weight(const ConvexLoss& loss, double q, double v, double eps = 1e-8);

// pi_imp(a) proportional to mu(a) * w(q_a, V*), normalized.
std::vector<double> implicit_policy(const ConvexLoss& loss,
                                    const DiscreteActionDistribution& dist);

struct KlResult {
  double direct;       // sum_a mu(a) log(mu(a) / pi_exp(a))
  double closed_form;  // E_mu[alpha (V_exp - Q)]
};

// KL divergence from the behavior policy to the exponentially tilted policy
// pi_exp proportional to exp(alpha Q + log mu), computed both directly and
// via the advantage identity.
KlResult kl_behavior_to_awr(double alpha, const DiscreteActionDistribution& dist);

// Mean E_mu[f'(Q - v)]; zero (up to the atom mass at the kink for quantile)
// exactly when v minimizes the value objective.
double stationarity_residual(const ConvexLoss& loss,
                             const DiscreteActionDistribution& dist, double v);

}  // namespace idql
