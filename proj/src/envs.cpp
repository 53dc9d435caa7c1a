#include "idql/envs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace idql {

void DiscreteBandit::validate() const {
  check(!reward_means.empty(), "DiscreteBandit: no arms");
  check(noise_std >= 0.0, "DiscreteBandit: negative noise_std");
  check(behavior_probs.size() == reward_means.size(),
        "DiscreteBandit: behavior_probs size mismatch");
  double total = 0.0;
  for (double p : behavior_probs) {
    check(p >= 0.0, "DiscreteBandit: negative behavior probability");
    total += p;
  }
  check(std::fabs(total - 1.0) <= 1e-12, "DiscreteBandit: behavior_probs sum to " +
                                             std::to_string(total));
}

void ContinuousBandit2D::validate() const {
  check(!mode_centers.empty(), "ContinuousBandit2D: no modes");
  check(mode_std > 0.0, "ContinuousBandit2D: mode_std must be positive");
  if (!mode_weights.empty()) {
    check(mode_weights.size() == mode_centers.size(),
          "ContinuousBandit2D: mode_weights size mismatch");
    double total = 0.0;
    for (double w : mode_weights) {
      check(w >= 0.0, "ContinuousBandit2D: negative mode weight");
      total += w;
    }
    check(std::fabs(total - 1.0) <= 1e-12, "ContinuousBandit2D: mode_weights sum to " +
                                               std::to_string(total));
  }
}

std::array<double, 2> ContinuousBandit2D::sample_action(Rng& rng) const {
  std::size_t k;
  if (mode_weights.empty()) {
    k = rng.uniform_index(mode_centers.size());
  } else {
    std::vector<double> w(mode_weights.begin(), mode_weights.end());
    k = rng.categorical(w);
  }
  return {mode_centers[k][0] + mode_std * rng.normal(),
          mode_centers[k][1] + mode_std * rng.normal()};
}

std::size_t ContinuousBandit2D::nearest_mode(double x, double y) const {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < mode_centers.size(); ++i) {
    const double dx = x - mode_centers[i][0];
    const double dy = y - mode_centers[i][1];
    const double d = dx * dx + dy * dy;
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

ContinuousBandit2D ContinuousBandit2D::three_modes() {
  ContinuousBandit2D b;
  b.mode_centers = {{0.2, 0.4}, {0.45, 0.8}, {0.9, 0.5}};  // sums 0.6, 1.25, 1.4
  b.mode_std = 0.015;
  return b;
}

void GridWorld::validate() const {
  check(width >= 1 && height >= 1, "GridWorld: degenerate dimensions");
  check(start < num_states() && goal < num_states(), "GridWorld: start/goal out of range");
  check(start != goal, "GridWorld: start equals goal");
  check(slip >= 0.0 && slip <= 1.0, "GridWorld: slip outside [0,1]");
  check(gamma >= 0.0 && gamma < 1.0, "GridWorld: gamma outside [0,1)");
}

std::size_t GridWorld::move(std::size_t cell, std::size_t action) const {
  const std::size_t x = cell % width;
  const std::size_t y = cell / width;
  switch (action) {
    case 0: return y + 1 < height ? cell + width : cell;  // up
    case 1: return y > 0 ? cell - width : cell;           // down
    case 2: return x > 0 ? cell - 1 : cell;               // left
    case 3: return x + 1 < width ? cell + 1 : cell;       // right
    default: fail("GridWorld::move: bad action " + std::to_string(action));
  }
}

std::vector<std::pair<std::size_t, double>> GridWorld::transitions(
    std::size_t cell, std::size_t action) const {
  std::vector<double> prob(num_states(), 0.0);
  // with probability slip, a uniformly random action replaces the intended one
  prob[move(cell, action)] += 1.0 - slip;
  for (std::size_t a = 0; a < kActions; ++a)
    prob[move(cell, a)] += slip / static_cast<double>(kActions);
  std::vector<std::pair<std::size_t, double>> out;
  for (std::size_t s = 0; s < prob.size(); ++s)
    if (prob[s] > 0.0) out.emplace_back(s, prob[s]);
  return out;
}

std::vector<double> GridEnv::reset(Rng&) {
  cell_ = grid_.start;
  return encode_state(cell_);
}

std::size_t GridEnv::action_index(const std::vector<double>& action) {
  check(action.size() == GridWorld::kActions,
        "GridEnv: action vector size " + std::to_string(action.size()));
  std::size_t best = 0;
  for (std::size_t i = 1; i < action.size(); ++i)
    if (action[i] > action[best]) best = i;
  return best;
}

std::vector<double> GridEnv::encode_state(std::size_t cell) const {
  std::vector<double> s(grid_.num_states(), 0.0);
  s[cell] = 1.0;
  return s;
}

Env::StepResult GridEnv::step(const std::vector<double>& action, Rng& rng) {
  if (cell_ == grid_.goal) {
    // absorbing exit: the goal reward is collected on the step taken from it
    return StepResult{encode_state(cell_), grid_.goal_reward, true};
  }
  std::size_t a = action_index(action);
  if (grid_.slip > 0.0 && rng.uniform() < grid_.slip)
    a = rng.uniform_index(GridWorld::kActions);
  cell_ = grid_.move(cell_, a);
  return StepResult{encode_state(cell_), grid_.step_reward, false};
}

Env::StepResult DiscreteBanditEnv::step(const std::vector<double>& action, Rng& rng) {
  check(action.size() == bandit_.arms(), "DiscreteBanditEnv: action size mismatch");
  std::size_t arm = 0;
  for (std::size_t i = 1; i < action.size(); ++i)
    if (action[i] > action[arm]) arm = i;
  double r = bandit_.reward_means[arm];
  if (bandit_.noise_std > 0.0) r += bandit_.noise_std * rng.normal();
  return StepResult{{1.0}, r, true};
}

Env::StepResult ContinuousBandit2DEnv::step(const std::vector<double>& action, Rng&) {
  check(action.size() == 2, "ContinuousBandit2DEnv: action size mismatch");
  return StepResult{{1.0}, bandit_.reward({action[0], action[1]}), true};
}

}  // namespace idql
