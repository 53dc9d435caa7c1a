#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "idql/rng.hpp"

namespace idql {

// Minimal episodic environment interface. States and actions are dense
// vectors; discrete environments expose one-hot states and interpret the
// action vector by argmax so the same continuous-action machinery applies
// everywhere.
class Env {
 public:
  virtual ~Env() = default;
  virtual std::size_t state_dim() const = 0;
  virtual std::size_t action_dim() const = 0;
  virtual std::vector<double> reset(Rng& rng) = 0;
  struct StepResult {
    std::vector<double> state;
    double reward = 0.0;
    bool done = false;
  };
  virtual StepResult step(const std::vector<double>& action, Rng& rng) = 0;
  virtual std::string id() const = 0;
};

// K-armed bandit with Gaussian reward noise and a fixed behavior policy over
// arms. Episodes are a single step from a dummy state.
struct DiscreteBandit {
  std::vector<double> reward_means;
  double noise_std = 0.5;
  std::vector<double> behavior_probs;

  void validate() const;
  std::size_t arms() const { return reward_means.size(); }
};

// 2D continuous-action bandit: behavior actions come from a Gaussian mixture
// inside the unit box and the reward is r(a) = a1 + a2. Single dummy state.
struct ContinuousBandit2D {
  std::vector<std::array<double, 2>> mode_centers;
  double mode_std = 0.015;
  std::vector<double> mode_weights;  // empty = uniform

  void validate() const;
  double reward(const std::array<double, 2>& a) const { return a[0] + a[1]; }
  std::array<double, 2> sample_action(Rng& rng) const;
  std::size_t nearest_mode(double x, double y) const;

  // Three reward tiers (low / medium / high) with mode sums separated well
  // beyond the action noise.
  static ContinuousBandit2D three_modes();
};

// Sparse-reward navigation on a small grid. Moving costs step_reward; the
// goal cell is absorbing and pays goal_reward on the step taken from it,
// after which the episode terminates. With slip > 0 the executed action is
// replaced by a uniformly random one with that probability.
struct GridWorld {
  std::size_t width = 5;
  std::size_t height = 5;
  std::size_t start = 0;                 // cell index y*width + x
  std::size_t goal = 24;
  double step_reward = -0.01;
  double goal_reward = 1.0;
  double gamma = 0.99;
  double slip = 0.0;

  static constexpr std::size_t kActions = 4;  // up, down, left, right

  void validate() const;
  std::size_t num_states() const { return width * height; }
  std::size_t move(std::size_t cell, std::size_t action) const;
  // Transition distribution for a non-goal cell under slip.
  std::vector<std::pair<std::size_t, double>> transitions(std::size_t cell,
                                                          std::size_t action) const;
};

class GridEnv : public Env {
 public:
  explicit GridEnv(GridWorld grid) : grid_(grid) { grid_.validate(); }
  std::size_t state_dim() const override { return grid_.num_states(); }
  std::size_t action_dim() const override { return GridWorld::kActions; }
  std::vector<double> reset(Rng& rng) override;
  StepResult step(const std::vector<double>& action, Rng& rng) override;
  std::string id() const override { return "gridworld"; }

  const GridWorld& grid() const { return grid_; }
  std::size_t current_cell() const { return cell_; }
  static std::size_t action_index(const std::vector<double>& action);
  std::vector<double> encode_state(std::size_t cell) const;

 private:
  GridWorld grid_;
  std::size_t cell_ = 0;
};

class DiscreteBanditEnv : public Env {
 public:
  explicit DiscreteBanditEnv(DiscreteBandit bandit) : bandit_(std::move(bandit)) {
    bandit_.validate();
  }
  std::size_t state_dim() const override { return 1; }
  std::size_t action_dim() const override { return bandit_.arms(); }
  std::vector<double> reset(Rng&) override { return {1.0}; }
  StepResult step(const std::vector<double>& action, Rng& rng) override;
  std::string id() const override { return "bandit"; }

  const DiscreteBandit& bandit() const { return bandit_; }

 private:
  DiscreteBandit bandit_;
};

class ContinuousBandit2DEnv : public Env {
 public:
  explicit ContinuousBandit2DEnv(ContinuousBandit2D bandit) : bandit_(std::move(bandit)) {
    bandit_.validate();
  }
  std::size_t state_dim() const override { return 1; }
  std::size_t action_dim() const override { return 2; }
  std::vector<double> reset(Rng&) override { return {1.0}; }
  StepResult step(const std::vector<double>& action, Rng&) override;
  std::string id() const override { return "bandit2d"; }

  const ContinuousBandit2D& bandit() const { return bandit_; }

 private:
  ContinuousBandit2D bandit_;
};

}  // namespace idql
