#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "idql/envs.hpp"
#include "idql/rng.hpp"

namespace idql {

// Column layout of a minibatch; rows are transitions.
struct Batch {
  std::size_t size = 0;
  std::size_t state_dim = 0;
  std::size_t action_dim = 0;
  std::vector<double> states;       // size x state_dim
  std::vector<double> actions;      // size x action_dim
  std::vector<double> rewards;      // size
  std::vector<double> next_states;  // size x state_dim
  std::vector<double> dones;        // size, 0 or 1
};

// Immutable set of recorded transitions plus generator metadata. The binary
// file format is: magic "IDQLDATA", u32 version, length-prefixed env id,
// u64 seed, u64 transition count, u32 state dim, u32 action dim,
// length-prefixed UTF-8 JSON metadata, then packed little-endian doubles per
// transition (s, a, r, s', done).
class OfflineDataset {
 public:
  OfflineDataset() = default;
  OfflineDataset(std::string env_id, std::uint64_t seed, std::size_t state_dim,
                 std::size_t action_dim, std::string metadata_json = "{}")
      : env_id_(std::move(env_id)),
        seed_(seed),
        state_dim_(state_dim),
        action_dim_(action_dim),
        metadata_(std::move(metadata_json)) {}

  void push(const std::vector<double>& s, const std::vector<double>& a, double r,
            const std::vector<double>& s2, bool done);

  std::size_t size() const { return rewards_.size(); }
  std::size_t state_dim() const { return state_dim_; }
  std::size_t action_dim() const { return action_dim_; }
  const std::string& env_id() const { return env_id_; }
  std::uint64_t seed() const { return seed_; }
  const std::string& metadata() const { return metadata_; }
  void set_metadata(std::string json) { metadata_ = std::move(json); }

  const double* state(std::size_t i) const { return states_.data() + i * state_dim_; }
  const double* action(std::size_t i) const { return actions_.data() + i * action_dim_; }
  double reward(std::size_t i) const { return rewards_[i]; }
  const double* next_state(std::size_t i) const {
    return next_states_.data() + i * state_dim_;
  }
  bool done(std::size_t i) const { return dones_[i] != 0.0; }

  const std::vector<double>& rewards() const { return rewards_; }
  const std::vector<double>& actions_flat() const { return actions_; }
  const std::vector<double>& states_flat() const { return states_; }

  double mean_reward() const;
  // Mean per-episode undiscounted return, using done flags as boundaries.
  double mean_episode_return() const;

  std::vector<std::uint8_t> serialize() const;
  static OfflineDataset deserialize(const std::vector<std::uint8_t>& bytes);
  void save(const std::string& path) const;
  static OfflineDataset load(const std::string& path);

 private:
  std::string env_id_;
  std::uint64_t seed_ = 0;
  std::size_t state_dim_ = 0;
  std::size_t action_dim_ = 0;
  std::string metadata_ = "{}";
  std::vector<double> states_, actions_, rewards_, next_states_, dones_;
};

// Uniform minibatch with replacement; deterministic per RNG stream.
Batch sample_batch(const OfflineDataset& dataset, std::size_t batch_size, Rng& rng);

// One-step episodes from a discrete bandit: arm ~ behavior policy, reward =
// mean + N(0, noise^2), actions stored one-hot.
OfflineDataset generate_bandit_dataset(const DiscreteBandit& bandit, std::size_t n,
                                       Rng& rng);

// One-step episodes from the 2D continuous bandit; actions are the sampled
// mixture points and rewards are a1 + a2.
OfflineDataset generate_continuous_bandit_dataset(const ContinuousBandit2D& bandit,
                                                  std::size_t n, Rng& rng);

// Trajectory data from a mixture of an eps-greedy policy around the supplied
// action table and a uniform-random policy. Each episode picks one component
// with probability optimal_fraction. States/actions stored one-hot.
struct GridworldMix {
  std::vector<std::size_t> optimal_policy;  // per-cell action table
  double optimal_fraction = 0.5;
  double epsilon = 0.1;   // exploration inside the near-optimal component
  std::size_t step_cap = 100;
};
OfflineDataset generate_gridworld_dataset(const GridWorld& grid, const GridworldMix& mix,
                                          std::size_t n_steps, Rng& rng);

// 2D point sets for density-modeling experiments.
struct Toy2DDataset {
  std::vector<std::array<double, 2>> points;
  std::string generator;
  std::uint64_t seed = 0;
  // gaussians8 mode layout, recorded for mode-assignment checks
  std::vector<std::array<double, 2>> mode_centers;
  double mode_std = 0.0;
};

// gaussians8: 8 modes equally spaced on a radius-2 circle with sigma 0.05.
// moons: two interleaved half circles with 0.05 noise. spiral: a single
// Archimedean arm with 0.05 noise.
Toy2DDataset make_toy2d(const std::string& generator, std::size_t n, std::uint64_t seed);

}  // namespace idql
