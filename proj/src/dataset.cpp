#include "idql/dataset.hpp"

#include <algorithm>
#include <cmath>

namespace idql {

void OfflineDataset::push(const std::vector<double>& s, const std::vector<double>& a,
                          double r, const std::vector<double>& s2, bool done) {
  check(s.size() == state_dim_ && s2.size() == state_dim_,
        "OfflineDataset::push: state dim mismatch");
  check(a.size() == action_dim_, "OfflineDataset::push: action dim mismatch");
  states_.insert(states_.end(), s.begin(), s.end());
  actions_.insert(actions_.end(), a.begin(), a.end());
  rewards_.push_back(r);
  next_states_.insert(next_states_.end(), s2.begin(), s2.end());
  dones_.push_back(done ? 1.0 : 0.0);
}

double OfflineDataset::mean_reward() const {
  check(size() > 0, "OfflineDataset::mean_reward: empty dataset");
  double s = 0.0;
  for (double r : rewards_) s += r;
  return s / static_cast<double>(size());
}

double OfflineDataset::mean_episode_return() const {
  check(size() > 0, "OfflineDataset::mean_episode_return: empty dataset");
  double total = 0.0, episode = 0.0;
  std::size_t episodes = 0;
  for (std::size_t i = 0; i < size(); ++i) {
    episode += rewards_[i];
    if (dones_[i] != 0.0 || i + 1 == size()) {
      total += episode;
      episode = 0.0;
      ++episodes;
    }
  }
  return total / static_cast<double>(episodes);
}

namespace {
constexpr char kMagic[8] = {'I', 'D', 'Q', 'L', 'D', 'A', 'T', 'A'};
}

std::vector<std::uint8_t> OfflineDataset::serialize() const {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 8);
  put_u32(out, 1u);
  put_u32(out, static_cast<std::uint32_t>(env_id_.size()));
  out.insert(out.end(), env_id_.begin(), env_id_.end());
  put_u64(out, seed_);
  put_u64(out, static_cast<std::uint64_t>(size()));
  put_u32(out, static_cast<std::uint32_t>(state_dim_));
  put_u32(out, static_cast<std::uint32_t>(action_dim_));
  put_u32(out, static_cast<std::uint32_t>(metadata_.size()));
  out.insert(out.end(), metadata_.begin(), metadata_.end());
  for (std::size_t i = 0; i < size(); ++i) {
    for (std::size_t d = 0; d < state_dim_; ++d) put_f64(out, states_[i * state_dim_ + d]);
    for (std::size_t d = 0; d < action_dim_; ++d)
      put_f64(out, actions_[i * action_dim_ + d]);
    put_f64(out, rewards_[i]);
    for (std::size_t d = 0; d < state_dim_; ++d)
      put_f64(out, next_states_[i * state_dim_ + d]);
    put_f64(out, dones_[i]);
  }
  return out;
}

OfflineDataset OfflineDataset::deserialize(const std::vector<std::uint8_t>& bytes) {
  std::size_t pos = 0;
  auto need = [&](std::size_t n) {
    check(pos + n <= bytes.size(), "OfflineDataset::deserialize: truncated file");
  };
  need(8);
  check(std::equal(kMagic, kMagic + 8, bytes.begin()),
        "OfflineDataset::deserialize: bad magic");
  pos += 8;
  need(4);
  const std::uint32_t version = get_u32(bytes.data() + pos);
  pos += 4;
  check(version == 1, "OfflineDataset::deserialize: unsupported version");
  need(4);
  const std::uint32_t id_len = get_u32(bytes.data() + pos);
  pos += 4;
  need(id_len);
  std::string env_id(reinterpret_cast<const char*>(bytes.data() + pos), id_len);
  pos += id_len;
  need(8 + 8 + 4 + 4 + 4);
  const std::uint64_t seed = get_u64(bytes.data() + pos);
  pos += 8;
  const std::uint64_t count = get_u64(bytes.data() + pos);
  pos += 8;
  const std::uint32_t sd = get_u32(bytes.data() + pos);
  pos += 4;
  const std::uint32_t ad = get_u32(bytes.data() + pos);
  pos += 4;
  const std::uint32_t meta_len = get_u32(bytes.data() + pos);
  pos += 4;
  need(meta_len);
  std::string meta(reinterpret_cast<const char*>(bytes.data() + pos), meta_len);
  pos += meta_len;

  OfflineDataset out(env_id, seed, sd, ad, meta);
  const std::size_t rec = (2 * sd + ad + 2) * 8;
  need(count * rec);
  std::vector<double> s(sd), a(ad), s2(sd);
  for (std::uint64_t i = 0; i < count; ++i) {
    for (auto& v : s) {
      v = get_f64(bytes.data() + pos);
      pos += 8;
    }
    for (auto& v : a) {
      v = get_f64(bytes.data() + pos);
      pos += 8;
    }
    const double r = get_f64(bytes.data() + pos);
    pos += 8;
    for (auto& v : s2) {
      v = get_f64(bytes.data() + pos);
      pos += 8;
    }
    const double done = get_f64(bytes.data() + pos);
    pos += 8;
    out.push(s, a, r, s2, done != 0.0);
  }
  check(pos == bytes.size(), "OfflineDataset::deserialize: trailing bytes");
  return out;
}

void OfflineDataset::save(const std::string& path) const {
  auto bytes = serialize();
  write_file(path, bytes.data(), bytes.size());
}

OfflineDataset OfflineDataset::load(const std::string& path) {
  return deserialize(read_file(path));
}

Batch sample_batch(const OfflineDataset& dataset, std::size_t batch_size, Rng& rng) {
  check(dataset.size() > 0, "sample_batch: empty dataset");
  check(batch_size > 0 && batch_size <= dataset.size(),
        "sample_batch: batch size " + std::to_string(batch_size) +
            " out of range for dataset of " + std::to_string(dataset.size()));
  Batch b;
  b.size = batch_size;
  b.state_dim = dataset.state_dim();
  b.action_dim = dataset.action_dim();
  b.states.reserve(batch_size * b.state_dim);
  b.actions.reserve(batch_size * b.action_dim);
  b.rewards.reserve(batch_size);
  b.next_states.reserve(batch_size * b.state_dim);
  b.dones.reserve(batch_size);
  for (std::size_t k = 0; k < batch_size; ++k) {
    const std::size_t i = rng.uniform_index(dataset.size());
    b.states.insert(b.states.end(), dataset.state(i), dataset.state(i) + b.state_dim);
    b.actions.insert(b.actions.end(), dataset.action(i), dataset.action(i) + b.action_dim);
    b.rewards.push_back(dataset.reward(i));
    b.next_states.insert(b.next_states.end(), dataset.next_state(i),
                         dataset.next_state(i) + b.state_dim);
    b.dones.push_back(dataset.done(i) ? 1.0 : 0.0);
  }
  return b;
}

OfflineDataset generate_bandit_dataset(const DiscreteBandit& bandit, std::size_t n,
                                       Rng& rng) {
  bandit.validate();
  check(n >= 1, "generate_bandit_dataset: n must be >= 1");
  std::string meta = "{\"generator\":\"discrete_bandit\",\"arms\":" +
                     std::to_string(bandit.arms()) +
                     ",\"noise_std\":" + fmt_g17(bandit.noise_std) + "}";
  OfflineDataset out("bandit", rng.seed(), 1, bandit.arms(), meta);
  const std::vector<double> s{1.0};
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> w(bandit.behavior_probs);
    const std::size_t arm = rng.categorical(w);
    std::vector<double> a(bandit.arms(), 0.0);
    a[arm] = 1.0;
    double r = bandit.reward_means[arm];
    if (bandit.noise_std > 0.0) r += bandit.noise_std * rng.normal();
    out.push(s, a, r, s, true);
  }
  return out;
}

OfflineDataset generate_continuous_bandit_dataset(const ContinuousBandit2D& bandit,
                                                  std::size_t n, Rng& rng) {
  bandit.validate();
  check(n >= 1, "generate_continuous_bandit_dataset: n must be >= 1");
  std::string meta = "{\"generator\":\"continuous_bandit2d\",\"modes\":" +
                     std::to_string(bandit.mode_centers.size()) +
                     ",\"mode_std\":" + fmt_g17(bandit.mode_std) + "}";
  OfflineDataset out("bandit2d", rng.seed(), 1, 2, meta);
  const std::vector<double> s{1.0};
  for (std::size_t i = 0; i < n; ++i) {
    const auto a = bandit.sample_action(rng);
    out.push(s, {a[0], a[1]}, bandit.reward(a), s, true);
  }
  return out;
}

OfflineDataset generate_gridworld_dataset(const GridWorld& grid, const GridworldMix& mix,
                                          std::size_t n_steps, Rng& rng) {
  grid.validate();
  check(mix.optimal_policy.size() == grid.num_states(),
        "generate_gridworld_dataset: policy table size mismatch");
  check(mix.optimal_fraction >= 0.0 && mix.optimal_fraction <= 1.0,
        "generate_gridworld_dataset: optimal_fraction outside [0,1]");
  std::string meta = "{\"generator\":\"gridworld_mix\",\"optimal_fraction\":" +
                     fmt_g17(mix.optimal_fraction) +
                     ",\"epsilon\":" + fmt_g17(mix.epsilon) +
                     ",\"step_cap\":" + std::to_string(mix.step_cap) + "}";
  OfflineDataset out("gridworld", rng.seed(), grid.num_states(), GridWorld::kActions,
                     meta);
  GridEnv env(grid);
  while (out.size() < n_steps) {
    const bool use_optimal = rng.uniform() < mix.optimal_fraction;
    auto s = env.reset(rng);
    for (std::size_t t = 0; t < mix.step_cap && out.size() < n_steps; ++t) {
      std::size_t a;
      if (!use_optimal || rng.uniform() < mix.epsilon)
        a = rng.uniform_index(GridWorld::kActions);
      else
        a = mix.optimal_policy[env.current_cell()];
      std::vector<double> av(GridWorld::kActions, 0.0);
      av[a] = 1.0;
      auto res = env.step(av, rng);
      out.push(s, av, res.reward, res.state, res.done);
      s = res.state;
      if (res.done) break;
    }
  }
  return out;
}

Toy2DDataset make_toy2d(const std::string& generator, std::size_t n, std::uint64_t seed) {
  check(n >= 1, "make_toy2d: n must be >= 1");
  Toy2DDataset out;
  out.generator = generator;
  out.seed = seed;
  out.points.reserve(n);
  Rng rng(seed);
  if (generator == "gaussians8") {
    out.mode_std = 0.05;
    const double radius = 2.0;
    for (std::size_t k = 0; k < 8; ++k) {
      const double theta = 2.0 * 3.14159265358979323846 * static_cast<double>(k) / 8.0;
      out.mode_centers.push_back({radius * std::cos(theta), radius * std::sin(theta)});
    }
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t k = rng.uniform_index(8);
      out.points.push_back({out.mode_centers[k][0] + out.mode_std * rng.normal(),
                            out.mode_centers[k][1] + out.mode_std * rng.normal()});
    }
  } else if (generator == "moons") {
    const double noise = 0.05;
    for (std::size_t i = 0; i < n; ++i) {
      const double t = 3.14159265358979323846 * rng.uniform();
      if (rng.uniform() < 0.5) {
        out.points.push_back({std::cos(t) + noise * rng.normal(),
                              std::sin(t) + noise * rng.normal()});
      } else {
        out.points.push_back({1.0 - std::cos(t) + noise * rng.normal(),
                              0.5 - std::sin(t) + noise * rng.normal()});
      }
    }
  } else if (generator == "spiral") {
    const double noise = 0.05;
    for (std::size_t i = 0; i < n; ++i) {
      const double t = 3.0 * 3.14159265358979323846 * std::sqrt(rng.uniform());
      const double r = 0.25 * t;
      out.points.push_back(
          {r * std::cos(t) + noise * rng.normal(), r * std::sin(t) + noise * rng.normal()});
    }
  } else {
    fail("make_toy2d: unknown generator '" + generator +
         "' (expected gaussians8|moons|spiral)");
  }
  return out;
}

}  // namespace idql
