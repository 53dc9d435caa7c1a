#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "idql/tensor.hpp"

namespace idql {

// Named collection of trainable tensors. Iteration order is the sorted
// parameter path, which makes optimizer updates and serialization
// deterministic.
class ParamSet {
 public:
  Tensor& add(const std::string& path, Tensor t);
  Tensor& at(const std::string& path);
  const Tensor& at(const std::string& path) const;
  bool contains(const std::string& path) const { return params_.count(path) != 0; }

  std::size_t size() const { return params_.size(); }
  std::size_t num_values() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad();
  bool values_finite() const;

  std::uint64_t step_count() const { return step_count_; }
  void set_step_count(std::uint64_t n) { step_count_ = n; }
  void bump_step_count() { ++step_count_; }

  // Deep copy: fresh value and gradient buffers.
  ParamSet clone() const;

  // Flat binary checkpoint: header (version, count), then per parameter
  // (path length, path bytes, shape rank, dims, little-endian doubles).
  std::vector<std::uint8_t> serialize() const;
  static ParamSet deserialize(const std::vector<std::uint8_t>& bytes);
  void save(const std::string& path) const;
  static ParamSet load(const std::string& path);

 private:
  std::map<std::string, Tensor> params_;
  std::uint64_t step_count_ = 0;
};

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // When nonzero, the learning rate follows lr * 0.5 * (1 + cos(pi * t / horizon))
  // and clamps to zero past the horizon.
  std::uint64_t cosine_decay_horizon = 0;
};

// Adam with bias correction. Moment buffers are keyed by parameter path and
// created on first use; step() applies one update from the accumulated
// gradients and then clears them.
class Adam {
 public:
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

  double effective_lr() const;
  std::uint64_t steps_taken() const { return t_; }

  void step(ParamSet& params);

 private:
  AdamConfig cfg_;
  std::map<std::string, std::vector<double>> m_, v_;
  std::uint64_t t_ = 0;
};

// target <- (1 - rate) * target + rate * online, elementwise over matching
// parameter paths. Mismatched paths or shapes are an error.
void ema_update(ParamSet& target, const ParamSet& online, double rate);

// Copy values from src into dst; paths and shapes must match exactly.
void load_values(ParamSet& dst, const ParamSet& src);

}  // namespace idql
