#pragma once

#include <functional>
#include <optional>

#include "idql/convex_loss.hpp"
#include "idql/dataset.hpp"
#include "idql/nn.hpp"

namespace idql {

struct CriticConfig {
  std::vector<std::size_t> hidden = {256, 256};
  Activation act = Activation::relu;
  bool twin = true;  // clipped double-Q; false trains a single Q head
  double lr = 3e-4;
  double ema_rate = 0.005;
  std::size_t batch_size = 256;
  double gamma = 0.99;
  ConvexLoss loss = ConvexLoss{LossKind::expectile, 0.9};
  std::size_t steps = 1000000;
  std::size_t report_every = 1000;
};

struct TrainReport {
  std::size_t step = 0;
  double v_loss = 0.0;
  double q_loss = 0.0;
  double mean_v = 0.0;
  double mean_q = 0.0;
};

// Q_theta (twin online heads), the EMA target copy, and V_psi. All heads are
// MLPs over concat(state, action) or the state alone.
class CriticNets {
 public:
  CriticNets(std::size_t state_dim, std::size_t action_dim, const CriticConfig& cfg,
             Rng& init_rng);

  std::size_t state_dim() const { return state_dim_; }
  std::size_t action_dim() const { return action_dim_; }
  bool twin() const { return cfg_.twin; }

  ParamSet& q_params() { return q_params_; }
  ParamSet& q_target_params() { return q_target_params_; }
  ParamSet& v_params() { return v_params_; }
  const ParamSet& q_params() const { return q_params_; }
  const ParamSet& q_target_params() const { return q_target_params_; }
  const ParamSet& v_params() const { return v_params_; }

  // Graph forwards over a [B, state+action] input.
  Tensor q1_forward(Graph& g, const Tensor& sa) const;
  Tensor q2_forward(Graph& g, const Tensor& sa) const;
  Tensor v_forward(Graph& g, const Tensor& s) const;

  // Twin-minimum target Q values (no gradient), one per batch row.
  std::vector<double> q_target_min(const std::vector<double>& sa_rows,
                                   std::size_t batch) const;
  // Twin-minimum online Q values (no gradient).
  std::vector<double> q_min_batch(const std::vector<double>& sa_rows,
                                  std::size_t batch) const;
  double q_min(const std::vector<double>& s, const std::vector<double>& a) const;
  std::vector<double> v_batch(const std::vector<double>& s_rows, std::size_t batch) const;
  double v(const std::vector<double>& s) const;

  // Test hook: observes every (state, action) row fed to an online or target
  // Q head during loss construction.
  std::function<void(const std::vector<double>&)> q_input_probe;

 private:
  std::size_t state_dim_, action_dim_;
  CriticConfig cfg_;
  MlpSpec q1_spec_, q2_spec_, v_spec_;
  ParamSet q_params_, q_target_params_, v_params_;

  friend Tensor value_loss(Graph&, const ConvexLoss&, const Batch&, CriticNets&);
  friend Tensor q_loss(Graph&, const Batch&, CriticNets&, double);
};

// E_batch[f(Q_target(s,a) - V(s))]; gradient reaches only V's parameters.
Tensor value_loss(Graph& g, const ConvexLoss& loss, const Batch& batch, CriticNets& nets);

// Mean over batch and twins of (r + gamma (1-done) V(s') - Q(s,a))^2 with
// V detached.
Tensor q_loss(Graph& g, const Batch& batch, CriticNets& nets, double gamma);

using ReportSink = std::function<void(const TrainReport&)>;

// Algorithm: per iteration take a V step, a Q step, then the EMA update,
// sampling minibatches uniformly from the dataset. Throws on NaN losses with
// a diagnostic message.
CriticNets train_critic(const CriticConfig& cfg, const OfflineDataset& dataset, Rng& rng,
                        const ReportSink& sink = nullptr);

// One critic iteration on an existing net (used by finetuning).
TrainReport critic_step(CriticNets& nets, const CriticConfig& cfg, Adam& v_opt,
                        Adam& q_opt, const Batch& batch);

}  // namespace idql
