#pragma once

#include <optional>
#include <string>
#include <vector>

#include "idql/dataset.hpp"
#include "idql/nn.hpp"

namespace idql {

enum class ScheduleKind { linear, cosine, vp };
ScheduleKind schedule_kind_from_string(const std::string& s);
std::string to_string(ScheduleKind k);

// Per-step noising coefficients for t = 1..T (index t-1). alpha_bars is the
// exact running product of (1 - beta_t).
struct DiffusionSchedule {
  ScheduleKind kind = ScheduleKind::vp;
  std::size_t T = 5;
  std::vector<double> betas;
  std::vector<double> alphas;
  std::vector<double> alpha_bars;

  double beta(std::size_t t) const { return betas.at(t - 1); }
  double alpha(std::size_t t) const { return alphas.at(t - 1); }
  double alpha_bar(std::size_t t) const { return alpha_bars.at(t - 1); }

  void validate() const;
  static DiffusionSchedule from_betas(ScheduleKind kind, std::vector<double> betas);
};

// kind selects the beta construction:
//   linear: beta affine from beta_min to beta_max, scaled by 1000/T
//           (defaults 1e-4 and 0.02 at the 1000-step reference length)
//   cosine: alpha_bar(t) = g(t/T)/g(0), g(u) = cos^2((u+0.008)/1.008 * pi/2),
//           betas clipped at 0.999
//   vp:     beta_t = 1 - exp(-beta_min/T - (beta_max-beta_min)(2t-1)/(2T^2)),
//           defaults beta_min=0.1, beta_max=20
// Betas outside (0,1) are an error.
DiffusionSchedule make_schedule(ScheduleKind kind, std::size_t T, double beta_min = -1.0,
                                double beta_max = -1.0);

// Closed-form marginal a_t = sqrt(alpha_bar_t) a0 + sqrt(1-alpha_bar_t) eps.
std::vector<double> forward_noise(const DiffusionSchedule& sched,
                                  const std::vector<double>& a0, std::size_t t,
                                  const std::vector<double>& eps);

enum class ScoreArch { mlp, ln_resnet };
ScoreArch score_arch_from_string(const std::string& s);
std::string to_string(ScoreArch a);

struct ScoreNetConfig {
  ScoreArch arch = ScoreArch::ln_resnet;
  std::size_t hidden_dim = 256;
  std::size_t n_blocks = 3;
  double dropout = 0.1;
  std::size_t time_embed_dim = 64;
  std::size_t action_dim = 0;
  std::size_t state_dim = 0;  // 0 = unconditional
  Activation act = Activation::mish;

  void validate() const;
  std::size_t input_dim() const { return action_dim + state_dim + time_embed_dim; }
  std::size_t param_count() const;
};

struct BcLossOptions {
  bool l1 = false;  // L1 norm instead of the squared L2 default
  // Optional per-row weights (e.g. exp(alpha * advantage) clipped), for the
  // weighted-regression ablation. Off by default.
  const std::vector<double>* weights = nullptr;
};

// DDPM noise-prediction model of the behavior policy. Actions are
// standardized internally; the normalization constants are stored as
// (non-trainable) parameters so checkpoints are self-contained.
class BehaviorModel {
 public:
  BehaviorModel(ScoreNetConfig cfg, DiffusionSchedule sched, Rng& init_rng);

  const ScoreNetConfig& config() const { return cfg_; }
  const DiffusionSchedule& schedule() const { return sched_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  // Estimate and store per-dimension action normalization from a dataset.
  void fit_normalizer(const OfflineDataset& dataset);

  // eps-prediction forward pass; a_t is standardized internally by the
  // caller-facing entry points. t holds one step index (1..T) per row.
  Tensor forward(Graph& g, const Tensor& a_t, const Tensor& s,
                 const std::vector<std::size_t>& t, bool train, Rng* dropout_rng) const;

  // Eq.-style DDPM loss: mean over the batch of ||eps - eps_hat||^2 (rows
  // summed over action dims), with t ~ U{1..T} and eps ~ N(0, I).
  Tensor bc_loss(Graph& g, const Batch& batch, Rng& rng,
                 const BcLossOptions& opts = {});

  struct SampleOptions {
    bool final_step_noise = false;  // add noise at t=1 (literal reverse rule)
    std::optional<std::pair<double, double>> clip_box;  // per-dim action clamp
  };

  // Draw n actions by running the full reverse chain; noise draws are
  // independent per sample, the network evaluation is batched.
  std::vector<double> sample(const std::vector<double>& state, std::size_t n, Rng& rng,
                             const SampleOptions& opts) const;
  std::vector<double> sample(const std::vector<double>& state, std::size_t n,
                             Rng& rng) const {
    return sample(state, n, rng, SampleOptions());
  }

  void save(const std::string& path) const { params_.save(path); }
  void load_params(const std::string& path);

 private:
  ScoreNetConfig cfg_;
  DiffusionSchedule sched_;
  ParamSet params_;
  std::vector<double> time_table_;  // (T+1) x time_embed_dim, row per step

  std::vector<double> normalize(const double* a) const;
  void denormalize_rows(std::vector<double>& rows, std::size_t n) const;
};

class CriticNets;  // critic.hpp

struct BehaviorTrainConfig {
  std::size_t steps = 2000000;
  std::size_t batch = 1024;
  double lr = 3e-4;
  bool cosine_decay = true;  // horizon = steps
  std::size_t report_every = 1000;
  bool l1 = false;
  // AWR-weighted DDPM ablation: rows weighted by min(exp(alpha*(Q-V)), clip).
  double awr_alpha = 0.0;  // 0 disables
  double awr_clip = 100.0;
  const CriticNets* awr_critic = nullptr;
};

struct BehaviorTrainPoint {
  std::size_t step = 0;
  double loss = 0.0;
};
using BehaviorReportSink = std::function<void(const BehaviorTrainPoint&)>;

// DDPM behavior cloning: Adam on the noise-prediction loss over uniform
// minibatches, with optional cosine learning-rate decay over the budget.
BehaviorModel train_behavior(const ScoreNetConfig& cfg, const DiffusionSchedule& sched,
                             const OfflineDataset& dataset,
                             const BehaviorTrainConfig& train_cfg, Rng& rng,
                             const BehaviorReportSink& sink = nullptr);

// Allocates the score network parameters for the configured architecture:
//   mlp:       input -> [Dense(hidden) act] x n_blocks -> Dense(action_dim)
//   ln_resnet: input -> Dense(hidden) -> n_blocks x
//              {x + Dense_h(act(Dense_4h(LayerNorm(Dropout(x)))))}
//              -> act -> Dense(action_dim)
// Each block's output layer and the final head start at zero, so the network
// predicts zero noise at initialization.
void build_score_net(const ScoreNetConfig& cfg, ParamSet& params, Rng& rng);

// Sinusoidal embedding table for integer steps 0..T (row-major).
std::vector<double> sinusoidal_time_table(std::size_t T, std::size_t dim);

}  // namespace idql
