#pragma once

#include <optional>

#include "idql/convex_loss.hpp"
#include "idql/critic.hpp"
#include "idql/diffusion.hpp"
#include "idql/envs.hpp"

namespace idql {

enum class ExtractionMode { implicit_resample, greedy };
ExtractionMode extraction_mode_from_string(const std::string& s);
std::string to_string(ExtractionMode m);

struct ExtractionSpec {
  std::size_t n_samples = 64;
  ExtractionMode mode = ExtractionMode::greedy;
  ConvexLoss loss = ConvexLoss{LossKind::expectile, 0.9};  // used by implicit mode
  BehaviorModel::SampleOptions sample_options;

  void validate() const;
};

struct ActDiagnostics {
  std::size_t zero_weight_fallbacks = 0;
};

// One action: draw N candidates from the behavior model, weight them with
// the critic (importance weights in implicit mode, an argmax one-hot in
// greedy mode), and resample. Greedy mode is deterministic given the
// candidate set; ties break toward the lowest index. A candidate set with
// all-zero weights falls back to a uniform draw and is counted in diag.
std::vector<double> act(const ExtractionSpec& spec, const std::vector<double>& state,
                        const BehaviorModel& behavior, const CriticNets& critic, Rng& rng,
                        ActDiagnostics* diag = nullptr);

struct EvalStats {
  double mean_return = 0.0;
  double std_return = 0.0;
  std::size_t episodes = 0;
  std::size_t truncated = 0;          // episodes that hit the step cap
  double mean_discounted_return = 0.0;
};

// Rolls out act() for the requested number of episodes and reports
// undiscounted return statistics (discounted as a secondary output).
EvalStats evaluate_policy(const ExtractionSpec& spec, Env& env,
                          const BehaviorModel& behavior, const CriticNets& critic,
                          std::size_t episodes, Rng& rng, std::size_t step_cap = 200,
                          double discount = 0.99);

// Weighted maximum-likelihood Gaussian over actions (the unimodal
// advantage-weighted regression baseline): mean and per-dimension variance
// of the rows under the given nonnegative weights.
struct GaussianFit {
  std::vector<double> mean;
  std::vector<double> var;
};
GaussianFit fit_weighted_gaussian(const std::vector<double>& action_rows,
                                  std::size_t n_rows, std::size_t dim,
                                  const std::vector<double>& weights);

}  // namespace idql
