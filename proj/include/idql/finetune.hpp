#pragma once

#include "idql/critic.hpp"
#include "idql/extraction.hpp"

namespace idql {

enum class FinetuneMode { max_mode, imp_mode };
FinetuneMode finetune_mode_from_string(const std::string& s);
std::string to_string(FinetuneMode m);

struct FinetuneConfig {
  FinetuneMode mode = FinetuneMode::max_mode;
  std::size_t env_steps = 20000;
  std::size_t critic_steps_per_env_step = 1;
  std::size_t actor_steps_per_env_step = 2;  // used only when the actor trains
  std::size_t episode_cap = 100;
  std::size_t eval_every = 2000;   // environment steps between evaluations
  std::size_t eval_episodes = 50;
  CriticConfig critic;             // loss/lr/batch settings for online updates
  double actor_lr = 3e-4;
  std::size_t actor_batch = 256;
  ExtractionSpec explore_spec;     // N and sampling options for exploration
  ExtractionSpec eval_spec;        // evaluation policy (same contract as offline)
};

struct FinetunePoint {
  std::size_t env_step = 0;
  double eval_return_mean = 0.0;
  double eval_return_std = 0.0;
};

struct FinetuneResult {
  std::vector<FinetunePoint> curve;
  std::size_t buffer_size = 0;
};

// Online improvement loop. Per environment step: act with the mode's
// exploration policy (argmax in Max mode, implicit resampling in Imp mode),
// append the transition to the replay buffer, then take the configured
// critic gradient steps (and behavior-cloning steps in Imp mode only; Max
// mode never touches the behavior parameters). The buffer starts as the
// offline dataset and grows by exactly one transition per env step.
FinetuneResult finetune(CriticNets& critic, BehaviorModel& behavior,
                        OfflineDataset& buffer, Env& env, const FinetuneConfig& cfg,
                        Rng& rng);

}  // namespace idql
