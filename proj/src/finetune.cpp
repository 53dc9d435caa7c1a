#include "idql/finetune.hpp"

#include <cmath>

namespace idql {

FinetuneMode finetune_mode_from_string(const std::string& s) {
  if (s == "max") return FinetuneMode::max_mode;
  if (s == "imp") return FinetuneMode::imp_mode;
  fail("unknown finetune mode '" + s + "' (expected max|imp)");
}

std::string to_string(FinetuneMode m) {
  return m == FinetuneMode::max_mode ? "max" : "imp";
}

FinetuneResult finetune(CriticNets& critic, BehaviorModel& behavior,
                        OfflineDataset& buffer, Env& env, const FinetuneConfig& cfg,
                        Rng& rng) {
  check(buffer.size() > 0, "finetune: empty starting buffer");
  FinetuneResult result;

  Rng eval_rng = rng.fork("finetune-eval");
  Rng act_rng = rng.fork("finetune-act");
  Rng batch_rng = rng.fork("finetune-batch");
  Rng bc_rng = rng.fork("finetune-bc");

  auto evaluate = [&](std::size_t env_step) {
    Rng r = eval_rng.fork(env_step);
    const auto stats = evaluate_policy(cfg.eval_spec, env, behavior, critic,
                                       cfg.eval_episodes, r, cfg.episode_cap);
    result.curve.push_back({env_step, stats.mean_return, stats.std_return});
  };

  evaluate(0);
  if (cfg.env_steps == 0) {
    result.buffer_size = buffer.size();
    return result;
  }

  Adam v_opt(AdamConfig{cfg.critic.lr});
  Adam q_opt(AdamConfig{cfg.critic.lr});
  Adam actor_opt(AdamConfig{cfg.actor_lr});

  // the mode dictates the exploration policy regardless of the spec's field
  ExtractionSpec explore_spec = cfg.explore_spec;
  explore_spec.mode = cfg.mode == FinetuneMode::max_mode
                          ? ExtractionMode::greedy
                          : ExtractionMode::implicit_resample;

  auto state = env.reset(act_rng);
  std::size_t episode_len = 0;
  for (std::size_t step = 1; step <= cfg.env_steps; ++step) {
    const auto action = act(explore_spec, state, behavior, critic, act_rng);
    auto res = env.step(action, act_rng);
    buffer.push(state, action, res.reward, res.state, res.done);
    ++episode_len;
    if (res.done || episode_len >= cfg.episode_cap) {
      state = env.reset(act_rng);
      episode_len = 0;
    } else {
      state = res.state;
    }

    const std::size_t critic_batch = std::min(cfg.critic.batch_size, buffer.size());
    for (std::size_t k = 0; k < cfg.critic_steps_per_env_step; ++k) {
      Batch batch = sample_batch(buffer, critic_batch, batch_rng);
      const auto rep = critic_step(critic, cfg.critic, v_opt, q_opt, batch);
      if (!std::isfinite(rep.v_loss) || !std::isfinite(rep.q_loss))
        fail("finetune: non-finite critic loss at env step " + std::to_string(step));
    }
    if (cfg.mode == FinetuneMode::imp_mode) {
      const std::size_t actor_batch = std::min(cfg.actor_batch, buffer.size());
      for (std::size_t k = 0; k < cfg.actor_steps_per_env_step; ++k) {
        Batch batch = sample_batch(buffer, actor_batch, batch_rng);
        Graph g;
        Tensor loss = behavior.bc_loss(g, batch, bc_rng);
        if (!std::isfinite(loss.item()))
          fail("finetune: non-finite behavior loss at env step " + std::to_string(step));
        g.backward(loss);
        actor_opt.step(behavior.params());
      }
    }

    if (step % cfg.eval_every == 0 || step == cfg.env_steps) evaluate(step);
  }
  result.buffer_size = buffer.size();
  return result;
}

}  // namespace idql
