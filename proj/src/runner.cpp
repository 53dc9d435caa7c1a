#include "idql/runner.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <memory>

#include "idql/critic.hpp"
#include "idql/dataset.hpp"
#include "idql/diffusion.hpp"
#include "idql/extraction.hpp"
#include "idql/finetune.hpp"
#include "idql/oracles.hpp"

namespace idql {

namespace {

using nlohmann::json;

// Collects artifacts and their content hashes; the manifest is written last.
class RunDir {
 public:
  explicit RunDir(std::string path) : path_(std::move(path)) {
    std::filesystem::create_directories(path_);
  }

  const std::string& path() const { return path_; }

  void write(const std::string& name, const std::string& content) {
    write_file(path_ + "/" + name, content);
    hashes_[name] = hex64(fnv1a64(content));
  }

  void write_bytes(const std::string& name, const std::vector<std::uint8_t>& bytes) {
    write_file(path_ + "/" + name, bytes.data(), bytes.size());
    hashes_[name] = hex64(fnv1a64(bytes.data(), bytes.size()));
  }

  std::string finalize(const ExperimentConfig& config) {
    json manifest;
    manifest["schema"] = 1;
    manifest["experiment"] = config.get("experiment");
    manifest["seed"] = config.get_int("seed");
    manifest["config_hash"] = config.hash_hex();
    manifest["hash_algorithm"] = "fnv1a64";
    manifest["files"] = hashes_;
    const std::string path = path_ + "/manifest.json";
    write_file(path, manifest.dump(2) + "\n");
    return path;
  }

 private:
  std::string path_;
  std::map<std::string, std::string> hashes_;
};

std::string csv_row(const std::vector<std::string>& cells) {
  std::string row;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) row += ",";
    row += cells[i];
  }
  row += "\n";
  return row;
}

// ---- config -> domain objects ----

GridWorld grid_from_config(const ExperimentConfig& c) {
  GridWorld g;
  g.width = static_cast<std::size_t>(c.get_int("env.width"));
  g.height = static_cast<std::size_t>(c.get_int("env.height"));
  g.start = 0;
  g.goal = g.width * g.height - 1;
  g.slip = c.get_double("env.slip");
  g.gamma = c.get_double("critic.gamma");
  g.validate();
  return g;
}

DiscreteBandit bandit_from_config(const ExperimentConfig& c) {
  DiscreteBandit b;
  b.reward_means = {1.0, 5.0, 10.0};  // low / medium / high clusters
  const auto arms = static_cast<std::size_t>(c.get_int("env.bandit_arms"));
  if (arms != 3) {
    b.reward_means.resize(arms);
    for (std::size_t i = 0; i < arms; ++i)
      b.reward_means[i] = 1.0 + 9.0 * static_cast<double>(i) /
                                    static_cast<double>(std::max<std::size_t>(arms - 1, 1));
  }
  b.noise_std = c.get_double("env.bandit_noise");
  b.behavior_probs.assign(b.arms(), 1.0 / static_cast<double>(b.arms()));
  double s = 0.0;
  for (double p : b.behavior_probs) s += p;
  b.behavior_probs[0] += 1.0 - s;
  return b;
}

ConvexLoss loss_from_config(const ExperimentConfig& c) {
  return ConvexLoss::make(loss_kind_from_string(c.get("loss.family")),
                          c.get_double("loss.param"));
}

CriticConfig critic_config(const ExperimentConfig& c) {
  CriticConfig cfg;
  cfg.hidden = c.get_dims("critic.hidden");
  cfg.act = activation_from_string(c.get("critic.activation"));
  cfg.twin = c.get_bool("critic.twin");
  cfg.lr = c.get_double("critic.lr");
  cfg.ema_rate = c.get_double("critic.ema");
  cfg.batch_size = static_cast<std::size_t>(c.get_int("critic.batch"));
  cfg.gamma = c.get_double("critic.gamma");
  cfg.loss = loss_from_config(c);
  cfg.steps = static_cast<std::size_t>(c.get_int("critic.steps"));
  cfg.report_every = static_cast<std::size_t>(c.get_int("report.every"));
  return cfg;
}

DiffusionSchedule schedule_from_config(const ExperimentConfig& c) {
  return make_schedule(schedule_kind_from_string(c.get("diffusion.schedule")),
                       static_cast<std::size_t>(c.get_int("diffusion.t")),
                       c.get_double("diffusion.beta_min"),
                       c.get_double("diffusion.beta_max"));
}

ScoreNetConfig score_config(const ExperimentConfig& c, std::size_t action_dim,
                            std::size_t state_dim) {
  ScoreNetConfig cfg;
  cfg.arch = score_arch_from_string(c.get("diffusion.arch"));
  cfg.hidden_dim = static_cast<std::size_t>(c.get_int("diffusion.hidden"));
  cfg.n_blocks = static_cast<std::size_t>(c.get_int("diffusion.blocks"));
  cfg.dropout = c.get_double("diffusion.dropout");
  cfg.time_embed_dim = static_cast<std::size_t>(c.get_int("diffusion.time_dim"));
  cfg.act = activation_from_string(c.get("diffusion.activation"));
  cfg.action_dim = action_dim;
  cfg.state_dim = state_dim;
  return cfg;
}

BehaviorTrainConfig behavior_train_config(const ExperimentConfig& c) {
  BehaviorTrainConfig cfg;
  cfg.steps = static_cast<std::size_t>(c.get_int("actor.steps"));
  cfg.batch = static_cast<std::size_t>(c.get_int("actor.batch"));
  cfg.lr = c.get_double("actor.lr");
  cfg.cosine_decay = c.get_bool("actor.cosine_decay");
  cfg.report_every = static_cast<std::size_t>(c.get_int("report.every"));
  cfg.awr_alpha = c.get_double("actor.awr_alpha");
  cfg.awr_clip = c.get_double("actor.awr_clip");
  return cfg;
}

ExtractionSpec extraction_spec(const ExperimentConfig& c) {
  ExtractionSpec spec;
  spec.n_samples = static_cast<std::size_t>(c.get_int("extraction.n"));
  spec.mode = extraction_mode_from_string(c.get("extraction.mode"));
  spec.loss = loss_from_config(c);
  if (c.get_bool("diffusion.clip_actions"))
    spec.sample_options.clip_box = {c.get_double("diffusion.clip_lo"),
                                    c.get_double("diffusion.clip_hi")};
  spec.sample_options.final_step_noise = c.get_bool("diffusion.final_noise");
  return spec;
}

// Dummy-state datasets (bandits, toy 2D) train unconditional behavior models.
std::size_t score_state_dim(const OfflineDataset& d) {
  if (d.state_dim() == 1 &&
      (d.env_id() == "bandit" || d.env_id() == "bandit2d" || d.env_id() == "toy2d"))
    return 0;
  return d.state_dim();
}

OfflineDataset toy2d_as_dataset(const Toy2DDataset& toy) {
  OfflineDataset d("toy2d", toy.seed, 1, 2,
                   "{\"generator\":\"" + toy.generator + "\"}");
  const std::vector<double> s{1.0};
  for (const auto& p : toy.points) d.push(s, {p[0], p[1]}, 0.0, s, true);
  return d;
}

DiscreteActionDistribution empirical_rewards(const std::vector<double>& rewards) {
  DiscreteActionDistribution dist;
  dist.q_values = rewards;
  dist.probs.assign(rewards.size(), 1.0 / static_cast<double>(rewards.size()));
  double s = 0.0;
  for (double p : dist.probs) s += p;
  dist.probs[0] += 1.0 - s;
  return dist;
}

std::string curve_csv(const std::vector<TrainReport>& reports) {
  std::string csv = "step,v_loss,q_loss,mean_v,mean_q\n";
  for (const auto& r : reports)
    csv += csv_row({std::to_string(r.step), fmt_g17(r.v_loss), fmt_g17(r.q_loss),
                    fmt_g17(r.mean_v), fmt_g17(r.mean_q)});
  return csv;
}

std::string behavior_curve_csv(const std::vector<BehaviorTrainPoint>& points) {
  std::string csv = "step,loss\n";
  for (const auto& p : points) csv += csv_row({std::to_string(p.step), fmt_g17(p.loss)});
  return csv;
}

std::string points_csv(const std::vector<double>& rows, std::size_t n, std::size_t dim) {
  std::string csv;
  for (std::size_t d = 0; d < dim; ++d) {
    if (d) csv += ",";
    csv += "x" + std::to_string(d);
  }
  csv += "\n";
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::string> cells;
    for (std::size_t d = 0; d < dim; ++d) cells.push_back(fmt_g17(rows[i * dim + d]));
    csv += csv_row(cells);
  }
  return csv;
}

// ---- experiments ----

void run_audit(const ExperimentConfig& c, RunDir& rd) {
  const auto n = static_cast<std::size_t>(c.get_int("audit.dists"));
  const std::vector<std::pair<LossKind, std::vector<double>>> sweep = {
      {LossKind::expectile, {0.6, 0.7, 0.8, 0.9}},
      {LossKind::quantile, {0.6, 0.8}},
      {LossKind::exponential, {0.5, 1.0, 2.0}},
  };
  Rng rng(static_cast<std::uint64_t>(c.get_int("seed")));
  json settings = json::array();
  double overall_fixed = 0.0, overall_stat = 0.0, overall_oracle = 0.0;
  for (const auto& [kind, params] : sweep) {
    for (double p : params) {
      const ConvexLoss loss = ConvexLoss::make(kind, p);
      Rng stream = rng.fork(to_string(kind) + "-" + fmt_g17(p));
      double max_fixed = 0.0, max_stat = 0.0, max_oracle = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto dist = oracles::random_distribution(stream);
        const auto rep = oracles::theorem1_audit(loss, dist);
        max_fixed = std::max(max_fixed, rep.fixed_point_residual);
        max_stat = std::max(max_stat,
                            std::max(0.0, rep.stationarity_residual - rep.atom_mass_at_v));
        max_oracle = std::max(max_oracle, rep.solver_vs_oracle);
      }
      settings.push_back({{"family", to_string(kind)},
                          {"param", p},
                          {"distributions", n},
                          {"max_fixed_point_residual", max_fixed},
                          {"max_stationarity_residual", max_stat},
                          {"max_solver_vs_oracle", max_oracle}});
      overall_fixed = std::max(overall_fixed, max_fixed);
      overall_stat = std::max(overall_stat, max_stat);
      overall_oracle = std::max(overall_oracle, max_oracle);
    }
  }
  json report = {{"settings", settings},
                 {"max_fixed_point_residual", overall_fixed},
                 {"max_stationarity_residual", overall_stat},
                 {"max_solver_vs_oracle", overall_oracle},
                 {"max_residual", std::max({overall_fixed, overall_stat, overall_oracle})}};
  rd.write("audit.json", report.dump(2) + "\n");
}

std::vector<double> sweep_params(LossKind kind) {
  if (kind == LossKind::exponential) {
    // 0.1 .. 10, log-spaced
    std::vector<double> alphas;
    for (int i = 0; i <= 12; ++i)
      alphas.push_back(std::pow(10.0, -1.0 + 2.0 * static_cast<double>(i) / 12.0));
    return alphas;
  }
  std::vector<double> taus;
  for (int i = 0; i <= 9; ++i) taus.push_back(0.5 + 0.05 * static_cast<double>(i));
  taus.push_back(0.99);
  return taus;
}

void run_bandit_sweep(const ExperimentConfig& c, RunDir& rd) {
  Rng rng(static_cast<std::uint64_t>(c.get_int("seed")));
  const DiscreteBandit bandit = bandit_from_config(c);
  Rng data_rng = rng.fork("bandit-data");
  const auto dataset = generate_bandit_dataset(
      bandit, static_cast<std::size_t>(c.get_int("dataset.size")), data_rng);
  const auto dist = empirical_rewards(dataset.rewards());

  std::string csv = "family,param,V_star,E_pi_imp_Q,fixed_point_gap\n";
  for (LossKind kind : {LossKind::expectile, LossKind::quantile, LossKind::exponential}) {
    for (double p : sweep_params(kind)) {
      const ConvexLoss loss = ConvexLoss::make(kind, p);
      const double v = solve_value(loss, dist);
      const auto pi = implicit_policy(loss, dist);
      double e_q = 0.0;
      for (std::size_t i = 0; i < dist.size(); ++i) e_q += pi[i] * dist.q_values[i];
      csv += csv_row({to_string(kind), fmt_g17(p), fmt_g17(v), fmt_g17(e_q),
                      fmt_g17(std::fabs(e_q - v))});
    }
  }
  rd.write("bandit_sweep.csv", csv);
}

void run_figure2(const ExperimentConfig& c, RunDir& rd) {
  Rng rng(static_cast<std::uint64_t>(c.get_int("seed")));
  const DiscreteBandit bandit = bandit_from_config(c);
  Rng data_rng = rng.fork("bandit-data");
  const auto dataset = generate_bandit_dataset(
      bandit, static_cast<std::size_t>(c.get_int("dataset.size")), data_rng);
  const auto dist = empirical_rewards(dataset.rewards());

  // implicit-actor reward statistics are exact under the resampling weights
  std::string csv = "family,param,V_star,mean_implicit_reward,std_implicit_reward\n";
  for (LossKind kind : {LossKind::expectile, LossKind::quantile, LossKind::exponential}) {
    for (double p : sweep_params(kind)) {
      const ConvexLoss loss = ConvexLoss::make(kind, p);
      const double v = solve_value(loss, dist);
      const auto pi = implicit_policy(loss, dist);
      double m = 0.0, m2 = 0.0;
      for (std::size_t i = 0; i < dist.size(); ++i) {
        m += pi[i] * dist.q_values[i];
        m2 += pi[i] * dist.q_values[i] * dist.q_values[i];
      }
      csv += csv_row({to_string(kind), fmt_g17(p), fmt_g17(v), fmt_g17(m),
                      fmt_g17(std::sqrt(std::max(0.0, m2 - m * m)))});
    }
  }
  rd.write("figure2.csv", csv);

  double mean = dataset.mean_reward();
  double var = 0.0;
  for (double r : dataset.rewards()) var += (r - mean) * (r - mean);
  var /= static_cast<double>(dataset.size());
  json stats = {{"behavior_mean_reward", mean},
                {"behavior_std_reward", std::sqrt(var)},
                {"noise_std", bandit.noise_std}};
  rd.write("behavior_stats.json", stats.dump(2) + "\n");
}

OfflineDataset dataset_for(const ExperimentConfig& c, Rng& rng) {
  const std::string path = c.get("dataset.path");
  if (!path.empty()) return OfflineDataset::load(path);
  const std::string kind = c.get("env.kind");
  Rng data_rng = rng.fork("dataset");
  if (kind == "bandit") {
    return generate_bandit_dataset(bandit_from_config(c),
                                   static_cast<std::size_t>(c.get_int("dataset.size")),
                                   data_rng);
  }
  if (kind == "bandit2d") {
    return generate_continuous_bandit_dataset(
        ContinuousBandit2D::three_modes(),
        static_cast<std::size_t>(c.get_int("dataset.size")), data_rng);
  }
  const GridWorld grid = grid_from_config(c);
  const auto vi = oracles::value_iteration(grid);
  GridworldMix mix;
  mix.optimal_policy = vi.policy;
  mix.optimal_fraction = c.get_double("dataset.mix");
  mix.epsilon = c.get_double("dataset.epsilon");
  mix.step_cap = static_cast<std::size_t>(c.get_int("dataset.step_cap"));
  return generate_gridworld_dataset(
      grid, mix, static_cast<std::size_t>(c.get_int("dataset.size")), data_rng);
}

std::unique_ptr<Env> env_for(const ExperimentConfig& c) {
  const std::string kind = c.get("env.kind");
  if (kind == "bandit") return std::make_unique<DiscreteBanditEnv>(bandit_from_config(c));
  if (kind == "bandit2d")
    return std::make_unique<ContinuousBandit2DEnv>(ContinuousBandit2D::three_modes());
  return std::make_unique<GridEnv>(grid_from_config(c));
}

void write_model_json(RunDir& rd, const OfflineDataset& dataset) {
  json model = {{"state_dim", dataset.state_dim()},
                {"action_dim", dataset.action_dim()},
                {"score_state_dim", score_state_dim(dataset)}};
  rd.write("model.json", model.dump(2) + "\n");
}

void run_train_offline(const ExperimentConfig& c, RunDir& rd) {
  Rng rng(static_cast<std::uint64_t>(c.get_int("seed")));
  OfflineDataset dataset = dataset_for(c, rng);
  rd.write_bytes("dataset.bin", dataset.serialize());
  write_model_json(rd, dataset);

  // critic
  std::vector<TrainReport> critic_curve;
  Rng critic_rng = rng.fork("critic");
  CriticNets critic = train_critic(critic_config(c), dataset, critic_rng,
                                   [&](const TrainReport& r) { critic_curve.push_back(r); });
  rd.write("critic_curve.csv", curve_csv(critic_curve));
  rd.write_bytes("q.ckpt", critic.q_params().serialize());
  rd.write_bytes("q_target.ckpt", critic.q_target_params().serialize());
  rd.write_bytes("v.ckpt", critic.v_params().serialize());

  // behavior model
  std::vector<BehaviorTrainPoint> actor_curve;
  Rng actor_rng = rng.fork("actor");
  BehaviorTrainConfig bt = behavior_train_config(c);
  if (bt.awr_alpha > 0.0) bt.awr_critic = &critic;
  BehaviorModel behavior = train_behavior(
      score_config(c, dataset.action_dim(), score_state_dim(dataset)),
      schedule_from_config(c), dataset, bt, actor_rng,
      [&](const BehaviorTrainPoint& p) { actor_curve.push_back(p); });
  rd.write("actor_curve.csv", behavior_curve_csv(actor_curve));
  rd.write_bytes("actor.ckpt", behavior.params().serialize());

  // evaluation
  auto env = env_for(c);
  Rng eval_rng = rng.fork("eval");
  const auto spec = extraction_spec(c);
  const auto stats = evaluate_policy(
      spec, *env, behavior, critic, static_cast<std::size_t>(c.get_int("eval.episodes")),
      eval_rng, static_cast<std::size_t>(c.get_int("eval.step_cap")),
      c.get_double("critic.gamma"));
  json eval = {{"mean_return", stats.mean_return},
               {"std_return", stats.std_return},
               {"episodes", stats.episodes},
               {"truncated", stats.truncated},
               {"config_hash", c.hash_hex()}};
  rd.write("eval.json", eval.dump(2) + "\n");

  json results = {{"dataset_size", dataset.size()},
                  {"dataset_mean_episode_return", dataset.mean_episode_return()},
                  {"eval_mean_return", stats.mean_return},
                  {"eval_std_return", stats.std_return}};
  rd.write("results.json", results.dump(2) + "\n");
}

struct LoadedModels {
  ExperimentConfig stored;
  OfflineDataset dataset;
  std::unique_ptr<CriticNets> critic;
  std::unique_ptr<BehaviorModel> behavior;
};

LoadedModels load_models(const ExperimentConfig& c) {
  const std::string dir = c.get("model.dir");
  check(!dir.empty(), "config field 'model.dir': required for this experiment");
  LoadedModels out{ExperimentConfig::from_file(dir + "/config.txt"),
                   OfflineDataset::load(dir + "/dataset.bin"), nullptr, nullptr};

  Rng dummy(0);
  out.critic = std::make_unique<CriticNets>(out.dataset.state_dim(),
                                            out.dataset.action_dim(),
                                            critic_config(out.stored), dummy);
  load_values(out.critic->q_params(), ParamSet::load(dir + "/q.ckpt"));
  load_values(out.critic->q_target_params(), ParamSet::load(dir + "/q_target.ckpt"));
  load_values(out.critic->v_params(), ParamSet::load(dir + "/v.ckpt"));

  Rng dummy2(0);
  out.behavior = std::make_unique<BehaviorModel>(
      score_config(out.stored, out.dataset.action_dim(), score_state_dim(out.dataset)),
      schedule_from_config(out.stored), dummy2);
  out.behavior->load_params(dir + "/actor.ckpt");
  return out;
}

void run_evaluate(const ExperimentConfig& c, RunDir& rd) {
  LoadedModels models = load_models(c);
  // env and nets from the stored training config; policy knobs from this one
  ExperimentConfig merged = models.stored;
  for (const char* key : {"extraction.mode", "extraction.n", "eval.episodes",
                          "eval.step_cap", "seed"})
    merged.set(key, c.get(key));

  auto env = env_for(merged);
  Rng rng(static_cast<std::uint64_t>(merged.get_int("seed")));
  Rng eval_rng = rng.fork("eval");
  const auto spec = extraction_spec(merged);
  const auto stats = evaluate_policy(
      spec, *env, *models.behavior, *models.critic,
      static_cast<std::size_t>(merged.get_int("eval.episodes")), eval_rng,
      static_cast<std::size_t>(merged.get_int("eval.step_cap")),
      merged.get_double("critic.gamma"));
  json eval = {{"mean_return", stats.mean_return},
               {"std_return", stats.std_return},
               {"episodes", stats.episodes},
               {"truncated", stats.truncated},
               {"config_hash", c.hash_hex()}};
  rd.write("eval.json", eval.dump(2) + "\n");
}

void run_finetune(const ExperimentConfig& c, RunDir& rd) {
  LoadedModels models = load_models(c);
  ExperimentConfig merged = models.stored;
  for (const char* key :
       {"finetune.mode", "finetune.env_steps", "finetune.critic_steps",
        "finetune.actor_steps", "finetune.eval_every", "finetune.eval_episodes",
        "finetune.explore_n", "extraction.mode", "extraction.n", "eval.episodes",
        "eval.step_cap", "seed"})
    merged.set(key, c.get(key));

  FinetuneConfig fcfg;
  fcfg.mode = finetune_mode_from_string(merged.get("finetune.mode"));
  fcfg.env_steps = static_cast<std::size_t>(merged.get_int("finetune.env_steps"));
  fcfg.critic_steps_per_env_step =
      static_cast<std::size_t>(merged.get_int("finetune.critic_steps"));
  fcfg.actor_steps_per_env_step =
      static_cast<std::size_t>(merged.get_int("finetune.actor_steps"));
  fcfg.episode_cap = static_cast<std::size_t>(merged.get_int("eval.step_cap"));
  fcfg.eval_every = static_cast<std::size_t>(merged.get_int("finetune.eval_every"));
  fcfg.eval_episodes = static_cast<std::size_t>(merged.get_int("finetune.eval_episodes"));
  fcfg.critic = critic_config(merged);
  fcfg.actor_lr = merged.get_double("actor.lr");
  fcfg.actor_batch = static_cast<std::size_t>(merged.get_int("actor.batch"));
  fcfg.eval_spec = extraction_spec(merged);
  fcfg.explore_spec = fcfg.eval_spec;
  fcfg.explore_spec.n_samples =
      static_cast<std::size_t>(merged.get_int("finetune.explore_n"));

  const std::uint64_t phi_before = fnv1a64(models.behavior->params().serialize().data(),
                                           models.behavior->params().serialize().size());
  auto env = env_for(merged);
  Rng rng(static_cast<std::uint64_t>(merged.get_int("seed")));
  OfflineDataset buffer = models.dataset;
  const auto result =
      finetune(*models.critic, *models.behavior, buffer, *env, fcfg, rng);

  const auto phi_bytes = models.behavior->params().serialize();
  const std::uint64_t phi_after = fnv1a64(phi_bytes.data(), phi_bytes.size());

  std::string csv = "env_step,eval_return_mean,eval_return_std\n";
  for (const auto& p : result.curve)
    csv += csv_row({std::to_string(p.env_step), fmt_g17(p.eval_return_mean),
                    fmt_g17(p.eval_return_std)});
  rd.write("curve.csv", csv);

  json results = {{"mode", merged.get("finetune.mode")},
                  {"env_steps", fcfg.env_steps},
                  {"buffer_size", result.buffer_size},
                  {"behavior_params_frozen", phi_before == phi_after},
                  {"final_return_mean", result.curve.back().eval_return_mean},
                  {"final_return_std", result.curve.back().eval_return_std},
                  {"pretrained_return_mean", result.curve.front().eval_return_mean}};
  rd.write("results.json", results.dump(2) + "\n");
  rd.write_bytes("q.ckpt", models.critic->q_params().serialize());
  rd.write_bytes("q_target.ckpt", models.critic->q_target_params().serialize());
  rd.write_bytes("v.ckpt", models.critic->v_params().serialize());
  rd.write_bytes("actor.ckpt", phi_bytes);
}

void run_ddpm_train(const ExperimentConfig& c, RunDir& rd) {
  Rng rng(static_cast<std::uint64_t>(c.get_int("seed")));
  OfflineDataset dataset;
  if (!c.get("dataset.path").empty()) {
    dataset = OfflineDataset::load(c.get("dataset.path"));
  } else {
    const auto toy = make_toy2d(c.get("data.generator"),
                                static_cast<std::size_t>(c.get_int("data.n")),
                                static_cast<std::uint64_t>(c.get_int("seed")));
    dataset = toy2d_as_dataset(toy);
  }
  rd.write_bytes("dataset.bin", dataset.serialize());
  write_model_json(rd, dataset);

  std::vector<BehaviorTrainPoint> curve;
  Rng actor_rng = rng.fork("actor");
  BehaviorModel model = train_behavior(
      score_config(c, dataset.action_dim(), score_state_dim(dataset)),
      schedule_from_config(c), dataset, behavior_train_config(c), actor_rng,
      [&](const BehaviorTrainPoint& p) { curve.push_back(p); });
  rd.write("actor_curve.csv", behavior_curve_csv(curve));
  rd.write_bytes("actor.ckpt", model.params().serialize());

  json results = {{"dataset_size", dataset.size()},
                  {"final_loss", curve.empty() ? 0.0 : curve.back().loss}};
  rd.write("results.json", results.dump(2) + "\n");
}

void run_ddpm_sample(const ExperimentConfig& c, RunDir& rd) {
  const std::string dir = c.get("model.dir");
  check(!dir.empty(), "config field 'model.dir': required for ddpm-sample");
  const ExperimentConfig stored = ExperimentConfig::from_file(dir + "/config.txt");
  const json model_meta = json::parse(read_text_file(dir + "/model.json"));
  const auto action_dim = model_meta.at("action_dim").get<std::size_t>();
  const auto sstate_dim = model_meta.at("score_state_dim").get<std::size_t>();
  check(sstate_dim == 0, "ddpm-sample: only unconditional models are supported");

  Rng dummy(0);
  BehaviorModel model(score_config(stored, action_dim, 0), schedule_from_config(stored),
                      dummy);
  model.load_params(dir + "/actor.ckpt");

  Rng rng(static_cast<std::uint64_t>(c.get_int("seed")));
  Rng sample_rng = rng.fork("sample");
  const auto n = static_cast<std::size_t>(c.get_int("sample.n"));
  BehaviorModel::SampleOptions opts;
  opts.final_step_noise = c.get_bool("diffusion.final_noise");
  const auto rows = model.sample({}, n, sample_rng, opts);
  rd.write("samples.csv", points_csv(rows, n, action_dim));
}

// outlier: farther than 4 sigma from every mode; covered: within 3 sigma of
// at least one mode
struct ModeMetrics {
  double outlier_fraction = 0.0;
  double coverage = 0.0;
};

ModeMetrics mode_metrics(const std::vector<double>& rows, std::size_t n,
                         const std::vector<std::array<double, 2>>& centers,
                         double sigma) {
  ModeMetrics m;
  std::size_t outliers = 0, covered = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& ctr : centers) {
      const double dx = rows[i * 2] - ctr[0];
      const double dy = rows[i * 2 + 1] - ctr[1];
      best = std::min(best, std::sqrt(dx * dx + dy * dy));
    }
    if (best > 4.0 * sigma) ++outliers;
    if (best <= 3.0 * sigma) ++covered;
  }
  m.outlier_fraction = static_cast<double>(outliers) / static_cast<double>(n);
  m.coverage = static_cast<double>(covered) / static_cast<double>(n);
  return m;
}

void run_figure4(const ExperimentConfig& c, RunDir& rd) {
  const auto toy = make_toy2d(c.get("data.generator"),
                              static_cast<std::size_t>(c.get_int("data.n")),
                              static_cast<std::uint64_t>(c.get_int("seed")));
  const OfflineDataset dataset = toy2d_as_dataset(toy);

  BehaviorTrainConfig bt = behavior_train_config(c);
  bt.batch = static_cast<std::size_t>(c.get_int("figure.batch"));
  bt.steps = static_cast<std::size_t>(c.get_int("figure.steps"));
  const auto n_samples = static_cast<std::size_t>(c.get_int("figure.samples"));

  json metrics;
  for (ScoreArch arch : {ScoreArch::mlp, ScoreArch::ln_resnet}) {
    ScoreNetConfig sc = score_config(c, 2, 0);
    sc.arch = arch;
    Rng rng(static_cast<std::uint64_t>(c.get_int("seed")));
    Rng train_rng = rng.fork(std::string("figure4-") + to_string(arch));
    BehaviorModel model = train_behavior(sc, schedule_from_config(c), dataset, bt,
                                         train_rng, nullptr);
    Rng sample_rng = rng.fork(std::string("figure4-sample-") + to_string(arch));
    const auto rows = model.sample({}, n_samples, sample_rng);
    rd.write(std::string("samples_") + to_string(arch) + ".csv",
             points_csv(rows, n_samples, 2));
    const auto m = mode_metrics(rows, n_samples, toy.mode_centers, toy.mode_std);
    metrics[to_string(arch)] = {{"outlier_fraction", m.outlier_fraction},
                                {"coverage_3sigma", m.coverage}};
  }
  rd.write("metrics.json", metrics.dump(2) + "\n");
}

void run_figure1(const ExperimentConfig& c, RunDir& rd) {
  Rng rng(static_cast<std::uint64_t>(c.get_int("seed")));
  const ContinuousBandit2D bandit = ContinuousBandit2D::three_modes();
  Rng data_rng = rng.fork("bandit2d-data");
  const auto dataset = generate_continuous_bandit_dataset(
      bandit, static_cast<std::size_t>(c.get_int("dataset.size")), data_rng);
  rd.write("behavior_samples.csv",
           points_csv(dataset.actions_flat(), dataset.size(), 2));

  // behavior expectile of the reward distribution
  const auto reward_dist = empirical_rewards(dataset.rewards());
  const ConvexLoss loss = loss_from_config(c);
  const double v_star = solve_value(loss, reward_dist);

  // diffusion behavior model + resampling (exact Q(a) = a1 + a2)
  Rng actor_rng = rng.fork("actor");
  BehaviorModel model = train_behavior(
      score_config(c, 2, 0), schedule_from_config(c), dataset,
      behavior_train_config(c), actor_rng, nullptr);
  Rng pool_rng = rng.fork("pool");
  const auto n_pool = static_cast<std::size_t>(c.get_int("figure.samples"));
  const auto pool = model.sample({}, n_pool, pool_rng);
  rd.write("model_samples.csv", points_csv(pool, n_pool, 2));

  std::vector<double> weights(n_pool);
  std::vector<double> mode_mass(bandit.mode_centers.size(), 0.0);
  double total_w = 0.0;
  for (std::size_t i = 0; i < n_pool; ++i) {
    const double q = pool[i * 2] + pool[i * 2 + 1];
    weights[i] = implicit_weight(loss, q, v_star);
    mode_mass[bandit.nearest_mode(pool[i * 2], pool[i * 2 + 1])] += weights[i];
    total_w += weights[i];
  }
  for (double& m : mode_mass) m /= total_w;

  // categorical resample from the weighted pool
  Rng resample_rng = rng.fork("resample");
  std::vector<double> resampled(n_pool * 2);
  for (std::size_t i = 0; i < n_pool; ++i) {
    const std::size_t j = resample_rng.categorical(weights);
    resampled[i * 2] = pool[j * 2];
    resampled[i * 2 + 1] = pool[j * 2 + 1];
  }
  rd.write("resampled.csv", points_csv(resampled, n_pool, 2));

  // top-reward mode by configured center sums
  std::size_t top_mode = 0;
  for (std::size_t k = 1; k < bandit.mode_centers.size(); ++k)
    if (bandit.mode_centers[k][0] + bandit.mode_centers[k][1] >
        bandit.mode_centers[top_mode][0] + bandit.mode_centers[top_mode][1])
      top_mode = k;

  // unimodal AWR fits on the behavior data at several inverse temperatures
  std::string awr_csv =
      "alpha,mean_x,mean_y,var_x,var_y,dist_mode0,dist_mode1,dist_mode2\n";
  json awr_summary = json::array();
  for (double alpha : {0.5, 3.0, 10.0}) {
    std::vector<double> w(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i)
      w[i] = std::exp(std::min(alpha * (dataset.reward(i) - v_star), 700.0));
    const auto fit =
        fit_weighted_gaussian(dataset.actions_flat(), dataset.size(), 2, w);
    std::vector<std::string> cells = {fmt_g17(alpha), fmt_g17(fit.mean[0]),
                                      fmt_g17(fit.mean[1]), fmt_g17(fit.var[0]),
                                      fmt_g17(fit.var[1])};
    json dists = json::array();
    for (const auto& ctr : bandit.mode_centers) {
      const double dx = fit.mean[0] - ctr[0];
      const double dy = fit.mean[1] - ctr[1];
      const double dist = std::sqrt(dx * dx + dy * dy);
      cells.push_back(fmt_g17(dist));
      dists.push_back(dist);
    }
    awr_csv += csv_row(cells);
    awr_summary.push_back({{"alpha", alpha},
                           {"mean", {fit.mean[0], fit.mean[1]}},
                           {"dist_to_modes", dists}});
  }
  rd.write("awr_fits.csv", awr_csv);

  json occupancy = {{"v_star", v_star},
                    {"top_mode", top_mode},
                    {"top_mode_mass", mode_mass[top_mode]},
                    {"mode_mass", mode_mass},
                    {"awr", awr_summary}};
  rd.write("occupancy.json", occupancy.dump(2) + "\n");
}

}  // namespace

std::string default_out_root() {
  const char* env = std::getenv("IDQL_OUT_ROOT");
  return env && *env ? std::string(env) : std::string("runs");
}

RunResult run(const ExperimentConfig& config, const std::string& out_root) {
  const std::string experiment = config.get("experiment");
  const std::string dir = out_root + "/" + experiment + "-s" + config.get("seed") + "-" +
                          config.hash_hex().substr(0, 8);
  RunDir rd(dir);
  rd.write("config.txt", config.to_string());

  if (experiment == "audit")
    run_audit(config, rd);
  else if (experiment == "bandit-sweep")
    run_bandit_sweep(config, rd);
  else if (experiment == "figure2")
    run_figure2(config, rd);
  else if (experiment == "train-offline")
    run_train_offline(config, rd);
  else if (experiment == "evaluate")
    run_evaluate(config, rd);
  else if (experiment == "finetune")
    run_finetune(config, rd);
  else if (experiment == "ddpm-train")
    run_ddpm_train(config, rd);
  else if (experiment == "ddpm-sample")
    run_ddpm_sample(config, rd);
  else if (experiment == "figure4")
    run_figure4(config, rd);
  else if (experiment == "figure1")
    run_figure1(config, rd);
  else
    fail("run: unknown experiment '" + experiment + "'");

  RunResult result;
  result.dir = dir;
  result.manifest_path = rd.finalize(config);
  return result;
}

}  // namespace idql
