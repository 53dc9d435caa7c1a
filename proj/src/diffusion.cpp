#include "idql/diffusion.hpp"

#include <algorithm>
#include <cmath>

#include "idql/critic.hpp"

namespace idql {

namespace {
// exp(alpha * advantage) capped at clip, one weight per batch row
std::vector<double> awr_weights(const CriticNets& critic, const Batch& b, double alpha,
                                double clip) {
  std::vector<double> sa;
  sa.reserve(b.size * (b.state_dim + b.action_dim));
  for (std::size_t i = 0; i < b.size; ++i) {
    sa.insert(sa.end(), b.states.begin() + i * b.state_dim,
              b.states.begin() + (i + 1) * b.state_dim);
    sa.insert(sa.end(), b.actions.begin() + i * b.action_dim,
              b.actions.begin() + (i + 1) * b.action_dim);
  }
  const auto q = critic.q_min_batch(sa, b.size);
  const auto v = critic.v_batch(b.states, b.size);
  std::vector<double> w(b.size);
  for (std::size_t i = 0; i < b.size; ++i)
    w[i] = std::min(std::exp(std::min(alpha * (q[i] - v[i]), 700.0)), clip);
  return w;
}
}  // namespace

ScheduleKind schedule_kind_from_string(const std::string& s) {
  if (s == "linear") return ScheduleKind::linear;
  if (s == "cosine") return ScheduleKind::cosine;
  if (s == "vp") return ScheduleKind::vp;
  fail("unknown schedule '" + s + "' (expected linear|cosine|vp)");
}

std::string to_string(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::linear: return "linear";
    case ScheduleKind::cosine: return "cosine";
    case ScheduleKind::vp: return "vp";
  }
  return "vp";
}

void DiffusionSchedule::validate() const {
  check(T >= 1 && betas.size() == T && alphas.size() == T && alpha_bars.size() == T,
        "DiffusionSchedule: inconsistent sizes");
  double prod = 1.0;
  for (std::size_t i = 0; i < T; ++i) {
    check(betas[i] > 0.0 && betas[i] < 1.0,
          "DiffusionSchedule: beta_" + std::to_string(i + 1) + " = " +
              std::to_string(betas[i]) + " outside (0,1)");
    check(alphas[i] == 1.0 - betas[i], "DiffusionSchedule: alpha mismatch");
    prod *= alphas[i];
    check(alpha_bars[i] == prod, "DiffusionSchedule: alpha_bar is not the running product");
    if (i > 0)
      check(alpha_bars[i] < alpha_bars[i - 1],
            "DiffusionSchedule: alpha_bar not strictly decreasing");
  }
}

DiffusionSchedule DiffusionSchedule::from_betas(ScheduleKind kind,
                                                std::vector<double> betas) {
  DiffusionSchedule s;
  s.kind = kind;
  s.T = betas.size();
  s.betas = std::move(betas);
  s.alphas.resize(s.T);
  s.alpha_bars.resize(s.T);
  double prod = 1.0;
  for (std::size_t i = 0; i < s.T; ++i) {
    check(s.betas[i] > 0.0 && s.betas[i] < 1.0,
          "make_schedule: beta_" + std::to_string(i + 1) + " = " +
              std::to_string(s.betas[i]) + " outside (0,1)");
    s.alphas[i] = 1.0 - s.betas[i];
    prod *= s.alphas[i];
    s.alpha_bars[i] = prod;
  }
  s.validate();
  return s;
}

DiffusionSchedule make_schedule(ScheduleKind kind, std::size_t T, double beta_min,
                                double beta_max) {
  check(T >= 1, "make_schedule: T must be >= 1");
  std::vector<double> betas(T);
  switch (kind) {
    case ScheduleKind::linear: {
      // 1000-step reference values scaled to the actual chain length
      if (beta_min < 0.0) beta_min = 1e-4;
      if (beta_max < 0.0) beta_max = 0.02;
      const double scale = 1000.0 / static_cast<double>(T);
      for (std::size_t t = 1; t <= T; ++t) {
        const double frac = T == 1 ? 0.0
                                   : static_cast<double>(t - 1) /
                                         static_cast<double>(T - 1);
        betas[t - 1] = scale * (beta_min + frac * (beta_max - beta_min));
      }
      break;
    }
    case ScheduleKind::cosine: {
      auto g = [](double u) {
        const double x = (u + 0.008) / 1.008 * 1.5707963267948966;
        const double c = std::cos(x);
        return c * c;
      };
      const double g0 = g(0.0);
      double prev_bar = 1.0;
      for (std::size_t t = 1; t <= T; ++t) {
        const double bar = g(static_cast<double>(t) / static_cast<double>(T)) / g0;
        double beta = 1.0 - bar / prev_bar;
        beta = std::min(beta, 0.999);
        betas[t - 1] = beta;
        prev_bar = bar;
      }
      break;
    }
    case ScheduleKind::vp: {
      if (beta_min < 0.0) beta_min = 0.1;
      if (beta_max < 0.0) beta_max = 20.0;
      const double Td = static_cast<double>(T);
      for (std::size_t t = 1; t <= T; ++t) {
        const double td = static_cast<double>(t);
        betas[t - 1] = 1.0 - std::exp(-beta_min / Td -
                                      (beta_max - beta_min) * (2.0 * td - 1.0) /
                                          (2.0 * Td * Td));
      }
      break;
    }
  }
  return DiffusionSchedule::from_betas(kind, std::move(betas));
}

std::vector<double> forward_noise(const DiffusionSchedule& sched,
                                  const std::vector<double>& a0, std::size_t t,
                                  const std::vector<double>& eps) {
  check(t >= 1 && t <= sched.T,
        "forward_noise: t = " + std::to_string(t) + " outside [1," +
            std::to_string(sched.T) + "]");
  check(a0.size() == eps.size(), "forward_noise: eps shape mismatch");
  const double sa = std::sqrt(sched.alpha_bar(t));
  const double se = std::sqrt(1.0 - sched.alpha_bar(t));
  std::vector<double> out(a0.size());
  for (std::size_t i = 0; i < a0.size(); ++i) out[i] = sa * a0[i] + se * eps[i];
  return out;
}

ScoreArch score_arch_from_string(const std::string& s) {
  if (s == "mlp") return ScoreArch::mlp;
  if (s == "ln_resnet") return ScoreArch::ln_resnet;
  fail("unknown score architecture '" + s + "' (expected mlp|ln_resnet)");
}

std::string to_string(ScoreArch a) {
  return a == ScoreArch::mlp ? "mlp" : "ln_resnet";
}

void ScoreNetConfig::validate() const {
  check(action_dim > 0, "ScoreNetConfig: action_dim must be positive");
  check(hidden_dim > 0 && n_blocks > 0, "ScoreNetConfig: degenerate network size");
  check(time_embed_dim > 0 && time_embed_dim % 2 == 0,
        "ScoreNetConfig: time_embed_dim must be positive and even");
  check(dropout >= 0.0 && dropout < 1.0,
        "ScoreNetConfig: dropout " + std::to_string(dropout) + " outside [0,1)");
}

std::size_t ScoreNetConfig::param_count() const {
  const std::size_t din = input_dim();
  const std::size_t h = hidden_dim;
  if (arch == ScoreArch::mlp) {
    std::size_t n = 0, in = din;
    for (std::size_t i = 0; i < n_blocks; ++i) {
      n += in * h + h;
      in = h;
    }
    return n + in * action_dim + action_dim;
  }
  std::size_t n = din * h + h;                       // input dense
  n += n_blocks * (2 * h + h * 4 * h + 4 * h + 4 * h * h + h);  // blocks
  n += h * action_dim + action_dim;                  // head
  return n;
}

std::vector<double> sinusoidal_time_table(std::size_t T, std::size_t dim) {
  const std::size_t half = dim / 2;
  std::vector<double> table((T + 1) * dim);
  for (std::size_t t = 0; t <= T; ++t) {
    for (std::size_t i = 0; i < half; ++i) {
      const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) /
                                   static_cast<double>(half));
      table[t * dim + i] = std::sin(static_cast<double>(t) * freq);
      table[t * dim + half + i] = std::cos(static_cast<double>(t) * freq);
    }
  }
  return table;
}

void build_score_net(const ScoreNetConfig& cfg, ParamSet& params, Rng& rng) {
  cfg.validate();
  const std::size_t din = cfg.input_dim();
  const std::size_t h = cfg.hidden_dim;
  if (cfg.arch == ScoreArch::mlp) {
    MlpSpec spec{"score", din, std::vector<std::size_t>(cfg.n_blocks, h), cfg.action_dim,
                 cfg.act, true};
    init_mlp(spec, params, rng);
    return;
  }
  params.add("score.in.w", dense_init(din, h, rng));
  params.add("score.in.b", Tensor({h}));
  for (std::size_t b = 0; b < cfg.n_blocks; ++b) {
    const std::string p = "score.blk" + std::to_string(b);
    params.add(p + ".ln.g", Tensor({h}, 1.0));
    params.add(p + ".ln.b", Tensor({h}));
    params.add(p + ".fc1.w", dense_init(h, 4 * h, rng));
    params.add(p + ".fc1.b", Tensor({4 * h}));
    params.add(p + ".fc2.w", Tensor({4 * h, h}));  // zero init: block starts as identity
    params.add(p + ".fc2.b", Tensor({h}));
  }
  params.add("score.head.w", Tensor({h, cfg.action_dim}));  // zero init
  params.add("score.head.b", Tensor({cfg.action_dim}));
}

BehaviorModel::BehaviorModel(ScoreNetConfig cfg, DiffusionSchedule sched, Rng& init_rng)
    : cfg_(cfg), sched_(std::move(sched)) {
  cfg_.validate();
  sched_.validate();
  build_score_net(cfg_, params_, init_rng);
  params_.add("norm.mean", Tensor({cfg_.action_dim}));
  params_.add("norm.std", Tensor({cfg_.action_dim}, 1.0));
  time_table_ = sinusoidal_time_table(sched_.T, cfg_.time_embed_dim);
}

void BehaviorModel::fit_normalizer(const OfflineDataset& dataset) {
  check(dataset.action_dim() == cfg_.action_dim, "fit_normalizer: action dim mismatch");
  check(dataset.size() > 0, "fit_normalizer: empty dataset");
  auto& mean = params_.at("norm.mean");
  auto& std_t = params_.at("norm.std");
  const std::size_t da = cfg_.action_dim;
  for (std::size_t d = 0; d < da; ++d) {
    double m = 0.0;
    for (std::size_t i = 0; i < dataset.size(); ++i) m += dataset.action(i)[d];
    m /= static_cast<double>(dataset.size());
    double var = 0.0;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      const double diff = dataset.action(i)[d] - m;
      var += diff * diff;
    }
    var /= static_cast<double>(dataset.size());
    mean[d] = m;
    std_t[d] = std::sqrt(var) > 1e-8 ? std::sqrt(var) : 1.0;
  }
}

std::vector<double> BehaviorModel::normalize(const double* a) const {
  const auto& mean = params_.at("norm.mean");
  const auto& std_t = params_.at("norm.std");
  std::vector<double> out(cfg_.action_dim);
  for (std::size_t d = 0; d < cfg_.action_dim; ++d) out[d] = (a[d] - mean[d]) / std_t[d];
  return out;
}

void BehaviorModel::denormalize_rows(std::vector<double>& rows, std::size_t n) const {
  const auto& mean = params_.at("norm.mean");
  const auto& std_t = params_.at("norm.std");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t d = 0; d < cfg_.action_dim; ++d)
      rows[i * cfg_.action_dim + d] = rows[i * cfg_.action_dim + d] * std_t[d] + mean[d];
}

Tensor BehaviorModel::forward(Graph& g, const Tensor& a_t, const Tensor& s,
                              const std::vector<std::size_t>& t, bool train,
                              Rng* dropout_rng) const {
  const std::size_t batch = a_t.shape()[0];
  check(t.size() == batch, "BehaviorModel::forward: t size mismatch");
  check(a_t.shape()[1] == cfg_.action_dim, "BehaviorModel::forward: action dim mismatch");
  if (cfg_.state_dim > 0)
    check(s.rank() == 2 && s.shape()[0] == batch && s.shape()[1] == cfg_.state_dim,
          "BehaviorModel::forward: state shape mismatch");

  // time embedding rows as a constant input block
  Tensor temb({batch, cfg_.time_embed_dim});
  for (std::size_t i = 0; i < batch; ++i) {
    check(t[i] >= 1 && t[i] <= sched_.T, "BehaviorModel::forward: step out of range");
    std::copy(time_table_.begin() + t[i] * cfg_.time_embed_dim,
              time_table_.begin() + (t[i] + 1) * cfg_.time_embed_dim,
              temb.values().begin() + i * cfg_.time_embed_dim);
  }
  Tensor x = cfg_.state_dim > 0 ? g.concat(g.concat(a_t, s), temb) : g.concat(a_t, temb);

  if (cfg_.arch == ScoreArch::mlp) {
    MlpSpec spec{"score", cfg_.input_dim(),
                 std::vector<std::size_t>(cfg_.n_blocks, cfg_.hidden_dim), cfg_.action_dim,
                 cfg_.act, true};
    return mlp_forward(g, spec, params_, x);
  }

  const bool use_dropout = train && cfg_.dropout > 0.0;
  check(!use_dropout || dropout_rng != nullptr,
        "BehaviorModel::forward: training pass needs a dropout RNG");
  Rng dummy(0);
  Rng& drop = use_dropout ? *dropout_rng : dummy;

  Tensor h = g.add(g.matmul(x, params_.at("score.in.w")), params_.at("score.in.b"));
  for (std::size_t b = 0; b < cfg_.n_blocks; ++b) {
    const std::string p = "score.blk" + std::to_string(b);
    Tensor y = g.dropout(h, cfg_.dropout, train, drop);
    y = g.layer_norm(y, params_.at(p + ".ln.g"), params_.at(p + ".ln.b"));
    y = g.add(g.matmul(y, params_.at(p + ".fc1.w")), params_.at(p + ".fc1.b"));
    y = apply_activation(g, cfg_.act, y);
    y = g.add(g.matmul(y, params_.at(p + ".fc2.w")), params_.at(p + ".fc2.b"));
    h = g.add(h, y);
  }
  h = apply_activation(g, cfg_.act, h);
  return g.add(g.matmul(h, params_.at("score.head.w")), params_.at("score.head.b"));
}

Tensor BehaviorModel::bc_loss(Graph& g, const Batch& batch, Rng& rng,
                              const BcLossOptions& opts) {
  check(batch.size > 0, "bc_loss: empty batch");
  check(batch.action_dim == cfg_.action_dim, "bc_loss: action dim mismatch");
  const std::size_t B = batch.size, da = cfg_.action_dim;

  std::vector<std::size_t> t(B);
  for (std::size_t i = 0; i < B; ++i) t[i] = 1 + rng.uniform_index(sched_.T);

  std::vector<double> eps(B * da);
  for (double& e : eps) e = rng.normal();

  std::vector<double> noised(B * da);
  for (std::size_t i = 0; i < B; ++i) {
    const auto a0 = normalize(batch.actions.data() + i * da);
    const double sa = std::sqrt(sched_.alpha_bar(t[i]));
    const double se = std::sqrt(1.0 - sched_.alpha_bar(t[i]));
    for (std::size_t d = 0; d < da; ++d)
      noised[i * da + d] = sa * a0[d] + se * eps[i * da + d];
  }

  Tensor a_t({B, da}, std::move(noised));
  Tensor s = cfg_.state_dim > 0 ? Tensor({B, cfg_.state_dim}, batch.states) : Tensor();
  Tensor pred = forward(g, a_t, s, t, true, &rng);
  Tensor eps_t({B, da}, std::move(eps));
  Tensor diff = g.sub(pred, eps_t);
  Tensor per_row = opts.l1 ? g.sum_rows(g.abs(diff)) : g.sum_rows(g.mul(diff, diff));
  if (opts.weights != nullptr) {
    check(opts.weights->size() == B, "bc_loss: weight vector size mismatch");
    Tensor w({B, 1}, *opts.weights);
    per_row = g.mul(w, per_row);
  }
  return g.mean(per_row);
}

std::vector<double> BehaviorModel::sample(const std::vector<double>& state, std::size_t n,
                                          Rng& rng, const SampleOptions& opts) const {
  check(n >= 1, "sample: n must be >= 1");
  if (cfg_.state_dim > 0)
    check(state.size() == cfg_.state_dim, "sample: state dim mismatch");
  const std::size_t da = cfg_.action_dim;

  std::vector<double> a(n * da);
  for (double& v : a) v = rng.normal();

  std::vector<double> state_rows;
  if (cfg_.state_dim > 0) {
    state_rows.reserve(n * cfg_.state_dim);
    for (std::size_t i = 0; i < n; ++i)
      state_rows.insert(state_rows.end(), state.begin(), state.end());
  }

  for (std::size_t t = sched_.T; t >= 1; --t) {
    Graph g;
    Tensor a_t({n, da}, a);
    Tensor s = cfg_.state_dim > 0 ? Tensor({n, cfg_.state_dim}, state_rows) : Tensor();
    std::vector<std::size_t> ts(n, t);
    Tensor eps_hat = forward(g, a_t, s, ts, false, nullptr);

    const double inv_sqrt_alpha = 1.0 / std::sqrt(sched_.alpha(t));
    const double coef = sched_.beta(t) / std::sqrt(1.0 - sched_.alpha_bar(t));
    const double sigma = std::sqrt(sched_.beta(t));
    const bool add_noise = t > 1 || opts.final_step_noise;
    for (std::size_t i = 0; i < n * da; ++i) {
      a[i] = inv_sqrt_alpha * (a[i] - coef * eps_hat[i]);
      if (add_noise) a[i] += sigma * rng.normal();
    }
  }

  denormalize_rows(a, n);
  if (opts.clip_box) {
    for (double& v : a) v = std::clamp(v, opts.clip_box->first, opts.clip_box->second);
  }
  return a;
}

BehaviorModel train_behavior(const ScoreNetConfig& cfg, const DiffusionSchedule& sched,
                             const OfflineDataset& dataset,
                             const BehaviorTrainConfig& train_cfg, Rng& rng,
                             const BehaviorReportSink& sink) {
  check(dataset.size() > 0, "train_behavior: empty dataset");
  Rng init_rng = rng.fork("behavior-init");
  Rng loop_rng = rng.fork("behavior-train");
  BehaviorModel model(cfg, sched, init_rng);
  model.fit_normalizer(dataset);

  AdamConfig adam_cfg{train_cfg.lr};
  if (train_cfg.cosine_decay) adam_cfg.cosine_decay_horizon = train_cfg.steps;
  Adam opt(adam_cfg);
  const std::size_t batch_size = std::min(train_cfg.batch, dataset.size());

  BcLossOptions opts;
  opts.l1 = train_cfg.l1;
  std::vector<double> weights;

  for (std::size_t step = 1; step <= train_cfg.steps; ++step) {
    Batch batch = sample_batch(dataset, batch_size, loop_rng);
    if (train_cfg.awr_alpha > 0.0) {
      check(train_cfg.awr_critic != nullptr,
            "train_behavior: AWR weighting requires a critic");
      weights = awr_weights(*train_cfg.awr_critic, batch, train_cfg.awr_alpha,
                            train_cfg.awr_clip);
      opts.weights = &weights;
    }
    Graph g;
    Tensor loss = model.bc_loss(g, batch, loop_rng, opts);
    const double loss_value = loss.item();
    if (!std::isfinite(loss_value))
      fail("train_behavior: non-finite loss at step " + std::to_string(step));
    g.backward(loss);
    opt.step(model.params());
    if (sink && (step % train_cfg.report_every == 0 || step == train_cfg.steps))
      sink({step, loss_value});
  }
  return model;
}

void BehaviorModel::load_params(const std::string& path) {
  ParamSet loaded = ParamSet::load(path);
  load_values(params_, loaded);
}

}  // namespace idql
