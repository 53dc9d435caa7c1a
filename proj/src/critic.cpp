#include "idql/critic.hpp"

#include <algorithm>
#include <cmath>

namespace idql {

CriticNets::CriticNets(std::size_t state_dim, std::size_t action_dim,
                       const CriticConfig& cfg, Rng& init_rng)
    : state_dim_(state_dim), action_dim_(action_dim), cfg_(cfg) {
  check(state_dim > 0 && action_dim > 0, "CriticNets: dims must be positive");
  const std::size_t sa = state_dim + action_dim;
  q1_spec_ = MlpSpec{"q1", sa, cfg.hidden, 1, cfg.act, false};
  q2_spec_ = MlpSpec{"q2", sa, cfg.hidden, 1, cfg.act, false};
  v_spec_ = MlpSpec{"v", state_dim, cfg.hidden, 1, cfg.act, false};
  Rng r1 = init_rng.fork("q1");
  Rng r2 = init_rng.fork("q2");
  Rng rv = init_rng.fork("v");
  init_mlp(q1_spec_, q_params_, r1);
  if (cfg.twin) init_mlp(q2_spec_, q_params_, r2);
  init_mlp(v_spec_, v_params_, rv);
  q_target_params_ = q_params_.clone();
}

Tensor CriticNets::q1_forward(Graph& g, const Tensor& sa) const {
  return mlp_forward(g, q1_spec_, q_params_, sa);
}

Tensor CriticNets::q2_forward(Graph& g, const Tensor& sa) const {
  check(cfg_.twin, "CriticNets::q2_forward: single-Q configuration");
  return mlp_forward(g, q2_spec_, q_params_, sa);
}

Tensor CriticNets::v_forward(Graph& g, const Tensor& s) const {
  return mlp_forward(g, v_spec_, v_params_, s);
}

namespace {
std::vector<double> twin_min_eval(const MlpSpec& q1, const MlpSpec& q2, bool twin,
                                  const ParamSet& params,
                                  const std::vector<double>& sa_rows, std::size_t batch) {
  auto v1 = mlp_eval(q1, params, sa_rows, batch);
  if (!twin) return v1;
  auto v2 = mlp_eval(q2, params, sa_rows, batch);
  for (std::size_t i = 0; i < v1.size(); ++i) v1[i] = std::min(v1[i], v2[i]);
  return v1;
}
}  // namespace

std::vector<double> CriticNets::q_target_min(const std::vector<double>& sa_rows,
                                             std::size_t batch) const {
  return twin_min_eval(q1_spec_, q2_spec_, cfg_.twin, q_target_params_, sa_rows, batch);
}

std::vector<double> CriticNets::q_min_batch(const std::vector<double>& sa_rows,
                                            std::size_t batch) const {
  return twin_min_eval(q1_spec_, q2_spec_, cfg_.twin, q_params_, sa_rows, batch);
}

double CriticNets::q_min(const std::vector<double>& s, const std::vector<double>& a) const {
  std::vector<double> sa(s);
  sa.insert(sa.end(), a.begin(), a.end());
  return q_min_batch(sa, 1)[0];
}

std::vector<double> CriticNets::v_batch(const std::vector<double>& s_rows,
                                        std::size_t batch) const {
  return mlp_eval(v_spec_, v_params_, s_rows, batch);
}

double CriticNets::v(const std::vector<double>& s) const { return v_batch(s, 1)[0]; }

namespace {

std::vector<double> concat_rows(const Batch& b) {
  std::vector<double> sa;
  sa.reserve(b.size * (b.state_dim + b.action_dim));
  for (std::size_t i = 0; i < b.size; ++i) {
    sa.insert(sa.end(), b.states.begin() + i * b.state_dim,
              b.states.begin() + (i + 1) * b.state_dim);
    sa.insert(sa.end(), b.actions.begin() + i * b.action_dim,
              b.actions.begin() + (i + 1) * b.action_dim);
  }
  return sa;
}

void probe_batch(const CriticNets& nets, const Batch& b) {
  if (!nets.q_input_probe) return;
  for (std::size_t i = 0; i < b.size; ++i) {
    std::vector<double> row(b.states.begin() + i * b.state_dim,
                            b.states.begin() + (i + 1) * b.state_dim);
    row.insert(row.end(), b.actions.begin() + i * b.action_dim,
               b.actions.begin() + (i + 1) * b.action_dim);
    nets.q_input_probe(row);
  }
}

// Builds f(u) on the graph for a residual tensor u of shape [B,1]. The
// asymmetric weight factors are evaluated from the current residual values
// and enter as constants, which matches the almost-everywhere gradient.
Tensor loss_on_graph(Graph& g, const ConvexLoss& loss, const Tensor& u) {
  switch (loss.kind) {
    case LossKind::expectile: {
      Tensor w(u.shape());
      for (std::size_t i = 0; i < u.size(); ++i)
        w[i] = std::fabs(loss.param - (u[i] < 0.0 ? 1.0 : 0.0));
      return g.mean(g.mul(w, g.mul(u, u)));
    }
    case LossKind::quantile: {
      Tensor w(u.shape());
      for (std::size_t i = 0; i < u.size(); ++i)
        w[i] = std::fabs(loss.param - (u[i] < 0.0 ? 1.0 : 0.0));
      return g.mean(g.mul(w, g.abs(u)));
    }
    case LossKind::exponential: {
      // alpha exp(alpha u) - alpha^2 u; the exponent is clamped so a briefly
      // diverging critic cannot overflow before the NaN guard trips
      const double a = loss.param;
      Tensor e = g.exp(g.clip_max(g.scale(u, a), 50.0));
      return g.mean(g.sub(g.scale(e, a), g.scale(u, a * a)));
    }
  }
  fail("loss_on_graph: bad kind");
}

}  // namespace

Tensor value_loss(Graph& g, const ConvexLoss& loss, const Batch& batch, CriticNets& nets) {
  check(batch.size > 0, "value_loss: empty batch");
  probe_batch(nets, batch);
  const auto sa = concat_rows(batch);
  const auto q_hat = nets.q_target_min(sa, batch.size);

  Tensor s({batch.size, batch.state_dim}, batch.states);
  Tensor v = nets.v_forward(g, s);  // [B,1]
  Tensor q_const({batch.size, 1}, q_hat);
  Tensor u = g.sub(q_const, v);
  return loss_on_graph(g, loss, u);
}

Tensor q_loss(Graph& g, const Batch& batch, CriticNets& nets, double gamma) {
  check(batch.size > 0, "q_loss: empty batch");
  check(gamma >= 0.0 && gamma < 1.0,
        "q_loss: gamma = " + std::to_string(gamma) + " outside [0,1)");
  probe_batch(nets, batch);
  const auto v_next = nets.v_batch(batch.next_states, batch.size);
  std::vector<double> target(batch.size);
  for (std::size_t i = 0; i < batch.size; ++i)
    target[i] = batch.rewards[i] + gamma * (1.0 - batch.dones[i]) * v_next[i];

  const auto sa_rows = concat_rows(batch);
  Tensor sa({batch.size, batch.state_dim + batch.action_dim}, sa_rows);
  Tensor target_t({batch.size, 1}, target);
  Tensor l1 = g.squared_error(nets.q1_forward(g, sa), target_t);
  if (!nets.twin()) return l1;
  Tensor l2 = g.squared_error(nets.q2_forward(g, sa), target_t);
  return g.scale(g.add(l1, l2), 0.5);
}

TrainReport critic_step(CriticNets& nets, const CriticConfig& cfg, Adam& v_opt,
                        Adam& q_opt, const Batch& batch) {
  TrainReport rep;

  {
    Graph g;
    Tensor lv = value_loss(g, cfg.loss, batch, nets);
    rep.v_loss = lv.item();
    g.backward(lv);
    v_opt.step(nets.v_params());
  }
  {
    Graph g;
    Tensor lq = q_loss(g, batch, nets, cfg.gamma);
    rep.q_loss = lq.item();
    g.backward(lq);
    q_opt.step(nets.q_params());
  }
  ema_update(nets.q_target_params(), nets.q_params(), cfg.ema_rate);

  const auto vb = nets.v_batch(batch.states, batch.size);
  const auto sa = concat_rows(batch);
  const auto qb = nets.q_min_batch(sa, batch.size);
  for (std::size_t i = 0; i < batch.size; ++i) {
    rep.mean_v += vb[i];
    rep.mean_q += qb[i];
  }
  rep.mean_v /= static_cast<double>(batch.size);
  rep.mean_q /= static_cast<double>(batch.size);
  return rep;
}

CriticNets train_critic(const CriticConfig& cfg, const OfflineDataset& dataset, Rng& rng,
                        const ReportSink& sink) {
  check(dataset.size() > 0, "train_critic: empty dataset");
  Rng init_rng = rng.fork("critic-init");
  Rng batch_rng = rng.fork("critic-batches");
  CriticNets nets(dataset.state_dim(), dataset.action_dim(), cfg, init_rng);
  Adam v_opt(AdamConfig{cfg.lr});
  Adam q_opt(AdamConfig{cfg.lr});
  const std::size_t batch_size = std::min(cfg.batch_size, dataset.size());

  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    Batch batch = sample_batch(dataset, batch_size, batch_rng);
    TrainReport rep = critic_step(nets, cfg, v_opt, q_opt, batch);
    rep.step = step;
    if (!std::isfinite(rep.v_loss) || !std::isfinite(rep.q_loss)) {
      fail("train_critic: non-finite loss at step " + std::to_string(step) +
           " (v_loss=" + std::to_string(rep.v_loss) +
           ", q_loss=" + std::to_string(rep.q_loss) +
           ", mean_v=" + std::to_string(rep.mean_v) +
           ", mean_q=" + std::to_string(rep.mean_q) + ")");
    }
    if (sink && (step % cfg.report_every == 0 || step == cfg.steps)) sink(rep);
  }
  return nets;
}

}  // namespace idql
