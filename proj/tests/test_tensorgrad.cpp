#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <bit>
#include <cmath>

#include "idql/nn.hpp"
#include "idql/param_set.hpp"
#include "idql/tensor.hpp"
#include "test_helpers.hpp"

using namespace idql;
using idql::testing::check_gradients;

namespace {
Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.5, double hi = 1.5) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}
}  // namespace

TEST_CASE("matmul of ones gives inner-dimension counts") {
  Graph g;
  Tensor a({2, 3}, std::vector<double>(6, 1.0));
  Tensor b({3, 2}, std::vector<double>(6, 1.0));
  Tensor c = g.matmul(a, b);
  REQUIRE(c.shape() == Shape{2, 2});
  for (std::size_t i = 0; i < 4; ++i) CHECK(c[i] == doctest::Approx(3.0));
}

TEST_CASE("shape mismatch errors name both shapes") {
  Graph g;
  Tensor a({2, 3});
  Tensor b({4, 2});
  try {
    g.matmul(a, b);
    FAIL("expected error");
  } catch (const Error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2,3]") != std::string::npos);
    CHECK(msg.find("[4,2]") != std::string::npos);
  }
  CHECK_THROWS_AS(g.add(Tensor({2, 2}), Tensor({3})), Error);
}

TEST_CASE("layer_norm maps a constant vector to zeros before affine") {
  Graph g;
  Tensor x({1, 8}, std::vector<double>(8, 3.7));
  Tensor gain({8}, 1.0);
  Tensor bias({8});
  Tensor y = g.layer_norm(x, gain, bias);
  for (std::size_t i = 0; i < 8; ++i) CHECK(std::fabs(y[i]) < 1e-9);
}

TEST_CASE("layer_norm output has row mean 0 and variance 1 before affine") {
  Rng rng(11);
  Graph g;
  Tensor x = random_tensor({16, 32}, rng);
  Tensor gain({32}, 1.0);
  Tensor bias({32});
  Tensor y = g.layer_norm(x, gain, bias);
  for (std::size_t r = 0; r < 16; ++r) {
    double mean = 0.0, var = 0.0;
    for (std::size_t c = 0; c < 32; ++c) mean += y.at(r, c);
    mean /= 32.0;
    for (std::size_t c = 0; c < 32; ++c) var += (y.at(r, c) - mean) * (y.at(r, c) - mean);
    var /= 32.0;
    CHECK(std::fabs(mean) < 1e-6);
    CHECK(std::fabs(var - 1.0) < 1e-6);
  }
}

TEST_CASE("dropout with rate 0 in train mode is the identity") {
  Rng rng(3);
  Graph g;
  Tensor x = random_tensor({4, 5}, rng);
  Tensor y = g.dropout(x, 0.0, true, rng);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]);
  CHECK_THROWS_AS(g.dropout(x, 1.0, true, rng), Error);
  CHECK_THROWS_AS(g.dropout(x, -0.1, true, rng), Error);
}

TEST_CASE("dropout keeps the expected fraction and scales survivors") {
  Rng rng(17);
  Graph g;
  Tensor x({1, 10000}, std::vector<double>(10000, 1.0));
  Tensor y = g.dropout(x, 0.25, true, rng);
  std::size_t kept = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] != 0.0) {
      CHECK(y[i] == doctest::Approx(1.0 / 0.75));
      ++kept;
    }
  }
  CHECK(kept > 7200);
  CHECK(kept < 7800);
}

TEST_CASE("backward on linear and quadratic forms") {
  // loss = sum(w * x), fixed x -> grad(w) = x
  {
    ParamSet ps;
    Tensor& w = ps.add("w", Tensor({4}, {0.5, -1.0, 2.0, 0.0}));
    Tensor x({4}, {1.0, 2.0, 3.0, 4.0});
    Graph g;
    Tensor loss = g.sum(g.mul(w, x));
    g.backward(loss);
    for (std::size_t i = 0; i < 4; ++i) CHECK(w.grad()[i] == doctest::Approx(x[i]));
  }
  // loss = mean((w - c)^2) -> grad(w) = 2 (w - c) / n
  {
    ParamSet ps;
    Tensor& w = ps.add("w", Tensor({5}, {1.0, 2.0, 3.0, 4.0, 5.0}));
    Tensor c({5}, {0.0, 0.0, 1.0, 1.0, 1.0});
    Graph g;
    Tensor loss = g.squared_error(w, c);
    g.backward(loss);
    for (std::size_t i = 0; i < 5; ++i)
      CHECK(w.grad()[i] == doctest::Approx(2.0 * (w[i] - c[i]) / 5.0));
  }
}

TEST_CASE("backward twice on one tape is an error") {
  ParamSet ps;
  Tensor& w = ps.add("w", Tensor({3}, {1.0, 2.0, 3.0}));
  Graph g;
  Tensor loss = g.sum(g.mul(w, w));
  g.backward(loss);
  CHECK_THROWS_AS(g.backward(loss), Error);
}

TEST_CASE("backward requires a scalar connected to the tape") {
  Graph g;
  Tensor constant = Tensor::scalar(1.0);
  CHECK_THROWS_AS(g.backward(constant), Error);
  ParamSet ps;
  Tensor& w = ps.add("w", Tensor({3}, {1.0, 2.0, 3.0}));
  Tensor y = g.mul(w, w);
  CHECK_THROWS_AS(g.backward(y), Error);  // not scalar
}

TEST_CASE("finite differences confirm every op gradient") {
  Rng rng(1234);
  const int trials = 25;
  for (int trial = 0; trial < trials; ++trial) {
    ParamSet ps;
    Tensor& a = ps.add("a", random_tensor({3, 4}, rng));
    Tensor& b = ps.add("b", random_tensor({3, 4}, rng));
    Tensor& m = ps.add("m", random_tensor({4, 2}, rng));
    Tensor& bias = ps.add("bias", random_tensor({2}, rng));
    Tensor& g1 = ps.add("g1", random_tensor({4}, rng, 0.5, 1.5));
    Tensor& b1 = ps.add("b1", random_tensor({4}, rng));
    // keep relu/abs inputs away from their kinks
    for (std::size_t i = 0; i < a.size(); ++i)
      if (std::fabs(a[i]) < 1e-2) a[i] += 0.05;

    const std::uint64_t drop_seed = rng.next_u64();
    auto build = [&](Graph& g) -> Tensor {
      Rng drop_rng(drop_seed);
      Tensor t1 = g.add(g.matmul(g.mul(a, b), m), bias);     // matmul, mul, add-bias
      Tensor t2 = g.relu(t1);
      Tensor t3 = g.mish(t1);
      Tensor t4 = g.gelu(t1);
      Tensor t5 = g.concat(t2, g.add(t3, t4));
      Tensor t6 = g.layer_norm(a, g1, b1);
      Tensor t7 = g.dropout(t6, 0.3, true, drop_rng);
      Tensor t8 = g.abs(g.add_const(g.scale(a, 0.7), 0.01));
      Tensor t9 = g.exp(g.clip_max(g.sub(a, b), 1.0));
      Tensor s1 = g.mean(t5);
      Tensor s2 = g.sum(t7);
      Tensor s3 = g.mean(g.sum_rows(t8));
      Tensor s4 = g.squared_error(t9, b);
      return g.add(g.add(s1, s2), g.add(s3, s4));
    };
    const auto res = check_gradients(build, ps);
    INFO("trial ", trial, " worst param ", res.worst_param);
    CHECK(res.max_rel_err < 1e-4);
  }
}

TEST_CASE("finite differences confirm a 3-layer MLP gradient") {
  Rng rng(999);
  for (int trial = 0; trial < 5; ++trial) {
    ParamSet ps;
    MlpSpec spec{"net", 6, {8, 8, 8}, 2, Activation::mish, false};
    Rng init = rng.fork(trial);
    init_mlp(spec, ps, init);
    Tensor x = random_tensor({4, 6}, rng);
    Tensor target = random_tensor({4, 2}, rng);
    auto build = [&](Graph& g) -> Tensor {
      return g.squared_error(mlp_forward(g, spec, ps, x), target);
    };
    const auto res = check_gradients(build, ps);
    INFO("worst param ", res.worst_param);
    CHECK(res.max_rel_err < 1e-4);
  }
}

TEST_CASE("adam leaves parameters unchanged on zero gradients") {
  ParamSet ps;
  ps.add("w", Tensor({3}, {1.0, -2.0, 0.5}));
  const auto before = ps.at("w").values();
  Adam opt(AdamConfig{0.1});
  opt.step(ps);
  CHECK(ps.at("w").values() == before);
}

TEST_CASE("adam cosine decay endpoints") {
  AdamConfig cfg;
  cfg.lr = 3e-4;
  cfg.cosine_decay_horizon = 100;
  Adam opt(cfg);
  CHECK(opt.effective_lr() == doctest::Approx(3e-4));  // step 0
  ParamSet ps;
  ps.add("w", Tensor({1}, {1.0}));
  for (int i = 0; i < 50; ++i) opt.step(ps);
  CHECK(opt.effective_lr() ==
        doctest::Approx(3e-4 * 0.5 * (1.0 + std::cos(3.141592653589793 * 0.5))));
  for (int i = 0; i < 50; ++i) opt.step(ps);
  CHECK(opt.effective_lr() == 0.0);  // step == horizon
  for (int i = 0; i < 10; ++i) opt.step(ps);
  CHECK(opt.effective_lr() == 0.0);  // clamped past the horizon
}

TEST_CASE("adam performs the standard bias-corrected update") {
  ParamSet ps;
  Tensor& w = ps.add("w", Tensor({1}, {1.0}));
  w.grad()[0] = 0.5;
  AdamConfig cfg;
  cfg.lr = 0.01;
  Adam opt(cfg);
  opt.step(ps);
  // first step: mhat = g, vhat = g^2 -> update = lr * g / (|g| + eps)
  CHECK(w[0] == doctest::Approx(1.0 - 0.01 * 0.5 / (0.5 + cfg.eps)));
  CHECK(w.grad()[0] == 0.0);  // gradients cleared after the step
}

TEST_CASE("ema_update endpoints and the 0.005 example") {
  ParamSet target, online;
  target.add("w", Tensor({2}, {0.0, 0.0}));
  online.add("w", Tensor({2}, {1.0, 1.0}));

  ParamSet t1 = target.clone();
  ema_update(t1, online, 1.0);
  CHECK(t1.at("w").values() == online.at("w").values());

  ParamSet t0 = target.clone();
  ema_update(t0, online, 0.0);
  CHECK(t0.at("w").values() == target.at("w").values());

  ParamSet t = target.clone();
  ema_update(t, online, 0.005);
  CHECK(t.at("w")[0] == doctest::Approx(0.005));

  ParamSet mismatched;
  mismatched.add("other", Tensor({2}));
  CHECK_THROWS_AS(ema_update(mismatched, online, 0.5), Error);
}

TEST_CASE("ema distance decays geometrically when the online net is frozen") {
  Rng rng(5);
  ParamSet target, online;
  target.add("w", random_tensor({16}, rng));
  online.add("w", random_tensor({16}, rng));
  auto dist = [&]() {
    double d = 0.0;
    for (std::size_t i = 0; i < 16; ++i) {
      const double diff = target.at("w")[i] - online.at("w")[i];
      d += diff * diff;
    }
    return std::sqrt(d);
  };
  const double d0 = dist();
  const double eta = 0.005;
  for (int k = 1; k <= 200; ++k) {
    ema_update(target, online, eta);
    CHECK(dist() == doctest::Approx(d0 * std::pow(1.0 - eta, k)).epsilon(1e-9));
  }
}

TEST_CASE("checkpoint round-trip is bit-exact") {
  Rng rng(77);
  ParamSet ps;
  ps.add("layer.w", random_tensor({7, 3}, rng, -100.0, 100.0));
  ps.add("layer.b", random_tensor({3}, rng, -1e-8, 1e-8));
  ps.add("scalar", Tensor({1}, {-0.0}));
  const auto bytes = ps.serialize();
  ParamSet restored = ParamSet::deserialize(bytes);
  REQUIRE(restored.size() == ps.size());
  auto it = ps.begin();
  auto jt = restored.begin();
  for (; it != ps.end(); ++it, ++jt) {
    CHECK(it->first == jt->first);
    CHECK(it->second.shape() == jt->second.shape());
    for (std::size_t i = 0; i < it->second.size(); ++i) {
      const std::uint64_t a = std::bit_cast<std::uint64_t>(it->second[i]);
      const std::uint64_t b = std::bit_cast<std::uint64_t>(jt->second[i]);
      CHECK(a == b);
    }
  }
  CHECK(restored.serialize() == bytes);
}

TEST_CASE("identical seeds give bit-identical training trajectories") {
  auto train = [](std::uint64_t seed) {
    Rng rng(seed);
    ParamSet ps;
    MlpSpec spec{"net", 4, {16, 16}, 1, Activation::relu, false};
    Rng init = rng.fork("init");
    init_mlp(spec, ps, init);
    Adam opt(AdamConfig{1e-3});
    Rng data = rng.fork("data");
    for (int step = 0; step < 50; ++step) {
      Tensor x = random_tensor({8, 4}, data);
      Tensor y = random_tensor({8, 1}, data);
      Graph g;
      Tensor loss = g.squared_error(mlp_forward(g, spec, ps, x), y);
      g.backward(loss);
      opt.step(ps);
    }
    return ps.serialize();
  };
  CHECK(train(42) == train(42));
  CHECK(train(42) != train(43));
}

TEST_CASE("duplicate parameter paths are rejected") {
  ParamSet ps;
  ps.add("w", Tensor({1}));
  CHECK_THROWS_AS(ps.add("w", Tensor({1})), Error);
}
