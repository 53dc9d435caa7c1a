#include "idql/tensor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace idql {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<EMat>;
using CMapM = Eigen::Map<const EMat>;

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  check(a.shape() == b.shape(), std::string(op) + ": shape mismatch " +
                                    shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

double mish_fn(double x) {
  // x * tanh(softplus(x)) with a numerically stable softplus
  double sp;
  if (x > 20.0)
    sp = x;
  else if (x < -20.0)
    sp = std::exp(x);
  else
    sp = std::log1p(std::exp(x));
  return x * std::tanh(sp);
}

double mish_deriv(double x) {
  double sp;
  if (x > 20.0)
    sp = x;
  else if (x < -20.0)
    sp = std::exp(x);
  else
    sp = std::log1p(std::exp(x));
  const double t = std::tanh(sp);
  const double sig = 1.0 / (1.0 + std::exp(-x));
  return t + x * (1.0 - t * t) * sig;
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double gelu_fn(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_deriv(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
  const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
  return cdf + x * pdf;
}

}  // namespace

bool Tensor::finite() const {
  if (!values_) return true;
  for (double v : *values_)
    if (!std::isfinite(v)) return false;
  return true;
}

Tensor Graph::make_output(Shape shape) {
  Tensor out(std::move(shape));
  out.ensure_grad();
  return out;
}

void Graph::record(std::function<void()> back) {
  check(!consumed_, "Graph: cannot record ops on a consumed tape");
  nodes_.push_back(Node{std::move(back)});
}

Tensor Graph::matmul(const Tensor& a, const Tensor& b) {
  check(a.rank() == 2 && b.rank() == 2,
        "matmul: expects rank-2 tensors, got " + shape_str(a.shape()) + " and " +
            shape_str(b.shape()));
  check(a.shape()[1] == b.shape()[0], "matmul: shape mismatch " + shape_str(a.shape()) +
                                          " vs " + shape_str(b.shape()));
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  Tensor out = make_output({m, n});
  CMapM ma(a.data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k));
  CMapM mb(b.data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n));
  MapM mo(out.data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  mo.noalias() = ma * mb;
  record([a, b, out, m, k, n]() mutable {
    CMapM go(out.grad().data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
    if (a.has_grad()) {
      CMapM mb2(b.data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n));
      MapM ga(a.grad().data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k));
      ga.noalias() += go * mb2.transpose();
    }
    if (b.has_grad()) {
      CMapM ma2(a.data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k));
      MapM gb(b.grad().data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n));
      gb.noalias() += ma2.transpose() * go;
    }
  });
  return out;
}

Tensor Graph::add(const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) {
    Tensor out = make_output(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
    record([a, b, out]() mutable {
      const auto& go = out.grad();
      if (a.has_grad()) {
        auto& ga = a.grad();
        for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
      }
      if (b.has_grad()) {
        auto& gb = b.grad();
        for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i];
      }
    });
    return out;
  }
  // [B,N] + [N] bias broadcast
  check(a.rank() == 2 && b.rank() == 1 && a.shape()[1] == b.shape()[0],
        "add: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  const std::size_t rows = a.shape()[0], cols = a.shape()[1];
  Tensor out = make_output(a.shape());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = a[r * cols + c] + b[c];
  record([a, b, out, rows, cols]() mutable {
    const auto& go = out.grad();
    if (a.has_grad()) {
      auto& ga = a.grad();
      for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
    }
    if (b.has_grad()) {
      auto& gb = b.grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) gb[c] += go[r * cols + c];
    }
  });
  return out;
}

Tensor Graph::sub(const Tensor& a, const Tensor& b) {
  check_same_shape("sub", a, b);
  Tensor out = make_output(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  record([a, b, out]() mutable {
    const auto& go = out.grad();
    if (a.has_grad()) {
      auto& ga = a.grad();
      for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
    }
    if (b.has_grad()) {
      auto& gb = b.grad();
      for (std::size_t i = 0; i < go.size(); ++i) gb[i] -= go[i];
    }
  });
  return out;
}

Tensor Graph::mul(const Tensor& a, const Tensor& b) {
  check_same_shape("mul", a, b);
  Tensor out = make_output(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  record([a, b, out]() mutable {
    const auto& go = out.grad();
    if (a.has_grad()) {
      auto& ga = a.grad();
      for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * b[i];
    }
    if (b.has_grad()) {
      auto& gb = b.grad();
      for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i] * a[i];
    }
  });
  return out;
}

Tensor Graph::scale(const Tensor& a, double c) {
  Tensor out = make_output(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * c;
  record([a, out, c]() mutable {
    if (!a.has_grad()) return;
    const auto& go = out.grad();
    auto& ga = a.grad();
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * c;
  });
  return out;
}

Tensor Graph::add_const(const Tensor& a, double c) {
  Tensor out = make_output(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + c;
  record([a, out]() mutable {
    if (!a.has_grad()) return;
    const auto& go = out.grad();
    auto& ga = a.grad();
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
  });
  return out;
}

Tensor Graph::relu(const Tensor& a) {
  Tensor out = make_output(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
  record([a, out]() mutable {
    if (!a.has_grad()) return;
    const auto& go = out.grad();
    auto& ga = a.grad();
    for (std::size_t i = 0; i < go.size(); ++i)
      if (a[i] > 0.0) ga[i] += go[i];
  });
  return out;
}

Tensor Graph::mish(const Tensor& a) {
  Tensor out = make_output(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = mish_fn(a[i]);
  record([a, out]() mutable {
    if (!a.has_grad()) return;
    const auto& go = out.grad();
    auto& ga = a.grad();
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * mish_deriv(a[i]);
  });
  return out;
}

Tensor Graph::gelu(const Tensor& a) {
  Tensor out = make_output(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = gelu_fn(a[i]);
  record([a, out]() mutable {
    if (!a.has_grad()) return;
    const auto& go = out.grad();
    auto& ga = a.grad();
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * gelu_deriv(a[i]);
  });
  return out;
}

Tensor Graph::exp(const Tensor& a) {
  Tensor out = make_output(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    check(a[i] <= 700.0, "exp: argument " + std::to_string(a[i]) +
                             " would overflow; rescale the inputs");
    out[i] = std::exp(a[i]);
  }
  record([a, out]() mutable {
    if (!a.has_grad()) return;
    const auto& go = out.grad();
    auto& ga = a.grad();
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * out[i];
  });
  return out;
}

Tensor Graph::abs(const Tensor& a) {
  Tensor out = make_output(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::fabs(a[i]);
  record([a, out]() mutable {
    if (!a.has_grad()) return;
    const auto& go = out.grad();
    auto& ga = a.grad();
    for (std::size_t i = 0; i < go.size(); ++i) {
      if (a[i] > 0.0)
        ga[i] += go[i];
      else if (a[i] < 0.0)
        ga[i] -= go[i];
      // derivative at 0 taken as 0
    }
  });
  return out;
}

Tensor Graph::clip_max(const Tensor& a, double hi) {
  Tensor out = make_output(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] < hi ? a[i] : hi;
  record([a, out, hi]() mutable {
    if (!a.has_grad()) return;
    const auto& go = out.grad();
    auto& ga = a.grad();
    for (std::size_t i = 0; i < go.size(); ++i)
      if (a[i] < hi) ga[i] += go[i];
  });
  return out;
}

Tensor Graph::layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                         double eps) {
  check(x.rank() >= 1, "layer_norm: undefined input");
  const std::size_t cols = x.rank() == 2 ? x.shape()[1] : x.shape()[0];
  const std::size_t rows = x.rank() == 2 ? x.shape()[0] : 1;
  check(gain.rank() == 1 && gain.shape()[0] == cols,
        "layer_norm: gain shape " + shape_str(gain.shape()) + " does not match feature dim " +
            std::to_string(cols));
  check(bias.rank() == 1 && bias.shape()[0] == cols,
        "layer_norm: bias shape " + shape_str(bias.shape()) + " does not match feature dim " +
            std::to_string(cols));

  Tensor out = make_output(x.shape());
  auto xhat = std::make_shared<std::vector<double>>(x.size());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * cols;
    double mean = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mean += xr[c];
    mean /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double d = xr[c] - mean;
      var += d * d;
    }
    var /= static_cast<double>(cols);
    const double istd = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = istd;
    for (std::size_t c = 0; c < cols; ++c) {
      const double xh = (xr[c] - mean) * istd;
      (*xhat)[r * cols + c] = xh;
      out[r * cols + c] = gain[c] * xh + bias[c];
    }
  }
  record([x, gain, bias, out, xhat, inv_std, rows, cols]() mutable {
    const auto& go = out.grad();
    for (std::size_t r = 0; r < rows; ++r) {
      const double istd = (*inv_std)[r];
      // accumulate the two row means used by the input gradient
      double mean_g = 0.0, mean_gx = 0.0;
      for (std::size_t c = 0; c < cols; ++c) {
        const std::size_t i = r * cols + c;
        const double gy = go[i] * gain[c];
        mean_g += gy;
        mean_gx += gy * (*xhat)[i];
      }
      mean_g /= static_cast<double>(cols);
      mean_gx /= static_cast<double>(cols);
      for (std::size_t c = 0; c < cols; ++c) {
        const std::size_t i = r * cols + c;
        if (x.has_grad()) {
          const double gy = go[i] * gain[c];
          x.grad()[i] += (gy - mean_g - (*xhat)[i] * mean_gx) * istd;
        }
        if (gain.has_grad()) gain.grad()[c] += go[i] * (*xhat)[i];
        if (bias.has_grad()) bias.grad()[c] += go[i];
      }
    }
  });
  return out;
}

Tensor Graph::dropout(const Tensor& x, double rate, bool train, Rng& rng) {
  check(rate >= 0.0 && rate < 1.0,
        "dropout: rate " + std::to_string(rate) + " outside [0,1)");
  if (!train || rate == 0.0) {
    Tensor out = make_output(x.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i];
    record([x, out]() mutable {
      if (!x.has_grad()) return;
      const auto& go = out.grad();
      auto& gx = x.grad();
      for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
    });
    return out;
  }
  const double keep_scale = 1.0 / (1.0 - rate);
  auto mask = std::make_shared<std::vector<double>>(x.size());
  Tensor out = make_output(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double m = rng.uniform() < rate ? 0.0 : keep_scale;
    (*mask)[i] = m;
    out[i] = x[i] * m;
  }
  record([x, out, mask]() mutable {
    if (!x.has_grad()) return;
    const auto& go = out.grad();
    auto& gx = x.grad();
    for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i] * (*mask)[i];
  });
  return out;
}

Tensor Graph::concat(const Tensor& a, const Tensor& b) {
  check(a.rank() == b.rank() && (a.rank() == 1 || a.rank() == 2),
        "concat: rank mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  if (a.rank() == 1) {
    Tensor out = make_output({a.size() + b.size()});
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i];
    for (std::size_t i = 0; i < b.size(); ++i) out[a.size() + i] = b[i];
    record([a, b, out]() mutable {
      const auto& go = out.grad();
      if (a.has_grad())
        for (std::size_t i = 0; i < a.size(); ++i) a.grad()[i] += go[i];
      if (b.has_grad())
        for (std::size_t i = 0; i < b.size(); ++i) b.grad()[i] += go[a.size() + i];
    });
    return out;
  }
  check(a.shape()[0] == b.shape()[0], "concat: row mismatch " + shape_str(a.shape()) +
                                          " vs " + shape_str(b.shape()));
  const std::size_t rows = a.shape()[0], ca = a.shape()[1], cb = b.shape()[1];
  Tensor out = make_output({rows, ca + cb});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < ca; ++c) out[r * (ca + cb) + c] = a[r * ca + c];
    for (std::size_t c = 0; c < cb; ++c) out[r * (ca + cb) + ca + c] = b[r * cb + c];
  }
  record([a, b, out, rows, ca, cb]() mutable {
    const auto& go = out.grad();
    for (std::size_t r = 0; r < rows; ++r) {
      if (a.has_grad())
        for (std::size_t c = 0; c < ca; ++c) a.grad()[r * ca + c] += go[r * (ca + cb) + c];
      if (b.has_grad())
        for (std::size_t c = 0; c < cb; ++c)
          b.grad()[r * cb + c] += go[r * (ca + cb) + ca + c];
    }
  });
  return out;
}

Tensor Graph::sum(const Tensor& a) {
  Tensor out = make_output({1});
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i];
  out[0] = s;
  record([a, out]() mutable {
    if (!a.has_grad()) return;
    const double g = out.grad()[0];
    auto& ga = a.grad();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
  });
  return out;
}

Tensor Graph::mean(const Tensor& a) {
  check(a.size() > 0, "mean: empty tensor");
  Tensor out = make_output({1});
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i];
  const double inv_n = 1.0 / static_cast<double>(a.size());
  out[0] = s * inv_n;
  record([a, out, inv_n]() mutable {
    if (!a.has_grad()) return;
    const double g = out.grad()[0] * inv_n;
    auto& ga = a.grad();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
  });
  return out;
}

Tensor Graph::sum_rows(const Tensor& a) {
  check(a.rank() == 2, "sum_rows: expects rank-2 tensor, got " + shape_str(a.shape()));
  const std::size_t rows = a.shape()[0], cols = a.shape()[1];
  Tensor out = make_output({rows, 1});
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += a[r * cols + c];
    out[r] = s;
  }
  record([a, out, rows, cols]() mutable {
    if (!a.has_grad()) return;
    const auto& go = out.grad();
    auto& ga = a.grad();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) ga[r * cols + c] += go[r];
  });
  return out;
}

Tensor Graph::squared_error(const Tensor& pred, const Tensor& target) {
  check_same_shape("squared_error", pred, target);
  check(pred.size() > 0, "squared_error: empty tensors");
  Tensor out = make_output({1});
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    s += d * d;
  }
  const double inv_n = 1.0 / static_cast<double>(pred.size());
  out[0] = s * inv_n;
  record([pred, target, out, inv_n]() mutable {
    const double g = out.grad()[0] * 2.0 * inv_n;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double d = pred[i] - target[i];
      if (pred.has_grad()) pred.grad()[i] += g * d;
      if (target.has_grad()) target.grad()[i] -= g * d;
    }
  });
  return out;
}

void Graph::backward(const Tensor& loss) {
  check(!consumed_, "backward: tape already consumed");
  check(loss.size() == 1, "backward: loss must be scalar, got " + shape_str(loss.shape()));
  check(loss.has_grad() && !nodes_.empty(),
        "backward: loss is not connected to the tape");
  consumed_ = true;
  loss.grad()[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->back();
}

}  // namespace idql
