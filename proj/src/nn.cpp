#include "idql/nn.hpp"

#include <cmath>

namespace idql {

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "mish") return Activation::mish;
  if (s == "gelu") return Activation::gelu;
  fail("unknown activation '" + s + "' (expected relu|mish|gelu)");
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::mish: return "mish";
    case Activation::gelu: return "gelu";
  }
  return "relu";
}

Tensor apply_activation(Graph& g, Activation act, const Tensor& x) {
  switch (act) {
    case Activation::relu: return g.relu(x);
    case Activation::mish: return g.mish(x);
    case Activation::gelu: return g.gelu(x);
  }
  return g.relu(x);
}

Tensor dense_init(std::size_t in_dim, std::size_t out_dim, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
  Tensor w({in_dim, out_dim});
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-bound, bound);
  return w;
}

void init_mlp(const MlpSpec& spec, ParamSet& params, Rng& rng) {
  check(spec.in_dim > 0 && spec.out_dim > 0,
        "init_mlp: dimensions must be positive for " + spec.prefix);
  std::size_t in = spec.in_dim;
  std::size_t layer = 0;
  for (std::size_t h : spec.hidden) {
    check(h > 0, "init_mlp: hidden width must be positive for " + spec.prefix);
    params.add(spec.prefix + ".w" + std::to_string(layer), dense_init(in, h, rng));
    params.add(spec.prefix + ".b" + std::to_string(layer), Tensor({h}));
    in = h;
    ++layer;
  }
  Tensor w_out = spec.zero_init_last ? Tensor({in, spec.out_dim})
                                     : dense_init(in, spec.out_dim, rng);
  params.add(spec.prefix + ".w" + std::to_string(layer), std::move(w_out));
  params.add(spec.prefix + ".b" + std::to_string(layer), Tensor({spec.out_dim}));
}

Tensor mlp_forward(Graph& g, const MlpSpec& spec, const ParamSet& params, const Tensor& x) {
  check(x.rank() == 2 && x.shape()[1] == spec.in_dim,
        "mlp_forward(" + spec.prefix + "): input shape " + shape_str(x.shape()) +
            " does not match in_dim " + std::to_string(spec.in_dim));
  Tensor h = x;
  std::size_t layer = 0;
  for (std::size_t i = 0; i < spec.hidden.size(); ++i, ++layer) {
    h = g.add(g.matmul(h, params.at(spec.prefix + ".w" + std::to_string(layer))),
              params.at(spec.prefix + ".b" + std::to_string(layer)));
    h = apply_activation(g, spec.act, h);
  }
  return g.add(g.matmul(h, params.at(spec.prefix + ".w" + std::to_string(layer))),
               params.at(spec.prefix + ".b" + std::to_string(layer)));
}

std::vector<double> mlp_eval(const MlpSpec& spec, const ParamSet& params,
                             const std::vector<double>& x_rows, std::size_t batch) {
  check(batch > 0 && x_rows.size() == batch * spec.in_dim,
        "mlp_eval(" + spec.prefix + "): input size mismatch");
  Graph g;
  Tensor x({batch, spec.in_dim}, x_rows);
  Tensor out = mlp_forward(g, spec, params, x);
  return out.values();
}

std::size_t mlp_param_count(const MlpSpec& spec) {
  std::size_t n = 0;
  std::size_t in = spec.in_dim;
  for (std::size_t h : spec.hidden) {
    n += in * h + h;
    in = h;
  }
  n += in * spec.out_dim + spec.out_dim;
  return n;
}

}  // namespace idql
