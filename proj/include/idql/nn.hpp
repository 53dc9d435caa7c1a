#pragma once

#include <string>
#include <vector>

#include "idql/param_set.hpp"
#include "idql/tensor.hpp"

namespace idql {

enum class Activation { relu, mish, gelu };

Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);

Tensor apply_activation(Graph& g, Activation act, const Tensor& x);

// Plain feedforward network descriptor. Parameters live in a ParamSet under
// "<prefix>.w<i>" / "<prefix>.b<i>"; an empty hidden list gives a single
// linear layer.
struct MlpSpec {
  std::string prefix;
  std::size_t in_dim = 0;
  std::vector<std::size_t> hidden;
  std::size_t out_dim = 1;
  Activation act = Activation::relu;
  bool zero_init_last = false;
};

// Fan-in scaled uniform initialization, biases zero.
void init_mlp(const MlpSpec& spec, ParamSet& params, Rng& rng);

Tensor mlp_forward(Graph& g, const MlpSpec& spec, const ParamSet& params, const Tensor& x);

// Convenience: run a forward pass on a scratch graph and return raw values.
std::vector<double> mlp_eval(const MlpSpec& spec, const ParamSet& params,
                             const std::vector<double>& x_rows, std::size_t batch);

std::size_t mlp_param_count(const MlpSpec& spec);

// Uniform fan-in initializer for a single dense layer, shared with the score
// network builder.
Tensor dense_init(std::size_t in_dim, std::size_t out_dim, Rng& rng);

}  // namespace idql
