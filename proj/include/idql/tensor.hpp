#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "idql/rng.hpp"
#include "idql/util.hpp"

namespace idql {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

// Dense row-major tensor of doubles. Copies share storage; the gradient
// buffer, when present, is shared the same way so that a parameter held in a
// ParamSet and the copy captured by a tape node accumulate into the same
// place. Rank 1 and rank 2 cover every op in the library.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, double fill = 0.0)
      : shape_(std::move(shape)),
        values_(std::make_shared<std::vector<double>>(shape_size(shape_), fill)) {}

  Tensor(Shape shape, std::vector<double> values)
      : shape_(std::move(shape)),
        values_(std::make_shared<std::vector<double>>(std::move(values))) {
    check(values_->size() == shape_size(shape_),
          "Tensor: data length " + std::to_string(values_->size()) +
              " does not match shape " + shape_str(shape_));
  }

  static Tensor scalar(double v) { return Tensor({1}, std::vector<double>{v}); }
  static Tensor row(std::vector<double> v) {
    Shape s{v.size()};
    return Tensor(std::move(s), std::move(v));
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return values_ ? values_->size() : 0; }
  std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
  std::size_t cols() const { return shape_.size() == 2 ? shape_[1] : (shape_.size() == 1 ? shape_[0] : 0); }

  bool defined() const { return static_cast<bool>(values_); }

  std::vector<double>& values() { return *values_; }
  const std::vector<double>& values() const { return *values_; }
  double* data() { return values_->data(); }
  const double* data() const { return values_->data(); }

  double operator[](std::size_t i) const { return (*values_)[i]; }
  double& operator[](std::size_t i) { return (*values_)[i]; }

  double at(std::size_t r, std::size_t c) const { return (*values_)[r * shape_[1] + c]; }
  double& at(std::size_t r, std::size_t c) { return (*values_)[r * shape_[1] + c]; }

  // Scalar extraction; the tensor must hold exactly one element.
  double item() const {
    check(size() == 1, "Tensor::item: tensor has " + std::to_string(size()) + " elements");
    return (*values_)[0];
  }

  bool has_grad() const { return static_cast<bool>(grad_); }
  void ensure_grad() {
    if (!grad_) grad_ = std::make_shared<std::vector<double>>(size(), 0.0);
  }
  // The gradient buffer is shared between copies (pointer semantics), so it
  // stays writable through const handles captured by tape closures.
  std::vector<double>& grad() const {
    check(has_grad(), "Tensor::grad: no gradient buffer");
    return *grad_;
  }
  void zero_grad() {
    if (grad_) std::fill(grad_->begin(), grad_->end(), 0.0);
  }

  bool finite() const;

 private:
  Shape shape_;
  std::shared_ptr<std::vector<double>> values_;
  std::shared_ptr<std::vector<double>> grad_;

  friend class Graph;
};

// Define-by-run reverse-mode tape. Ops are Graph methods; each records a
// closure that scatters the output gradient into its parents. The tape is
// rebuilt every training step and consumed by a single backward() call.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // --- forward ops ---
  Tensor matmul(const Tensor& a, const Tensor& b);
  // Same-shape add, or [B,N] + [N] row-bias broadcast.
  Tensor add(const Tensor& a, const Tensor& b);
  Tensor sub(const Tensor& a, const Tensor& b);
  // Elementwise product of same-shape tensors.
  Tensor mul(const Tensor& a, const Tensor& b);
  Tensor scale(const Tensor& a, double c);
  Tensor add_const(const Tensor& a, double c);
  Tensor relu(const Tensor& a);
  Tensor mish(const Tensor& a);
  Tensor gelu(const Tensor& a);
  Tensor exp(const Tensor& a);
  Tensor abs(const Tensor& a);
  // min(x, hi) elementwise; gradient is blocked where x >= hi.
  Tensor clip_max(const Tensor& a, double hi);
  // Normalization over the last dimension, then affine gain/bias of size [N].
  Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                    double eps = 1e-8);
  // Inverted dropout: scales kept units by 1/(1-rate) at train time so that
  // evaluation is the identity. Rate must lie in [0, 1).
  Tensor dropout(const Tensor& x, double rate, bool train, Rng& rng);
  // Concatenate along the last dimension (two rank-1 or two rank-2 tensors).
  Tensor concat(const Tensor& a, const Tensor& b);
  Tensor sum(const Tensor& a);
  Tensor mean(const Tensor& a);
  // Row-wise sum of a [B,N] tensor, yielding [B,1].
  Tensor sum_rows(const Tensor& a);
  // mean over all elements of (pred - target)^2, as a scalar.
  Tensor squared_error(const Tensor& pred, const Tensor& target);

  // Register an externally created tensor as requiring gradient (leaf).
  static void make_leaf(Tensor& t) { t.ensure_grad(); }

  // Reverse pass from a scalar loss. May be called once per tape.
  void backward(const Tensor& loss);

  std::size_t num_nodes() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

 private:
  struct Node {
    std::function<void()> back;
  };

  Tensor make_output(Shape shape);
  void record(std::function<void()> back);

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

}  // namespace idql
