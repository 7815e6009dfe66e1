#pragma once

// Dense 64-bit tensors with tape-based reverse-mode differentiation.
//
// Every operation that involves at least one tensor with requires_grad()
// records its inputs and a backward closure on the output. backward() walks
// the recorded graph in reverse topological order and accumulates gradients
// into every tensor that requires them. Graphs are owned by the tensors that
// reference them, so independent graphs can live on independent threads.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace abfr {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

class Tensor;

// Receives the gradient flowing into an operation's output and the operation's
// inputs; adds the input gradients into inputs[i].mutable_grad() for every
// input that requires_grad().
using BackwardFn = std::function<void(std::span<const double> grad_out, std::span<const Tensor> inputs)>;

namespace detail {
struct Node;
}

class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows, bool requires_grad = false);

  // Builds the output of an operation. History is kept only if some input
  // requires a gradient.
  static Tensor record(Shape shape, std::vector<double> values, std::vector<Tensor> inputs, BackwardFn backward);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;
  // Matrix views; valid for rank-2 tensors only.
  std::size_t rows() const;
  std::size_t cols() const;

  // Tensor is a handle: copies share storage, and the mutable accessors are
  // const on the handle.
  std::span<const double> data() const;
  std::span<double> mutable_data() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad() const;
  bool requires_grad() const;
  bool is_leaf() const;
  void zero_grad() const;

  double item() const;
  double at(std::size_t i) const { return data()[i]; }
  double at(std::size_t r, std::size_t c) const { return data()[r * cols() + c]; }

  // Same values, no history, no gradient.
  Tensor detach() const;
  bool same_node(const Tensor& other) const noexcept { return node_ == other.node_; }

 private:
  friend void backward(const Tensor& loss);
  std::shared_ptr<detail::Node> node_;
};

// Elementwise, identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

// a: rows x cols, bias: numel == cols; bias is added to every row.
Tensor add_bias(const Tensor& a, const Tensor& bias);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

Tensor silu(const Tensor& x);
Tensor tanh(const Tensor& x);
// Exact erf formulation: 0.5 x (1 + erf(x / sqrt 2)).
Tensor gelu(const Tensor& x);

Tensor softmax(const Tensor& x, std::size_t axis);
// Normalizes over the last dimension; gain and bias have that many entries.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t count);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t count);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_cols(std::span<const Tensor> parts);

// Mean over the batch of -log softmax(logits)[label]. logits: batch x classes.
Tensor cross_entropy(const Tensor& logits, std::span<const int> labels);

// Accumulates d loss / d t into every t reachable from loss that requires a
// gradient. Intermediate gradients are reset on each call; leaf gradients
// accumulate until zero_grad().
void backward(const Tensor& loss);

}  // namespace abfr
