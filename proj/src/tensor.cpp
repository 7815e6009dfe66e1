#include "abfr/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <unordered_set>

#include "abfr/errors.hpp"

namespace abfr {

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty unless requires_grad
  bool requires_grad = false;
  std::vector<Tensor> inputs;
  BackwardFn backward;
};

}  // namespace detail

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have at least one dimension");
  for (auto d : shape)
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_string(shape));
}

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_string(t.shape()));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
}

template <typename F>
Tensor unary_map(const Tensor& x, F value_and_slope) {
  const auto in = x.data();
  std::vector<double> out(in.size());
  std::vector<double> slope(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    auto [v, d] = value_and_slope(in[i]);
    out[i] = v;
    slope[i] = d;
  }
  return Tensor::record(x.shape(), std::move(out), {x},
                        [slope = std::move(slope)](std::span<const double> g, std::span<const Tensor> ins) {
                          auto gx = ins[0].mutable_grad();
                          for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * slope[i];
                        });
}

}  // namespace

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  check_shape(shape);
  if (values.size() != shape_numel(shape))
    throw DimensionError("tensor data length " + std::to_string(values.size()) + " does not match shape " +
                         shape_string(shape));
  node_ = std::make_shared<detail::Node>();
  node_->shape = std::move(shape);
  node_->data = std::move(values);
  node_->requires_grad = requires_grad;
  if (requires_grad) node_->grad.assign(node_->data.size(), 0.0);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  check_shape(shape);
  const auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return Tensor({1}, {value}, requires_grad); }

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows, bool requires_grad) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> values;
  values.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged matrix literal");
    values.insert(values.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(values), requires_grad);
}

Tensor Tensor::record(Shape shape, std::vector<double> values, std::vector<Tensor> inputs, BackwardFn backward) {
  bool needs = false;
  for (const auto& in : inputs) needs = needs || in.requires_grad();
  Tensor out(std::move(shape), std::move(values), needs);
  if (needs) {
    out.node_->inputs = std::move(inputs);
    out.node_->backward = std::move(backward);
  }
  return out;
}

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::numel() const { return node_->data.size(); }

std::size_t Tensor::rows() const {
  if (rank() != 2) throw DimensionError("rows() on non-matrix " + shape_string(shape()));
  return node_->shape[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw DimensionError("cols() on non-matrix " + shape_string(shape()));
  return node_->shape[1];
}

std::span<const double> Tensor::data() const { return node_->data; }
std::span<double> Tensor::mutable_data() const { return node_->data; }
std::span<const double> Tensor::grad() const { return node_->grad; }
std::span<double> Tensor::mutable_grad() const { return node_->grad; }
bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
bool Tensor::is_leaf() const { return node_->inputs.empty(); }

void Tensor::zero_grad() const { std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }

double Tensor::item() const {
  if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape_string(shape()));
  return node_->data[0];
}

Tensor Tensor::detach() const { return Tensor(node_->shape, node_->data, false); }

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return Tensor::record(a.shape(), std::move(out), {a, b}, [](std::span<const double> g, std::span<const Tensor> ins) {
    for (auto t : ins) {
      if (!t.requires_grad()) continue;
      auto gt = t.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) gt[i] += g[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return Tensor::record(a.shape(), std::move(out), {a, b}, [](std::span<const double> g, std::span<const Tensor> ins) {
    Tensor x = ins[0], y = ins[1];
    if (x.requires_grad()) {
      auto gx = x.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
    if (y.requires_grad()) {
      auto gy = y.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) gy[i] -= g[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return Tensor::record(a.shape(), std::move(out), {a, b}, [](std::span<const double> g, std::span<const Tensor> ins) {
    Tensor x = ins[0], y = ins[1];
    if (x.requires_grad()) {
      auto gx = x.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y.data()[i];
    }
    if (y.requires_grad()) {
      auto gy = y.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) gy[i] += g[i] * x.data()[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * factor;
  return Tensor::record(a.shape(), std::move(out), {a},
                        [factor](std::span<const double> g, std::span<const Tensor> ins) {
                          auto gx = ins[0].mutable_grad();
                          for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * factor;
                        });
}

Tensor add_bias(const Tensor& a, const Tensor& bias) {
  require_rank2(a, "add_bias");
  const std::size_t r = a.rows(), c = a.cols();
  if (bias.numel() != c)
    throw DimensionError("add_bias: bias " + shape_string(bias.shape()) + " does not match " + shape_string(a.shape()));
  std::vector<double> out(a.data().begin(), a.data().end());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] += bias.data()[j];
  return Tensor::record(a.shape(), std::move(out), {a, bias},
                        [r, c](std::span<const double> g, std::span<const Tensor> ins) {
                          Tensor x = ins[0], b = ins[1];
                          if (x.requires_grad()) {
                            auto gx = x.mutable_grad();
                            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                          }
                          if (b.requires_grad()) {
                            auto gb = b.mutable_grad();
                            for (std::size_t i = 0; i < r; ++i)
                              for (std::size_t j = 0; j < c; ++j) gb[j] += g[i * c + j];
                          }
                        });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k)
    throw DimensionError("matmul: inner dimensions disagree, " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  std::vector<double> out(m * n, 0.0);
  const double* A = a.data().data();
  const double* B = b.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      if (av == 0.0) continue;
      const double* brow = B + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
  return Tensor::record({m, n}, std::move(out), {a, b},
                        [m, k, n](std::span<const double> g, std::span<const Tensor> ins) {
                          Tensor x = ins[0], y = ins[1];
                          const double* A = x.data().data();
                          const double* B = y.data().data();
                          if (x.requires_grad()) {
                            // dA = G B^T
                            auto ga = x.mutable_grad();
                            for (std::size_t i = 0; i < m; ++i)
                              for (std::size_t p = 0; p < k; ++p) {
                                const double* grow = g.data() + i * n;
                                const double* brow = B + p * n;
                                double s = 0.0;
                                for (std::size_t j = 0; j < n; ++j) s += grow[j] * brow[j];
                                ga[i * k + p] += s;
                              }
                          }
                          if (y.requires_grad()) {
                            // dB = A^T G
                            auto gb = y.mutable_grad();
                            for (std::size_t i = 0; i < m; ++i) {
                              const double* grow = g.data() + i * n;
                              for (std::size_t p = 0; p < k; ++p) {
                                const double av = A[i * k + p];
                                if (av == 0.0) continue;
                                double* gbrow = gb.data() + p * n;
                                for (std::size_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
                              }
                            }
                          }
                        });
}

Tensor transpose(const Tensor& a) {
  require_rank2(a, "transpose");
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a.data()[i * c + j];
  return Tensor::record({c, r}, std::move(out), {a}, [r, c](std::span<const double> g, std::span<const Tensor> ins) {
    auto gx = ins[0].mutable_grad();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += g[j * r + i];
  });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return Tensor::record({1}, {s}, {a}, [](std::span<const double> g, std::span<const Tensor> ins) {
    auto gx = ins[0].mutable_grad();
    for (auto& v : gx) v += g[0];
  });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

Tensor silu(const Tensor& x) {
  return unary_map(x, [](double v) {
    const double s = 1.0 / (1.0 + std::exp(-v));
    return std::pair{v * s, s * (1.0 + v * (1.0 - s))};
  });
}

Tensor tanh(const Tensor& x) {
  return unary_map(x, [](double v) {
    const double t = std::tanh(v);
    return std::pair{t, 1.0 - t * t};
  });
}

Tensor gelu(const Tensor& x) {
  return unary_map(x, [](double v) {
    const double cdf = 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
    const double pdf = std::exp(-0.5 * v * v) / std::sqrt(2.0 * std::numbers::pi);
    return std::pair{v * cdf, cdf + v * pdf};
  });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  const auto& shape = x.shape();
  if (axis >= shape.size())
    throw DimensionError("softmax: axis " + std::to_string(axis) + " invalid for " + shape_string(shape));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const std::size_t len = shape[axis];
  std::vector<double> out(x.numel());
  const auto in = x.data();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t q = 0; q < inner; ++q) {
      const std::size_t base = o * len * inner + q;
      double mx = in[base];
      for (std::size_t l = 1; l < len; ++l) mx = std::max(mx, in[base + l * inner]);
      double z = 0.0;
      for (std::size_t l = 0; l < len; ++l) {
        const double e = std::exp(in[base + l * inner] - mx);
        out[base + l * inner] = e;
        z += e;
      }
      for (std::size_t l = 0; l < len; ++l) out[base + l * inner] /= z;
    }
  std::vector<double> y = out;
  return Tensor::record(shape, std::move(out), {x},
                        [y = std::move(y), outer, inner, len](std::span<const double> g, std::span<const Tensor> ins) {
                          auto gx = ins[0].mutable_grad();
                          for (std::size_t o = 0; o < outer; ++o)
                            for (std::size_t q = 0; q < inner; ++q) {
                              const std::size_t base = o * len * inner + q;
                              double dot = 0.0;
                              for (std::size_t l = 0; l < len; ++l) dot += g[base + l * inner] * y[base + l * inner];
                              for (std::size_t l = 0; l < len; ++l) {
                                const std::size_t idx = base + l * inner;
                                gx[idx] += y[idx] * (g[idx] - dot);
                              }
                            }
                        });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const std::size_t d = x.shape().back();
  if (gain.numel() != d || bias.numel() != d)
    throw DimensionError("layer_norm: gain/bias " + shape_string(gain.shape()) + "/" + shape_string(bias.shape()) +
                         " do not match last dimension of " + shape_string(x.shape()));
  const std::size_t rows = x.numel() / d;
  const auto in = x.data();
  std::vector<double> xhat(x.numel());
  std::vector<double> inv_std(rows);
  std::vector<double> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = in.data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      xhat[r * d + j] = (row[j] - mu) * inv_std[r];
      out[r * d + j] = xhat[r * d + j] * gain.data()[j] + bias.data()[j];
    }
  }
  return Tensor::record(
      x.shape(), std::move(out), {x, gain, bias},
      [xhat = std::move(xhat), inv_std = std::move(inv_std), rows, d](std::span<const double> g,
                                                                      std::span<const Tensor> ins) {
        Tensor xt = ins[0], gt = ins[1], bt = ins[2];
        if (gt.requires_grad()) {
          auto gg = gt.mutable_grad();
          for (std::size_t i = 0; i < g.size(); ++i) gg[i % d] += g[i] * xhat[i];
        }
        if (bt.requires_grad()) {
          auto gb = bt.mutable_grad();
          for (std::size_t i = 0; i < g.size(); ++i) gb[i % d] += g[i];
        }
        if (xt.requires_grad()) {
          auto gx = xt.mutable_grad();
          const auto gain_v = gt.data();
          const double inv_d = 1.0 / static_cast<double>(d);
          for (std::size_t r = 0; r < rows; ++r) {
            double m1 = 0.0, m2 = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
              const double dxh = g[r * d + j] * gain_v[j];
              m1 += dxh;
              m2 += dxh * xhat[r * d + j];
            }
            m1 *= inv_d;
            m2 *= inv_d;
            for (std::size_t j = 0; j < d; ++j) {
              const double dxh = g[r * d + j] * gain_v[j];
              gx[r * d + j] += inv_std[r] * (dxh - m1 - xhat[r * d + j] * m2);
            }
          }
        }
      });
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t count) {
  require_rank2(a, "slice_rows");
  const std::size_t c = a.cols();
  if (count == 0 || begin + count > a.rows())
    throw DimensionError("slice_rows: [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") out of range for " + shape_string(a.shape()));
  std::vector<double> out(a.data().begin() + begin * c, a.data().begin() + (begin + count) * c);
  return Tensor::record({count, c}, std::move(out), {a},
                        [begin, c](std::span<const double> g, std::span<const Tensor> ins) {
                          auto gx = ins[0].mutable_grad();
                          for (std::size_t i = 0; i < g.size(); ++i) gx[begin * c + i] += g[i];
                        });
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t count) {
  require_rank2(a, "slice_cols");
  const std::size_t r = a.rows(), c = a.cols();
  if (count == 0 || begin + count > c)
    throw DimensionError("slice_cols: [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") out of range for " + shape_string(a.shape()));
  std::vector<double> out(r * count);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < count; ++j) out[i * count + j] = a.data()[i * c + begin + j];
  return Tensor::record({r, count}, std::move(out), {a},
                        [r, c, begin, count](std::span<const double> g, std::span<const Tensor> ins) {
                          auto gx = ins[0].mutable_grad();
                          for (std::size_t i = 0; i < r; ++i)
                            for (std::size_t j = 0; j < count; ++j) gx[i * c + begin + j] += g[i * count + j];
                        });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: nothing to concatenate");
  const std::size_t c = parts[0].cols();
  std::size_t r = 0;
  std::vector<double> out;
  for (const auto& p : parts) {
    if (p.cols() != c)
      throw DimensionError("concat_rows: column mismatch " + shape_string(parts[0].shape()) + " vs " +
                           shape_string(p.shape()));
    r += p.rows();
    out.insert(out.end(), p.data().begin(), p.data().end());
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return Tensor::record({r, c}, std::move(out), std::move(inputs),
                        [](std::span<const double> g, std::span<const Tensor> ins) {
                          std::size_t offset = 0;
                          for (auto t : ins) {
                            const std::size_t n = t.numel();
                            if (t.requires_grad()) {
                              auto gt = t.mutable_grad();
                              for (std::size_t i = 0; i < n; ++i) gt[i] += g[offset + i];
                            }
                            offset += n;
                          }
                        });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: nothing to concatenate");
  const std::size_t r = parts[0].rows();
  std::size_t c = 0;
  for (const auto& p : parts) {
    if (p.rows() != r)
      throw DimensionError("concat_cols: row mismatch " + shape_string(parts[0].shape()) + " vs " +
                           shape_string(p.shape()));
    c += p.cols();
  }
  std::vector<double> out(r * c);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t pc = p.cols();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < pc; ++j) out[i * c + offset + j] = p.data()[i * pc + j];
    offset += pc;
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return Tensor::record({r, c}, std::move(out), std::move(inputs),
                        [r, c](std::span<const double> g, std::span<const Tensor> ins) {
                          std::size_t offset = 0;
                          for (auto t : ins) {
                            const std::size_t pc = t.cols();
                            if (t.requires_grad()) {
                              auto gt = t.mutable_grad();
                              for (std::size_t i = 0; i < r; ++i)
                                for (std::size_t j = 0; j < pc; ++j) gt[i * pc + j] += g[i * c + offset + j];
                            }
                            offset += pc;
                          }
                        });
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> labels) {
  require_rank2(logits, "cross_entropy");
  const std::size_t b = logits.rows(), k = logits.cols();
  if (labels.size() != b)
    throw ValidationError("cross_entropy: " + std::to_string(labels.size()) + " labels for batch of " +
                          std::to_string(b));
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= k)
      throw ValidationError("cross_entropy: label " + std::to_string(y) + " outside [0, " + std::to_string(k) + ")");
  std::vector<double> probs(b * k);
  double loss = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    const double* z = logits.data().data() + i * k;
    const double mx = *std::max_element(z, z + k);
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += std::exp(z[j] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < k; ++j) probs[i * k + j] = std::exp(z[j] - lse);
    loss += lse - z[labels[i]];
  }
  loss /= static_cast<double>(b);
  std::vector<int> ys(labels.begin(), labels.end());
  return Tensor::record({1}, {loss}, {logits},
                        [probs = std::move(probs), ys = std::move(ys), b, k](std::span<const double> g,
                                                                            std::span<const Tensor> ins) {
                          auto gx = ins[0].mutable_grad();
                          const double s = g[0] / static_cast<double>(b);
                          for (std::size_t i = 0; i < b; ++i)
                            for (std::size_t j = 0; j < k; ++j) {
                              const double target = static_cast<std::size_t>(ys[i]) == j ? 1.0 : 0.0;
                              gx[i * k + j] += s * (probs[i * k + j] - target);
                            }
                        });
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1)
    throw ValidationError("backward: loss must be a scalar, got " +
                          (loss.defined() ? shape_string(loss.shape()) : std::string("undefined")));
  if (!loss.requires_grad()) return;

  // Post-order DFS gives a topological order with inputs before outputs.
  std::vector<detail::Node*> tape;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(loss.node_.get(), 0);
  seen.insert(loss.node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      detail::Node* child = node->inputs[next++].node_.get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      tape.push_back(node);
      stack.pop_back();
    }
  }

  for (auto* node : tape)
    if (!node->inputs.empty()) std::fill(node->grad.begin(), node->grad.end(), 0.0);
  loss.node_->grad[0] += 1.0;
  for (auto it = tape.rbegin(); it != tape.rend(); ++it) {
    detail::Node* node = *it;
    if (node->backward) node->backward(node->grad, node->inputs);
  }
}

}  // namespace abfr
