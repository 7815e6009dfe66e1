#pragma once

#include <vector>

#include "abfr/params.hpp"

namespace abfr {

// Reflectional switch basis centered on knot g with width h:
//   b(x) = 1 - tanh^2((x - g) / h)
// Bell-shaped, peak 1 at the knot, even about it.
double rswaf_basis(double x, double knot, double width);

struct RswafGrid {
  std::vector<double> knots;  // strictly increasing
  double width = 1.0;
};

// `size` knots spread uniformly over [-range, range], width = half the spacing.
RswafGrid uniform_grid(std::size_t size, double range);

struct KanOptions {
  std::size_t grid_size = 8;
  double grid_range = 2.0;
  bool use_base = true;  // silu base path w_b * silu(x)
  double coeff_init_std = 0.1;
};

// One KAN layer. Edge (i -> j) computes
//   phi_ji(x) = w_b[j,i] * silu(x) + sum_k c[j,i,k] * b(x; g_k, h)
// and output j sums its incoming edges. Coefficients are stored as an
// (in_dim * G) x out_dim matrix so the layer is a single matmul over the basis
// expansion: c[j,i,k] lives at row i * G + k, column j.
struct KanLayer {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  RswafGrid grid;
  bool use_base = true;
  Tensor basis_coeffs;  // (in_dim * G) x out_dim
  Tensor base_weight;   // in_dim x out_dim, undefined when !use_base

  double coeff(std::size_t j, std::size_t i, std::size_t k) const {
    return basis_coeffs.at(i * grid.knots.size() + k, j);
  }
  void collect(ParamList& out, const std::string& prefix) const;
};

KanLayer make_kan_layer(std::size_t in_dim, std::size_t out_dim, const KanOptions& opts, Rng& rng);

// x: batch x in_dim -> batch x (in_dim * G), entry (n, i * G + k) = b(x[n,i]; g_k, h).
Tensor rswaf_expand(const Tensor& x, const RswafGrid& grid);

Tensor kan_layer_forward(const Tensor& x, const KanLayer& layer);
Tensor kan_stack_forward(const Tensor& x, const std::vector<KanLayer>& layers);

// Per-forward-pass switches shared by every stochastic layer.
struct ForwardContext {
  bool training = false;
  Rng* rng = nullptr;           // required when training with a nonzero drop rate
  bool force_drop_path = false;  // test hook: drop every residual branch
};

// x is one sample's residual-branch output. Eval mode returns x. Training keeps
// the whole branch with probability 1 - rate and rescales it by 1 / (1 - rate),
// otherwise returns zeros.
Tensor drop_path(const Tensor& x, double rate, ForwardContext& ctx);

// LayerNorm followed by the KAN layers; the layer widths go d -> ... -> d.
struct KanBlock {
  std::size_t width = 0;
  Tensor norm_gain;
  Tensor norm_bias;
  std::vector<KanLayer> layers;
  double drop_path_rate = 0.1;

  void collect(ParamList& out, const std::string& prefix) const;
};

// n_layers = 1: d -> d. n_layers = 2: d -> 2d -> d.
KanBlock make_kan_block(std::size_t width, std::size_t n_layers, double drop_path_rate, const KanOptions& opts,
                        Rng& rng);

// tokens + drop_path(kan_layers(layer_norm(tokens)))
Tensor kan_block_forward(const Tensor& tokens, const KanBlock& block, ForwardContext& ctx);

// class_token: 1 x d. The final layer must produce 2 logits.
Tensor kan_head_forward(const Tensor& class_token, const std::vector<KanLayer>& head);

}  // namespace abfr
