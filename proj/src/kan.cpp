#include "abfr/kan.hpp"

#include <cmath>

#include "abfr/errors.hpp"

namespace abfr {

double rswaf_basis(double x, double knot, double width) {
  const double t = std::tanh((x - knot) / width);
  return 1.0 - t * t;
}

RswafGrid uniform_grid(std::size_t size, double range) {
  if (size < 2) throw ValidationError("KAN grid needs at least 2 knots");
  if (!(range > 0.0)) throw ValidationError("KAN grid range must be positive");
  RswafGrid g;
  const double spacing = 2.0 * range / static_cast<double>(size - 1);
  for (std::size_t k = 0; k < size; ++k) g.knots.push_back(-range + spacing * static_cast<double>(k));
  g.width = spacing / 2.0;
  return g;
}

void KanLayer::collect(ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + "basis_coeffs", basis_coeffs});
  if (use_base) out.push_back({prefix + "base_weight", base_weight});
}

KanLayer make_kan_layer(std::size_t in_dim, std::size_t out_dim, const KanOptions& opts, Rng& rng) {
  if (in_dim == 0 || out_dim == 0) throw ValidationError("KAN layer widths must be positive");
  KanLayer layer;
  layer.in_dim = in_dim;
  layer.out_dim = out_dim;
  layer.grid = uniform_grid(opts.grid_size, opts.grid_range);
  layer.use_base = opts.use_base;
  layer.basis_coeffs = normal_init({in_dim * opts.grid_size, out_dim}, opts.coeff_init_std, rng);
  if (opts.use_base) layer.base_weight = fan_in_uniform({in_dim, out_dim}, in_dim, rng);
  return layer;
}

Tensor rswaf_expand(const Tensor& x, const RswafGrid& grid) {
  if (x.rank() != 2) throw DimensionError("rswaf_expand: expected a matrix, got " + shape_string(x.shape()));
  const std::size_t n = x.rows(), in = x.cols(), G = grid.knots.size();
  const double h = grid.width;
  std::vector<double> out(n * in * G);
  std::vector<double> slope(n * in * G);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t i = 0; i < in; ++i) {
      const double v = x.data()[r * in + i];
      for (std::size_t k = 0; k < G; ++k) {
        const double t = std::tanh((v - grid.knots[k]) / h);
        const double b = 1.0 - t * t;
        out[(r * in + i) * G + k] = b;
        slope[(r * in + i) * G + k] = -2.0 * t * b / h;
      }
    }
  return Tensor::record({n, in * G}, std::move(out), {x},
                        [slope = std::move(slope), n, in, G](std::span<const double> g, std::span<const Tensor> ins) {
                          auto gx = ins[0].mutable_grad();
                          for (std::size_t e = 0; e < n * in; ++e) {
                            double s = 0.0;
                            for (std::size_t k = 0; k < G; ++k) s += g[e * G + k] * slope[e * G + k];
                            gx[e] += s;
                          }
                        });
}

Tensor kan_layer_forward(const Tensor& x, const KanLayer& layer) {
  if (x.rank() != 2 || x.cols() != layer.in_dim)
    throw DimensionError("kan_layer_forward: input " + shape_string(x.shape()) + " does not match layer width " +
                         std::to_string(layer.in_dim));
  Tensor y = matmul(rswaf_expand(x, layer.grid), layer.basis_coeffs);
  if (layer.use_base) y = add(y, matmul(silu(x), layer.base_weight));
  return y;
}

Tensor kan_stack_forward(const Tensor& x, const std::vector<KanLayer>& layers) {
  Tensor h = x;
  for (const auto& l : layers) h = kan_layer_forward(h, l);
  return h;
}

Tensor drop_path(const Tensor& x, double rate, ForwardContext& ctx) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ValidationError("drop_path rate must lie in [0, 1)");
  if (ctx.force_drop_path) return scale(x, 0.0);
  if (!ctx.training || rate == 0.0) return x;
  if (!ctx.rng) throw ValidationError("drop_path: training mode needs a random stream");
  const bool keep = ctx.rng->bernoulli(1.0 - rate);
  return scale(x, keep ? 1.0 / (1.0 - rate) : 0.0);
}

void KanBlock::collect(ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + "norm_gain", norm_gain});
  out.push_back({prefix + "norm_bias", norm_bias});
  for (std::size_t i = 0; i < layers.size(); ++i) layers[i].collect(out, prefix + "kan" + std::to_string(i) + ".");
}

KanBlock make_kan_block(std::size_t width, std::size_t n_layers, double drop_path_rate, const KanOptions& opts,
                        Rng& rng) {
  if (!(drop_path_rate >= 0.0 && drop_path_rate < 1.0)) throw ValidationError("drop_path rate must lie in [0, 1)");
  if (n_layers != 1 && n_layers != 2) throw ValidationError("KAN block supports 1 or 2 layers");
  KanBlock b;
  b.width = width;
  b.norm_gain = ones_param({1, width});
  b.norm_bias = zeros_param({1, width});
  b.drop_path_rate = drop_path_rate;
  if (n_layers == 1) {
    b.layers.push_back(make_kan_layer(width, width, opts, rng));
  } else {
    b.layers.push_back(make_kan_layer(width, 2 * width, opts, rng));
    b.layers.push_back(make_kan_layer(2 * width, width, opts, rng));
  }
  return b;
}

Tensor kan_block_forward(const Tensor& tokens, const KanBlock& block, ForwardContext& ctx) {
  if (tokens.rank() != 2 || tokens.cols() != block.width)
    throw DimensionError("kan_block_forward: tokens " + shape_string(tokens.shape()) + " do not match block width " +
                         std::to_string(block.width));
  Tensor branch = kan_stack_forward(layer_norm(tokens, block.norm_gain, block.norm_bias), block.layers);
  return add(tokens, drop_path(branch, block.drop_path_rate, ctx));
}

Tensor kan_head_forward(const Tensor& class_token, const std::vector<KanLayer>& head) {
  if (head.empty() || head.back().out_dim != 2) throw ValidationError("KAN head must end in 2 outputs");
  return kan_stack_forward(class_token, head);
}

}  // namespace abfr
