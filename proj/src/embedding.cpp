#include "abfr/embedding.hpp"

#include "abfr/errors.hpp"

namespace abfr {

std::string to_string(FusionMode m) { return m == FusionMode::sum ? "sum" : "concat"; }

FusionMode fusion_mode_from_string(const std::string& s) {
  if (s == "sum") return FusionMode::sum;
  if (s == "concat") return FusionMode::concat;
  throw ValidationError("unknown fusion mode '" + s + "'");
}

void TokenEmbedding::collect(ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + "fc_weight", fc_weight});
  out.push_back({prefix + "fc_bias", fc_bias});
  out.push_back({prefix + "pos_weight", pos_weight});
}

TokenEmbedding make_token_embedding(std::size_t n_anchors, std::size_t d_model, FusionMode mode, Rng& rng) {
  if (n_anchors == 0 || d_model == 0) throw ValidationError("embedding widths must be positive");
  if (mode == FusionMode::concat && d_model < 2) throw ValidationError("concat fusion needs d_model >= 2");
  TokenEmbedding e;
  e.mode = mode;
  e.n_anchors = n_anchors;
  e.d_model = d_model;
  const std::size_t d_pos = mode == FusionMode::sum ? d_model : d_model / 2;
  const std::size_t d_fc = mode == FusionMode::sum ? d_model : d_model - d_pos;
  e.fc_weight = fan_in_uniform({n_anchors, d_fc}, n_anchors, rng);
  e.fc_bias = zeros_param({1, d_fc});
  e.pos_weight = fan_in_uniform({3, d_pos}, 3, rng);
  return e;
}

Tensor embed_tokens(const Tensor& fc, const Tensor& positions, const TokenEmbedding& emb) {
  if (fc.rank() != 2 || fc.cols() != emb.n_anchors)
    throw DimensionError("embed_tokens: FC rows " + shape_string(fc.shape()) + " do not match embedding width " +
                         std::to_string(emb.n_anchors));
  if (positions.rank() != 2 || positions.cols() != 3 || positions.rows() != fc.rows())
    throw DimensionError("embed_tokens: positions " + shape_string(positions.shape()) + " do not match " +
                         shape_string(fc.shape()));
  Tensor fc_part = add_bias(matmul(fc, emb.fc_weight), emb.fc_bias);
  Tensor pos_part = matmul(positions, emb.pos_weight);
  if (emb.mode == FusionMode::sum) return add(fc_part, pos_part);
  const Tensor parts[] = {fc_part, pos_part};
  return concat_cols(parts);
}

TokenInputs token_inputs(const FunctionRepresentation& rep) {
  if (rep.n_rows == 0 || rep.n_anchors == 0 || rep.fc.size() != rep.n_rows * rep.n_anchors)
    throw ValidationError("malformed function representation");
  return {Tensor({rep.n_rows, rep.n_anchors}, rep.fc), Tensor({rep.n_rows, 3}, rep.token_positions())};
}

}  // namespace abfr
