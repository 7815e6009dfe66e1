#pragma once

#include <string>

#include "abfr/features.hpp"
#include "abfr/params.hpp"

namespace abfr {

enum class FusionMode { sum, concat };

std::string to_string(FusionMode m);
FusionMode fusion_mode_from_string(const std::string& s);

// Learnable maps from function descriptions (one FC row, n_anchors wide) and
// position descriptions (3 coordinates) into token space. The bias sits on the
// FC path only.
//   sum:    token = fc_row W_fc + b_fc + position W_pos          (both d_model wide)
//   concat: token = [fc_row W_fc + b_fc | position W_pos]        (d_model - d_model/2 | d_model/2)
struct TokenEmbedding {
  FusionMode mode = FusionMode::sum;
  std::size_t n_anchors = 0;
  std::size_t d_model = 0;
  Tensor fc_weight;   // n_anchors x d_fc
  Tensor fc_bias;     // 1 x d_fc
  Tensor pos_weight;  // 3 x d_pos

  void collect(ParamList& out, const std::string& prefix) const;
};

TokenEmbedding make_token_embedding(std::size_t n_anchors, std::size_t d_model, FusionMode mode, Rng& rng);

// fc: N x n_anchors, positions: N x 3. Returns the N x d_model token matrix.
Tensor embed_tokens(const Tensor& fc, const Tensor& positions, const TokenEmbedding& emb);

// Constant tensors holding a representation's aggregated FC rows and the
// per-token positions.
struct TokenInputs {
  Tensor fc;
  Tensor positions;
};

TokenInputs token_inputs(const FunctionRepresentation& rep);

}  // namespace abfr
