#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "abfr/embedding.hpp"
#include "abfr/kan.hpp"

namespace abfr {

enum class Backbone { vit, deit };
enum class BlockKind { mlp, kan };

std::string to_string(Backbone b);
std::string to_string(BlockKind k);
Backbone backbone_from_string(const std::string& s);

// "mlp-mlp", "kan-kan", "kan-mlp", "mlp-kan": encoder FFN first, head second.
std::string configuration_name(BlockKind encoder_ffn, BlockKind head);
std::pair<BlockKind, BlockKind> configuration_from_string(const std::string& s);

struct ModelConfig {
  Backbone backbone = Backbone::vit;
  BlockKind encoder_ffn = BlockKind::kan;
  BlockKind head = BlockKind::kan;
  std::size_t n_anchors = 16;  // FC row width the embedding consumes
  std::size_t d_model = 64;
  std::size_t depth = 4;
  std::size_t n_heads = 4;
  double mlp_hidden_ratio = 2.0;
  std::size_t kan_grid_size = 8;
  double kan_grid_range = 2.0;
  std::size_t kan_layers_per_block = 1;
  bool kan_base_path = true;
  double drop_path_rate = 0.1;
  bool drop_path_on_mlp = true;
  FusionMode fusion = FusionMode::sum;
  std::uint64_t seed = 0;

  std::string configuration() const { return configuration_name(encoder_ffn, head); }
  void validate() const;
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

struct Linear {
  Tensor weight;  // in x out
  Tensor bias;    // 1 x out

  void collect(ParamList& out, const std::string& prefix) const;
};

Linear make_linear(std::size_t in, std::size_t out, Rng& rng);
Tensor linear_forward(const Tensor& x, const Linear& l);

struct AttentionBlock {
  std::size_t n_heads = 1;
  Tensor norm_gain, norm_bias;
  Linear qkv;  // d -> 3d, columns [Q | K | V], head h owns columns h*d_head .. within each
  Linear out;  // d -> d

  void collect(ParamList& out, const std::string& prefix) const;
};

// Multi-head scaled dot-product self-attention over LayerNorm(x); returns the
// branch output (no residual).
Tensor attention_forward(const Tensor& x, const AttentionBlock& block);

struct MlpBlock {
  Tensor norm_gain, norm_bias;
  Linear fc1, fc2;
  double drop_path_rate = 0.0;

  void collect(ParamList& out, const std::string& prefix) const;
};

// x + drop_path(fc2(gelu(fc1(layer_norm(x)))))
Tensor mlp_block_forward(const Tensor& x, const MlpBlock& block, ForwardContext& ctx);

struct EncoderBlock {
  AttentionBlock attention;
  double attention_drop_path = 0.0;
  std::optional<MlpBlock> mlp;
  std::optional<KanBlock> kan;
};

struct ClassifierHead {
  std::optional<Linear> linear;
  std::vector<KanLayer> kan;

  void collect(ParamList& out, const std::string& prefix) const;
};

Tensor head_forward(const Tensor& token, const ClassifierHead& head);

struct ClassifierModel {
  ModelConfig config;
  TokenEmbedding embedding;
  Tensor class_token;         // 1 x d
  Tensor distillation_token;  // 1 x d, deit only
  std::vector<EncoderBlock> blocks;
  Tensor norm_gain, norm_bias;
  ClassifierHead head;
  std::optional<ClassifierHead> distillation_head;  // deit only

  // Every learnable tensor, in a fixed order with stable names.
  ParamList parameters() const;
};

ClassifierModel build_model(const ModelConfig& config);

std::size_t count_parameters(const ClassifierModel& model);

struct ModelOutput {
  Tensor logits;        // batch x 2; deit: mean of the two heads
  Tensor class_logits;  // batch x 2
  Tensor distillation_logits;  // batch x 2, deit only
};

// One encoder pass per sample; the batch dimension is assembled from the
// per-sample class-token outputs.
ModelOutput forward(const ClassifierModel& model, std::span<const TokenInputs> batch, ForwardContext& ctx);

// Cross-entropy of the class head; deit averages it with the distillation
// head's cross-entropy against the same labels.
Tensor training_loss(const ClassifierModel& model, const ModelOutput& out, std::span<const int> labels);

}  // namespace abfr
