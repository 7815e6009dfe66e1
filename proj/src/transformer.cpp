#include "abfr/transformer.hpp"

#include <cmath>

#include "abfr/errors.hpp"

namespace abfr {

std::string to_string(Backbone b) { return b == Backbone::vit ? "vit" : "deit"; }
std::string to_string(BlockKind k) { return k == BlockKind::mlp ? "mlp" : "kan"; }

Backbone backbone_from_string(const std::string& s) {
  if (s == "vit") return Backbone::vit;
  if (s == "deit") return Backbone::deit;
  throw ValidationError("unknown backbone '" + s + "' (expected vit or deit)");
}

std::string configuration_name(BlockKind encoder_ffn, BlockKind head) {
  return to_string(encoder_ffn) + "-" + to_string(head);
}

std::pair<BlockKind, BlockKind> configuration_from_string(const std::string& s) {
  for (auto e : {BlockKind::mlp, BlockKind::kan})
    for (auto h : {BlockKind::mlp, BlockKind::kan})
      if (configuration_name(e, h) == s) return {e, h};
  throw ValidationError("unknown configuration '" + s + "' (expected mlp-mlp, kan-kan, kan-mlp or mlp-kan)");
}

void ModelConfig::validate() const {
  if (n_anchors == 0) throw ValidationError("n_anchors must be positive");
  if (d_model == 0 || depth == 0 || n_heads == 0) throw ValidationError("d_model, depth and n_heads must be positive");
  if (d_model % n_heads != 0)
    throw ValidationError("d_model " + std::to_string(d_model) + " is not divisible by n_heads " +
                          std::to_string(n_heads));
  if (!(mlp_hidden_ratio > 0.0)) throw ValidationError("mlp_hidden_ratio must be positive");
  if (!(drop_path_rate >= 0.0 && drop_path_rate < 1.0)) throw ValidationError("drop_path_rate must lie in [0, 1)");
  if (kan_grid_size < 2) throw ValidationError("kan_grid_size must be at least 2");
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"backbone", to_string(c.backbone)},
          {"configuration", c.configuration()},
          {"n_anchors", c.n_anchors},
          {"d_model", c.d_model},
          {"depth", c.depth},
          {"n_heads", c.n_heads},
          {"mlp_hidden_ratio", c.mlp_hidden_ratio},
          {"kan_grid_size", c.kan_grid_size},
          {"kan_grid_range", c.kan_grid_range},
          {"kan_layers_per_block", c.kan_layers_per_block},
          {"kan_base_path", c.kan_base_path},
          {"drop_path_rate", c.drop_path_rate},
          {"drop_path_on_mlp", c.drop_path_on_mlp},
          {"fusion", to_string(c.fusion)},
          {"seed", c.seed}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  if (j.contains("backbone")) c.backbone = backbone_from_string(j.at("backbone").get<std::string>());
  if (j.contains("configuration"))
    std::tie(c.encoder_ffn, c.head) = configuration_from_string(j.at("configuration").get<std::string>());
  c.n_anchors = j.value("n_anchors", c.n_anchors);
  c.d_model = j.value("d_model", c.d_model);
  c.depth = j.value("depth", c.depth);
  c.n_heads = j.value("n_heads", c.n_heads);
  c.mlp_hidden_ratio = j.value("mlp_hidden_ratio", c.mlp_hidden_ratio);
  c.kan_grid_size = j.value("kan_grid_size", c.kan_grid_size);
  c.kan_grid_range = j.value("kan_grid_range", c.kan_grid_range);
  c.kan_layers_per_block = j.value("kan_layers_per_block", c.kan_layers_per_block);
  c.kan_base_path = j.value("kan_base_path", c.kan_base_path);
  c.drop_path_rate = j.value("drop_path_rate", c.drop_path_rate);
  c.drop_path_on_mlp = j.value("drop_path_on_mlp", c.drop_path_on_mlp);
  if (j.contains("fusion")) c.fusion = fusion_mode_from_string(j.at("fusion").get<std::string>());
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

void Linear::collect(ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + "weight", weight});
  out.push_back({prefix + "bias", bias});
}

Linear make_linear(std::size_t in, std::size_t out, Rng& rng) {
  return {fan_in_uniform({in, out}, in, rng), zeros_param({1, out})};
}

Tensor linear_forward(const Tensor& x, const Linear& l) { return add_bias(matmul(x, l.weight), l.bias); }

void AttentionBlock::collect(ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + "norm_gain", norm_gain});
  out.push_back({prefix + "norm_bias", norm_bias});
  qkv.collect(out, prefix + "qkv.");
  this->out.collect(out, prefix + "out.");
}

Tensor attention_forward(const Tensor& x, const AttentionBlock& block) {
  const std::size_t d = x.cols();
  const std::size_t dh = d / block.n_heads;
  const Tensor qkv = linear_forward(layer_norm(x, block.norm_gain, block.norm_bias), block.qkv);
  const double scale_factor = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Tensor> heads;
  heads.reserve(block.n_heads);
  for (std::size_t h = 0; h < block.n_heads; ++h) {
    const Tensor q = slice_cols(qkv, h * dh, dh);
    const Tensor k = slice_cols(qkv, d + h * dh, dh);
    const Tensor v = slice_cols(qkv, 2 * d + h * dh, dh);
    const Tensor weights = softmax(scale(matmul(q, transpose(k)), scale_factor), 1);
    heads.push_back(matmul(weights, v));
  }
  return linear_forward(concat_cols(heads), block.out);
}

void MlpBlock::collect(ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + "norm_gain", norm_gain});
  out.push_back({prefix + "norm_bias", norm_bias});
  fc1.collect(out, prefix + "fc1.");
  fc2.collect(out, prefix + "fc2.");
}

Tensor mlp_block_forward(const Tensor& x, const MlpBlock& block, ForwardContext& ctx) {
  const Tensor h = gelu(linear_forward(layer_norm(x, block.norm_gain, block.norm_bias), block.fc1));
  return add(x, drop_path(linear_forward(h, block.fc2), block.drop_path_rate, ctx));
}

void ClassifierHead::collect(ParamList& out, const std::string& prefix) const {
  if (linear) linear->collect(out, prefix + "linear.");
  for (std::size_t i = 0; i < kan.size(); ++i) kan[i].collect(out, prefix + "kan" + std::to_string(i) + ".");
}

Tensor head_forward(const Tensor& token, const ClassifierHead& head) {
  if (head.linear) return linear_forward(token, *head.linear);
  return kan_head_forward(token, head.kan);
}

namespace {

ClassifierHead make_head(const ModelConfig& c, const KanOptions& kan_opts, Rng& rng) {
  ClassifierHead head;
  if (c.head == BlockKind::mlp)
    head.linear = make_linear(c.d_model, 2, rng);
  else
    head.kan.push_back(make_kan_layer(c.d_model, 2, kan_opts, rng));
  return head;
}

}  // namespace

ClassifierModel build_model(const ModelConfig& config) {
  config.validate();
  const auto& c = config;
  Rng rng(c.seed);
  KanOptions kan_opts;
  kan_opts.grid_size = c.kan_grid_size;
  kan_opts.grid_range = c.kan_grid_range;
  kan_opts.use_base = c.kan_base_path;

  ClassifierModel m;
  m.config = c;
  m.embedding = make_token_embedding(c.n_anchors, c.d_model, c.fusion, rng);
  m.class_token = normal_init({1, c.d_model}, 0.02, rng);
  if (c.backbone == Backbone::deit) m.distillation_token = normal_init({1, c.d_model}, 0.02, rng);

  const std::size_t hidden =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(c.mlp_hidden_ratio * static_cast<double>(c.d_model))));
  for (std::size_t b = 0; b < c.depth; ++b) {
    EncoderBlock block;
    block.attention.n_heads = c.n_heads;
    block.attention.norm_gain = ones_param({1, c.d_model});
    block.attention.norm_bias = zeros_param({1, c.d_model});
    block.attention.qkv = make_linear(c.d_model, 3 * c.d_model, rng);
    block.attention.out = make_linear(c.d_model, c.d_model, rng);
    block.attention_drop_path = c.drop_path_rate;
    if (c.encoder_ffn == BlockKind::mlp) {
      MlpBlock mlp;
      mlp.norm_gain = ones_param({1, c.d_model});
      mlp.norm_bias = zeros_param({1, c.d_model});
      mlp.fc1 = make_linear(c.d_model, hidden, rng);
      mlp.fc2 = make_linear(hidden, c.d_model, rng);
      mlp.drop_path_rate = c.drop_path_on_mlp ? c.drop_path_rate : 0.0;
      block.mlp = std::move(mlp);
    } else {
      block.kan = make_kan_block(c.d_model, c.kan_layers_per_block, c.drop_path_rate, kan_opts, rng);
    }
    m.blocks.push_back(std::move(block));
  }
  m.norm_gain = ones_param({1, c.d_model});
  m.norm_bias = zeros_param({1, c.d_model});
  m.head = make_head(c, kan_opts, rng);
  if (c.backbone == Backbone::deit) m.distillation_head = make_head(c, kan_opts, rng);
  return m;
}

ParamList ClassifierModel::parameters() const {
  ParamList out;
  embedding.collect(out, "embedding.");
  out.push_back({"class_token", class_token});
  if (distillation_token.defined()) out.push_back({"distillation_token", distillation_token});
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const std::string p = "blocks." + std::to_string(b) + ".";
    blocks[b].attention.collect(out, p + "attention.");
    if (blocks[b].mlp) blocks[b].mlp->collect(out, p + "mlp.");
    if (blocks[b].kan) blocks[b].kan->collect(out, p + "kan.");
  }
  out.push_back({"norm_gain", norm_gain});
  out.push_back({"norm_bias", norm_bias});
  head.collect(out, "head.");
  if (distillation_head) distillation_head->collect(out, "distillation_head.");
  return out;
}

std::size_t count_parameters(const ClassifierModel& model) {
  std::size_t n = 0;
  for (const auto& p : model.parameters()) n += p.tensor.numel();
  return n;
}

ModelOutput forward(const ClassifierModel& model, std::span<const TokenInputs> batch, ForwardContext& ctx) {
  if (batch.empty()) throw ValidationError("forward: empty batch");
  const bool deit = model.config.backbone == Backbone::deit;
  const std::size_t n_special = deit ? 2 : 1;
  std::vector<Tensor> cls_rows, dist_rows;
  for (const auto& sample : batch) {
    const Tensor tokens = embed_tokens(sample.fc, sample.positions, model.embedding);
    std::vector<Tensor> parts{model.class_token};
    if (deit) parts.push_back(model.distillation_token);
    parts.push_back(tokens);
    Tensor x = concat_rows(parts);
    for (const auto& block : model.blocks) {
      x = add(x, drop_path(attention_forward(x, block.attention), block.attention_drop_path, ctx));
      x = block.mlp ? mlp_block_forward(x, *block.mlp, ctx) : kan_block_forward(x, *block.kan, ctx);
    }
    const Tensor special = layer_norm(slice_rows(x, 0, n_special), model.norm_gain, model.norm_bias);
    cls_rows.push_back(head_forward(slice_rows(special, 0, 1), model.head));
    if (deit) dist_rows.push_back(head_forward(slice_rows(special, 1, 1), *model.distillation_head));
  }
  ModelOutput out;
  out.class_logits = concat_rows(cls_rows);
  if (deit) {
    out.distillation_logits = concat_rows(dist_rows);
    out.logits = scale(add(out.class_logits, out.distillation_logits), 0.5);
  } else {
    out.logits = out.class_logits;
  }
  return out;
}

Tensor training_loss(const ClassifierModel& model, const ModelOutput& out, std::span<const int> labels) {
  const Tensor cls = cross_entropy(out.class_logits, labels);
  if (model.config.backbone != Backbone::deit) return cls;
  return scale(add(cls, cross_entropy(out.distillation_logits, labels)), 0.5);
}

}  // namespace abfr
