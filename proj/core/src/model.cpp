#include "credfed/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "credfed/errors.hpp"
#include "credfed/rng.hpp"

namespace credfed {

void ModelConfig::validate() const {
  if (num_features == 0) throw ParameterError("model: num_features must be positive");
  if (embed_dim == 0 || num_heads == 0) throw ParameterError("model: embed_dim and num_heads must be positive");
  if (embed_dim % num_heads != 0) {
    throw ParameterError("model: embed_dim " + std::to_string(embed_dim) +
                         " is not divisible by num_heads " + std::to_string(num_heads));
  }
  if (ff_hidden == 0 || head_hidden == 0) throw ParameterError("model: hidden sizes must be positive");
  if (num_classes != 2) throw ParameterError("model: num_classes must be 2");
  if (!(layer_norm_eps > 0.0)) throw ParameterError("model: layer_norm_eps must be positive");
}

ModelLayout::ModelLayout(const ModelConfig& c) {
  c.validate();
  const std::size_t d = c.num_features;
  const std::size_t e = c.embed_dim;
  auto add = [this](std::string name, std::size_t rows, std::size_t cols) {
    blocks_.push_back({std::move(name), rows, cols, total_});
    total_ += blocks_.back().size();
  };
  add("embed.weight", d, e);
  add("embed.bias", d, e);
  add("attn.wq", e, e);
  add("attn.bq", e, 0);
  add("attn.wk", e, e);
  add("attn.bk", e, 0);
  add("attn.wv", e, e);
  add("attn.bv", e, 0);
  add("attn.wo", e, e);
  add("attn.bo", e, 0);
  add("ln1.gain", e, 0);
  add("ln1.bias", e, 0);
  add("ff.w1", e, c.ff_hidden);
  add("ff.b1", c.ff_hidden, 0);
  add("ff.w2", c.ff_hidden, e);
  add("ff.b2", e, 0);
  add("ln2.gain", e, 0);
  add("ln2.bias", e, 0);
  add("head.w1", e, c.head_hidden);
  add("head.b1", c.head_hidden, 0);
  add("head.w2", c.head_hidden, c.num_classes);
  add("head.b2", c.num_classes, 0);
}

std::size_t ModelLayout::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < blocks_.size(); ++i)
    if (blocks_[i].name == name) return i;
  throw ContractError("model layout has no block named " + std::string(name));
}

const ParamBlock& ModelLayout::block(std::string_view name) const { return blocks_[index_of(name)]; }

std::size_t parameter_count(const ModelConfig& config) { return ModelLayout(config).total_size(); }

ModelParams::ModelParams(ModelConfig config, ParameterVector flat)
    : config_(config), layout_(config_), flat_(std::move(flat)) {
  if (flat_.size() != layout_.total_size()) {
    throw DimensionError("model expects " + std::to_string(layout_.total_size()) +
                         " parameters, got " + std::to_string(flat_.size()));
  }
}

namespace {

// Fan-in used for the initialization bound of each block.
std::size_t fan_in(const ModelLayout& layout, const ParamBlock& b) {
  if (b.name.starts_with("embed.")) return 1;
  if (b.cols != 0) return b.rows;
  // Bias vectors share the fan-in of the weight matrix preceding them.
  const std::size_t i = layout.index_of(b.name);
  return layout.blocks()[i - 1].rows;
}

}  // namespace

ModelParams ModelParams::initialize(const ModelConfig& config, std::uint64_t seed) {
  ModelLayout layout(config);
  ParameterVector flat(layout.total_size());
  Rng rng = make_rng(seed, "model-init");
  for (const auto& b : layout.blocks()) {
    const bool is_norm = b.name.starts_with("ln");
    const bool is_gain = b.name.ends_with(".gain");
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in(layout, b)));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t i = 0; i < b.size(); ++i) {
      double v = 0.0;
      if (is_norm) v = is_gain ? 1.0 : 0.0;
      else v = dist(rng);
      flat[b.offset + i] = v;
    }
  }
  return ModelParams(config, std::move(flat));
}

ModelParams ModelParams::from_blocks(const ModelConfig& config, const std::vector<Tensor>& blocks) {
  ModelLayout layout(config);
  if (blocks.size() != layout.blocks().size()) throw DimensionError("from_blocks: wrong block count");
  ParameterVector flat(layout.total_size());
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& b = layout.blocks()[i];
    if (blocks[i].shape() != b.shape()) {
      throw DimensionError("from_blocks: block " + b.name + " expects " + shape_string(b.shape()) +
                           ", got " + shape_string(blocks[i].shape()));
    }
    std::copy(blocks[i].values().begin(), blocks[i].values().end(), flat.values().begin() + b.offset);
  }
  return ModelParams(config, std::move(flat));
}

Tensor ModelParams::block(std::string_view name) const {
  const auto& b = layout_.block(name);
  auto v = flat_.values().subspan(b.offset, b.size());
  return Tensor(b.shape(), std::vector<double>(v.begin(), v.end()));
}

std::vector<Tensor> ModelParams::unflatten() const {
  std::vector<Tensor> out;
  out.reserve(layout_.blocks().size());
  for (const auto& b : layout_.blocks()) out.push_back(block(b.name));
  return out;
}

ModelParams ModelParams::with_block(std::string_view name, const Tensor& value) const {
  const auto& b = layout_.block(name);
  if (value.shape() != b.shape()) throw DimensionError("with_block: shape mismatch for " + b.name);
  ParameterVector flat = flat_;
  std::copy(value.values().begin(), value.values().end(), flat.values().begin() + b.offset);
  return ModelParams(config_, std::move(flat));
}

const ad::Var& BoundParams::operator[](std::string_view name) const {
  return blocks[layout->index_of(name)];
}

BoundParams bind(const ModelParams& params, bool requires_grad) {
  BoundParams out;
  out.layout = &params.layout();
  out.blocks.reserve(params.layout().blocks().size());
  for (const auto& b : params.layout().blocks()) {
    Tensor t = params.block(b.name);
    out.blocks.push_back(requires_grad ? ad::leaf(std::move(t)) : ad::constant(std::move(t)));
  }
  return out;
}

ParameterVector gather_gradients(const BoundParams& bound) {
  ParameterVector g(bound.layout->total_size());
  for (std::size_t i = 0; i < bound.blocks.size(); ++i) {
    const auto& b = bound.layout->blocks()[i];
    const Tensor grad = bound.blocks[i].grad();
    std::copy(grad.values().begin(), grad.values().end(), g.values().begin() + b.offset);
  }
  return g;
}

ad::Var embed_features(const ModelConfig& config, const BoundParams& p, const ad::Var& x) {
  if (x.value().rank() != 2) throw DimensionError("embed_features: x must be a [B x d] matrix");
  if (x.value().cols() != config.num_features) {
    throw DimensionError("embed_features: expected " + std::to_string(config.num_features) +
                         " features, got " + std::to_string(x.value().cols()));
  }
  return ad::feature_embed(x, p["embed.weight"], p["embed.bias"]);
}

EncoderOutput encoder_forward(const ModelConfig& config, const BoundParams& p, const ad::Var& tokens,
                              bool keep_attention) {
  using namespace ad;
  const std::size_t d = config.num_features;
  Var q = add_bias(matmul(tokens, p["attn.wq"]), p["attn.bq"]);
  Var k = add_bias(matmul(tokens, p["attn.wk"]), p["attn.bk"]);
  Var v = add_bias(matmul(tokens, p["attn.wv"]), p["attn.bv"]);
  EncoderOutput out;
  Var ctx = attention(q, k, v, d, config.num_heads, keep_attention ? &out.attention : nullptr);
  Var attn_out = add_bias(matmul(ctx, p["attn.wo"]), p["attn.bo"]);
  Var h1 = layer_norm(add(tokens, attn_out), p["ln1.gain"], p["ln1.bias"], config.layer_norm_eps);
  Var ff = gelu(add_bias(matmul(h1, p["ff.w1"]), p["ff.b1"]));
  ff = add_bias(matmul(ff, p["ff.w2"]), p["ff.b2"]);
  out.tokens = layer_norm(add(h1, ff), p["ln2.gain"], p["ln2.bias"], config.layer_norm_eps);
  return out;
}

ForwardResult forward(const ModelConfig& config, const BoundParams& p, const ad::Var& x, bool keep_attention) {
  using namespace ad;
  Var tokens = embed_features(config, p, x);
  EncoderOutput enc = encoder_forward(config, p, tokens, keep_attention);
  Var pooled = group_mean(enc.tokens, config.num_features);
  Var hidden = gelu(add_bias(matmul(pooled, p["head.w1"]), p["head.b1"]));
  Var logits = add_bias(matmul(hidden, p["head.w2"]), p["head.b2"]);
  return {log_softmax(logits, 1), std::move(enc.attention)};
}

std::vector<double> classify(const ModelParams& params, std::span<const double> x) {
  const std::size_t d = params.config().num_features;
  if (x.size() != d) {
    throw DimensionError("classify: expected " + std::to_string(d) + " features, got " +
                         std::to_string(x.size()));
  }
  Tensor xt({1, d}, std::vector<double>(x.begin(), x.end()));
  Tensor lp = predict_log_probs(params, xt);
  return {lp.values().begin(), lp.values().end()};
}

Tensor predict_log_probs(const ModelParams& params, const Tensor& x) {
  const auto& cfg = params.config();
  if (x.rank() != 2 || x.cols() != cfg.num_features) {
    throw DimensionError("predict: expected [N x " + std::to_string(cfg.num_features) + "], got " +
                         shape_string(x.shape()));
  }
  constexpr std::size_t kChunk = 512;
  const std::size_t n = x.rows();
  const std::size_t d = cfg.num_features;
  const std::size_t c = cfg.num_classes;
  Tensor out({n, c});
  BoundParams bound = bind(params, false);
  for (std::size_t start = 0; start < n; start += kChunk) {
    const std::size_t rows = std::min(kChunk, n - start);
    std::vector<double> chunk(x.data() + start * d, x.data() + (start + rows) * d);
    ForwardResult r = forward(cfg, bound, ad::constant(Tensor({rows, d}, std::move(chunk))), false);
    std::copy(r.log_probs.value().values().begin(), r.log_probs.value().values().end(),
              out.data() + start * c);
  }
  return out;
}

std::vector<int> predict_labels(const ModelParams& params, const Tensor& x) {
  Tensor lp = predict_log_probs(params, x);
  std::vector<int> out(lp.rows());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = lp.at(i, 1) > lp.at(i, 0) ? 1 : 0;
  return out;
}

AttentionMatrix minmax_normalize(const AttentionMatrix& m) {
  AttentionMatrix out = m;
  const auto vals = m.scores.values();
  const auto [lo, hi] = std::minmax_element(vals.begin(), vals.end());
  const double span = *hi - *lo;
  for (std::size_t i = 0; i < vals.size(); ++i) {
    out.scores[i] = span > 0.0 ? 2.0 * (vals[i] - *lo) / span - 1.0 : 0.0;
  }
  // Pin the extremes so min and max are exactly -1 and +1.
  if (span > 0.0) {
    out.scores[static_cast<std::size_t>(lo - vals.begin())] = -1.0;
    out.scores[static_cast<std::size_t>(hi - vals.begin())] = 1.0;
  }
  out.normalized = true;
  return out;
}

AttentionMatrix average_attention(const ModelParams& params, const Tensor& samples, bool normalize) {
  const auto& cfg = params.config();
  if (samples.rank() != 2 || samples.rows() == 0) {
    throw ContractError("average_attention: sample list must be a nonempty [N x d] matrix");
  }
  if (samples.cols() != cfg.num_features) throw DimensionError("average_attention: wrong feature count");
  constexpr std::size_t kChunk = 512;
  const std::size_t n = samples.rows();
  const std::size_t d = cfg.num_features;
  const std::size_t heads = cfg.num_heads;
  Tensor acc({d, d}, 0.0);
  BoundParams bound = bind(params, false);
  for (std::size_t start = 0; start < n; start += kChunk) {
    const std::size_t rows = std::min(kChunk, n - start);
    std::vector<double> chunk(samples.data() + start * d, samples.data() + (start + rows) * d);
    Tensor xt({rows, d}, std::move(chunk));
    EncoderOutput enc =
        encoder_forward(cfg, bound, embed_features(cfg, bound, ad::constant(std::move(xt))));
    const Tensor& a = enc.attention;
    for (std::size_t bh = 0; bh < rows * heads; ++bh)
      for (std::size_t j = 0; j < d * d; ++j) acc[j] += a[bh * d * d + j];
  }
  const double inv = 1.0 / static_cast<double>(n * heads);
  for (double& v : acc.values()) v *= inv;
  AttentionMatrix out{std::move(acc), -1, false};
  return normalize ? minmax_normalize(out) : out;
}

}  // namespace credfed
