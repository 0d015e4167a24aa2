#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "credfed/autodiff.hpp"
#include "credfed/tensor.hpp"

namespace credfed {

// Per-feature embedding -> one transformer encoder block -> mean pooling ->
// two-layer head -> log-softmax over two classes. No positional encoding:
// the features of a row are treated as a set of tokens.
struct ModelConfig {
  std::size_t num_features = 21;
  std::size_t embed_dim = 24;
  std::size_t num_heads = 3;
  std::size_t ff_hidden = 48;
  std::size_t head_hidden = 32;
  std::size_t num_classes = 2;
  double layer_norm_eps = 1e-5;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct ParamBlock {
  std::string name;
  std::size_t rows;
  std::size_t cols;  // 0 for a vector block
  std::size_t offset;

  std::size_t size() const { return cols == 0 ? rows : rows * cols; }
  Shape shape() const { return cols == 0 ? Shape{rows} : Shape{rows, cols}; }
};

/// Ordered list of named parameter blocks inside the flat vector.
class ModelLayout {
 public:
  explicit ModelLayout(const ModelConfig& config);

  const std::vector<ParamBlock>& blocks() const { return blocks_; }
  const ParamBlock& block(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;
  std::size_t total_size() const { return total_; }

 private:
  std::vector<ParamBlock> blocks_;
  std::size_t total_ = 0;
};

std::size_t parameter_count(const ModelConfig& config);

class ModelParams {
 public:
  ModelParams(ModelConfig config, ParameterVector flat);

  // Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)]; layer-norm gains 1, biases 0.
  static ModelParams initialize(const ModelConfig& config, std::uint64_t seed);
  static ModelParams from_blocks(const ModelConfig& config, const std::vector<Tensor>& blocks);

  const ModelConfig& config() const { return config_; }
  const ModelLayout& layout() const { return layout_; }
  const ParameterVector& flat() const { return flat_; }

  Tensor block(std::string_view name) const;
  std::vector<Tensor> unflatten() const;
  ModelParams with_block(std::string_view name, const Tensor& value) const;

 private:
  ModelConfig config_;
  ModelLayout layout_;
  ParameterVector flat_;
};

/// Parameters bound into an autodiff graph, one Var per layout block.
struct BoundParams {
  std::vector<ad::Var> blocks;
  const ModelLayout* layout = nullptr;

  const ad::Var& operator[](std::string_view name) const;
};

BoundParams bind(const ModelParams& params, bool requires_grad);

// Collects leaf gradients back into layout order.
ParameterVector gather_gradients(const BoundParams& bound);

struct EncoderOutput {
  ad::Var tokens;
  Tensor attention;  // [B x heads x d x d]
};

struct ForwardResult {
  ad::Var log_probs;  // [B x num_classes]
  Tensor attention;   // [B x heads x d x d]
};

// x is [B x d]; returns tokens [(B*d) x embed_dim].
ad::Var embed_features(const ModelConfig& config, const BoundParams& p, const ad::Var& x);
// keep_attention=false leaves the attention tensor empty.
EncoderOutput encoder_forward(const ModelConfig& config, const BoundParams& p, const ad::Var& tokens,
                              bool keep_attention = true);
ForwardResult forward(const ModelConfig& config, const BoundParams& p, const ad::Var& x,
                      bool keep_attention = true);

/// Log-probabilities for a single row of d features.
std::vector<double> classify(const ModelParams& params, std::span<const double> x);

/// Log-probabilities for every row of x [N x d]; evaluated in chunks without gradients.
Tensor predict_log_probs(const ModelParams& params, const Tensor& x);

/// argmax of log-probabilities with ties going to class 0.
std::vector<int> predict_labels(const ModelParams& params, const Tensor& x);

struct AttentionMatrix {
  Tensor scores;         // d x d
  int head_index = -1;   // -1: averaged over heads
  bool normalized = false;
};

// Averages the d x d attention over samples and heads. With `normalize`,
// rescales the averaged matrix affinely so its min is -1 and max is +1.
AttentionMatrix average_attention(const ModelParams& params, const Tensor& samples, bool normalize);

AttentionMatrix minmax_normalize(const AttentionMatrix& m);

}  // namespace credfed
