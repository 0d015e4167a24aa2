#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "credfed/tensor.hpp"

// Define-by-run reverse-mode automatic differentiation.
//
// Every operation allocates a node holding its value and a closure that
// pushes the node's gradient into its inputs. A graph is owned by the Var
// handles that reference it and must stay on one thread.
namespace credfed::ad {

enum class OpKind {
  leaf,
  matmul,
  add,
  sub,
  mul,
  scale,
  add_bias,
  sum,
  softmax,
  log_softmax,
  layer_norm,
  gelu,
  feature_embed,
  attention,
  group_mean,
  pick_sum,
  focal_sum,
};

struct Node {
  OpKind op = OpKind::leaf;
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  // Returns the gradient buffer, allocating zeros on first use.
  Tensor& grad_buffer();
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Tensor& value() const { return node_->value; }
  // Gradient after backward(); zeros if this node received none.
  Tensor grad() const;
  bool requires_grad() const { return node_->requires_grad; }
  OpKind op() const { return node_->op; }
  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

Var leaf(Tensor value);
Var constant(Tensor value);

// Populates gradients of every node reachable from a scalar root.
void backward(const Var& root);

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
// a[m x n] + bias[n] broadcast over rows.
Var add_bias(const Var& a, const Var& bias);
Var sum(const Var& a);
Var softmax(const Var& x, std::size_t axis);
Var log_softmax(const Var& x, std::size_t axis);
// Normalizes over the last axis, then applies gain[n] and bias[n].
Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5);
// tanh approximation; smooth, so finite-difference checks stay clean.
Var gelu(const Var& x);

// x[B x d], weight[d x e], bias[d x e] -> tokens[(B*d) x e] with
// token(b, i) = x(b, i) * weight(i) + bias(i).
Var feature_embed(const Var& x, const Var& weight, const Var& bias);

// Batched scaled dot-product attention over groups of `tokens` rows.
// q, k, v are [(B*tokens) x e]; each of `heads` heads uses a contiguous
// e/heads column slice. If `probabilities` is non-null it receives the
// softmax weights with shape [B x heads x tokens x tokens].
Var attention(const Var& q, const Var& k, const Var& v, std::size_t tokens, std::size_t heads,
              Tensor* probabilities = nullptr);

// Mean over consecutive groups of `group` rows: [(B*group) x e] -> [B x e].
Var group_mean(const Var& x, std::size_t group);

// sum_i w_i * x(i, labels_i) for x[N x C].
Var pick_sum(const Var& x, std::span<const int> labels, std::span<const double> weights);

// sum_i w_i * (1 - p_i)^gamma * logp(i, labels_i) with p_i = exp(logp(i, labels_i)).
Var focal_sum(const Var& logp, std::span<const int> labels, std::span<const double> weights,
              double gamma);

}  // namespace credfed::ad
