#include "credfed/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "credfed/errors.hpp"

namespace credfed::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using StridedMap = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;
using ConstStridedMap = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;

ConstMatMap as_matrix(const Tensor& t) {
  return ConstMatMap(t.data(), static_cast<Eigen::Index>(t.rows()),
                     static_cast<Eigen::Index>(t.cols()));
}

MatMap as_matrix(Tensor& t) {
  return MatMap(t.data(), static_cast<Eigen::Index>(t.rows()),
                static_cast<Eigen::Index>(t.cols()));
}

Var make(OpKind op, Tensor value, std::vector<Var> inputs, std::function<void(Node&)> bw) {
  if (!value.all_finite()) throw NumericError("non-finite value produced by autodiff operation");
  auto node = std::make_shared<Node>();
  node->op = op;
  node->value = std::move(value);
  for (const auto& in : inputs) node->requires_grad = node->requires_grad || in.requires_grad();
  if (node->requires_grad) {
    node->inputs.reserve(inputs.size());
    for (const auto& in : inputs) node->inputs.push_back(in.node());
    node->backward = std::move(bw);
  }
  return Var(std::move(node));
}

bool wants(const Node& n, std::size_t i) { return n.inputs[i]->requires_grad; }
Tensor& in_grad(Node& n, std::size_t i) { return n.inputs[i]->grad_buffer(); }
const Tensor& in_value(const Node& n, std::size_t i) { return n.inputs[i]->value; }

void require_same_shape(const Var& a, const Var& b, const char* what) {
  if (a.value().shape() != b.value().shape()) {
    throw DimensionError(std::string(what) + ": shape " + shape_string(a.value().shape()) +
                         " vs " + shape_string(b.value().shape()));
  }
}

void require_rank2(const Tensor& t, const char* what) {
  if (t.rank() != 2) throw DimensionError(std::string(what) + ": expected a matrix, got " +
                                          shape_string(t.shape()));
}

struct AxisLayout {
  std::size_t outer;
  std::size_t len;
  std::size_t inner;
};

AxisLayout axis_layout(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) throw DimensionError("softmax axis out of range for " + shape_string(shape));
  AxisLayout l{1, shape[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) l.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) l.inner *= shape[i];
  return l;
}

}  // namespace

Tensor& Node::grad_buffer() {
  if (grad.size() != value.size()) grad = Tensor(value.shape(), 0.0);
  return grad;
}

Tensor Var::grad() const {
  if (node_->grad.size() == node_->value.size()) return node_->grad;
  return Tensor(node_->value.shape(), 0.0);
}

Var leaf(Tensor value) {
  auto node = std::make_shared<Node>();
  node->op = OpKind::leaf;
  node->value = std::move(value);
  node->requires_grad = true;
  return Var(std::move(node));
}

Var constant(Tensor value) {
  auto node = std::make_shared<Node>();
  node->op = OpKind::leaf;
  node->value = std::move(value);
  node->requires_grad = false;
  return Var(std::move(node));
}

void backward(const Var& root) {
  if (root.value().size() != 1) {
    throw ContractError("backward: root must be scalar, got shape " +
                        shape_string(root.value().shape()));
  }
  if (!root.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) n->grad = Tensor();
  root.node()->grad_buffer()[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->grad.size() == n->value.size()) n->backward(*n);
  }
}

Var matmul(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_rank2(av, "matmul");
  require_rank2(bv, "matmul");
  if (av.cols() != bv.rows()) {
    throw DimensionError("matmul: inner dimensions " + shape_string(av.shape()) + " x " +
                         shape_string(bv.shape()));
  }
  Tensor out({av.rows(), bv.cols()});
  as_matrix(out).noalias() = as_matrix(av) * as_matrix(bv);
  return make(OpKind::matmul, std::move(out), {a, b}, [](Node& n) {
    auto g = as_matrix(static_cast<const Tensor&>(n.grad));
    if (wants(n, 0)) as_matrix(in_grad(n, 0)).noalias() += g * as_matrix(in_value(n, 1)).transpose();
    if (wants(n, 1)) as_matrix(in_grad(n, 1)).noalias() += as_matrix(in_value(n, 0)).transpose() * g;
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return make(OpKind::add, std::move(out), {a, b}, [](Node& n) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (!wants(n, k)) continue;
      Tensor& g = in_grad(n, k);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return make(OpKind::sub, std::move(out), {a, b}, [](Node& n) {
    if (wants(n, 0)) {
      Tensor& g = in_grad(n, 0);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    }
    if (wants(n, 1)) {
      Tensor& g = in_grad(n, 1);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= n.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return make(OpKind::mul, std::move(out), {a, b}, [](Node& n) {
    if (wants(n, 0)) {
      Tensor& g = in_grad(n, 0);
      const Tensor& other = in_value(n, 1);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * other[i];
    }
    if (wants(n, 1)) {
      Tensor& g = in_grad(n, 1);
      const Tensor& other = in_value(n, 0);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * other[i];
    }
  });
}

Var scale(const Var& a, double s) {
  Tensor out = a.value();
  for (double& v : out.values()) v *= s;
  return make(OpKind::scale, std::move(out), {a}, [s](Node& n) {
    Tensor& g = in_grad(n, 0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * n.grad[i];
  });
}

Var add_bias(const Var& a, const Var& bias) {
  const Tensor& av = a.value();
  const std::size_t cols = av.cols();
  if (bias.value().size() != cols) {
    throw DimensionError("add_bias: bias of " + std::to_string(bias.value().size()) +
                         " for " + std::to_string(cols) + " columns");
  }
  Tensor out = av;
  const std::size_t rows = av.rows();
  const double* bv = bias.value().data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] += bv[c];
  return make(OpKind::add_bias, std::move(out), {a, bias}, [rows, cols](Node& n) {
    if (wants(n, 0)) {
      Tensor& g = in_grad(n, 0);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    }
    if (wants(n, 1)) {
      Tensor& g = in_grad(n, 1);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) g[c] += n.grad[r * cols + c];
    }
  });
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return make(OpKind::sum, Tensor::scalar(s), {a}, [](Node& n) {
    Tensor& g = in_grad(n, 0);
    const double up = n.grad[0];
    for (double& v : g.values()) v += up;
  });
}

Var softmax(const Var& x, std::size_t axis) {
  const AxisLayout l = axis_layout(x.value().shape(), axis);
  Tensor out = x.value();
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (std::size_t i = 0; i < l.inner; ++i) {
      const std::size_t base = o * l.len * l.inner + i;
      double mx = out[base];
      for (std::size_t k = 1; k < l.len; ++k) mx = std::max(mx, out[base + k * l.inner]);
      double z = 0.0;
      for (std::size_t k = 0; k < l.len; ++k) {
        double& v = out[base + k * l.inner];
        v = std::exp(v - mx);
        z += v;
      }
      for (std::size_t k = 0; k < l.len; ++k) out[base + k * l.inner] /= z;
    }
  }
  return make(OpKind::softmax, out, {x}, [l, y = out](Node& n) {
    Tensor& g = in_grad(n, 0);
    for (std::size_t o = 0; o < l.outer; ++o) {
      for (std::size_t i = 0; i < l.inner; ++i) {
        const std::size_t base = o * l.len * l.inner + i;
        double dot = 0.0;
        for (std::size_t k = 0; k < l.len; ++k) {
          const std::size_t j = base + k * l.inner;
          dot += n.grad[j] * y[j];
        }
        for (std::size_t k = 0; k < l.len; ++k) {
          const std::size_t j = base + k * l.inner;
          g[j] += y[j] * (n.grad[j] - dot);
        }
      }
    }
  });
}

Var log_softmax(const Var& x, std::size_t axis) {
  const AxisLayout l = axis_layout(x.value().shape(), axis);
  Tensor out = x.value();
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (std::size_t i = 0; i < l.inner; ++i) {
      const std::size_t base = o * l.len * l.inner + i;
      double mx = out[base];
      for (std::size_t k = 1; k < l.len; ++k) mx = std::max(mx, out[base + k * l.inner]);
      double z = 0.0;
      for (std::size_t k = 0; k < l.len; ++k) z += std::exp(out[base + k * l.inner] - mx);
      const double lse = mx + std::log(z);
      for (std::size_t k = 0; k < l.len; ++k) out[base + k * l.inner] -= lse;
    }
  }
  return make(OpKind::log_softmax, out, {x}, [l, y = out](Node& n) {
    Tensor& g = in_grad(n, 0);
    for (std::size_t o = 0; o < l.outer; ++o) {
      for (std::size_t i = 0; i < l.inner; ++i) {
        const std::size_t base = o * l.len * l.inner + i;
        double total = 0.0;
        for (std::size_t k = 0; k < l.len; ++k) total += n.grad[base + k * l.inner];
        for (std::size_t k = 0; k < l.len; ++k) {
          const std::size_t j = base + k * l.inner;
          g[j] += n.grad[j] - std::exp(y[j]) * total;
        }
      }
    }
  });
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
  require(eps > 0.0, "layer_norm: eps must be positive");
  const Tensor& xv = x.value();
  const std::size_t cols = xv.shape().back();
  const std::size_t rows = xv.size() / cols;
  if (gain.value().size() != cols || bias.value().size() != cols) {
    throw DimensionError("layer_norm: gain/bias length must equal last axis " +
                         std::to_string(cols));
  }
  Tensor xhat(xv.shape());
  std::vector<double> inv_std(rows);
  Tensor out(xv.shape());
  const auto& gv = gain.value();
  const auto& bv = bias.value();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv.data() + r * cols;
    double mean = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mean += row[c];
    mean /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) var += (row[c] - mean) * (row[c] - mean);
    var /= static_cast<double>(cols);
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_std[r] = inv;
    for (std::size_t c = 0; c < cols; ++c) {
      const double h = (row[c] - mean) * inv;
      xhat[r * cols + c] = h;
      out[r * cols + c] = gv[c] * h + bv[c];
    }
  }
  return make(OpKind::layer_norm, std::move(out), {x, gain, bias},
              [rows, cols, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& n) {
                const Tensor& gv = in_value(n, 1);
                if (wants(n, 0)) {
                  Tensor& gx = in_grad(n, 0);
                  std::vector<double> dh(cols);
                  for (std::size_t r = 0; r < rows; ++r) {
                    double mean_dh = 0.0;
                    double mean_dh_h = 0.0;
                    for (std::size_t c = 0; c < cols; ++c) {
                      const std::size_t j = r * cols + c;
                      dh[c] = n.grad[j] * gv[c];
                      mean_dh += dh[c];
                      mean_dh_h += dh[c] * xhat[j];
                    }
                    mean_dh /= static_cast<double>(cols);
                    mean_dh_h /= static_cast<double>(cols);
                    for (std::size_t c = 0; c < cols; ++c) {
                      const std::size_t j = r * cols + c;
                      gx[j] += inv_std[r] * (dh[c] - mean_dh - xhat[j] * mean_dh_h);
                    }
                  }
                }
                if (wants(n, 1)) {
                  Tensor& gg = in_grad(n, 1);
                  for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t c = 0; c < cols; ++c) gg[c] += n.grad[r * cols + c] * xhat[r * cols + c];
                }
                if (wants(n, 2)) {
                  Tensor& gb = in_grad(n, 2);
                  for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t c = 0; c < cols; ++c) gb[c] += n.grad[r * cols + c];
                }
              });
}

Var gelu(const Var& x) {
  constexpr double kC = 0.7978845608028654;  // sqrt(2 / pi)
  constexpr double kA = 0.044715;
  Tensor out = x.value();
  std::vector<double> deriv(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = out[i];
    const double t = std::tanh(kC * (v + kA * v * v * v));
    deriv[i] = 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * kC * (1.0 + 3.0 * kA * v * v);
    out[i] = 0.5 * v * (1.0 + t);
  }
  return make(OpKind::gelu, std::move(out), {x}, [deriv = std::move(deriv)](Node& n) {
    Tensor& g = in_grad(n, 0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * deriv[i];
  });
}

Var feature_embed(const Var& x, const Var& weight, const Var& bias) {
  const Tensor& xv = x.value();
  require_rank2(xv, "feature_embed");
  const std::size_t batch = xv.rows();
  const std::size_t d = xv.cols();
  const Tensor& wv = weight.value();
  require_rank2(wv, "feature_embed");
  if (wv.rows() != d) {
    throw DimensionError("feature_embed: " + std::to_string(d) + " features vs weight " +
                         shape_string(wv.shape()));
  }
  if (bias.value().shape() != wv.shape()) throw DimensionError("feature_embed: bias shape");
  const std::size_t e = wv.cols();
  Tensor out({batch * d, e});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < d; ++i) {
      const double xi = xv[b * d + i];
      double* row = out.data() + (b * d + i) * e;
      for (std::size_t c = 0; c < e; ++c) row[c] = xi * wv[i * e + c] + bias.value()[i * e + c];
    }
  }
  return make(OpKind::feature_embed, std::move(out), {x, weight, bias}, [batch, d, e](Node& n) {
    const Tensor& xv = in_value(n, 0);
    const Tensor& wv = in_value(n, 1);
    const bool gx = wants(n, 0);
    const bool gw = wants(n, 1);
    const bool gb = wants(n, 2);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t i = 0; i < d; ++i) {
        const double* up = n.grad.data() + (b * d + i) * e;
        if (gx) {
          double s = 0.0;
          for (std::size_t c = 0; c < e; ++c) s += up[c] * wv[i * e + c];
          in_grad(n, 0)[b * d + i] += s;
        }
        if (gw) {
          Tensor& g = in_grad(n, 1);
          const double xi = xv[b * d + i];
          for (std::size_t c = 0; c < e; ++c) g[i * e + c] += up[c] * xi;
        }
        if (gb) {
          Tensor& g = in_grad(n, 2);
          for (std::size_t c = 0; c < e; ++c) g[i * e + c] += up[c];
        }
      }
    }
  });
}

Var attention(const Var& q, const Var& k, const Var& v, std::size_t tokens, std::size_t heads,
              Tensor* probabilities) {
  require_same_shape(q, k, "attention");
  require_same_shape(q, v, "attention");
  const Tensor& qv = q.value();
  require_rank2(qv, "attention");
  require(tokens > 0 && heads > 0, "attention: tokens and heads must be positive");
  const std::size_t e = qv.cols();
  if (qv.rows() % tokens != 0) throw DimensionError("attention: rows not a multiple of tokens");
  if (e % heads != 0) throw DimensionError("attention: width not divisible by heads");
  const std::size_t batch = qv.rows() / tokens;
  const std::size_t dh = e / heads;
  const double sc = 1.0 / std::sqrt(static_cast<double>(dh));
  const auto T = static_cast<Eigen::Index>(tokens);
  const auto Dh = static_cast<Eigen::Index>(dh);
  const Eigen::OuterStride<> stride(static_cast<Eigen::Index>(e));

  Tensor probs({batch, heads, tokens, tokens});
  Tensor out({batch * tokens, e});
  RowMat scores(T, T);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t off = b * tokens * e + h * dh;
      ConstStridedMap Q(qv.data() + off, T, Dh, stride);
      ConstStridedMap K(k.value().data() + off, T, Dh, stride);
      ConstStridedMap V(v.value().data() + off, T, Dh, stride);
      scores.noalias() = (Q * K.transpose()) * sc;
      MatMap P(probs.data() + (b * heads + h) * tokens * tokens, T, T);
      for (Eigen::Index r = 0; r < T; ++r) {
        const double mx = scores.row(r).maxCoeff();
        P.row(r) = (scores.row(r).array() - mx).exp().matrix();
        P.row(r) /= P.row(r).sum();
      }
      StridedMap O(out.data() + off, T, Dh, stride);
      O.noalias() = P * V;
    }
  }
  if (probabilities) *probabilities = probs;
  return make(OpKind::attention, std::move(out), {q, k, v},
              [batch, heads, tokens, e, dh, sc, probs = std::move(probs)](Node& n) {
                const auto T = static_cast<Eigen::Index>(tokens);
                const auto Dh = static_cast<Eigen::Index>(dh);
                const Eigen::OuterStride<> stride(static_cast<Eigen::Index>(e));
                const bool gq = wants(n, 0);
                const bool gk = wants(n, 1);
                const bool gv = wants(n, 2);
                RowMat dP(T, T);
                RowMat dS(T, T);
                for (std::size_t b = 0; b < batch; ++b) {
                  for (std::size_t h = 0; h < heads; ++h) {
                    const std::size_t off = b * tokens * e + h * dh;
                    ConstStridedMap Q(in_value(n, 0).data() + off, T, Dh, stride);
                    ConstStridedMap K(in_value(n, 1).data() + off, T, Dh, stride);
                    ConstStridedMap V(in_value(n, 2).data() + off, T, Dh, stride);
                    ConstMatMap P(probs.data() + (b * heads + h) * tokens * tokens, T, T);
                    ConstStridedMap dO(n.grad.data() + off, T, Dh, stride);
                    if (gv) {
                      StridedMap dV(in_grad(n, 2).data() + off, T, Dh, stride);
                      dV.noalias() += P.transpose() * dO;
                    }
                    if (!gq && !gk) continue;
                    dP.noalias() = dO * V.transpose();
                    for (Eigen::Index r = 0; r < T; ++r) {
                      const double dot = dP.row(r).dot(P.row(r));
                      dS.row(r) = (P.row(r).array() * (dP.row(r).array() - dot)).matrix();
                    }
                    if (gq) {
                      StridedMap dQ(in_grad(n, 0).data() + off, T, Dh, stride);
                      dQ.noalias() += (dS * K) * sc;
                    }
                    if (gk) {
                      StridedMap dK(in_grad(n, 1).data() + off, T, Dh, stride);
                      dK.noalias() += (dS.transpose() * Q) * sc;
                    }
                  }
                }
              });
}

Var group_mean(const Var& x, std::size_t group) {
  const Tensor& xv = x.value();
  require_rank2(xv, "group_mean");
  require(group > 0, "group_mean: group must be positive");
  if (xv.rows() % group != 0) throw DimensionError("group_mean: rows not a multiple of group");
  const std::size_t batch = xv.rows() / group;
  const std::size_t e = xv.cols();
  const double inv = 1.0 / static_cast<double>(group);
  Tensor out({batch, e});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t r = 0; r < group; ++r)
      for (std::size_t c = 0; c < e; ++c) out[b * e + c] += xv[(b * group + r) * e + c] * inv;
  return make(OpKind::group_mean, std::move(out), {x}, [batch, group, e, inv](Node& n) {
    Tensor& g = in_grad(n, 0);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t r = 0; r < group; ++r)
        for (std::size_t c = 0; c < e; ++c) g[(b * group + r) * e + c] += n.grad[b * e + c] * inv;
  });
}

namespace {

void check_labels(const Tensor& x, std::span<const int> labels, std::span<const double> weights,
                  const char* what) {
  require_rank2(x, what);
  if (labels.size() != x.rows() || weights.size() != x.rows()) {
    throw DimensionError(std::string(what) + ": " + std::to_string(x.rows()) + " rows vs " +
                         std::to_string(labels.size()) + " labels");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= x.cols()) {
      throw ContractError(std::string(what) + ": label " + std::to_string(labels[i]) +
                          " out of range at row " + std::to_string(i));
    }
  }
}

}  // namespace

Var pick_sum(const Var& x, std::span<const int> labels, std::span<const double> weights) {
  check_labels(x.value(), labels, weights, "pick_sum");
  const std::size_t c = x.value().cols();
  double s = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) s += weights[i] * x.value()[i * c + labels[i]];
  return make(OpKind::pick_sum, Tensor::scalar(s), {x},
              [c, labels = std::vector<int>(labels.begin(), labels.end()),
               weights = std::vector<double>(weights.begin(), weights.end())](Node& n) {
                Tensor& g = in_grad(n, 0);
                for (std::size_t i = 0; i < labels.size(); ++i)
                  g[i * c + labels[i]] += n.grad[0] * weights[i];
              });
}

Var focal_sum(const Var& logp, std::span<const int> labels, std::span<const double> weights,
              double gamma) {
  check_labels(logp.value(), labels, weights, "focal_sum");
  require(gamma >= 0.0, "focal_sum: gamma must be nonnegative");
  const std::size_t c = logp.value().cols();
  double s = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double l = logp.value()[i * c + labels[i]];
    const double p = std::exp(l);
    s += weights[i] * std::pow(1.0 - p, gamma) * l;
  }
  return make(OpKind::focal_sum, Tensor::scalar(s), {logp},
              [c, gamma, labels = std::vector<int>(labels.begin(), labels.end()),
               weights = std::vector<double>(weights.begin(), weights.end())](Node& n) {
                Tensor& g = in_grad(n, 0);
                const Tensor& lv = in_value(n, 0);
                for (std::size_t i = 0; i < labels.size(); ++i) {
                  const double l = lv[i * c + labels[i]];
                  const double p = std::exp(l);
                  const double q = 1.0 - p;
                  // d/dl [(1 - e^l)^g * l] = (1-p)^g - g * l * p * (1-p)^(g-1)
                  double d = std::pow(q, gamma);
                  if (gamma != 0.0 && q > 0.0) d -= gamma * l * p * std::pow(q, gamma - 1.0);
                  g[i * c + labels[i]] += n.grad[0] * weights[i] * d;
                }
              });
}

}  // namespace credfed::ad
