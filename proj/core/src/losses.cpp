#include "credfed/losses.hpp"

#include <cmath>
#include <vector>

#include "credfed/errors.hpp"

namespace credfed {

LossKind parse_loss_kind(std::string_view name) {
  if (name == "weighted-nll" || name == "nll") return LossKind::weighted_nll;
  if (name == "cross-entropy" || name == "ce") return LossKind::cross_entropy;
  if (name == "focal") return LossKind::focal;
  throw ConfigError("unknown loss kind '" + std::string(name) + "'");
}

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::weighted_nll: return "weighted-nll";
    case LossKind::cross_entropy: return "cross-entropy";
    case LossKind::focal: return "focal";
  }
  return "?";
}

void LossConfig::validate() const {
  if (!(weight_majority > 0.0) || !(weight_minority > 0.0)) {
    throw ConfigError("loss: class weights must be positive");
  }
  if (!(focal_gamma >= 0.0)) throw ConfigError("loss: focal_gamma must be >= 0");
}

namespace {

std::vector<double> sample_weights(const Tensor& logp, std::span<const int> labels,
                                   std::span<const double> beta) {
  if (logp.rank() != 2) throw DimensionError("loss: log-probabilities must be [N x C]");
  if (labels.size() != logp.rows()) throw DimensionError("loss: label count does not match rows");
  if (beta.size() != logp.cols()) throw DimensionError("loss: one weight per class required");
  const std::size_t c = logp.cols();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c) {
      throw ContractError("loss: label " + std::to_string(labels[i]) + " out of range at row " +
                          std::to_string(i));
    }
    double total = 0.0;
    for (std::size_t j = 0; j < c; ++j) total += std::exp(logp[i * c + j]);
    if (std::abs(total - 1.0) > 1e-6) {
      throw ContractError("loss: row " + std::to_string(i) + " is not a log-probability vector");
    }
  }
  std::vector<double> w(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) w[i] = beta[static_cast<std::size_t>(labels[i])];
  return w;
}

ad::Var reduce(const ad::Var& total, std::size_t n, Reduction reduction) {
  if (reduction == Reduction::sum || n == 0) return total;
  return ad::scale(total, 1.0 / static_cast<double>(n));
}

}  // namespace

double weighted_nll(const Tensor& logp, std::span<const int> labels, std::span<const double> beta) {
  const auto w = sample_weights(logp, labels, beta);
  double s = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) s -= w[i] * logp.at(i, static_cast<std::size_t>(labels[i]));
  return s;
}

ad::Var weighted_nll(const ad::Var& logp, std::span<const int> labels, std::span<const double> beta,
                     Reduction reduction) {
  auto w = sample_weights(logp.value(), labels, beta);
  for (double& v : w) v = -v;
  return reduce(ad::pick_sum(logp, labels, w), labels.size(), reduction);
}

double focal_loss(const Tensor& logp, std::span<const int> labels, std::span<const double> beta,
                  double gamma) {
  require(gamma >= 0.0, "focal_loss: gamma must be nonnegative");
  const auto w = sample_weights(logp, labels, beta);
  double s = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double l = logp.at(i, static_cast<std::size_t>(labels[i]));
    s -= w[i] * std::pow(1.0 - std::exp(l), gamma) * l;
  }
  return s;
}

ad::Var focal_loss(const ad::Var& logp, std::span<const int> labels, std::span<const double> beta,
                   double gamma, Reduction reduction) {
  auto w = sample_weights(logp.value(), labels, beta);
  for (double& v : w) v = -v;
  return reduce(ad::focal_sum(logp, labels, w, gamma), labels.size(), reduction);
}

ad::Var data_loss(const ad::Var& logp, std::span<const int> labels, const LossConfig& config,
                  Reduction reduction) {
  const auto beta = config.class_weights();
  switch (config.kind) {
    case LossKind::weighted_nll:
    case LossKind::cross_entropy:
      return weighted_nll(logp, labels, beta, reduction);
    case LossKind::focal:
      return focal_loss(logp, labels, beta, config.focal_gamma, reduction);
  }
  throw ContractError("data_loss: unknown loss kind");
}

double proximal_penalty(const ParameterVector& local, const ParameterVector& global, double mu) {
  if (local.size() != global.size()) {
    throw DimensionError("proximal_penalty: " + std::to_string(local.size()) + " vs " +
                         std::to_string(global.size()) + " parameters");
  }
  require(mu >= 0.0, "proximal_penalty: mu must be nonnegative");
  return 0.5 * mu * squared_distance(local, global);
}

ObjectiveValue local_objective(const Tensor& x, std::span<const int> labels, const ModelParams& params,
                               const ParameterVector& global_snapshot, const LossConfig& config,
                               double mu) {
  BoundParams bound = bind(params, true);
  ForwardResult fwd = forward(params.config(), bound, ad::constant(x), false);
  ad::Var loss = data_loss(fwd.log_probs, labels, config, Reduction::mean);
  ad::backward(loss);
  ObjectiveValue out{loss.value().item() + proximal_penalty(params.flat(), global_snapshot, mu),
                     gather_gradients(bound)};
  if (mu != 0.0) {
    const auto& w = params.flat();
    for (std::size_t i = 0; i < w.size(); ++i) out.gradient[i] += mu * (w[i] - global_snapshot[i]);
  }
  return out;
}

}  // namespace credfed
