#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>

#include "credfed/autodiff.hpp"
#include "credfed/model.hpp"
#include "credfed/tensor.hpp"

namespace credfed {

// cross_entropy is accepted as its own name but evaluates identically to
// weighted_nll: on log-softmax outputs the two coincide.
enum class LossKind { weighted_nll, cross_entropy, focal };

LossKind parse_loss_kind(std::string_view name);
std::string to_string(LossKind kind);

struct LossConfig {
  LossKind kind = LossKind::weighted_nll;
  double weight_majority = 0.25;  // class 0, non-defaulting
  double weight_minority = 0.75;  // class 1, defaulting
  double focal_gamma = 2.0;

  void validate() const;
  std::array<double, 2> class_weights() const { return {weight_majority, weight_minority}; }
};

enum class Reduction { sum, mean };

/// -sum_i beta[y_i] * logp(i, y_i).
double weighted_nll(const Tensor& logp, std::span<const int> labels, std::span<const double> beta);
ad::Var weighted_nll(const ad::Var& logp, std::span<const int> labels, std::span<const double> beta,
                     Reduction reduction = Reduction::sum);

/// -sum_i beta[y_i] * (1 - p_i)^gamma * log(p_i).
double focal_loss(const Tensor& logp, std::span<const int> labels, std::span<const double> beta,
                  double gamma);
ad::Var focal_loss(const ad::Var& logp, std::span<const int> labels, std::span<const double> beta,
                   double gamma, Reduction reduction = Reduction::sum);

ad::Var data_loss(const ad::Var& logp, std::span<const int> labels, const LossConfig& config,
                  Reduction reduction);

/// (mu / 2) * ||local - global||^2.
double proximal_penalty(const ParameterVector& local, const ParameterVector& global, double mu);

struct ObjectiveValue {
  double value = 0.0;
  ParameterVector gradient;
};

// Mean data loss over the batch plus the proximal penalty toward
// `global_snapshot`, with its gradient w.r.t. the parameters.
ObjectiveValue local_objective(const Tensor& x, std::span<const int> labels, const ModelParams& params,
                               const ParameterVector& global_snapshot, const LossConfig& config,
                               double mu);

}  // namespace credfed
