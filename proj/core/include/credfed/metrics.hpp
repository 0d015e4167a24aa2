#pragma once

#include <cstddef>
#include <span>

#include "credfed/tensor.hpp"

namespace credfed {

// Class 1 (defaulting) is the positive class.
struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct ClassificationMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

ConfusionCounts confusion(std::span<const int> predictions, std::span<const int> labels);

// argmax of each row of log-probabilities [N x 2], ties toward class 0.
ConfusionCounts confusion_from_log_probs(const Tensor& log_probs, std::span<const int> labels);

// Any 0/0 ratio is defined as 0.
ClassificationMetrics precision_recall_f1(const ConfusionCounts& c);

}  // namespace credfed
