#include "credfed/metrics.hpp"

#include <string>

#include "credfed/errors.hpp"

namespace credfed {

namespace {

void tally(ConfusionCounts& c, int pred, int label) {
  if ((pred != 0 && pred != 1) || (label != 0 && label != 1)) {
    throw ContractError("confusion: values must be 0 or 1");
  }
  if (pred == 1) (label == 1 ? c.tp : c.fp)++;
  else (label == 1 ? c.fn : c.tn)++;
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

ConfusionCounts confusion(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) {
    throw ContractError("confusion: " + std::to_string(predictions.size()) + " predictions vs " +
                        std::to_string(labels.size()) + " labels");
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) tally(c, predictions[i], labels[i]);
  return c;
}

ConfusionCounts confusion_from_log_probs(const Tensor& log_probs, std::span<const int> labels) {
  if (log_probs.rank() != 2 || log_probs.cols() != 2) {
    throw DimensionError("confusion: expected [N x 2] log-probabilities");
  }
  if (log_probs.rows() != labels.size()) throw ContractError("confusion: length mismatch");
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    tally(c, log_probs.at(i, 1) > log_probs.at(i, 0) ? 1 : 0, labels[i]);
  }
  return c;
}

ClassificationMetrics precision_recall_f1(const ConfusionCounts& c) {
  ClassificationMetrics m;
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.recall = ratio(c.tp, c.tp + c.fn);
  const double s = m.precision + m.recall;
  m.f1 = s > 0.0 ? 2.0 * m.precision * m.recall / s : 0.0;
  return m;
}

}  // namespace credfed
