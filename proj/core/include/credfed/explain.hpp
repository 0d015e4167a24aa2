#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "credfed/autodiff.hpp"
#include "credfed/data.hpp"
#include "credfed/model.hpp"
#include "credfed/rng.hpp"

namespace credfed {

// Everything here runs on one party's model and data; no function takes
// another client's samples.

// right_endpoint evaluates the path at k/m, midpoint at (k - 1/2)/m, k = 1..m.
enum class RiemannRule { right_endpoint, midpoint };

RiemannRule parse_riemann_rule(std::string_view s);
std::string to_string(RiemannRule r);

struct IGConfig {
  std::vector<double> baseline;  // empty: all-zero baseline
  std::size_t steps = 64;
  std::size_t target = 1;  // output column attributed; 1 = log P(defaulting)
  RiemannRule rule = RiemannRule::right_endpoint;

  void validate(std::size_t d) const;
};

struct AttributionReport {
  std::vector<std::string> feature_names;
  std::vector<double> attributions;
  double f_x = 0.0;
  double f_baseline = 0.0;
  // Single sample: |sum(attributions) - (f_x - f_baseline)|. Aggregated:
  // the same expression on the averaged quantities.
  double completeness_gap = 0.0;
  std::size_t sample_count = 1;
  std::optional<int> label_class;  // set for per-class summaries
  std::size_t steps = 0;
  std::size_t target = 1;
  RiemannRule rule = RiemannRule::right_endpoint;
  bool zero_baseline = true;
  // Per-sample gap statistics for aggregated reports.
  double mean_gap = 0.0;
  double max_gap = 0.0;
};

// Maps a batch x [B x d] to outputs [B x C]; rows must not interact.
using BatchFunction = std::function<ad::Var(const ad::Var& x)>;

BatchFunction model_log_probs(const ModelParams& params);

/// Riemann-sum integrated gradients; with the default right-endpoint rule
/// IG_i = (x_i - x'_i) / m * sum_{k=1..m} dF(x' + k/m (x - x')) / dx_i.
AttributionReport integrated_gradients(const BatchFunction& f, std::span<const double> x, const IGConfig& config,
                                       std::vector<std::string> feature_names = {});
AttributionReport integrated_gradients(const ModelParams& params, std::span<const double> x,
                                       const IGConfig& config, std::vector<std::string> feature_names = {});

/// |sum IG - (F(x) - F(x'))| for a single-sample report.
double completeness_gap(const AttributionReport& report);

/// Mean attribution over up to `sample_cap` randomly chosen samples of class `label`.
AttributionReport class_attribution_summary(const ModelParams& params, const Dataset& data, int label,
                                            std::size_t sample_cap, const IGConfig& config, Rng& rng);

inline constexpr std::size_t kDefaultSampleCap = 2000;

std::string to_json(const AttributionReport& report);
// Emits the raw averaged matrix and its [-1, 1] min-max normalization.
std::string to_json(const AttentionMatrix& raw, std::span<const std::string> feature_names,
                    std::optional<int> label_class, std::size_t sample_count);

}  // namespace credfed
