#include "credfed/explain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "credfed/errors.hpp"
#include "json.hpp"

namespace credfed {

RiemannRule parse_riemann_rule(std::string_view s) {
  if (s == "right_endpoint") return RiemannRule::right_endpoint;
  if (s == "midpoint") return RiemannRule::midpoint;
  throw ConfigError("unknown riemann rule '" + std::string(s) + "'");
}

std::string to_string(RiemannRule r) { return r == RiemannRule::midpoint ? "midpoint" : "right_endpoint"; }

void IGConfig::validate(std::size_t d) const {
  if (steps == 0) throw ContractError("integrated gradients: steps must be >= 1");
  if (!baseline.empty() && baseline.size() != d) {
    throw DimensionError("integrated gradients: baseline has " + std::to_string(baseline.size()) +
                         " entries, expected " + std::to_string(d));
  }
}

BatchFunction model_log_probs(const ModelParams& params) {
  return [&params](const ad::Var& x) {
    BoundParams bound = bind(params, false);
    return forward(params.config(), bound, x, false).log_probs;
  };
}

namespace {

double path_alpha(std::size_t k, std::size_t m, RiemannRule rule) {
  const double kk = rule == RiemannRule::midpoint ? static_cast<double>(k) - 0.5 : static_cast<double>(k);
  return kk / static_cast<double>(m);
}

// Path points for several inputs, batched: for each input, m path rows
// followed by the input itself and the baseline.
std::vector<AttributionReport> ig_batch(const BatchFunction& f, std::span<const std::vector<double>> inputs,
                                        const IGConfig& config, const std::vector<std::string>& names) {
  const std::size_t d = inputs.front().size();
  const std::size_t m = config.steps;
  const std::vector<double> base = config.baseline.empty() ? std::vector<double>(d, 0.0) : config.baseline;
  const std::size_t per = m + 2;
  const std::size_t rows = per * inputs.size();

  std::vector<double> xb(rows * d);
  std::vector<double> w(rows, 0.0);
  for (std::size_t s = 0; s < inputs.size(); ++s) {
    const auto& x = inputs[s];
    for (std::size_t k = 1; k <= m; ++k) {
      const double alpha = path_alpha(k, m, config.rule);
      double* row = xb.data() + (s * per + k - 1) * d;
      for (std::size_t i = 0; i < d; ++i) row[i] = base[i] + alpha * (x[i] - base[i]);
      w[s * per + k - 1] = 1.0;
    }
    std::copy(x.begin(), x.end(), xb.data() + (s * per + m) * d);
    std::copy(base.begin(), base.end(), xb.data() + (s * per + m + 1) * d);
  }

  ad::Var xv = ad::leaf(Tensor({rows, d}, std::move(xb)));
  ad::Var out = f(xv);
  if (out.value().rank() != 2 || out.value().rows() != rows || config.target >= out.value().cols()) {
    throw DimensionError("integrated gradients: function output does not have the target column");
  }
  const std::size_t c = out.value().cols();
  std::vector<int> target(rows, static_cast<int>(config.target));
  ad::backward(ad::pick_sum(out, target, w));
  const Tensor grad = xv.grad();

  std::vector<AttributionReport> reports(inputs.size());
  for (std::size_t s = 0; s < inputs.size(); ++s) {
    auto& r = reports[s];
    r.feature_names = names;
    r.attributions.assign(d, 0.0);
    for (std::size_t k = 0; k < m; ++k) {
      const double* g = grad.data() + (s * per + k) * d;
      for (std::size_t i = 0; i < d; ++i) r.attributions[i] += g[i];
    }
    for (std::size_t i = 0; i < d; ++i) {
      r.attributions[i] *= (inputs[s][i] - base[i]) / static_cast<double>(m);
    }
    r.f_x = out.value()[(s * per + m) * c + config.target];
    r.f_baseline = out.value()[(s * per + m + 1) * c + config.target];
    r.steps = m;
    r.target = config.target;
    r.rule = config.rule;
    r.zero_baseline = config.baseline.empty() ||
                      std::all_of(config.baseline.begin(), config.baseline.end(), [](double v) { return v == 0.0; });
    r.completeness_gap = completeness_gap(r);
    r.mean_gap = r.max_gap = r.completeness_gap;
  }
  return reports;
}

std::vector<std::string> names_or_default(std::vector<std::string> names, std::size_t d) {
  if (names.empty()) return default_feature_names(d);
  if (names.size() != d) throw DimensionError("integrated gradients: one feature name per feature required");
  return names;
}

}  // namespace

AttributionReport integrated_gradients(const BatchFunction& f, std::span<const double> x, const IGConfig& config,
                                       std::vector<std::string> feature_names) {
  config.validate(x.size());
  const auto names = names_or_default(std::move(feature_names), x.size());
  constexpr std::size_t kMaxRows = 4096;
  std::vector<std::vector<double>> in{std::vector<double>(x.begin(), x.end())};
  if (config.steps + 2 <= kMaxRows) return ig_batch(f, in, config, names).front();

  // Long paths: accumulate gradient sums chunk by chunk.
  const std::size_t d = x.size();
  const std::size_t m = config.steps;
  const std::vector<double> base = config.baseline.empty() ? std::vector<double>(d, 0.0) : config.baseline;
  std::vector<double> gsum(d, 0.0);
  for (std::size_t k0 = 1; k0 <= m; k0 += kMaxRows) {
    const std::size_t rows = std::min(kMaxRows, m - k0 + 1);
    std::vector<double> xb(rows * d);
    for (std::size_t r = 0; r < rows; ++r) {
      const double alpha = path_alpha(k0 + r, m, config.rule);
      for (std::size_t i = 0; i < d; ++i) xb[r * d + i] = base[i] + alpha * (x[i] - base[i]);
    }
    ad::Var xv = ad::leaf(Tensor({rows, d}, std::move(xb)));
    ad::Var out = f(xv);
    if (out.value().rank() != 2 || config.target >= out.value().cols()) {
      throw DimensionError("integrated gradients: function output does not have the target column");
    }
    std::vector<int> target(rows, static_cast<int>(config.target));
    std::vector<double> w(rows, 1.0);
    ad::backward(ad::pick_sum(out, target, w));
    const Tensor g = xv.grad();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t i = 0; i < d; ++i) gsum[i] += g[r * d + i];
  }
  IGConfig one = config;
  one.steps = 1;
  AttributionReport r = ig_batch(f, in, one, names).front();
  for (std::size_t i = 0; i < d; ++i) r.attributions[i] = gsum[i] * (x[i] - base[i]) / static_cast<double>(m);
  r.steps = m;
  r.completeness_gap = completeness_gap(r);
  r.mean_gap = r.max_gap = r.completeness_gap;
  return r;
}

AttributionReport integrated_gradients(const ModelParams& params, std::span<const double> x,
                                       const IGConfig& config, std::vector<std::string> feature_names) {
  if (x.size() != params.config().num_features) {
    throw DimensionError("integrated gradients: expected " + std::to_string(params.config().num_features) +
                         " features, got " + std::to_string(x.size()));
  }
  return integrated_gradients(model_log_probs(params), x, config, std::move(feature_names));
}

double completeness_gap(const AttributionReport& report) {
  require(report.sample_count == 1, "completeness_gap: requires a single-sample report");
  const double total = std::accumulate(report.attributions.begin(), report.attributions.end(), 0.0);
  return std::abs(total - (report.f_x - report.f_baseline));
}

AttributionReport class_attribution_summary(const ModelParams& params, const Dataset& data, int label,
                                            std::size_t sample_cap, const IGConfig& config, Rng& rng) {
  const std::size_t d = params.config().num_features;
  config.validate(d);
  require(sample_cap > 0, "class_attribution_summary: sample cap must be positive");
  if (data.num_features() != d) throw DimensionError("class_attribution_summary: feature count mismatch");
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (data.labels()[i] == label) idx.push_back(i);
  if (idx.empty()) throw ContractError("class_attribution_summary: class " + std::to_string(label) + " absent");
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(std::min(idx.size(), sample_cap));

  const BatchFunction f = model_log_probs(params);
  const std::size_t per_batch = std::max<std::size_t>(1, 1024 / (config.steps + 2));
  AttributionReport agg;
  agg.feature_names = data.feature_names();
  agg.attributions.assign(d, 0.0);
  agg.sample_count = idx.size();
  agg.label_class = label;
  agg.steps = config.steps;
  agg.target = config.target;
  agg.rule = config.rule;
  for (std::size_t start = 0; start < idx.size(); start += per_batch) {
    std::vector<std::vector<double>> inputs;
    for (std::size_t j = start; j < std::min(idx.size(), start + per_batch); ++j) {
      const auto r = data.row(idx[j]);
      inputs.emplace_back(r.begin(), r.end());
    }
    for (const auto& r : ig_batch(f, inputs, config, agg.feature_names)) {
      for (std::size_t i = 0; i < d; ++i) agg.attributions[i] += r.attributions[i];
      agg.f_x += r.f_x;
      agg.f_baseline += r.f_baseline;
      agg.mean_gap += r.completeness_gap;
      agg.max_gap = std::max(agg.max_gap, r.completeness_gap);
      agg.zero_baseline = r.zero_baseline;
    }
  }
  const double inv = 1.0 / static_cast<double>(idx.size());
  for (double& a : agg.attributions) a *= inv;
  agg.f_x *= inv;
  agg.f_baseline *= inv;
  agg.mean_gap *= inv;
  const double total = std::accumulate(agg.attributions.begin(), agg.attributions.end(), 0.0);
  agg.completeness_gap = std::abs(total - (agg.f_x - agg.f_baseline));
  return agg;
}

std::string to_json(const AttributionReport& report) {
  nlohmann::ordered_json j;
  j["kind"] = "integrated_gradients";
  j["target"] = report.target == 1 ? "log_prob_defaulting" : "log_prob_class_" + std::to_string(report.target);
  j["class"] = report.label_class ? nlohmann::ordered_json(*report.label_class) : nlohmann::ordered_json();
  j["sample_count"] = report.sample_count;
  j["steps"] = report.steps;
  j["riemann_rule"] = to_string(report.rule);
  j["baseline"] = report.zero_baseline ? "zero" : "custom";
  j["f_x"] = report.f_x;
  j["f_baseline"] = report.f_baseline;
  j["completeness"] = {{"gap", report.completeness_gap},
                       {"mean_sample_gap", report.mean_gap},
                       {"max_sample_gap", report.max_gap}};
  auto& feats = j["features"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < report.attributions.size(); ++i) {
    feats.push_back({{"name", report.feature_names.at(i)}, {"attribution", report.attributions[i]}});
  }
  return j.dump(2);
}

std::string to_json(const AttentionMatrix& raw, std::span<const std::string> feature_names,
                    std::optional<int> label_class, std::size_t sample_count) {
  const std::size_t d = raw.scores.rows();
  auto rows_of = [d](const Tensor& t) {
    auto rows = nlohmann::ordered_json::array();
    for (std::size_t r = 0; r < d; ++r) rows.push_back(std::vector<double>(t.data() + r * d, t.data() + (r + 1) * d));
    return rows;
  };
  nlohmann::ordered_json j;
  j["kind"] = "attention";
  j["class"] = label_class ? nlohmann::ordered_json(*label_class) : nlohmann::ordered_json();
  j["sample_count"] = sample_count;
  j["heads"] = raw.head_index < 0 ? "mean" : std::to_string(raw.head_index);
  j["layer"] = 0;
  j["features"] = std::vector<std::string>(feature_names.begin(), feature_names.end());
  j["normalization"] = "minmax_to_[-1,1] applied to the averaged matrix";
  j["raw_scores"] = rows_of(raw.scores);
  j["normalized_scores"] = rows_of(minmax_normalize(raw).scores);
  return j.dump(2);
}

}  // namespace credfed
