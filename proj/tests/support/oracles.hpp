#pragma once

// Independent reference computations shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <vector>

#include "credfed/autodiff.hpp"
#include "credfed/federation.hpp"
#include "credfed/model.hpp"
#include "credfed/tensor.hpp"

namespace credfed::testing {

inline double relative_error(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Central difference of f along direction v with step h.
inline double directional_fd(const std::function<double(const std::vector<double>&)>& f,
                             const std::vector<double>& x, const std::vector<double>& v, double h = 1e-5) {
  std::vector<double> xp = x, xm = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xp[i] += h * v[i];
    xm[i] -= h * v[i];
  }
  return (f(xp) - f(xm)) / (2.0 * h);
}

inline std::vector<double> random_unit(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(n);
  double s = 0.0;
  for (double& x : v) {
    x = g(rng);
    s += x * x;
  }
  for (double& x : v) x /= std::sqrt(s);
  return v;
}

inline double dot(const std::vector<double>& a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Log-probability of `target` for a single input row under `params`.
inline double model_output(const ModelParams& params, std::span<const double> x, std::size_t target) {
  return classify(params, x)[target];
}

// Gradient of the target log-probability w.r.t. each row of xs [n x d],
// computed with plain autodiff and no parameter gradients.
inline Tensor input_gradients(const ModelParams& params, const Tensor& xs, std::size_t target) {
  const BoundParams bound = bind(params, false);
  ad::Var x = ad::leaf(xs);
  ad::Var lp = forward(params.config(), bound, x, false).log_probs;
  std::vector<int> labels(xs.rows(), static_cast<int>(target));
  std::vector<double> w(xs.rows(), 1.0);
  ad::backward(ad::pick_sum(lp, labels, w));
  return x.grad();
}

// Midpoint-rule path integral of the input gradient from `baseline` to `x`,
// evaluated in batches. Independent of explain's right-endpoint code.
inline std::vector<double> fine_path_integral(const ModelParams& params, std::span<const double> x,
                                              std::span<const double> baseline, std::size_t steps,
                                              std::size_t target, std::size_t batch = 2048) {
  const std::size_t d = x.size();
  std::vector<double> acc(d, 0.0);
  for (std::size_t start = 0; start < steps; start += batch) {
    const std::size_t rows = std::min(batch, steps - start);
    Tensor pts({rows, d});
    for (std::size_t r = 0; r < rows; ++r) {
      const double a = (static_cast<double>(start + r) + 0.5) / static_cast<double>(steps);
      for (std::size_t i = 0; i < d; ++i) pts.at(r, i) = baseline[i] + a * (x[i] - baseline[i]);
    }
    const Tensor g = input_gradients(params, pts, target);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t i = 0; i < d; ++i) acc[i] += g.at(r, i);
  }
  for (std::size_t i = 0; i < d; ++i) acc[i] *= (x[i] - baseline[i]) / static_cast<double>(steps);
  return acc;
}

// Exhaustive PBCS reference over integer scores (F1 = score / denominator,
// so sums are exact): the M-subset with the largest total, ties broken by the
// lexicographically smallest ascending id list, reported in rank order.
inline std::vector<std::size_t> brute_force_pbcs(const std::vector<long>& score, std::size_t m) {
  const std::size_t k = score.size();
  std::vector<std::size_t> best;
  long best_sum = -1;
  for (std::uint32_t mask = 0; mask < (1u << k); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcount(mask)) != m) continue;
    std::vector<std::size_t> ids;
    long s = 0;
    for (std::size_t i = 0; i < k; ++i) {
      if (mask & (1u << i)) {
        ids.push_back(i);
        s += score[i];
      }
    }
    if (s > best_sum || (s == best_sum && ids < best)) {
      best_sum = s;
      best = ids;
    }
  }
  std::stable_sort(best.begin(), best.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  return best;
}

// F1 recount straight from definitions.
inline double f1_oracle(const std::vector<int>& pred, const std::vector<int>& label) {
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    tp += pred[i] == 1 && label[i] == 1;
    fp += pred[i] == 1 && label[i] == 0;
    fn += pred[i] == 0 && label[i] == 1;
  }
  if (tp == 0) return 0.0;
  const double p = tp / (tp + fp), r = tp / (tp + fn);
  return 2 * p * r / (p + r);
}

}  // namespace credfed::testing
