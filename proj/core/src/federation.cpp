#include "credfed/federation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "credfed/errors.hpp"

namespace credfed {

SelectionStrategy parse_selection_strategy(std::string_view s) {
  if (s == "pbcs") return SelectionStrategy::pbcs;
  if (s == "random") return SelectionStrategy::random;
  throw ConfigError("unknown selection strategy '" + std::string(s) + "'");
}

AggregationMode parse_aggregation_mode(std::string_view s) {
  if (s == "encrypted") return AggregationMode::encrypted;
  if (s == "plaintext") return AggregationMode::plaintext;
  throw ConfigError("unknown aggregation mode '" + std::string(s) + "'");
}

MuSchedule parse_mu_schedule(std::string_view s) {
  if (s == "varying") return MuSchedule::varying;
  if (s == "fixed") return MuSchedule::fixed;
  throw ConfigError("unknown mu schedule '" + std::string(s) + "'");
}

std::string to_string(SelectionStrategy s) { return s == SelectionStrategy::pbcs ? "pbcs" : "random"; }
std::string to_string(AggregationMode m) { return m == AggregationMode::encrypted ? "encrypted" : "plaintext"; }
std::string to_string(MuSchedule m) { return m == MuSchedule::varying ? "varying" : "fixed"; }

std::size_t FederationConfig::selected_count() const {
  const double m = std::ceil(selection_ratio * static_cast<double>(num_clients) - 1e-9);
  return std::max<std::size_t>(1, static_cast<std::size_t>(m));
}

void FederationConfig::validate() const {
  if (num_clients == 0) throw ConfigError("federation: num_clients must be positive");
  if (!(selection_ratio > 0.0 && selection_ratio <= 1.0)) {
    throw ConfigError("federation: selection_ratio must lie in (0, 1]");
  }
  if (batch_size == 0) throw ConfigError("federation: batch_size must be positive");
  if (!(lr >= 0.0)) throw ConfigError("federation: lr must be >= 0");
  if (!(mu_step >= 0.0) || !(mu_cap >= 0.0) || !(mu_fixed >= 0.0)) {
    throw ConfigError("federation: mu values must be >= 0");
  }
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("federation: train_fraction must lie in (0, 1)");
  }
  if (aggregation_mode == AggregationMode::encrypted) he.validate();
}

double mu_schedule(std::size_t t, const FederationConfig& config) {
  if (config.mu_schedule == MuSchedule::fixed) return config.mu_fixed;
  return std::min(config.mu_step * static_cast<double>(t), config.mu_cap);
}

std::vector<ClientState> make_clients(std::span<const Dataset> local, double train_fraction,
                                      std::uint64_t seed) {
  std::vector<ClientState> out;
  out.reserve(local.size());
  for (std::size_t k = 0; k < local.size(); ++k) {
    Rng rng = make_rng(seed, "client-split", k);
    auto [train, val] = stratified_split(local[k], train_fraction, &rng);
    ClientState c;
    c.id = k;
    c.sample_count = local[k].size();
    c.train = std::move(train);
    c.validation = std::move(val);
    out.push_back(std::move(c));
  }
  return out;
}

ClassificationMetrics evaluate(const ModelParams& params, const Dataset& ds) {
  const Tensor lp = predict_log_probs(params, ds.features());
  return precision_recall_f1(confusion_from_log_probs(lp, ds.labels()));
}

double evaluate_local_f1(ClientState& client, const ModelParams& global) {
  require(client.validation.size() > 0, "evaluate_local_f1: validation set is empty");
  const double f1 = evaluate(global, client.validation).f1;
  client.last_f1 = f1;
  return f1;
}

std::vector<std::size_t> select_clients_pbcs(std::span<const double> f1_by_client, std::size_t m) {
  if (m > f1_by_client.size()) {
    throw ContractError("select_clients_pbcs: M=" + std::to_string(m) + " exceeds K=" +
                        std::to_string(f1_by_client.size()));
  }
  std::vector<std::size_t> ids(f1_by_client.size());
  std::iota(ids.begin(), ids.end(), 0);
  std::stable_sort(ids.begin(), ids.end(),
                   [&](std::size_t a, std::size_t b) { return f1_by_client[a] > f1_by_client[b]; });
  ids.resize(m);
  return ids;
}

std::vector<std::size_t> select_clients_random(std::size_t k, std::size_t m, Rng& rng) {
  if (m > k) {
    throw ContractError("select_clients_random: M=" + std::to_string(m) + " exceeds K=" + std::to_string(k));
  }
  // Partial Fisher-Yates.
  std::vector<std::size_t> ids(k);
  std::iota(ids.begin(), ids.end(), 0);
  for (std::size_t i = 0; i < m; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, k - 1);
    std::swap(ids[i], ids[pick(rng)]);
  }
  ids.resize(m);
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::vector<double> compute_gamma(std::span<const std::size_t> sample_sizes) {
  require(!sample_sizes.empty(), "compute_gamma: empty selection");
  double total = 0.0;
  for (std::size_t n : sample_sizes) {
    require(n > 0, "compute_gamma: sample sizes must be positive");
    total += static_cast<double>(n);
  }
  std::vector<double> g(sample_sizes.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = static_cast<double>(sample_sizes[i]) / total;
  return g;
}

ParameterVector train_local(const ClientState& client, const ModelParams& global, const LossConfig& loss,
                            const LocalTrainingConfig& config, Rng& rng) {
  require(client.train.size() > 0, "train_local: training set is empty");
  require(config.batch_size > 0, "train_local: batch size must be positive");
  if (config.epochs == 0 || config.lr == 0.0) return global.flat();

  const std::size_t n = client.train.size();
  const std::size_t d = client.train.num_features();
  const auto& x = client.train.features();
  const auto& y = client.train.labels();
  ModelParams params = global;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> bx;
  std::vector<int> by;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t rows = std::min(config.batch_size, n - start);
      bx.resize(rows * d);
      by.resize(rows);
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t i = order[start + r];
        std::copy(x.data() + i * d, x.data() + (i + 1) * d, bx.data() + r * d);
        by[r] = y[i];
      }
      const Tensor batch({rows, d}, bx);
      const ObjectiveValue obj = local_objective(batch, by, params, global.flat(), loss, config.mu);
      params = ModelParams(params.config(), sgd_step(params.flat(), obj.gradient, config.lr));
    }
  }
  return params.flat();
}

ParameterVector aggregate_plaintext(std::span<const ParameterVector> params, std::span<const double> gamma) {
  require(!params.empty(), "aggregate: no client parameters");
  require(params.size() == gamma.size(), "aggregate: one weight per client required");
  ParameterVector out(params.front().size(), 0.0);
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k].size() != out.size()) throw DimensionError("aggregate: parameter lengths differ");
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += gamma[k] * params[k][i];
  }
  return out;
}

ParameterVector aggregate_encrypted(const he::Scheme& scheme, const he::KeyPair& keys,
                                    std::span<const ParameterVector> params, std::span<const double> gamma,
                                    Rng& rng) {
  require(!params.empty(), "aggregate: no client parameters");
  require(params.size() == gamma.size(), "aggregate: one weight per client required");
  std::vector<he::Ciphertext> cts;
  cts.reserve(params.size());
  for (const auto& p : params) {
    if (p.size() != params.front().size()) throw DimensionError("aggregate: parameter lengths differ");
    cts.push_back(scheme.encrypt(keys.pk, p.values(), rng));
  }
  return ParameterVector(scheme.decrypt(keys.sk, scheme.weighted_sum(cts, gamma)));
}

Federation::Federation(FederationConfig config, ModelConfig model, LossConfig loss, const FederatedData& data)
    : config_(std::move(config)),
      loss_(loss),
      test_(data.test),
      global_(ModelParams::initialize(model, derive_seed(config_.seed, "global-init"))) {
  config_.validate();
  loss_.validate();
  if (data.clients.size() != config_.num_clients) {
    throw ConfigError("federation: config has K=" + std::to_string(config_.num_clients) + " but data has " +
                      std::to_string(data.clients.size()) + " clients");
  }
  for (const auto& c : data.clients) {
    if (c.num_features() != model.num_features) {
      throw DimensionError("federation: client data has " + std::to_string(c.num_features()) +
                           " features, model expects " + std::to_string(model.num_features));
    }
  }
  clients_ = make_clients(data.clients, config_.train_fraction, config_.seed);
  if (config_.aggregation_mode == AggregationMode::encrypted) {
    scheme_.emplace(config_.he);
    Rng rng = make_rng(config_.seed, "he-keygen");
    keys_ = scheme_->keygen(rng);
  }
}

RoundRecord Federation::run_round() {
  const auto start = std::chrono::steady_clock::now();
  RoundRecord rec;
  rec.round = round_ + 1;
  // The first round trains with mu_0.
  rec.mu = mu_schedule(round_, config_);
  rec.strategy = config_.selection_strategy;

  // (1) + (2): dispatch w^t; every client reports its validation F1.
  rec.client_f1.resize(clients_.size());
  for (auto& c : clients_) rec.client_f1[c.id] = evaluate_local_f1(c, global_);
  const std::size_t m = config_.selected_count();
  if (config_.selection_strategy == SelectionStrategy::pbcs) {
    rec.selected = select_clients_pbcs(rec.client_f1, m);
  } else {
    Rng rng = make_rng(config_.seed, "select-random", round_);
    rec.selected = select_clients_random(clients_.size(), m, rng);
  }

  // (3) local training on the selected clients only.
  std::vector<ParameterVector> local;
  std::vector<std::size_t> sizes;
  local.reserve(m);
  const LocalTrainingConfig ltc{rec.mu, config_.local_epochs, config_.batch_size, config_.lr};
  for (std::size_t id : rec.selected) {
    Rng rng = make_rng(config_.seed, "local-train", round_, id);
    local.push_back(train_local(clients_[id], global_, loss_, ltc, rng));
    sizes.push_back(clients_[id].sample_count);
  }
  rec.gamma = compute_gamma(sizes);

  // (4) + (5) + (6): encrypt, aggregate, update.
  ParameterVector next;
  if (config_.aggregation_mode == AggregationMode::encrypted) {
    Rng rng = make_rng(config_.seed, "he-encrypt", round_);
    next = aggregate_encrypted(*scheme_, *keys_, local, rec.gamma, rng);
  } else {
    next = aggregate_plaintext(local, rec.gamma);
  }
  global_ = ModelParams(global_.config(), std::move(next));
  rec.test = evaluate(global_, test_);
  ++round_;
  rec.duration_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

TrainingResult run_training(const FederationConfig& config, const ModelConfig& model, const LossConfig& loss,
                            const FederatedData& data) {
  Federation fed(config, model, loss, data);
  TrainingResult result{{}, Checkpoint{fed.global(), config.seed, 0}, evaluate(fed.global(), data.test)};
  double best_f1 = -1.0;
  for (std::size_t t = 0; t < config.rounds; ++t) {
    RoundRecord rec = fed.run_round();
    if (rec.test.f1 > best_f1) {
      best_f1 = rec.test.f1;
      result.best = Checkpoint{fed.global(), config.seed, static_cast<std::int64_t>(rec.round)};
      result.best_metrics = rec.test;
    }
    result.rounds.push_back(std::move(rec));
  }
  return result;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace

void write_round_log(std::ostream& os, std::span<const RoundRecord> rounds, bool include_timing) {
  os << "round,mu,strategy,selected_ids,gamma_values,test_recall,test_precision,test_f1,duration_ms\n";
  for (const auto& r : rounds) {
    os << r.round << ',' << fmt(r.mu) << ',' << to_string(r.strategy) << ',';
    for (std::size_t i = 0; i < r.selected.size(); ++i) os << (i ? ";" : "") << r.selected[i];
    os << ',';
    for (std::size_t i = 0; i < r.gamma.size(); ++i) os << (i ? ";" : "") << fmt(r.gamma[i]);
    os << ',' << fmt(r.test.recall) << ',' << fmt(r.test.precision) << ',' << fmt(r.test.f1) << ','
       << (include_timing ? fmt(r.duration_ms) : std::string("0")) << '\n';
  }
}

}  // namespace credfed
