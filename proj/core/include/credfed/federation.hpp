#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "credfed/checkpoint.hpp"
#include "credfed/data.hpp"
#include "credfed/losses.hpp"
#include "credfed/metrics.hpp"
#include "credfed/model.hpp"
#include "credfed/secure_agg.hpp"

namespace credfed {

enum class SelectionStrategy { pbcs, random };
enum class AggregationMode { encrypted, plaintext };
// varying: mu_t = min(mu_step * t, mu_cap). fixed: mu_t = mu_fixed.
enum class MuSchedule { varying, fixed };

SelectionStrategy parse_selection_strategy(std::string_view s);
AggregationMode parse_aggregation_mode(std::string_view s);
MuSchedule parse_mu_schedule(std::string_view s);
std::string to_string(SelectionStrategy s);
std::string to_string(AggregationMode m);
std::string to_string(MuSchedule m);

struct FederationConfig {
  std::size_t num_clients = 4;
  double selection_ratio = 0.5;
  std::size_t rounds = 50;
  std::size_t local_epochs = 5;
  std::size_t batch_size = 64;
  double lr = 0.01;
  MuSchedule mu_schedule = MuSchedule::varying;
  double mu_step = 0.0002;
  double mu_cap = 0.01;
  double mu_fixed = 0.01;
  SelectionStrategy selection_strategy = SelectionStrategy::pbcs;
  AggregationMode aggregation_mode = AggregationMode::encrypted;
  double train_fraction = 0.8;  // per-client train/validation split
  std::uint64_t seed = 0;
  he::SchemeParams he;

  // M = ceil(r * K).
  std::size_t selected_count() const;
  void validate() const;
};

double mu_schedule(std::size_t t, const FederationConfig& config);

struct ClientState {
  std::size_t id = 0;
  Dataset train;
  Dataset validation;
  std::size_t sample_count = 0;  // N_k: size of the local dataset (train + validation)
  std::optional<double> last_f1;
};

std::vector<ClientState> make_clients(std::span<const Dataset> local, double train_fraction,
                                      std::uint64_t seed);

/// Minority-class F1 of `global` on the client's validation split; stored as last_f1.
double evaluate_local_f1(ClientState& client, const ModelParams& global);

ClassificationMetrics evaluate(const ModelParams& params, const Dataset& ds);

/// Top-M clients by F1, ties broken by ascending id. Returned in rank order.
std::vector<std::size_t> select_clients_pbcs(std::span<const double> f1_by_client, std::size_t m);

/// Uniform sample of M of K clients without replacement, returned sorted.
std::vector<std::size_t> select_clients_random(std::size_t k, std::size_t m, Rng& rng);

/// gamma_k = N_k / sum_j N_j.
std::vector<double> compute_gamma(std::span<const std::size_t> sample_sizes);

struct LocalTrainingConfig {
  double mu = 0.0;
  std::size_t epochs = 5;
  std::size_t batch_size = 64;
  double lr = 0.01;
};

ParameterVector train_local(const ClientState& client, const ModelParams& global, const LossConfig& loss,
                            const LocalTrainingConfig& config, Rng& rng);

/// sum_k gamma_k * w_k, accumulated in client order.
ParameterVector aggregate_plaintext(std::span<const ParameterVector> params, std::span<const double> gamma);

/// Decrypt(sum_k gamma_k * Encrypt(w_k)).
ParameterVector aggregate_encrypted(const he::Scheme& scheme, const he::KeyPair& keys,
                                    std::span<const ParameterVector> params, std::span<const double> gamma,
                                    Rng& rng);

struct RoundRecord {
  std::size_t round = 0;  // 1-based
  double mu = 0.0;
  SelectionStrategy strategy = SelectionStrategy::pbcs;
  std::vector<std::size_t> selected;
  std::vector<double> gamma;
  std::vector<double> client_f1;  // indexed by client id
  ClassificationMetrics test;
  double duration_ms = 0.0;
};

/// Server plus clients of one federated run.
class Federation {
 public:
  Federation(FederationConfig config, ModelConfig model, LossConfig loss, const FederatedData& data);

  // One communication round: dispatch, evaluate and select, local training,
  // encryption, weighted aggregation, global update.
  RoundRecord run_round();

  const ModelParams& global() const { return global_; }
  const std::vector<ClientState>& clients() const { return clients_; }
  std::size_t rounds_completed() const { return round_; }
  const FederationConfig& config() const { return config_; }

 private:
  FederationConfig config_;
  LossConfig loss_;
  std::vector<ClientState> clients_;
  Dataset test_;
  ModelParams global_;
  std::optional<he::Scheme> scheme_;
  std::optional<he::KeyPair> keys_;
  std::size_t round_ = 0;
};

struct TrainingResult {
  std::vector<RoundRecord> rounds;
  Checkpoint best;                      // round 0 means the initial model
  ClassificationMetrics best_metrics;   // test metrics of the best model
};

// Runs config.rounds rounds and keeps the global model with the highest
// test F1 (earliest round on ties).
TrainingResult run_training(const FederationConfig& config, const ModelConfig& model, const LossConfig& loss,
                            const FederatedData& data);

// Columns: round,mu,strategy,selected_ids,gamma_values,test_recall,
// test_precision,test_f1,duration_ms. List cells are ';'-separated.
// With include_timing=false the duration column is written as 0 so the
// log is byte-reproducible.
void write_round_log(std::ostream& os, std::span<const RoundRecord> rounds, bool include_timing);

}  // namespace credfed
