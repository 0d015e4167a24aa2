#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "credfed/data.hpp"
#include "credfed/explain.hpp"
#include "credfed/federation.hpp"
#include "credfed/losses.hpp"
#include "credfed/model.hpp"

namespace credfed {

inline constexpr const char* kVersion = "0.1.0";

/// Every setting of a run. Loaded from a flat JSON object; unknown keys are
/// rejected and every value is validated before any work starts.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string run_name = "run";
  std::filesystem::path out_dir = "runs";
  bool log_timing = false;

  std::optional<std::size_t> num_clients;  // default: number of data sources
  FederationConfig federation;
  ModelConfig model;
  LossConfig loss;
  SyntheticSpec synthetic;
  std::vector<std::filesystem::path> client_csvs;  // when set, replaces synthetic data
  std::filesystem::path test_csv;
  IGConfig ig;
  std::size_t explain_client = 0;
  std::size_t explain_sample_cap = kDefaultSampleCap;

  std::filesystem::path run_dir() const { return out_dir / run_name; }
  std::size_t client_count() const;
  // Sub-configs with the shared keys (K, d, seeds) filled in.
  FederationConfig federation_config() const;
  SyntheticSpec synthetic_spec() const;
  void validate() const;

  // Canonical flat JSON of the resolved configuration.
  std::string to_json() const;
  std::uint64_t hash() const;
};

ExperimentConfig parse_config_json(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
// Applies "key=value" overrides; the value is read as JSON, falling back to a plain string.
void apply_overrides(ExperimentConfig& config, const std::vector<std::string>& overrides);

// Root seed -> federation seed and synthetic seed, so data is shared by
// every run with the same root seed.
FederatedData load_federated_data(const ExperimentConfig& config);

struct GenerateDataResult {
  std::vector<std::filesystem::path> client_files;
  std::filesystem::path test_file;
  std::filesystem::path manifest;
};
GenerateDataResult generate_data_command(const ExperimentConfig& config);

struct TrainCommandResult {
  TrainingResult training;
  std::filesystem::path round_log;
  std::filesystem::path checkpoint;
  std::filesystem::path summary;
};
TrainCommandResult train_command(const ExperimentConfig& config);

struct ComparisonRow {
  std::string model;  // pbcs-varying-mu | fedprox-random | fedavg-random
  std::string loss;
  ClassificationMetrics best;
  std::size_t best_round = 0;
  std::uint64_t dataset_hash = 0;
};

// The nine strategy x loss cells on identical data and seeds.
std::vector<std::pair<std::string, ExperimentConfig>> comparison_cells(const ExperimentConfig& base);

struct CompareCommandResult {
  std::vector<ComparisonRow> rows;
  std::filesystem::path table;
};
CompareCommandResult compare_command(const ExperimentConfig& config);

struct ExplainCommandResult {
  std::vector<std::filesystem::path> attribution_files;
  std::vector<std::filesystem::path> attention_files;
};
ExplainCommandResult explain_command(const ExperimentConfig& config, const std::filesystem::path& checkpoint);

std::uint64_t fingerprint(const FederatedData& data);
std::string hex64(std::uint64_t v);

}  // namespace credfed
