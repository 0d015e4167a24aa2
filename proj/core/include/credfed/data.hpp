#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "credfed/rng.hpp"
#include "credfed/tensor.hpp"

namespace credfed {

/// Labelled tabular data: label 0 = non-defaulting, 1 = defaulting.
class Dataset {
 public:
  Dataset() = default;
  Dataset(Tensor features, std::vector<int> labels, std::vector<std::string> feature_names);

  const Tensor& features() const { return features_; }
  const std::vector<int>& labels() const { return labels_; }
  const std::vector<std::string>& feature_names() const { return names_; }

  std::size_t size() const { return labels_.size(); }
  std::size_t num_features() const { return names_.size(); }
  std::size_t count(int label) const;
  std::span<const double> row(std::size_t i) const;

  Dataset subset(std::span<const std::size_t> indices) const;
  static Dataset concat(std::span<const Dataset> parts);

  // Fingerprint over features and labels, used to prove datasets are shared.
  std::uint64_t fingerprint() const;

 private:
  Tensor features_;
  std::vector<int> labels_;
  std::vector<std::string> names_;
};

std::vector<std::string> default_feature_names(std::size_t d);

struct SyntheticSpec {
  std::vector<std::size_t> client_sizes = {1148, 1244, 1176, 840};
  std::vector<double> minority_rates = {0.1175, 0.1245, 0.1404, 0.1352};
  std::size_t num_features = 21;
  std::size_t num_binary_features = 4;
  double shift_magnitude = 0.5;    // per-client mean shift on a random half of the features
  double class_separation = 2.5;   // distance between class means (unit-variance noise)
  double test_fraction = 0.2;      // stratified slice of each client moved to the shared test set
  std::uint64_t seed = 0;

  std::size_t num_clients() const { return client_sizes.size(); }
  void validate() const;
};

struct FederatedData {
  std::vector<Dataset> clients;
  Dataset test;
};

// Nearest-integer minority count with a minimum of 1.
std::size_t minority_count(std::size_t size, double rate);

FederatedData generate_synthetic(const SyntheticSpec& spec);

// Per class, the first floor(fraction * n_c) samples (in original order,
// or after a seeded shuffle when `shuffle` is given) go to the first part.
std::pair<Dataset, Dataset> stratified_split(const Dataset& ds, double train_fraction,
                                             Rng* shuffle = nullptr);

struct CsvSchema {
  std::optional<std::size_t> num_features;
  std::vector<std::string> feature_names;  // empty: accept whatever the header lists
};

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema = {});
void write_csv(const std::filesystem::path& path, const Dataset& ds);

}  // namespace credfed
