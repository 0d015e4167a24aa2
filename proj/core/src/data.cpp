#include "credfed/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "credfed/errors.hpp"

namespace credfed {

Dataset::Dataset(Tensor features, std::vector<int> labels, std::vector<std::string> feature_names)
    : features_(std::move(features)), labels_(std::move(labels)), names_(std::move(feature_names)) {
  if (features_.rank() != 2) throw DimensionError("dataset: features must be an [N x d] matrix");
  if (features_.rows() != labels_.size()) {
    throw DimensionError("dataset: " + std::to_string(features_.rows()) + " rows vs " +
                         std::to_string(labels_.size()) + " labels");
  }
  if (features_.cols() != names_.size()) throw DimensionError("dataset: one name per feature required");
  if (!features_.all_finite()) throw ContractError("dataset: features contain NaN or Inf");
  for (int y : labels_)
    if (y != 0 && y != 1) throw ContractError("dataset: labels must be 0 or 1");
}

std::size_t Dataset::count(int label) const {
  return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), label));
}

std::span<const double> Dataset::row(std::size_t i) const {
  return features_.values().subspan(i * num_features(), num_features());
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  const std::size_t d = num_features();
  std::vector<double> f;
  f.reserve(indices.size() * d);
  std::vector<int> y;
  y.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= size()) throw ContractError("dataset subset index out of range");
    const auto r = row(i);
    f.insert(f.end(), r.begin(), r.end());
    y.push_back(labels_[i]);
  }
  return Dataset(Tensor({indices.size(), d}, std::move(f)), std::move(y), names_);
}

Dataset Dataset::concat(std::span<const Dataset> parts) {
  if (parts.empty()) throw ContractError("dataset concat of zero parts");
  const auto& names = parts.front().feature_names();
  std::vector<double> f;
  std::vector<int> y;
  for (const auto& p : parts) {
    if (p.feature_names() != names) throw DimensionError("dataset concat: feature schemas differ");
    f.insert(f.end(), p.features().values().begin(), p.features().values().end());
    y.insert(y.end(), p.labels().begin(), p.labels().end());
  }
  const std::size_t n = y.size();
  return Dataset(Tensor({n, names.size()}, std::move(f)), std::move(y), names);
}

std::uint64_t Dataset::fingerprint() const {
  const auto f = features_.values();
  std::uint64_t h = fnv1a64(std::span(reinterpret_cast<const unsigned char*>(f.data()), f.size_bytes()));
  h = fnv1a64(std::span(reinterpret_cast<const unsigned char*>(labels_.data()),
                        labels_.size() * sizeof(int)),
              h);
  return h;
}

std::vector<std::string> default_feature_names(std::size_t d) {
  static const std::vector<std::string> kNames = {
      "small and micro enterprises",
      "bank early warning",
      "government platform finance",
      "prohibited industry",
      "revolving credit facility",
      "years relationship with bank",
      "guarantee type",
      "credit rating",
      "repayment method",
      "platform type",
      "registered capital",
      "enterprise age",
      "loan amount",
      "loan term",
      "interest rate",
      "collateral value",
      "overdue history",
      "supply chain position",
      "annual revenue",
      "debt ratio",
      "industry category",
  };
  std::vector<std::string> out;
  out.reserve(d);
  for (std::size_t i = 0; i < d; ++i)
    out.push_back(i < kNames.size() ? kNames[i] : "feature_" + std::to_string(i));
  return out;
}

void SyntheticSpec::validate() const {
  if (client_sizes.empty()) throw ConfigError("synthetic: need at least one client");
  if (minority_rates.size() != client_sizes.size()) {
    throw ConfigError("synthetic: " + std::to_string(client_sizes.size()) + " sizes vs " +
                      std::to_string(minority_rates.size()) + " minority rates");
  }
  for (std::size_t s : client_sizes)
    if (s == 0) throw ConfigError("synthetic: client sizes must be positive");
  for (double r : minority_rates)
    if (!(r > 0.0 && r < 0.5)) throw ConfigError("synthetic: minority rates must lie in (0, 0.5)");
  if (num_features == 0) throw ConfigError("synthetic: num_features must be positive");
  if (num_binary_features > num_features) throw ConfigError("synthetic: too many binary features");
  if (!(shift_magnitude >= 0.0)) throw ConfigError("synthetic: shift_magnitude must be >= 0");
  if (!(class_separation >= 0.0)) throw ConfigError("synthetic: class_separation must be >= 0");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("synthetic: test_fraction must lie in (0, 1)");
}

std::size_t minority_count(std::size_t size, double rate) {
  const auto n = static_cast<std::size_t>(std::llround(rate * static_cast<double>(size)));
  return std::max<std::size_t>(n, 1);
}

FederatedData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t d = spec.num_features;
  const auto names = default_feature_names(d);

  // Shared concept: class means differ along a fixed unit direction. Features
  // 2 and 3 carry no class signal.
  Rng concept_rng = make_rng(spec.seed, "synthetic-concept");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> direction(d);
  for (double& v : direction) v = normal(concept_rng);
  if (d > 4) direction[2] = direction[3] = 0.0;
  const double norm = std::sqrt(std::inner_product(direction.begin(), direction.end(), direction.begin(), 0.0));
  for (double& v : direction) v = norm > 0.0 ? spec.class_separation * v / norm : 0.0;

  FederatedData out;
  std::vector<Dataset> test_parts;
  for (std::size_t k = 0; k < spec.num_clients(); ++k) {
    const std::size_t n = spec.client_sizes[k];
    const std::size_t n_min = minority_count(n, spec.minority_rates[k]);
    if (n_min >= n || n - n_min < 2 || n_min < 2) {
      throw ContractError("synthetic: client " + std::to_string(k) + " has infeasible class counts");
    }
    Rng rng = make_rng(spec.seed, "synthetic-client", k);

    std::vector<std::size_t> features_idx(d);
    std::iota(features_idx.begin(), features_idx.end(), 0);
    std::shuffle(features_idx.begin(), features_idx.end(), rng);
    std::vector<double> shift(d, 0.0);
    std::bernoulli_distribution coin(0.5);
    for (std::size_t i = 0; i < (d + 1) / 2; ++i) {
      shift[features_idx[i]] = coin(rng) ? spec.shift_magnitude : -spec.shift_magnitude;
    }

    std::vector<int> labels(n, 0);
    std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n_min), 1);
    std::shuffle(labels.begin(), labels.end(), rng);

    std::vector<double> f(n * d);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        double v = (labels[i] == 1 ? direction[j] : 0.0) + shift[j] + normal(rng);
        if (j < spec.num_binary_features) v = v > 0.5 * direction[j] ? 1.0 : 0.0;
        f[i * d + j] = v;
      }
    }
    Dataset full(Tensor({n, d}, std::move(f)), std::move(labels), names);
    auto [local, test] = stratified_split(full, 1.0 - spec.test_fraction);
    out.clients.push_back(std::move(local));
    test_parts.push_back(std::move(test));
  }
  out.test = Dataset::concat(test_parts);
  return out;
}

std::pair<Dataset, Dataset> stratified_split(const Dataset& ds, double train_fraction, Rng* shuffle) {
  require(train_fraction > 0.0 && train_fraction < 1.0, "stratified_split: fraction must lie in (0, 1)");
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[ds.labels()[i]].push_back(i);
  std::vector<std::size_t> first;
  std::vector<std::size_t> second;
  for (int c = 0; c < 2; ++c) {
    auto& idx = by_class[c];
    if (idx.size() < 2) {
      throw ContractError("stratified_split: class " + std::to_string(c) + " has " +
                          std::to_string(idx.size()) + " samples, need at least 2");
    }
    if (shuffle) std::shuffle(idx.begin(), idx.end(), *shuffle);
    const auto take = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(idx.size())));
    first.insert(first.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take));
    second.insert(second.end(), idx.begin() + static_cast<std::ptrdiff_t>(take), idx.end());
  }
  std::sort(first.begin(), first.end());
  std::sort(second.begin(), second.end());
  return {ds.subset(first), ds.subset(second)};
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  const auto e = s.find_last_not_of(" \t\r\n");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

double parse_double(const std::string& cell, const std::filesystem::path& path, std::size_t row,
                    std::size_t col) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || cell.empty() || !std::isfinite(v)) {
    throw ParseError(path.string() + ": row " + std::to_string(row) + ", column " +
                     std::to_string(col) + ": non-numeric value '" + cell + "'");
  }
  return v;
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line) || trim(line).empty()) throw ParseError(path.string() + ": empty file");
  auto header = split_csv_line(line);
  for (auto& h : header) h = trim(h);
  const auto label_it = std::find(header.begin(), header.end(), "label");
  if (label_it == header.end()) throw ParseError(path.string() + ": missing column 'label'");
  const auto label_col = static_cast<std::size_t>(label_it - header.begin());
  std::vector<std::string> names;
  for (std::size_t i = 0; i < header.size(); ++i)
    if (i != label_col) names.push_back(header[i]);
  if (schema.num_features && names.size() != *schema.num_features) {
    throw ParseError(path.string() + ": expected " + std::to_string(*schema.num_features) +
                     " feature columns, found " + std::to_string(names.size()));
  }
  for (const auto& want : schema.feature_names) {
    if (std::find(names.begin(), names.end(), want) == names.end()) {
      throw ParseError(path.string() + ": missing column '" + want + "'");
    }
  }
  if (!schema.feature_names.empty() && names != schema.feature_names) {
    throw ParseError(path.string() + ": feature columns are not in schema order");
  }

  std::vector<double> f;
  std::vector<int> y;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (trim(line).empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw ParseError(path.string() + ": row " + std::to_string(row) + " has " +
                       std::to_string(cells.size()) + " cells, expected " + std::to_string(header.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const std::string cell = trim(cells[c]);
      if (c == label_col) {
        if (cell != "0" && cell != "1") {
          throw ParseError(path.string() + ": row " + std::to_string(row) + ", column " +
                           std::to_string(c + 1) + ": label must be 0 or 1, got '" + cell + "'");
        }
        y.push_back(cell == "1" ? 1 : 0);
      } else {
        f.push_back(parse_double(cell, path, row, c + 1));
      }
    }
  }
  if (y.empty()) throw ParseError(path.string() + ": no data rows");
  const std::size_t n = y.size();
  const std::size_t d = names.size();
  return Dataset(Tensor({n, d}, std::move(f)), std::move(y), std::move(names));
}

void write_csv(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  for (const auto& name : ds.feature_names()) os << name << ',';
  os << "label\n";
  char buf[32];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (double v : ds.row(i)) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      os << buf << ',';
    }
    os << ds.labels()[i] << '\n';
  }
  if (!os) throw IoError("failed writing " + path.string());
}

}  // namespace credfed
