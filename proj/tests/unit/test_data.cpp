#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "credfed/data.hpp"
#include "credfed/errors.hpp"

using namespace credfed;
namespace fs = std::filesystem;

namespace {

Dataset toy(std::size_t n, std::size_t minority) {
  std::vector<double> f(n * 2);
  std::vector<int> y(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    f[2 * i] = static_cast<double>(i);
    f[2 * i + 1] = -0.5 * static_cast<double>(i);
    if (i % (n / minority) == 0 && std::count(y.begin(), y.end(), 1) < static_cast<long>(minority)) y[i] = 1;
  }
  return Dataset(Tensor({n, 2}, f), y, {"a", "b"});
}

fs::path temp_file(const std::string& name, const std::string& text) {
  const auto p = fs::temp_directory_path() / name;
  std::ofstream(p) << text;
  return p;
}

std::vector<double> column_means(const Dataset& ds) {
  std::vector<double> m(ds.num_features(), 0.0);
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (std::size_t j = 0; j < m.size(); ++j) m[j] += ds.row(i)[j] / static_cast<double>(ds.size());
  return m;
}

}  // namespace

TEST(Dataset, Validation) {
  EXPECT_THROW(Dataset(Tensor({2, 2}, 0.0), {0, 2}, {"a", "b"}), ContractError);
  EXPECT_THROW(Dataset(Tensor({2, 2}, 0.0), {0}, {"a", "b"}), DimensionError);
  EXPECT_THROW(Dataset(Tensor({2, 2}, 0.0), {0, 1}, {"a"}), DimensionError);
}

TEST(Synthetic, DefaultMinorityCountsAndSizes) {
  EXPECT_EQ(minority_count(1148, 0.1175), 135u);
  EXPECT_EQ(minority_count(1244, 0.1245), 155u);
  EXPECT_EQ(minority_count(1176, 0.1404), 165u);
  EXPECT_EQ(minority_count(840, 0.1352), 114u);
  EXPECT_EQ(minority_count(3, 0.01), 1u);

  const SyntheticSpec spec;
  const auto data = generate_synthetic(spec);
  ASSERT_EQ(data.clients.size(), 4u);
  std::size_t test_total = 0, test_minority = 0;
  const std::size_t want_minority[] = {135, 155, 165, 114};
  for (std::size_t k = 0; k < 4; ++k) {
    const auto& c = data.clients[k];
    const std::size_t n = spec.client_sizes[k], m = want_minority[k];
    // The 20% stratified slice moved to the test set, floor on the kept 80%.
    const std::size_t keep_min = static_cast<std::size_t>(0.8 * m);
    const std::size_t keep_maj = static_cast<std::size_t>(0.8 * (n - m));
    EXPECT_EQ(c.count(1), keep_min);
    EXPECT_EQ(c.count(0), keep_maj);
    test_total += n - keep_min - keep_maj;
    test_minority += m - keep_min;
    EXPECT_EQ(c.num_features(), 21u);
  }
  EXPECT_EQ(data.test.size(), test_total);
  EXPECT_EQ(data.test.count(1), test_minority);
}

TEST(Synthetic, DeterministicAndSeedSensitive) {
  SyntheticSpec spec;
  spec.seed = 5;
  const auto a = generate_synthetic(spec), b = generate_synthetic(spec);
  for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(a.clients[k].fingerprint(), b.clients[k].fingerprint());
  EXPECT_EQ(a.test.fingerprint(), b.test.fingerprint());
  spec.seed = 6;
  EXPECT_NE(generate_synthetic(spec).test.fingerprint(), a.test.fingerprint());
}

TEST(Synthetic, ShiftMakesClientsNonIid) {
  SyntheticSpec spec;
  spec.seed = 11;
  spec.shift_magnitude = 1.0;
  auto mean_gap = [](const FederatedData& d) {
    double gap = 0.0;
    std::size_t pairs = 0;
    for (std::size_t k = 0; k < d.clients.size(); ++k) {
      for (std::size_t l = k + 1; l < d.clients.size(); ++l) {
        const auto a = column_means(d.clients[k]), b = column_means(d.clients[l]);
        for (std::size_t j = 4; j < a.size(); ++j) gap += std::abs(a[j] - b[j]);
        pairs += a.size() - 4;
      }
    }
    return gap / static_cast<double>(pairs);
  };
  EXPECT_GE(mean_gap(generate_synthetic(spec)), 0.5 * spec.shift_magnitude);
  spec.shift_magnitude = 0.0;
  // IID control: only sampling noise and minority-rate differences remain.
  EXPECT_LT(mean_gap(generate_synthetic(spec)), 0.15);
}

TEST(Synthetic, InfeasibleCountsAreContractErrors) {
  SyntheticSpec spec;
  spec.client_sizes = {3};
  spec.minority_rates = {0.2};
  EXPECT_THROW(generate_synthetic(spec), Error);
  spec = SyntheticSpec{};
  spec.minority_rates[0] = 0.6;
  EXPECT_THROW(spec.validate(), Error);
}

TEST(StratifiedSplit, FloorPerClassAndPartition) {
  const Dataset ds = toy(100, 10);
  ASSERT_EQ(ds.count(1), 10u);
  const auto [train, val] = stratified_split(ds, 0.8);
  EXPECT_EQ(train.count(1), 8u);
  EXPECT_EQ(train.count(0), 72u);
  EXPECT_EQ(val.count(1), 2u);
  EXPECT_EQ(val.count(0), 18u);
  // Partition: every original row appears exactly once.
  std::vector<double> seen;
  for (const Dataset* part : {&train, &val})
    for (std::size_t i = 0; i < part->size(); ++i) seen.push_back(part->row(i)[0]);
  std::sort(seen.begin(), seen.end());
  for (std::size_t i = 0; i < 100; ++i) EXPECT_EQ(seen[i], static_cast<double>(i));
}

TEST(StratifiedSplit, BalancedHalvesAndErrors) {
  const Dataset ds = toy(40, 20);
  Rng rng(3);
  const auto [a, b] = stratified_split(ds, 0.5, &rng);
  EXPECT_EQ(a.count(0), a.count(1));
  EXPECT_EQ(b.count(0), b.count(1));
  EXPECT_THROW(stratified_split(toy(10, 1), 0.5), ContractError);
  EXPECT_THROW(stratified_split(ds, 1.0), ContractError);
}

TEST(Csv, WellFormedFile) {
  const auto p = temp_file("credfed_ok.csv", "a,b,label\n1.5,-2,0\n3,4e-3,1\n");
  const Dataset ds = load_csv(p);
  EXPECT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds.feature_names(), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(ds.row(1)[1], 4e-3);
  EXPECT_EQ(ds.labels(), (std::vector<int>{0, 1}));
}

TEST(Csv, ErrorsNameTheLocation) {
  auto expect_parse_error = [](const std::string& text, const std::string& needle) {
    const auto p = temp_file("credfed_bad.csv", text);
    try {
      load_csv(p);
      ADD_FAILURE() << "no error for: " << text;
    } catch (const ParseError& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  expect_parse_error("a,b,label\n1,2,0\n1,2,2\n", "row 3");
  expect_parse_error("a,b,label\n1,x,0\n", "column");
  expect_parse_error("a,b\n1,2\n", "label");
  expect_parse_error("", "empty");
  expect_parse_error("a,b,label\n1,2\n", "row 2");
}

TEST(Csv, WriteThenLoadRoundTripsExactly) {
  const auto data = generate_synthetic(SyntheticSpec{});
  const auto p = fs::temp_directory_path() / "credfed_roundtrip.csv";
  write_csv(p, data.clients[3]);
  const Dataset back = load_csv(p, CsvSchema{21, {}});
  EXPECT_EQ(back.features(), data.clients[3].features());
  EXPECT_EQ(back.labels(), data.clients[3].labels());
  EXPECT_EQ(back.feature_names(), data.clients[3].feature_names());
  EXPECT_THROW(load_csv(p, CsvSchema{20, {}}), ParseError);
}
