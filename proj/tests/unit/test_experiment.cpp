#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "credfed/checkpoint.hpp"
#include "credfed/errors.hpp"
#include "credfed/experiment.hpp"
#include "json.hpp"

using namespace credfed;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / "credfed_experiment_tests" / name;
  fs::remove_all(p);
  return p.parent_path();
}

ExperimentConfig small_config(const std::string& run) {
  ExperimentConfig c;
  c.out_dir = scratch(run);
  c.run_name = run;
  apply_overrides(c, {"client_sizes=[120,140,100]", "minority_rates=[0.2,0.15,0.25]", "num_features=6",
                      "num_binary_features=2", "embed_dim=6", "num_heads=2", "ff_hidden=8", "head_hidden=4",
                      "rounds=2", "local_epochs=1", "batch_size=32", "lr=0.1", "aggregation_mode=\"plaintext\""});
  return c;
}

}  // namespace

TEST(Config, DefaultsRoundTripThroughJson) {
  const ExperimentConfig def;
  const ExperimentConfig back = parse_config_json(def.to_json());
  EXPECT_EQ(back.to_json(), def.to_json());
  EXPECT_EQ(back.hash(), def.hash());
  EXPECT_EQ(def.client_count(), 4u);
}

TEST(Config, UnknownKeysAndBadValuesRejected) {
  EXPECT_THROW(parse_config_json(R"({"no_such_key": 1})"), ConfigError);
  EXPECT_THROW(parse_config_json(R"({"rounds": -1})"), ConfigError);
  EXPECT_THROW(parse_config_json(R"({"lr": "fast"})"), ConfigError);
  EXPECT_THROW(parse_config_json("[1, 2]"), ConfigError);
  EXPECT_THROW(parse_config_json("{not json"), Error);
  ExperimentConfig c;
  EXPECT_THROW(apply_overrides(c, {"missing_equals"}), ConfigError);
  EXPECT_THROW(apply_overrides(c, {"selection_strategy=greedy"}), ConfigError);
  apply_overrides(c, {"embed_dim=7"});
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Config, OverridesApplyInOrder) {
  ExperimentConfig c;
  apply_overrides(c, {"rounds=7", "selection_strategy=random", "rounds=9", "ig_baseline=zero", "he_scale_bits=24",
                      "ig_rule=midpoint"});
  EXPECT_EQ(c.ig.rule, RiemannRule::midpoint);
  EXPECT_EQ(c.federation.rounds, 9u);
  EXPECT_EQ(c.federation.selection_strategy, SelectionStrategy::random);
  EXPECT_EQ(c.federation_config().he.scale, std::ldexp(1.0, 24));
  EXPECT_NE(c.hash(), ExperimentConfig{}.hash());
}

TEST(Config, SharedKeysFlowIntoSubConfigs) {
  ExperimentConfig c;
  c.seed = 42;
  const auto fc = c.federation_config();
  const auto sp = c.synthetic_spec();
  EXPECT_EQ(fc.num_clients, 4u);
  EXPECT_EQ(fc.seed, derive_seed(42, "federation"));
  EXPECT_EQ(sp.seed, derive_seed(42, "data"));
  EXPECT_EQ(sp.num_features, c.model.num_features);
  apply_overrides(c, {"num_clients=3"});
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Commands, GenerateDataWritesEveryFileDeterministically) {
  const ExperimentConfig c = small_config("gen");
  const auto a = generate_data_command(c);
  ASSERT_EQ(a.client_files.size(), 3u);
  for (const auto& p : a.client_files) EXPECT_TRUE(fs::exists(p));
  const std::string first = slurp(a.client_files[1]) + slurp(a.test_file);
  const auto m = json::parse(slurp(a.manifest));
  EXPECT_EQ(m["files"].size(), 4u);
  EXPECT_EQ(m["files"][0]["generated_minority"], 24);
  EXPECT_EQ(m["dataset_hash"], hex64(fingerprint(load_federated_data(c))));
  const auto b = generate_data_command(c);
  EXPECT_EQ(slurp(b.client_files[1]) + slurp(b.test_file), first);
}

TEST(Commands, TrainThenReplayFromManifest) {
  const ExperimentConfig c = small_config("train");
  const auto r = train_command(c);
  for (const auto& p : {r.round_log, r.checkpoint, r.summary}) EXPECT_TRUE(fs::exists(p)) << p;
  const auto manifest = c.run_dir() / "manifest.json";
  const auto summary = json::parse(slurp(r.summary));
  EXPECT_EQ(summary["rounds"], 2);
  EXPECT_EQ(read_checkpoint(r.checkpoint).round, r.training.best.round);

  ExperimentConfig replay = parse_config_json(slurp(manifest));
  EXPECT_EQ(replay.hash(), c.hash());
  replay.run_name = "train_replay";
  const auto r2 = train_command(replay);
  EXPECT_EQ(slurp(r2.round_log), slurp(r.round_log));
  EXPECT_EQ(slurp(r2.checkpoint), slurp(r.checkpoint));
}

TEST(Commands, CompareRunsNineCellsOnIdenticalData) {
  ExperimentConfig c = small_config("compare");
  apply_overrides(c, {"rounds=1"});
  const auto cells = comparison_cells(c);
  ASSERT_EQ(cells.size(), 9u);
  std::set<std::pair<std::string, std::string>> names;
  for (const auto& [model, cfg] : cells) {
    names.insert({model, to_string(cfg.loss.kind)});
    if (model == "fedavg-random") EXPECT_EQ(mu_schedule(5, cfg.federation_config()), 0.0);
    if (model == "pbcs-varying-mu") EXPECT_EQ(cfg.federation.selection_strategy, SelectionStrategy::pbcs);
    EXPECT_EQ(cfg.seed, c.seed);
  }
  EXPECT_EQ(names.size(), 9u);

  const auto res = compare_command(c);
  ASSERT_EQ(res.rows.size(), 9u);
  for (const auto& row : res.rows) EXPECT_EQ(row.dataset_hash, res.rows.front().dataset_hash);
  std::istringstream table(slurp(res.table));
  std::string line;
  std::getline(table, line);
  EXPECT_EQ(line, "model,loss,best_recall,best_precision,best_f1,best_round,dataset_hash");
  std::size_t lines = 0;
  while (std::getline(table, line)) ++lines;
  EXPECT_EQ(lines, 9u);
  EXPECT_TRUE(fs::exists(c.run_dir() / "round_logs" / "fedavg-random_focal.csv"));
}

TEST(Commands, ExplainWritesTwoAttributionAndTwoAttentionFiles) {
  ExperimentConfig c = small_config("explain_train");
  const auto trained = train_command(c);
  c.run_name = "explain";
  apply_overrides(c, {"ig_steps=8", "explain_sample_cap=5", "explain_client=1"});
  const auto r = explain_command(c, trained.checkpoint);
  ASSERT_EQ(r.attribution_files.size(), 2u);
  ASSERT_EQ(r.attention_files.size(), 2u);
  for (int label = 0; label < 2; ++label) {
    const auto a = json::parse(slurp(r.attribution_files[label]));
    EXPECT_EQ(a["class"], label);
    EXPECT_EQ(a["features"].size(), 6u);
    EXPECT_LE(a["sample_count"].get<int>(), 5);
    const auto t = json::parse(slurp(r.attention_files[label]));
    ASSERT_EQ(t["normalized_scores"].size(), 6u);
    double lo = 1e9, hi = -1e9;
    for (const auto& row : t["normalized_scores"]) {
      ASSERT_EQ(row.size(), 6u);
      for (double v : row) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
    EXPECT_NEAR(lo, -1.0, 1e-12);
    EXPECT_NEAR(hi, 1.0, 1e-12);
  }
  ExperimentConfig other = c;
  apply_overrides(other, {"num_features=5"});
  EXPECT_THROW(explain_command(other, trained.checkpoint), Error);
}
