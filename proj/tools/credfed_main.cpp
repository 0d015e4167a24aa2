// credfed command-line driver.
//
//   credfed generate-data --config cfg.json
//   credfed train         --config cfg.json [--set key=value ...]
//   credfed compare       --config cfg.json
//   credfed explain       --config cfg.json --checkpoint runs/x/best.ckpt
//
// Errors are reported as a single "error[<kind>]: message" line on stderr.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "credfed/checkpoint.hpp"
#include "credfed/errors.hpp"
#include "credfed/experiment.hpp"

namespace {

struct CommonOptions {
  std::string config;
  std::vector<std::string> overrides;
  std::string out_dir;
  std::string run_name;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "JSON config file or a run manifest")->check(CLI::ExistingFile);
  cmd->add_option("--set", o.overrides, "override a config key, key=value (repeatable)");
  cmd->add_option("--out-dir", o.out_dir, "output root directory");
  cmd->add_option("--run-name", o.run_name, "run subdirectory name");
}

credfed::ExperimentConfig resolve(const CommonOptions& o) {
  credfed::ExperimentConfig c = o.config.empty() ? credfed::ExperimentConfig{} : credfed::load_config(o.config);
  credfed::apply_overrides(c, o.overrides);
  if (!o.out_dir.empty()) c.out_dir = o.out_dir;
  if (!o.run_name.empty()) c.run_name = o.run_name;
  c.validate();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated credit-default classifier with encrypted aggregation"};
  app.set_version_flag("--version", credfed::kVersion);
  app.require_subcommand(1);

  CommonOptions gen_opts, train_opts, cmp_opts, exp_opts;
  std::string checkpoint;
  auto* gen = app.add_subcommand("generate-data", "write synthetic client and test CSVs");
  add_common(gen, gen_opts);
  auto* train = app.add_subcommand("train", "run federated training and keep the best model");
  add_common(train, train_opts);
  auto* cmp = app.add_subcommand("compare", "train all strategy x loss cells on the same data");
  add_common(cmp, cmp_opts);
  auto* exp = app.add_subcommand("explain", "integrated gradients and attention maps for a checkpoint");
  add_common(exp, exp_opts);
  exp->add_option("--checkpoint", checkpoint, "checkpoint written by train")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*gen) {
      const auto r = credfed::generate_data_command(resolve(gen_opts));
      std::cout << "wrote " << r.client_files.size() << " client files, " << r.test_file.string() << ", "
                << r.manifest.string() << '\n';
    } else if (*train) {
      const auto r = credfed::train_command(resolve(train_opts));
      const auto& m = r.training.best_metrics;
      std::printf("best round %lld: recall=%.4f precision=%.4f f1=%.4f\n",
                  static_cast<long long>(r.training.best.round), m.recall, m.precision, m.f1);
      std::cout << "round log: " << r.round_log.string() << "\ncheckpoint: " << r.checkpoint.string() << '\n';
    } else if (*cmp) {
      const auto r = credfed::compare_command(resolve(cmp_opts));
      std::printf("%-18s %-14s %8s %9s %8s %6s\n", "model", "loss", "recall", "precision", "f1", "round");
      for (const auto& row : r.rows) {
        std::printf("%-18s %-14s %8.4f %9.4f %8.4f %6zu\n", row.model.c_str(), row.loss.c_str(), row.best.recall,
                    row.best.precision, row.best.f1, row.best_round);
      }
      std::cout << "table: " << r.table.string() << '\n';
    } else if (*exp) {
      const auto r = credfed::explain_command(resolve(exp_opts), checkpoint);
      for (const auto& p : r.attribution_files) std::cout << "attribution: " << p.string() << '\n';
      for (const auto& p : r.attention_files) std::cout << "attention: " << p.string() << '\n';
    }
  } catch (const credfed::Error& e) {
    std::cerr << "error[" << e.kind() << "]: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
