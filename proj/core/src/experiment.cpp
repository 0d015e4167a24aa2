#include "credfed/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "credfed/checkpoint.hpp"
#include "credfed/errors.hpp"
#include "json.hpp"

namespace credfed {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

[[noreturn]] void bad_type(const std::string& key, const char* want) {
  throw ConfigError("config key '" + key + "' must be " + want);
}

std::uint64_t as_uint(const std::string& key, const json& j) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(j.get<std::int64_t>());
  bad_type(key, "a nonnegative integer");
}

double as_double(const std::string& key, const json& j) {
  if (!j.is_number()) bad_type(key, "a number");
  return j.get<double>();
}

std::string as_string(const std::string& key, const json& j) {
  if (!j.is_string()) bad_type(key, "a string");
  return j.get<std::string>();
}

bool as_bool(const std::string& key, const json& j) {
  if (!j.is_boolean()) bad_type(key, "true or false");
  return j.get<bool>();
}

template <typename T, typename F>
std::vector<T> as_list(const std::string& key, const json& j, F&& each) {
  if (!j.is_array()) bad_type(key, "a list");
  std::vector<T> out;
  for (const auto& v : j) out.push_back(each(key, v));
  return out;
}

struct Field {
  std::function<void(ExperimentConfig&, const json&, const std::string&)> set;
  std::function<json(const ExperimentConfig&)> get;
};

#define CF_UINT(expr) \
  Field{[](ExperimentConfig& c, const json& j, const std::string& k) { expr = as_uint(k, j); }, \
        [](const ExperimentConfig& c) { return json(expr); }}
#define CF_DOUBLE(expr) \
  Field{[](ExperimentConfig& c, const json& j, const std::string& k) { expr = as_double(k, j); }, \
        [](const ExperimentConfig& c) { return json(expr); }}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> kFields = {
      {"seed", CF_UINT(c.seed)},
      {"run_name", Field{[](ExperimentConfig& c, const json& j, const std::string& k) { c.run_name = as_string(k, j); },
                         [](const ExperimentConfig& c) { return json(c.run_name); }}},
      {"out_dir", Field{[](ExperimentConfig& c, const json& j, const std::string& k) { c.out_dir = as_string(k, j); },
                        [](const ExperimentConfig& c) { return json(c.out_dir.string()); }}},
      {"log_timing", Field{[](ExperimentConfig& c, const json& j, const std::string& k) { c.log_timing = as_bool(k, j); },
                           [](const ExperimentConfig& c) { return json(c.log_timing); }}},
      {"num_clients",
       Field{[](ExperimentConfig& c, const json& j, const std::string& k) {
               if (j.is_string() && j.get<std::string>() == "auto") c.num_clients.reset();
               else c.num_clients = as_uint(k, j);
             },
             [](const ExperimentConfig& c) { return c.num_clients ? json(*c.num_clients) : json("auto"); }}},
      {"selection_ratio", CF_DOUBLE(c.federation.selection_ratio)},
      {"rounds", CF_UINT(c.federation.rounds)},
      {"local_epochs", CF_UINT(c.federation.local_epochs)},
      {"batch_size", CF_UINT(c.federation.batch_size)},
      {"lr", CF_DOUBLE(c.federation.lr)},
      {"mu_schedule",
       Field{[](ExperimentConfig& c, const json& j, const std::string& k) {
               c.federation.mu_schedule = parse_mu_schedule(as_string(k, j));
             },
             [](const ExperimentConfig& c) { return json(to_string(c.federation.mu_schedule)); }}},
      {"mu_step", CF_DOUBLE(c.federation.mu_step)},
      {"mu_cap", CF_DOUBLE(c.federation.mu_cap)},
      {"mu_fixed", CF_DOUBLE(c.federation.mu_fixed)},
      {"selection_strategy",
       Field{[](ExperimentConfig& c, const json& j, const std::string& k) {
               c.federation.selection_strategy = parse_selection_strategy(as_string(k, j));
             },
             [](const ExperimentConfig& c) { return json(to_string(c.federation.selection_strategy)); }}},
      {"aggregation_mode",
       Field{[](ExperimentConfig& c, const json& j, const std::string& k) {
               c.federation.aggregation_mode = parse_aggregation_mode(as_string(k, j));
             },
             [](const ExperimentConfig& c) { return json(to_string(c.federation.aggregation_mode)); }}},
      {"train_fraction", CF_DOUBLE(c.federation.train_fraction)},
      {"num_features", CF_UINT(c.model.num_features)},
      {"embed_dim", CF_UINT(c.model.embed_dim)},
      {"num_heads", CF_UINT(c.model.num_heads)},
      {"ff_hidden", CF_UINT(c.model.ff_hidden)},
      {"head_hidden", CF_UINT(c.model.head_hidden)},
      {"layer_norm_eps", CF_DOUBLE(c.model.layer_norm_eps)},
      {"loss_kind",
       Field{[](ExperimentConfig& c, const json& j, const std::string& k) { c.loss.kind = parse_loss_kind(as_string(k, j)); },
             [](const ExperimentConfig& c) { return json(to_string(c.loss.kind)); }}},
      {"class_weight_majority", CF_DOUBLE(c.loss.weight_majority)},
      {"class_weight_minority", CF_DOUBLE(c.loss.weight_minority)},
      {"focal_gamma", CF_DOUBLE(c.loss.focal_gamma)},
      {"client_sizes",
       Field{[](ExperimentConfig& c, const json& j, const std::string& k) {
               c.synthetic.client_sizes = as_list<std::size_t>(k, j, as_uint);
             },
             [](const ExperimentConfig& c) { return json(c.synthetic.client_sizes); }}},
      {"minority_rates",
       Field{[](ExperimentConfig& c, const json& j, const std::string& k) {
               c.synthetic.minority_rates = as_list<double>(k, j, as_double);
             },
             [](const ExperimentConfig& c) { return json(c.synthetic.minority_rates); }}},
      {"num_binary_features", CF_UINT(c.synthetic.num_binary_features)},
      {"shift_magnitude", CF_DOUBLE(c.synthetic.shift_magnitude)},
      {"class_separation", CF_DOUBLE(c.synthetic.class_separation)},
      {"test_fraction", CF_DOUBLE(c.synthetic.test_fraction)},
      {"client_csvs",
       Field{[](ExperimentConfig& c, const json& j, const std::string& k) {
               c.client_csvs.clear();
               for (const auto& s : as_list<std::string>(k, j, as_string)) c.client_csvs.emplace_back(s);
             },
             [](const ExperimentConfig& c) {
               std::vector<std::string> v;
               for (const auto& p : c.client_csvs) v.push_back(p.string());
               return json(v);
             }}},
      {"test_csv", Field{[](ExperimentConfig& c, const json& j, const std::string& k) { c.test_csv = as_string(k, j); },
                         [](const ExperimentConfig& c) { return json(c.test_csv.string()); }}},
      {"he_ring_degree", CF_UINT(c.federation.he.ring_degree)},
      {"he_modulus", CF_UINT(c.federation.he.modulus)},
      {"he_scale_bits",
       Field{[](ExperimentConfig& c, const json& j, const std::string& k) {
               const auto bits = as_uint(k, j);
               if (bits < 1 || bits > 60) throw ConfigError("config key 'he_scale_bits' must lie in [1, 60]");
               c.federation.he.scale = std::ldexp(1.0, static_cast<int>(bits));
             },
             [](const ExperimentConfig& c) { return json(std::ilogb(c.federation.he.scale)); }}},
      {"he_error_stddev", CF_DOUBLE(c.federation.he.error_stddev)},
      {"he_max_abs_value", CF_DOUBLE(c.federation.he.max_abs_value)},
      {"ig_steps", CF_UINT(c.ig.steps)},
      {"ig_target", CF_UINT(c.ig.target)},
      {"ig_rule",
       Field{[](ExperimentConfig& c, const json& j, const std::string& k) { c.ig.rule = parse_riemann_rule(as_string(k, j)); },
             [](const ExperimentConfig& c) { return json(to_string(c.ig.rule)); }}},
      {"ig_baseline",
       Field{[](ExperimentConfig& c, const json& j, const std::string& k) {
               if (j.is_string()) {
                 if (j.get<std::string>() != "zero") throw ConfigError("config key 'ig_baseline' must be \"zero\" or a list");
                 c.ig.baseline.clear();
               } else {
                 c.ig.baseline = as_list<double>(k, j, as_double);
               }
             },
             [](const ExperimentConfig& c) { return c.ig.baseline.empty() ? json("zero") : json(c.ig.baseline); }}},
      {"explain_client", CF_UINT(c.explain_client)},
      {"explain_sample_cap", CF_UINT(c.explain_sample_cap)},
  };
  return kFields;
}

#undef CF_UINT
#undef CF_DOUBLE

void apply_object(ExperimentConfig& config, const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object of flat keys");
  for (const auto& [key, value] : j.items()) {
    const auto it = fields().find(key);
    if (it == fields().end()) throw ConfigError("unknown config key '" + key + "'");
    it->second.set(config, value, key);
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc | std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw IoError("failed writing " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

json manifest_base(const ExperimentConfig& config, const std::string& command) {
  json m;
  m["manifest_version"] = 1;
  m["tool"] = "credfed";
  m["version"] = kVersion;
  m["command"] = command;
  m["seed"] = config.seed;
  m["config_hash"] = hex64(config.hash());
  m["config"] = json::parse(config.to_json());
  return m;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::size_t ExperimentConfig::client_count() const {
  if (num_clients) return *num_clients;
  return client_csvs.empty() ? synthetic.client_sizes.size() : client_csvs.size();
}

FederationConfig ExperimentConfig::federation_config() const {
  FederationConfig f = federation;
  f.num_clients = client_count();
  f.seed = derive_seed(seed, "federation");
  return f;
}

SyntheticSpec ExperimentConfig::synthetic_spec() const {
  SyntheticSpec s = synthetic;
  s.num_features = model.num_features;
  s.seed = derive_seed(seed, "data");
  return s;
}

void ExperimentConfig::validate() const {
  if (run_name.empty() || run_name.find('/') != std::string::npos || run_name == "." || run_name == "..") {
    throw ConfigError("run_name must be a plain, nonempty directory name");
  }
  try {
    model.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  loss.validate();
  try {
    federation_config().validate();
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  const std::size_t sources = client_csvs.empty() ? synthetic.client_sizes.size() : client_csvs.size();
  if (client_count() != sources) {
    throw ConfigError("num_clients=" + std::to_string(client_count()) + " but " + std::to_string(sources) +
                      " client data sources are configured");
  }
  if (client_csvs.empty()) {
    synthetic_spec().validate();
  } else if (test_csv.empty()) {
    throw ConfigError("test_csv is required when client_csvs is set");
  }
  if (explain_client >= client_count()) throw ConfigError("explain_client must name an existing client");
  if (explain_sample_cap == 0) throw ConfigError("explain_sample_cap must be positive");
  try {
    ig.validate(model.num_features);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (ig.target >= model.num_classes) throw ConfigError("ig_target must be a class index");
}

std::string ExperimentConfig::to_json() const {
  json j = json::object();
  for (const auto& [key, field] : fields()) j[key] = field.get(*this);
  return j.dump(2);
}

std::uint64_t ExperimentConfig::hash() const { return fnv1a64(json::parse(to_json()).dump()); }

ExperimentConfig parse_config_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  // A run manifest can be replayed directly.
  if (j.is_object() && j.contains("manifest_version") && j.contains("config")) j = j["config"];
  ExperimentConfig c;
  apply_object(c, j);
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config_json(ss.str());
}

void apply_overrides(ExperimentConfig& config, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + o + "' is not key=value");
    const std::string key = o.substr(0, eq);
    const std::string raw = o.substr(eq + 1);
    json value;
    try {
      value = json::parse(raw);
    } catch (const json::parse_error&) {
      value = raw;
    }
    apply_object(config, json{{key, value}});
  }
}

FederatedData load_federated_data(const ExperimentConfig& config) {
  if (config.client_csvs.empty()) return generate_synthetic(config.synthetic_spec());
  FederatedData data;
  CsvSchema schema{config.model.num_features, {}};
  for (const auto& p : config.client_csvs) data.clients.push_back(load_csv(p, schema));
  schema.feature_names = data.clients.front().feature_names();
  data.test = load_csv(config.test_csv, schema);
  return data;
}

std::uint64_t fingerprint(const FederatedData& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& c : data.clients) h = splitmix64(h ^ c.fingerprint());
  return splitmix64(h ^ data.test.fingerprint());
}

GenerateDataResult generate_data_command(const ExperimentConfig& config) {
  config.validate();
  if (!config.client_csvs.empty()) throw ConfigError("generate-data needs a synthetic spec, not client_csvs");
  const SyntheticSpec spec = config.synthetic_spec();
  const FederatedData data = generate_synthetic(spec);
  const fs::path dir = config.run_dir();
  ensure_dir(dir);
  GenerateDataResult out;
  json files = json::array();
  for (std::size_t k = 0; k < data.clients.size(); ++k) {
    const fs::path p = dir / ("client_" + std::to_string(k) + ".csv");
    write_csv(p, data.clients[k]);
    out.client_files.push_back(p);
    files.push_back({{"role", "client"}, {"client", k}, {"path", p.filename().string()},
                     {"rows", data.clients[k].size()}, {"minority", data.clients[k].count(1)},
                     {"generated_size", spec.client_sizes[k]},
                     {"generated_minority", minority_count(spec.client_sizes[k], spec.minority_rates[k])}});
  }
  out.test_file = dir / "test.csv";
  write_csv(out.test_file, data.test);
  files.push_back({{"role", "test"}, {"path", "test.csv"}, {"rows", data.test.size()},
                   {"minority", data.test.count(1)}});
  json m = manifest_base(config, "generate-data");
  m["data_seed"] = spec.seed;
  m["dataset_hash"] = hex64(fingerprint(data));
  m["files"] = files;
  out.manifest = dir / "manifest.json";
  write_text(out.manifest, m.dump(2) + "\n");
  return out;
}

TrainCommandResult train_command(const ExperimentConfig& config) {
  config.validate();
  const FederatedData data = load_federated_data(config);
  const fs::path dir = config.run_dir();
  ensure_dir(dir);
  TrainCommandResult out{run_training(config.federation_config(), config.model, config.loss, data), {}, {}, {}};
  const auto& tr = out.training;

  std::ostringstream log;
  write_round_log(log, tr.rounds, config.log_timing);
  out.round_log = dir / "round_log.csv";
  write_text(out.round_log, log.str());

  std::ostringstream timing;
  timing << "round,duration_ms\n";
  for (const auto& r : tr.rounds) timing << r.round << ',' << fmt(r.duration_ms) << '\n';
  write_text(dir / "timing.csv", timing.str());

  out.checkpoint = dir / "best.ckpt";
  Checkpoint ckpt = tr.best;
  ckpt.seed = config.seed;
  write_checkpoint(out.checkpoint, ckpt);

  json s;
  s["rounds"] = tr.rounds.size();
  s["strategy"] = to_string(config.federation.selection_strategy);
  s["mu_schedule"] = to_string(config.federation.mu_schedule);
  s["loss"] = to_string(config.loss.kind);
  s["aggregation_mode"] = to_string(config.federation.aggregation_mode);
  s["best_round"] = tr.best.round;
  s["best_recall"] = tr.best_metrics.recall;
  s["best_precision"] = tr.best_metrics.precision;
  s["best_f1"] = tr.best_metrics.f1;
  s["dataset_hash"] = hex64(fingerprint(data));
  out.summary = dir / "summary.json";
  write_text(out.summary, s.dump(2) + "\n");

  json m = manifest_base(config, "train");
  m["dataset_hash"] = hex64(fingerprint(data));
  m["outputs"] = {"round_log.csv", "timing.csv", "best.ckpt", "summary.json"};
  write_text(dir / "manifest.json", m.dump(2) + "\n");
  return out;
}

std::vector<std::pair<std::string, ExperimentConfig>> comparison_cells(const ExperimentConfig& base) {
  struct Model {
    const char* name;
    SelectionStrategy strategy;
    MuSchedule schedule;
    std::optional<double> fixed_mu;  // unset: keep base mu_fixed
  };
  const Model models[] = {
      {"pbcs-varying-mu", SelectionStrategy::pbcs, MuSchedule::varying, std::nullopt},
      {"fedprox-random", SelectionStrategy::random, MuSchedule::fixed, std::nullopt},
      {"fedavg-random", SelectionStrategy::random, MuSchedule::fixed, 0.0},
  };
  const LossKind losses[] = {LossKind::weighted_nll, LossKind::cross_entropy, LossKind::focal};
  std::vector<std::pair<std::string, ExperimentConfig>> cells;
  for (const auto& m : models) {
    for (LossKind l : losses) {
      ExperimentConfig c = base;
      c.federation.selection_strategy = m.strategy;
      c.federation.mu_schedule = m.schedule;
      if (m.fixed_mu) c.federation.mu_fixed = *m.fixed_mu;
      c.loss.kind = l;
      cells.emplace_back(m.name, std::move(c));
    }
  }
  return cells;
}

CompareCommandResult compare_command(const ExperimentConfig& config) {
  config.validate();
  const fs::path dir = config.run_dir();
  ensure_dir(dir / "round_logs");
  CompareCommandResult out;
  for (const auto& [model, cell] : comparison_cells(config)) {
    cell.validate();
    // Each cell loads its own copy, so identical hashes show that the data is
    // a function of the shared root seed only.
    const FederatedData data = load_federated_data(cell);
    const TrainingResult tr = run_training(cell.federation_config(), cell.model, cell.loss, data);
    ComparisonRow row{model, to_string(cell.loss.kind), tr.best_metrics,
                      static_cast<std::size_t>(tr.best.round), fingerprint(data)};
    std::ostringstream log;
    write_round_log(log, tr.rounds, config.log_timing);
    write_text(dir / "round_logs" / (model + "_" + row.loss + ".csv"), log.str());
    out.rows.push_back(std::move(row));
  }
  std::ostringstream t;
  t << "model,loss,best_recall,best_precision,best_f1,best_round,dataset_hash\n";
  for (const auto& r : out.rows) {
    t << r.model << ',' << r.loss << ',' << fmt(r.best.recall) << ',' << fmt(r.best.precision) << ','
      << fmt(r.best.f1) << ',' << r.best_round << ',' << hex64(r.dataset_hash) << '\n';
  }
  out.table = dir / "comparison.csv";
  write_text(out.table, t.str());
  json m = manifest_base(config, "compare");
  m["outputs"] = {"comparison.csv", "round_logs/"};
  write_text(dir / "manifest.json", m.dump(2) + "\n");
  return out;
}

ExplainCommandResult explain_command(const ExperimentConfig& config, const fs::path& checkpoint) {
  config.validate();
  const Checkpoint ckpt = read_checkpoint(checkpoint);
  const ModelParams& params = ckpt.params;
  const std::size_t d = params.config().num_features;
  if (!(params.config() == config.model)) {
    throw ConfigError("explain: checkpoint model shape differs from the configured model");
  }

  // Only the explained client's own data is read.
  Dataset local;
  if (config.client_csvs.empty()) {
    local = generate_synthetic(config.synthetic_spec()).clients.at(config.explain_client);
  } else {
    local = load_csv(config.client_csvs.at(config.explain_client), CsvSchema{d, {}});
  }
  if (local.num_features() != d) throw DimensionError("explain: data and checkpoint feature counts differ");

  const fs::path dir = config.run_dir();
  ensure_dir(dir);
  ExplainCommandResult out;
  for (int label : {0, 1}) {
    Rng rng = make_rng(config.seed, "explain", static_cast<std::uint64_t>(label));
    const AttributionReport report =
        class_attribution_summary(params, local, label, config.explain_sample_cap, config.ig, rng);
    const fs::path ap = dir / ("attribution_class" + std::to_string(label) + ".json");
    write_text(ap, to_json(report) + "\n");
    out.attribution_files.push_back(ap);

    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < local.size(); ++i)
      if (local.labels()[i] == label) idx.push_back(i);
    const Dataset cls = local.subset(idx);
    const AttentionMatrix att = average_attention(params, cls.features(), false);
    const fs::path tp = dir / ("attention_class" + std::to_string(label) + ".json");
    write_text(tp, to_json(att, local.feature_names(), label, cls.size()) + "\n");
    out.attention_files.push_back(tp);
  }
  json m = manifest_base(config, "explain");
  m["checkpoint"] = checkpoint.string();
  m["checkpoint_round"] = ckpt.round;
  m["explained_client"] = config.explain_client;
  m["outputs"] = {"attribution_class0.json", "attribution_class1.json", "attention_class0.json",
                  "attention_class1.json"};
  write_text(dir / "manifest.json", m.dump(2) + "\n");
  return out;
}

}  // namespace credfed
