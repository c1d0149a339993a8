// Command-line front end. All computation goes through the shared-library C
// interface; this file only parses arguments, shuttles files, and formats
// output.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "riskdec.h"

namespace {

using json = nlohmann::json;

struct DatasetHandle {
  riskdec_dataset* ptr = nullptr;
  DatasetHandle() = default;
  explicit DatasetHandle(riskdec_dataset* p) : ptr(p) {}
  DatasetHandle(const DatasetHandle&) = delete;
  DatasetHandle& operator=(const DatasetHandle&) = delete;
  DatasetHandle(DatasetHandle&& other) noexcept : ptr(other.ptr) { other.ptr = nullptr; }
  DatasetHandle& operator=(DatasetHandle&& other) noexcept {
    if (this != &other) {
      riskdec_dataset_free(ptr);
      ptr = other.ptr;
      other.ptr = nullptr;
    }
    return *this;
  }
  ~DatasetHandle() { riskdec_dataset_free(ptr); }
};

struct OwnedString {
  char* ptr = nullptr;
  ~OwnedString() { riskdec_string_free(ptr); }
  std::string str() const { return ptr ? std::string(ptr) : std::string(); }
};

[[noreturn]] void die(riskdec_status status) {
  std::cerr << "error: " << riskdec_last_error() << "\n";
  std::exit(static_cast<int>(status));
}

void check(riskdec_status status) {
  if (status != RISKDEC_OK) die(status);
}

DatasetHandle load_dataset(const std::string& path) {
  riskdec_dataset* ds = nullptr;
  if (path.size() > 4 && path.compare(path.size() - 4, 4, ".csv") == 0) {
    check(riskdec_dataset_load_csv(path.c_str(), 1, &ds));
  } else {
    check(riskdec_dataset_load_fvec(path.c_str(), &ds));
  }
  return DatasetHandle{ds};
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    std::cerr << "error: cannot open " << path << "\n";
    std::exit(3);
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    std::cerr << "error: cannot write " << path << "\n";
    std::exit(3);
  }
  out << text;
}

// Global flags shared by every subcommand.
struct CommonOpts {
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string out_path;
  std::string store_dir;
  std::string config_path;
  bool force = false;

  void attach(CLI::App* cmd) {
    cmd->add_flag_callback("--force", [this] { force = true; },
                           "Recompute even when the result store already holds this config");
    cmd->add_option("--seed", seed, "Base seed for sampling and tuning")
        ->each([this](const std::string&) { seed_given = true; });
    cmd->add_option("--out", out_path, "Write the primary result to this file");
    cmd->add_option("--store", store_dir, "Result store directory (or RISKDEC_STORE)");
    cmd->add_option("--config", config_path, "JSON config file; flags take precedence");
  }

  std::string resolved_store() const {
    if (!store_dir.empty()) return store_dir;
    const char* env = std::getenv("RISKDEC_STORE");
    return env ? env : "";
  }

  // Precedence: flags > config file > defaults. The resolved object is echoed
  // into result documents so stored outputs are self-describing.
  json resolve(const json& defaults) const {
    json resolved = defaults;
    if (!config_path.empty()) {
      json file = json::parse(read_file(config_path), nullptr, false);
      if (file.is_discarded() || !file.is_object()) {
        std::cerr << "error: config file is not a JSON object: " << config_path << "\n";
        std::exit(2);
      }
      for (auto& [key, value] : file.items()) resolved[key] = value;
    }
    if (seed_given || !resolved.contains("seed")) resolved["seed"] = seed;
    return resolved;
  }
};

void emit(const CommonOpts& common, const std::string& text) {
  if (!common.out_path.empty()) {
    write_file(common.out_path, text + "\n");
  } else {
    std::cout << text << "\n";
  }
}

void store_result(const CommonOpts& common, const std::string& command,
                  const std::string& encoder_id, const json& resolved, const json& result) {
  const std::string store = common.resolved_store();
  if (store.empty()) return;
  int was_cached = 0;
  OwnedString path;
  check(riskdec_store_put(store.c_str(), command.c_str(), encoder_id.c_str(),
                          resolved.dump().c_str(), result.dump().c_str(),
                          common.force ? 1 : 0, &was_cached, &path.ptr));
  std::cerr << (was_cached ? "store: cached " : "store: wrote ") << path.str() << "\n";
}

// When the store already holds this resolved config, reuse the stored result.
std::optional<json> store_lookup(const CommonOpts& common, const std::string& command,
                                 const std::string& encoder_id, const json& resolved) {
  const std::string store = common.resolved_store();
  if (store.empty() || common.force) return std::nullopt;
  // The store key is (command, encoder, config-hash); reproduce the put path
  // by asking the library to write only if missing, with a sentinel result.
  // Cheaper: scan for the exact document.
  namespace fs = std::filesystem;
  if (!fs::exists(store)) return std::nullopt;
  for (const auto& entry : fs::directory_iterator(store)) {
    if (entry.path().extension() != ".json") continue;
    json doc = json::parse(read_file(entry.path().string()), nullptr, false);
    if (doc.is_discarded()) continue;
    if (doc.value("command", "") == command && doc.value("encoder", "") == encoder_id &&
        doc.value("config", json::object()) == resolved)
      return doc.value("result", json::object());
  }
  return std::nullopt;
}

int cmd_decompose(const CommonOpts& common, const std::string& train_path,
                  const std::string& test_path, const std::string& raw_train_path,
                  std::optional<double> ref_risk, const std::string& name, const json& extra) {
  if ((ref_risk.has_value()) == (!raw_train_path.empty())) {
    std::cerr << "error: give exactly one of --ref-risk and --raw-train\n";
    return 2;
  }
  json defaults = extra;
  if (ref_risk) defaults["ref_risk"] = *ref_risk;
  const json resolved = common.resolve(defaults);
  const std::string encoder_id = !name.empty() ? name : std::filesystem::path(train_path).stem().string();

  json result;
  if (auto cached = store_lookup(common, "decompose", encoder_id, resolved)) {
    std::cerr << "store: cache hit for decompose/" << encoder_id << "\n";
    result = *cached;
  } else {
    DatasetHandle train = load_dataset(train_path);
    DatasetHandle test = load_dataset(test_path);
    DatasetHandle raw;
    if (!raw_train_path.empty()) raw = load_dataset(raw_train_path);
    OwnedString out;
    check(riskdec_decompose(train.ptr, test.ptr, raw.ptr, resolved.dump().c_str(), &out.ptr));
    result = json::parse(out.str());
    store_result(common, "decompose", encoder_id, resolved, result);
  }

  emit(common, result.dump(2));
  std::printf("%-14s %12.6f\n", "approx", result.at("approx").get<double>());
  std::printf("%-14s %12.6f\n", "usability", result.at("usability").get<double>());
  std::printf("%-14s %12.6f\n", "probe_gen", result.at("probe_gen").get<double>());
  std::printf("%-14s %12.6f\n", "encoder_gen", result.at("encoder_gen").get<double>());
  return 0;
}

int cmd_fewshot(const CommonOpts& common, const std::string& train_path,
                const std::string& test_path, const std::vector<std::string>& settings,
                int n_seeds, const std::string& name, const std::string& csv_path) {
  json defaults;
  if (!settings.empty()) defaults["settings"] = settings;
  const json resolved_base = common.resolve(defaults);
  json resolved = resolved_base;
  if (n_seeds < 1) {
    std::cerr << "error: --seeds must be >= 1\n";
    return 2;
  }
  if (!resolved.contains("seeds")) {
    std::vector<std::uint64_t> seeds;
    const std::uint64_t base = resolved.value("seed", std::uint64_t{0});
    for (int i = 0; i < n_seeds; ++i) seeds.push_back(base + static_cast<std::uint64_t>(i));
    resolved["seeds"] = seeds;
  }
  const std::string encoder_id = !name.empty() ? name : std::filesystem::path(train_path).stem().string();

  json result;
  if (auto cached = store_lookup(common, "fewshot", encoder_id, resolved)) {
    std::cerr << "store: cache hit for fewshot/" << encoder_id << "\n";
    result = *cached;
  } else {
    DatasetHandle train = load_dataset(train_path);
    DatasetHandle test = load_dataset(test_path);
    OwnedString out;
    check(riskdec_fewshot(train.ptr, test.ptr, resolved.dump().c_str(), &out.ptr));
    result = json::parse(out.str());
    store_result(common, "fewshot", encoder_id, resolved, result);
  }

  std::ostringstream csv;
  csv << "setting,mean_risk,std_risk,seeds,feasible,accuracy_mean\n";
  for (const auto& row : result.at("settings")) {
    csv << row.at("setting").get<std::string>() << ",";
    if (row.value("feasible", false)) {
      csv << row.at("mean_risk").get<double>() << "," << row.at("std_risk").get<double>() << ","
          << row.at("seeds").get<std::int64_t>() << ",yes,"
          << row.at("mean_accuracy").get<double>();
    } else {
      csv << ",,"
          << "0,no,";
    }
    csv << "\n";
  }
  if (!csv_path.empty()) write_file(csv_path, csv.str());
  emit(common, result.dump(2));
  std::cout << csv.str();
  return 0;
}

int cmd_stats(const CommonOpts& common, const std::string& in_path, const std::string& pairs_path) {
  DatasetHandle z = load_dataset(in_path);
  DatasetHandle pairs;
  if (!pairs_path.empty()) pairs = load_dataset(pairs_path);
  OwnedString out;
  check(riskdec_repstats(z.ptr, pairs.ptr, &out.ptr));
  emit(common, json::parse(out.str()).dump(2));
  return 0;
}

int cmd_scaling_fit(const CommonOpts& common, const std::string& obs_path,
                    const std::string& holdout, const std::string& law) {
  json resolved = common.resolve({{"holdout", holdout}, {"law", law}});
  OwnedString out;
  check(riskdec_scaling_fit(read_file(obs_path).c_str(), resolved.dump().c_str(), &out.ptr));
  emit(common, json::parse(out.str()).dump(2));
  return 0;
}

int cmd_synth_gen(const CommonOpts& common, const std::string& out_dir) {
  const json resolved = common.resolve(json::object());
  riskdec_dataset *pre = nullptr, *tr = nullptr, *te = nullptr;
  check(riskdec_synth_gen(resolved.dump().c_str(), &pre, &tr, &te));
  DatasetHandle h_pre{pre}, h_tr{tr}, h_te{te};
  std::filesystem::create_directories(out_dir);
  const std::string base = out_dir + "/raw_";
  check(riskdec_dataset_save_fvec(pre, (base + "pretrain.fvec").c_str()));
  check(riskdec_dataset_save_fvec(tr, (base + "train.fvec").c_str()));
  check(riskdec_dataset_save_fvec(te, (base + "test.fvec").c_str()));
  double bayes = 0.0, se = 0.0;
  check(riskdec_synth_bayes_risk(resolved.dump().c_str(), &bayes, &se));
  json summary = {{"out_dir", out_dir},
                  {"bayes_risk", bayes},
                  {"bayes_std_error", se},
                  {"config", resolved}};
  emit(common, summary.dump(2));
  return 0;
}

int cmd_synth_sweep(const CommonOpts& common, const std::string& encoders_path,
                    const std::string& csv_path) {
  const json resolved = common.resolve(json::object());
  OwnedString out;
  check(riskdec_synth_sweep(resolved.dump().c_str(), read_file(encoders_path).c_str(),
                            resolved.dump().c_str(), &out.ptr));
  json rows = json::parse(out.str());

  std::ostringstream csv;
  csv << "encoder,usability,probe_gen,approx,encoder_gen,total\n";
  for (const auto& row : rows) {
    const auto& r = row.at("results");
    csv << row.at("encoder").at("label").get<std::string>() << ","
        << r.at("usability").get<double>() << "," << r.at("probe_gen").get<double>() << ","
        << r.at("approx").get<double>() << "," << r.at("encoder_gen").get<double>() << ","
        << r.at("total").get<double>() << "\n";
    store_result(common, "decompose", row.at("encoder").at("label").get<std::string>(), resolved,
                 r);
  }
  if (!csv_path.empty()) write_file(csv_path, csv.str());
  emit(common, rows.dump(2));
  std::cout << csv.str();
  return 0;
}

int cmd_analyze(const CommonOpts& common, const std::string& table_path, const std::string& method,
                const std::string& hparam, const std::string& metric,
                const std::string& controls_csv, bool log_hparam, bool log_metric) {
  json opts = {{"method", method}, {"hparam", hparam}, {"metric", metric},
               {"log_hparam", log_hparam}, {"log_metric", log_metric}};
  if (!controls_csv.empty()) {
    std::vector<std::string> controls;
    std::stringstream ss(controls_csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) controls.push_back(item);
    }
    opts["controls"] = controls;
  }
  const json resolved = common.resolve(opts);
  OwnedString out;
  check(riskdec_analyze(table_path.c_str(), resolved.dump().c_str(), &out.ptr));
  emit(common, json::parse(out.str()).dump(2));
  return 0;
}

int cmd_report(const CommonOpts& common, const std::string& out_dir) {
  const std::string store = common.resolved_store();
  if (store.empty()) {
    std::cerr << "error: report needs --store or RISKDEC_STORE\n";
    return 2;
  }
  OwnedString out;
  check(riskdec_report(store.c_str(), out_dir.c_str(), &out.ptr));
  emit(common, json::parse(out.str()).dump(2));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Risk decomposition toolkit for featurized datasets"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  CommonOpts common;

  // decompose
  auto* decompose = app.add_subcommand("decompose", "Estimate the four risk components");
  std::string train_path, test_path, raw_train_path, name;
  std::optional<double> ref_risk;
  double bayes_risk = 0.0;
  std::int64_t sub_size = 0;
  decompose->add_option("--train", train_path, "Featurized training set (.fvec/.csv)")->required();
  decompose->add_option("--test", test_path, "Featurized test set")->required();
  decompose->add_option("--raw-train", raw_train_path,
                        "Raw (un-encoded) training set; fits the supervised reference internally");
  decompose->add_option("--ref-risk", ref_risk,
                        "Externally supplied reference training risk in [0,1]");
  decompose->add_option("--bayes-risk", bayes_risk, "Irreducible risk to subtract (default 0)");
  decompose->add_option("--sub-size", sub_size, "Carved subset size (default min(|test|,|train|/10))");
  decompose->add_option("--name", name, "Encoder id for the result store");
  common.attach(decompose);

  // fewshot
  auto* fewshot = app.add_subcommand("fewshot", "Probe risk across label-budget settings");
  std::vector<std::string> settings;
  int n_seeds = 1;
  std::string csv_path;
  fewshot->add_option("--train", train_path, "Featurized training set")->required();
  fewshot->add_option("--test", test_path, "Featurized test set")->required();
  fewshot->add_option("--settings", settings,
                      "Settings list (default: full 30-shot 1% 5-shot 3-shot)");
  fewshot->add_option("--seeds", n_seeds, "Number of seeds per setting (default 1)");
  fewshot->add_option("--csv", csv_path, "Also write the table as CSV here");
  fewshot->add_option("--name", name, "Encoder id for the result store");
  common.attach(fewshot);

  // stats
  auto* stats = app.add_subcommand("stats", "Representation statistics");
  std::string stats_in, stats_pairs;
  stats->add_option("--in", stats_in, "Representation matrix (.fvec/.csv)")->required();
  stats->add_option("--pairs", stats_pairs, "Paired representations for the alignment statistic");
  common.attach(stats);

  // scaling fit
  auto* scaling = app.add_subcommand("scaling", "Scaling-law fitting");
  auto* scaling_fit = scaling->add_subcommand("fit", "Fit a law to observations");
  std::string obs_path, holdout = "none", law = "decomposition";
  scaling_fit->add_option("--obs", obs_path, "Observations JSON file")->required();
  scaling_fit->add_option("--holdout", holdout, "none | iid | group:<key>");
  scaling_fit->add_option("--law", law, "decomposition | standard");
  common.attach(scaling_fit);

  // synth
  auto* synth = app.add_subcommand("synth", "Synthetic task zoo");
  auto* synth_gen = synth->add_subcommand("gen", "Generate raw pretrain/train/test splits");
  std::string out_dir = "synth_out";
  synth_gen->add_option("--out-dir", out_dir, "Output directory for raw_*.fvec");
  common.attach(synth_gen);
  auto* synth_sweep = synth->add_subcommand("sweep", "Decompose across an encoder list");
  std::string encoders_path, sweep_csv;
  synth_sweep->add_option("--encoders", encoders_path, "Encoder spec JSON array")->required();
  synth_sweep->add_option("--csv", sweep_csv, "Write the frontier table as CSV here");
  common.attach(synth_sweep);

  // analyze
  auto* analyze = app.add_subcommand("analyze", "Design-choice regressions");
  std::string table_path, method = "gla", hparam, metric, controls_csv;
  bool log_hparam = false, log_metric = false;
  analyze->add_option("--table", table_path, "Model table CSV")->required();
  analyze->add_option("--method", method, "ca | gla");
  analyze->add_option("--hparam", hparam, "Design-choice column")->required();
  analyze->add_option("--metric", metric, "Metric column")->required();
  analyze->add_option("--controls", controls_csv, "Comma-separated control columns (gla)");
  analyze->add_flag("--log-hparam", log_hparam, "Log-transform the design choice");
  analyze->add_flag("--log-metric", log_metric, "Log-transform the metric");
  common.attach(analyze);

  // report
  auto* report = app.add_subcommand("report", "Emit the report bundle from the result store");
  std::string report_dir = "report_out";
  report->add_option("--out-dir", report_dir, "Directory for the bundle");
  common.attach(report);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (decompose->parsed())
      return cmd_decompose(common, train_path, test_path, raw_train_path, ref_risk, name,
                           {{"bayes_risk", bayes_risk}, {"sub_size", sub_size}});
    if (fewshot->parsed())
      return cmd_fewshot(common, train_path, test_path, settings, n_seeds, name, csv_path);
    if (stats->parsed()) return cmd_stats(common, stats_in, stats_pairs);
    if (scaling->parsed() && scaling_fit->parsed())
      return cmd_scaling_fit(common, obs_path, holdout, law);
    if (synth->parsed() && synth_gen->parsed()) return cmd_synth_gen(common, out_dir);
    if (synth->parsed() && synth_sweep->parsed())
      return cmd_synth_sweep(common, encoders_path, sweep_csv);
    if (analyze->parsed())
      return cmd_analyze(common, table_path, method, hparam, metric, controls_csv, log_hparam,
                         log_metric);
    if (report->parsed()) return cmd_report(common, report_dir);
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  std::cerr << app.help();
  return 2;
}
