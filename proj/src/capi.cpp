#include "riskdec.h"

#include <cstring>
#include <string>

#include "riskdec/analysis.hpp"
#include "riskdec/dataset.hpp"
#include "riskdec/decomposition.hpp"
#include "riskdec/error.hpp"
#include "riskdec/jsonio.hpp"
#include "riskdec/probe.hpp"
#include "riskdec/report.hpp"
#include "riskdec/repstats.hpp"
#include "riskdec/scaling.hpp"
#include "riskdec/synth.hpp"

using riskdec::Error;
using riskdec::FeatureDataset;
using riskdec::json;

struct riskdec_dataset {
  FeatureDataset ds;
};

struct riskdec_probe {
  riskdec::ProbeModel model;
};

namespace {

thread_local std::string g_last_error;

riskdec_status fail(const Error& e) {
  g_last_error = e.what();
  return static_cast<riskdec_status>(e.exit_code());
}

riskdec_status fail_other(const std::exception& e) {
  g_last_error = e.what();
  return RISKDEC_ERR_DATA;
}

template <typename Fn>
riskdec_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return RISKDEC_OK;
  } catch (const Error& e) {
    return fail(e);
  } catch (const std::exception& e) {
    return fail_other(e);
  }
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

json parse_options(const char* options_json) {
  if (options_json == nullptr || options_json[0] == '\0') return json::object();
  json j = json::parse(options_json, nullptr, false);
  if (j.is_discarded()) throw Error::usage("options are not valid JSON");
  if (!j.is_object()) throw Error::usage("options must be a JSON object");
  return j;
}

riskdec::TrainConfig config_from(const json& opts) {
  riskdec::TrainConfig cfg;
  cfg.grad_tol = opts.value("grad_tol", cfg.grad_tol);
  cfg.max_iter = opts.value("max_iter", cfg.max_iter);
  cfg.seed = opts.value("seed", cfg.seed);
  return cfg;
}

riskdec::LambdaPolicy policy_from(const json& opts) {
  riskdec::LambdaPolicy policy = riskdec::LambdaPolicy::tuned(opts.value("seed", std::uint64_t{0}));
  if (opts.contains("lambda")) {
    policy = riskdec::LambdaPolicy::fixed(opts.at("lambda").get<double>());
  }
  if (opts.contains("lambda_grid")) {
    policy.grid = opts.at("lambda_grid").get<std::vector<double>>();
    policy.mode = riskdec::LambdaPolicy::Mode::tuned;
  }
  policy.val_fraction = opts.value("val_fraction", policy.val_fraction);
  policy.seed = opts.value("seed", policy.seed);
  return policy;
}

const FeatureDataset& deref(const riskdec_dataset* ds, const char* what) {
  if (ds == nullptr) throw Error::usage(std::string(what) + ": null dataset handle");
  return ds->ds;
}

}  // namespace

extern "C" {

const char* riskdec_version(void) { return "1.0.0"; }

const char* riskdec_last_error(void) { return g_last_error.c_str(); }

void riskdec_string_free(char* s) { delete[] s; }

riskdec_status riskdec_dataset_load_fvec(const char* path, riskdec_dataset** out) {
  return guarded([&] {
    if (path == nullptr || out == nullptr) throw Error::usage("null argument");
    *out = new riskdec_dataset{riskdec::load_fvec(path)};
  });
}

riskdec_status riskdec_dataset_load_csv(const char* path, int has_header, riskdec_dataset** out) {
  return guarded([&] {
    if (path == nullptr || out == nullptr) throw Error::usage("null argument");
    *out = new riskdec_dataset{riskdec::load_csv(path, has_header != 0)};
  });
}

riskdec_status riskdec_dataset_save_fvec(const riskdec_dataset* ds, const char* path) {
  return guarded([&] {
    if (path == nullptr) throw Error::usage("null path");
    riskdec::save_fvec(deref(ds, "save"), path);
  });
}

riskdec_status riskdec_dataset_create(const double* features, const uint32_t* labels, uint32_t n,
                                      uint32_t d, uint32_t n_classes, const char* name,
                                      riskdec_dataset** out) {
  return guarded([&] {
    if (features == nullptr || labels == nullptr || out == nullptr)
      throw Error::usage("null argument");
    FeatureDataset ds;
    ds.name = name ? name : "dataset";
    ds.n_classes = n_classes;
    ds.features.resize(n, d);
    for (uint32_t i = 0; i < n; ++i)
      for (uint32_t j = 0; j < d; ++j)
        ds.features(i, j) = features[static_cast<std::size_t>(i) * d + j];
    ds.labels.assign(labels, labels + n);
    ds.validate();
    *out = new riskdec_dataset{std::move(ds)};
  });
}

void riskdec_dataset_free(riskdec_dataset* ds) { delete ds; }

uint32_t riskdec_dataset_rows(const riskdec_dataset* ds) {
  return ds ? static_cast<uint32_t>(ds->ds.rows()) : 0;
}

uint32_t riskdec_dataset_dim(const riskdec_dataset* ds) {
  return ds ? static_cast<uint32_t>(ds->ds.dim()) : 0;
}

uint32_t riskdec_dataset_classes(const riskdec_dataset* ds) {
  return ds ? ds->ds.n_classes : 0;
}

riskdec_status riskdec_dataset_copy_features(const riskdec_dataset* ds, double* out) {
  return guarded([&] {
    const FeatureDataset& d = deref(ds, "copy_features");
    if (out == nullptr) throw Error::usage("null output buffer");
    for (std::int64_t i = 0; i < d.rows(); ++i)
      for (std::int64_t j = 0; j < d.dim(); ++j)
        out[static_cast<std::size_t>(i) * static_cast<std::size_t>(d.dim()) +
            static_cast<std::size_t>(j)] = d.features(i, j);
  });
}

riskdec_status riskdec_dataset_copy_labels(const riskdec_dataset* ds, uint32_t* out) {
  return guarded([&] {
    const FeatureDataset& d = deref(ds, "copy_labels");
    if (out == nullptr) throw Error::usage("null output buffer");
    std::memcpy(out, d.labels.data(), d.labels.size() * sizeof(uint32_t));
  });
}

riskdec_status riskdec_probe_train(const riskdec_dataset* train, double lambda,
                                   const char* config_json, riskdec_probe** out) {
  return guarded([&] {
    if (out == nullptr) throw Error::usage("null output handle");
    const json opts = parse_options(config_json);
    *out = new riskdec_probe{riskdec::train_probe(deref(train, "train"), lambda, config_from(opts))};
  });
}

void riskdec_probe_free(riskdec_probe* probe) { delete probe; }

riskdec_status riskdec_probe_predict(const riskdec_probe* probe, const double* features,
                                     uint32_t n, uint32_t d, uint32_t* labels_out) {
  return guarded([&] {
    if (probe == nullptr || features == nullptr || labels_out == nullptr)
      throw Error::usage("null argument");
    Eigen::MatrixXd x(n, d);
    for (uint32_t i = 0; i < n; ++i)
      for (uint32_t j = 0; j < d; ++j) x(i, j) = features[static_cast<std::size_t>(i) * d + j];
    auto preds = riskdec::predict(probe->model, x);
    std::memcpy(labels_out, preds.data(), preds.size() * sizeof(uint32_t));
  });
}

riskdec_status riskdec_probe_risk(const riskdec_probe* probe, const riskdec_dataset* eval_ds,
                                  double* risk_out) {
  return guarded([&] {
    if (probe == nullptr || risk_out == nullptr) throw Error::usage("null argument");
    *risk_out = riskdec::zero_one_risk(probe->model, deref(eval_ds, "risk"));
  });
}

riskdec_status riskdec_probe_to_json(const riskdec_probe* probe, char** json_out) {
  return guarded([&] {
    if (probe == nullptr || json_out == nullptr) throw Error::usage("null argument");
    *json_out = dup_string(riskdec::probe_to_json(probe->model).dump());
  });
}

riskdec_status riskdec_decompose(const riskdec_dataset* train, const riskdec_dataset* test,
                                 const riskdec_dataset* raw_train, const char* options_json,
                                 char** result_json) {
  return guarded([&] {
    if (result_json == nullptr) throw Error::usage("null output");
    const json opts = parse_options(options_json);
    const auto& train_ds = deref(train, "decompose");
    const auto& test_ds = deref(test, "decompose");

    const std::uint64_t seed = opts.value("seed", std::uint64_t{0});
    const std::int64_t sub_size = opts.value("sub_size", std::int64_t{0});
    riskdec::SplitPlan plan = riskdec::make_split_plan(train_ds, test_ds, sub_size, seed);

    riskdec::HrFFSource source;
    if (opts.contains("ref_risk") && raw_train != nullptr)
      throw Error::usage("give exactly one reference-risk source, not both");
    if (opts.contains("ref_risk")) {
      source = riskdec::HrFFSource::external(opts.at("ref_risk").get<double>());
    } else if (raw_train != nullptr) {
      source = riskdec::HrFFSource::from_raw(raw_train->ds);
    } else {
      throw Error::usage("reference risk source missing: pass ref_risk or a raw training dataset");
    }

    const double bayes = opts.value("bayes_risk", 0.0);
    auto [est, comps] = riskdec::estimate_components(train_ds, test_ds, plan, source,
                                                     policy_from(opts), config_from(opts), bayes);
    *result_json = dup_string(riskdec::components_to_json(est, comps).dump());
  });
}

riskdec_status riskdec_alternative(const riskdec_dataset* train, const riskdec_dataset* test,
                                   const char* options_json, char** result_json) {
  return guarded([&] {
    if (result_json == nullptr) throw Error::usage("null output");
    const json opts = parse_options(options_json);
    const auto& train_ds = deref(train, "alternative");
    const auto& test_ds = deref(test, "alternative");
    const std::uint64_t seed = opts.value("seed", std::uint64_t{0});
    riskdec::SplitPlan plan =
        riskdec::make_split_plan(train_ds, test_ds, opts.value("sub_size", std::int64_t{0}), seed);
    auto alt = riskdec::alternative_components(train_ds, test_ds, plan, policy_from(opts),
                                               config_from(opts));
    *result_json = dup_string(riskdec::alt_components_to_json(alt).dump());
  });
}

riskdec_status riskdec_fewshot(const riskdec_dataset* train, const riskdec_dataset* test,
                               const char* options_json, char** result_json) {
  return guarded([&] {
    if (result_json == nullptr) throw Error::usage("null output");
    const json opts = parse_options(options_json);
    const auto& train_ds = deref(train, "fewshot");
    const auto& test_ds = deref(test, "fewshot");

    std::vector<riskdec::SettingSpec> settings;
    if (opts.contains("settings")) {
      for (const auto& s : opts.at("settings"))
        settings.push_back(riskdec::parse_setting(s.get<std::string>()));
    } else {
      settings = riskdec::default_settings();
    }
    std::vector<std::uint64_t> seeds;
    if (opts.contains("seeds")) {
      seeds = opts.at("seeds").get<std::vector<std::uint64_t>>();
    } else {
      seeds = {opts.value("seed", std::uint64_t{0})};
    }
    auto results = riskdec::fewshot_suite(train_ds, test_ds, settings, seeds, policy_from(opts),
                                          config_from(opts));
    *result_json = dup_string(riskdec::setting_results_to_json(results, train_ds.rows()).dump());
  });
}

riskdec_status riskdec_repstats(const riskdec_dataset* z, const riskdec_dataset* pairs,
                                char** result_json) {
  return guarded([&] {
    if (result_json == nullptr) throw Error::usage("null output");
    const auto& z_ds = deref(z, "repstats");
    riskdec::RepStats stats;
    stats.effective_dim = riskdec::effective_dim(z_ds.features, 1e-4, 0.01, &stats.warnings);
    stats.uniformity = riskdec::uniformity(z_ds.features);
    double align = 0.0;
    const double* align_ptr = nullptr;
    if (pairs != nullptr) {
      align = riskdec::alignment(z_ds.features, pairs->ds.features);
      align_ptr = &align;
    }
    *result_json = dup_string(riskdec::repstats_to_json(stats, align_ptr).dump());
  });
}

riskdec_status riskdec_stats_regression(const char* rows_json, char** result_json) {
  return guarded([&] {
    if (rows_json == nullptr || result_json == nullptr) throw Error::usage("null argument");
    json j = json::parse(rows_json, nullptr, false);
    if (j.is_discarded() || !j.is_array()) throw Error::usage("rows must be a JSON array");
    std::vector<riskdec::StatsRow> rows;
    for (const auto& item : j) {
      riskdec::StatsRow r;
      r.effective_dim = item.at("effective_dim").get<double>();
      r.uniformity = item.at("uniformity").get<double>();
      r.alignment = item.at("alignment").get<double>();
      r.agg_risk = item.at("agg_risk").get<double>();
      rows.push_back(r);
    }
    *result_json = dup_string(riskdec::ols_to_json(riskdec::stats_regression(rows)).dump());
  });
}

riskdec_status riskdec_scaling_predict(double approx, double encoder_gen, double usability,
                                       double probe_gen, double n_decomposition, double n_probe,
                                       double alpha, double w, double* risk_out) {
  return guarded([&] {
    if (risk_out == nullptr) throw Error::usage("null output");
    *risk_out = riskdec::predict_risk(approx, encoder_gen, usability, probe_gen, n_decomposition,
                                      n_probe, alpha, w);
  });
}

riskdec_status riskdec_scaling_fit(const char* observations_json, const char* options_json,
                                   char** result_json) {
  return guarded([&] {
    if (observations_json == nullptr || result_json == nullptr)
      throw Error::usage("null argument");
    json obs_j = json::parse(observations_json, nullptr, false);
    if (obs_j.is_discarded()) throw Error::data("observations are not valid JSON");
    auto obs = riskdec::observations_from_json(obs_j);
    const json opts = parse_options(options_json);
    const auto holdout = riskdec::parse_holdout(opts.value("holdout", std::string{"none"}));
    const std::string law = opts.value("law", std::string{"decomposition"});

    auto [train_idx, test_idx] = riskdec::split_holdout(obs, holdout);
    std::vector<riskdec::ScalingObservation> train_obs, test_obs;
    for (auto i : train_idx) train_obs.push_back(obs[i]);
    for (auto i : test_idx) test_obs.push_back(obs[i]);

    json out;
    if (law == "decomposition") {
      auto fit = riskdec::fit_decomposition_law(train_obs);
      if (!test_obs.empty()) {
        std::vector<double> pred, actual;
        for (const auto& o : test_obs) {
          pred.push_back(riskdec::predict_risk(o, fit.alpha, fit.w));
          actual.push_back(o.observed_risk);
        }
        fit.r2_test = riskdec::r_squared(pred, actual);
      }
      out = riskdec::scaling_fit_to_json(fit);
      out["law"] = "decomposition";
    } else if (law == "standard") {
      auto fit = riskdec::fit_standard_law(train_obs);
      if (!test_obs.empty()) {
        std::vector<double> pred, actual;
        for (const auto& o : test_obs) {
          const std::string g = o.group.value_or("all");
          const riskdec::StandardLawGroup* grp = nullptr;
          for (const auto& cand : fit.groups) {
            if (cand.group == g) grp = &cand;
          }
          if (grp == nullptr)
            throw Error::data("held-out group '" + g + "' was never fitted; the law cannot predict it");
          double v = grp->intercept + grp->coef * std::pow(o.n_probe, -grp->exponent);
          if (!fit.beta_indeterminate && o.probe_params)
            v += fit.k * std::pow(*o.probe_params, -fit.beta);
          pred.push_back(v);
          actual.push_back(o.observed_risk);
        }
        fit.r2_test = riskdec::r_squared(pred, actual);
      }
      out = riskdec::standard_fit_to_json(fit);
      out["law"] = "standard";
    } else {
      throw Error::usage("unknown law '" + law + "' (expected decomposition or standard)");
    }
    out["n_train_obs"] = train_obs.size();
    out["n_test_obs"] = test_obs.size();
    *result_json = dup_string(out.dump());
  });
}

riskdec_status riskdec_synth_gen(const char* task_json, riskdec_dataset** pretrain,
                                 riskdec_dataset** train, riskdec_dataset** test) {
  return guarded([&] {
    if (pretrain == nullptr || train == nullptr || test == nullptr)
      throw Error::usage("null output handle");
    const json j = parse_options(task_json);
    auto data = riskdec::gen_gaussian_task(riskdec::task_from_json(j));
    *pretrain = new riskdec_dataset{std::move(data.pretrain)};
    *train = new riskdec_dataset{std::move(data.train)};
    *test = new riskdec_dataset{std::move(data.test)};
  });
}

riskdec_status riskdec_synth_bayes_risk(const char* task_json, double* risk_out,
                                        double* std_error_out) {
  return guarded([&] {
    if (risk_out == nullptr) throw Error::usage("null output");
    const json j = parse_options(task_json);
    auto bayes = riskdec::bayes_risk_oracle(riskdec::task_from_json(j));
    *risk_out = bayes.risk;
    if (std_error_out) *std_error_out = bayes.std_error;
  });
}

riskdec_status riskdec_synth_apply_encoder(const char* encoder_json,
                                           const riskdec_dataset* pretrain,
                                           const riskdec_dataset* train, const riskdec_dataset* ds,
                                           riskdec_dataset** out) {
  return guarded([&] {
    if (encoder_json == nullptr || out == nullptr) throw Error::usage("null argument");
    json j = json::parse(encoder_json, nullptr, false);
    if (j.is_discarded()) throw Error::usage("encoder spec is not valid JSON");
    auto spec = riskdec::EncoderSpec::parse(j);
    *out = new riskdec_dataset{riskdec::apply_encoder(spec, deref(pretrain, "apply_encoder"),
                                                      deref(train, "apply_encoder"),
                                                      deref(ds, "apply_encoder"))};
  });
}

riskdec_status riskdec_synth_sweep(const char* task_json, const char* encoders_json,
                                   const char* options_json, char** result_json) {
  return guarded([&] {
    if (encoders_json == nullptr || result_json == nullptr) throw Error::usage("null argument");
    const json task_j = parse_options(task_json);
    json encoders = json::parse(encoders_json, nullptr, false);
    if (encoders.is_discarded() || !encoders.is_array())
      throw Error::usage("encoders must be a JSON array");
    std::vector<riskdec::EncoderSpec> specs;
    for (const auto& e : encoders) specs.push_back(riskdec::EncoderSpec::parse(e));
    const json opts = parse_options(options_json);
    auto rows = riskdec::tradeoff_sweep(riskdec::task_from_json(task_j), specs, policy_from(opts),
                                        config_from(opts));
    *result_json = dup_string(riskdec::sweep_to_json(rows).dump());
  });
}

riskdec_status riskdec_analyze(const char* table_csv_path, const char* options_json,
                               char** result_json) {
  return guarded([&] {
    if (table_csv_path == nullptr || result_json == nullptr) throw Error::usage("null argument");
    const json opts = parse_options(options_json);
    const std::string method = opts.value("method", std::string{"gla"});
    if (method != "ca" && method != "gla")
      throw Error::usage("unknown method '" + method + "' (expected ca or gla)");
    if (!opts.contains("hparam") || !opts.contains("metric"))
      throw Error::usage("analyze needs hparam and metric");
    const std::string hparam = opts.at("hparam").get<std::string>();
    const std::string metric = opts.at("metric").get<std::string>();
    const bool log_h = opts.value("log_hparam", false);
    const bool log_m = opts.value("log_metric", false);

    auto table = riskdec::load_model_table(table_csv_path);
    riskdec::OlsFit fit;
    if (method == "ca") {
      fit = riskdec::controlled_fit(table, hparam, metric, log_h, log_m);
    } else {
      std::vector<std::string> controls;
      if (opts.contains("controls")) controls = opts.at("controls").get<std::vector<std::string>>();
      fit = riskdec::global_fit(table, hparam, controls, metric, log_h, log_m);
    }
    json out = riskdec::ols_to_json(fit);
    out["method"] = method;
    out["hparam"] = hparam;
    out["metric"] = metric;
    if (opts.contains("controls")) out["controls"] = opts.at("controls");
    *result_json = dup_string(out.dump());
  });
}

riskdec_status riskdec_radar_normalize(const char* table_json, char** result_json) {
  return guarded([&] {
    if (table_json == nullptr || result_json == nullptr) throw Error::usage("null argument");
    json j = json::parse(table_json, nullptr, false);
    if (j.is_discarded()) throw Error::usage("table is not valid JSON");
    auto table = riskdec::metric_table_from_json(j);
    *result_json = dup_string(riskdec::normalized_table_to_json(riskdec::radar_normalize(table)).dump());
  });
}

riskdec_status riskdec_store_put(const char* store_dir, const char* command,
                                 const char* encoder_id, const char* config_json,
                                 const char* result_json, int force, int* was_cached,
                                 char** path_out) {
  return guarded([&] {
    if (store_dir == nullptr || command == nullptr || encoder_id == nullptr ||
        config_json == nullptr || result_json == nullptr)
      throw Error::usage("null argument");
    json config = json::parse(config_json, nullptr, false);
    json result = json::parse(result_json, nullptr, false);
    if (config.is_discarded() || result.is_discarded())
      throw Error::usage("config/result must be valid JSON");
    riskdec::ResultStore store{store_dir};
    auto put = store.put(command, encoder_id, config, result, force != 0);
    if (was_cached) *was_cached = put.was_cached ? 1 : 0;
    if (path_out) *path_out = dup_string(put.path.string());
  });
}

riskdec_status riskdec_report(const char* store_dir, const char* out_dir, char** summary_json) {
  return guarded([&] {
    if (store_dir == nullptr || out_dir == nullptr) throw Error::usage("null argument");
    riskdec::ResultStore store{store_dir};
    auto paths = riskdec::write_report_bundle(store, out_dir);
    if (summary_json) {
      json j;
      j["components_csv"] = paths.components_csv.string();
      j["radar_json"] = paths.radar_json.string();
      j["scaling_obs_json"] = paths.scaling_obs_json.string();
      j["frontier_csv"] = paths.frontier_csv.string();
      *summary_json = dup_string(j.dump());
    }
  });
}

}  // extern "C"
