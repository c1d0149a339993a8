#include "riskdec/decomposition.hpp"

#include <algorithm>
#include <cmath>

#include "riskdec/error.hpp"
#include "riskdec/rng.hpp"

namespace riskdec {

RiskComponents decompose(const RiskEstimates& est, double bayes_risk) {
  for (double v : {est.hr_ff, est.hr_af, est.hr_as, est.hr_us}) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error::usage("risk estimates must lie in [0, 1]");
  }
  RiskComponents c;
  c.bayes_risk = bayes_risk;
  c.approx = est.hr_ff - bayes_risk;
  c.usability = est.hr_af - est.hr_ff;
  c.probe_gen = est.hr_as - est.hr_af;
  c.encoder_gen = est.hr_us - est.hr_as;
  c.total = est.hr_us;
  if (bayes_risk > est.hr_ff) c.flags.push_back("bayes_risk_exceeds_hr_ff");
  if (c.usability < 0) c.flags.push_back("negative_usability");
  if (c.probe_gen < 0) c.flags.push_back("negative_probe_gen");
  if (c.encoder_gen < 0) c.flags.push_back("negative_encoder_gen");
  return c;
}

double risk(const FeatureDataset& train, const FeatureDataset& eval, double lambda,
            const TrainConfig& cfg) {
  if (train.dim() != eval.dim())
    throw Error::usage("risk: train dimension " + std::to_string(train.dim()) +
                       " != eval dimension " + std::to_string(eval.dim()));
  ProbeModel model = train_probe(train, lambda, cfg);
  return zero_one_risk(model, eval);
}

namespace {

// Resolves the penalty for a train partition by holdout tuning, then refits
// the winner on the whole partition.
ProbeModel fit_tuned_holdout(const FeatureDataset& train_part, const LambdaPolicy& policy,
                             const TrainConfig& cfg, double* lambda_out) {
  if (policy.mode == LambdaPolicy::Mode::fixed) {
    if (lambda_out) *lambda_out = policy.fixed_lambda;
    return train_probe(train_part, policy.fixed_lambda, cfg);
  }
  auto [held, retained] = stratified_holdout(train_part, policy.val_fraction,
                                             derive_seed(policy.seed, "tune-holdout"));
  if (held.empty() || retained.empty()) {
    // Nothing to hold out (e.g. every class is a singleton): fall back to the
    // middle of the grid.
    const double lambda = policy.grid[policy.grid.size() / 2];
    if (lambda_out) *lambda_out = lambda;
    return train_probe(train_part, lambda, cfg);
  }
  FeatureDataset fit_part = take_rows(train_part, retained, train_part.name + "/tune-train");
  FeatureDataset val_part = take_rows(train_part, held, train_part.name + "/tune-val");
  TuneResult tuned = tune_lambda(fit_part, val_part, policy.grid, cfg);
  if (lambda_out) *lambda_out = tuned.best_lambda;
  return train_probe(train_part, tuned.best_lambda, cfg);
}

// Training-error estimates score candidates on their own training slice, so
// the selection mirrors evaluation-on-train.
ProbeModel fit_tuned_train_error(const FeatureDataset& ds, const LambdaPolicy& policy,
                                 const TrainConfig& cfg, double* lambda_out) {
  if (policy.mode == LambdaPolicy::Mode::fixed) {
    if (lambda_out) *lambda_out = policy.fixed_lambda;
    return train_probe(ds, policy.fixed_lambda, cfg);
  }
  auto [held, retained] = stratified_holdout(ds, policy.val_fraction,
                                             derive_seed(policy.seed, "tune-train-error"));
  (void)retained;
  const FeatureDataset* slice = nullptr;
  FeatureDataset slice_storage;
  if (!held.empty()) {
    slice_storage = take_rows(ds, held, ds.name + "/tune-slice");
    slice = &slice_storage;
  } else {
    slice = &ds;
  }
  TuneResult tuned = tune_lambda(*slice, *slice, policy.grid, cfg);
  if (lambda_out) *lambda_out = tuned.best_lambda;
  return train_probe(ds, tuned.best_lambda, cfg);
}

}  // namespace

double tuned_holdout_risk(const FeatureDataset& train_part, const FeatureDataset& eval_part,
                          const LambdaPolicy& policy, const TrainConfig& cfg,
                          double* lambda_out) {
  ProbeModel model = fit_tuned_holdout(train_part, policy, cfg, lambda_out);
  return zero_one_risk(model, eval_part);
}

double tuned_train_error_risk(const FeatureDataset& ds, const LambdaPolicy& policy,
                              const TrainConfig& cfg, double* lambda_out) {
  ProbeModel model = fit_tuned_train_error(ds, policy, cfg, lambda_out);
  return zero_one_risk(model, ds);
}

double estimate_hrff_from_raw(const FeatureDataset& raw_train, const LambdaPolicy& policy,
                              const TrainConfig& cfg) {
  return tuned_train_error_risk(raw_train, policy, cfg);
}

std::pair<RiskEstimates, RiskComponents> estimate_components(
    const FeatureDataset& train_feats, const FeatureDataset& test_feats, const SplitPlan& plan,
    const HrFFSource& source, const LambdaPolicy& policy, const TrainConfig& cfg,
    double bayes_risk) {
  if (train_feats.dim() != test_feats.dim())
    throw Error::usage("train/test feature dimensions differ");
  if (!source.external_risk.has_value() && source.raw_train == nullptr)
    throw Error::usage("hr_FF source missing: supply an external reference risk or raw inputs");
  if (source.external_risk.has_value() && source.raw_train != nullptr)
    throw Error::usage("hr_FF source ambiguous: supply exactly one of reference risk and raw inputs");
  if (plan.sub_indices.empty() || plan.rest_indices.empty())
    throw Error::usage("split plan does not partition the training rows");

  FeatureDataset rest = take_rows(train_feats, plan.rest_indices, train_feats.name + "/rest");
  FeatureDataset sub = take_rows(train_feats, plan.sub_indices, train_feats.name + "/sub");

  RiskEstimates est;
  ProbeModel full_model = fit_tuned_holdout(train_feats, policy, cfg, nullptr);
  est.hr_us = zero_one_risk(full_model, test_feats);
  est.hr_as = tuned_holdout_risk(rest, sub, policy, cfg);
  est.hr_af = tuned_train_error_risk(train_feats, policy, cfg);
  if (source.external_risk.has_value()) {
    est.hr_ff = *source.external_risk;
    est.hr_ff_provenance = "external";
    if (!(est.hr_ff >= 0.0 && est.hr_ff <= 1.0))
      throw Error::usage("external reference risk must lie in [0, 1]");
  } else {
    est.hr_ff = estimate_hrff_from_raw(*source.raw_train, policy, cfg);
    est.hr_ff_provenance = "computed";
  }
  RiskComponents comps = decompose(est, bayes_risk);
  return {est, comps};
}

AltComponents alt_components_from(const RiskEstimates& est, double hr_uf) {
  AltComponents alt;
  alt.hr_uf = hr_uf;
  alt.hr_us = est.hr_us;
  alt.hr_af = est.hr_af;
  alt.probe_gen_alt = est.hr_us - hr_uf;
  alt.encoder_gen_alt = hr_uf - est.hr_af;
  return alt;
}

double estimate_hruf(const FeatureDataset& test_feats, const LambdaPolicy& policy,
                     const TrainConfig& cfg, std::vector<std::string>* flags) {
  if (test_feats.rows() < static_cast<std::int64_t>(test_feats.n_classes))
    throw Error::data("test set has fewer rows than classes; cannot fit the swapped-order probe");
  auto counts = test_feats.class_counts();
  bool tiny = true;
  for (std::int64_t c : counts) {
    if (c > 1) {
      tiny = false;
      break;
    }
  }
  if (tiny && flags)
    flags->push_back("hr_uf_underestimates: one row per class, the probe can memorize the test set");
  return tuned_holdout_risk(test_feats, test_feats, policy, cfg);
}

AltComponents alternative_components(const FeatureDataset& train_feats,
                                     const FeatureDataset& test_feats, const SplitPlan& plan,
                                     const LambdaPolicy& policy, const TrainConfig& cfg) {
  (void)plan;  // the swapped-order variant only needs the full-train and test fits
  RiskEstimates est;
  ProbeModel full_model = fit_tuned_holdout(train_feats, policy, cfg, nullptr);
  est.hr_us = zero_one_risk(full_model, test_feats);
  est.hr_af = tuned_train_error_risk(train_feats, policy, cfg);

  std::vector<std::string> flags;
  const double hr_uf = estimate_hruf(test_feats, policy, cfg, &flags);
  AltComponents alt = alt_components_from(est, hr_uf);
  alt.flags = std::move(flags);
  return alt;
}

SettingSpec parse_setting(const std::string& text) {
  SettingSpec s;
  s.label = text;
  if (text == "full" || text == "100%") {
    s.kind = SettingSpec::Kind::full;
    s.fraction = 1.0;
    return s;
  }
  if (!text.empty() && text.back() == '%') {
    double pct;
    try {
      pct = std::stod(text.substr(0, text.size() - 1));
    } catch (const std::exception&) {
      throw Error::usage("cannot parse setting '" + text + "'");
    }
    if (!(pct > 0.0) || pct > 100.0)
      throw Error::usage("percentage setting must lie in (0, 100]: '" + text + "'");
    s.kind = pct == 100.0 ? SettingSpec::Kind::full : SettingSpec::Kind::fraction;
    s.fraction = pct / 100.0;
    return s;
  }
  const std::string suffix = "-shot";
  if (text.size() > suffix.size() &&
      text.compare(text.size() - suffix.size(), suffix.size(), suffix) == 0) {
    std::int64_t k;
    try {
      k = std::stoll(text.substr(0, text.size() - suffix.size()));
    } catch (const std::exception&) {
      throw Error::usage("cannot parse setting '" + text + "'");
    }
    if (k < 1) throw Error::usage("shot count must be >= 1: '" + text + "'");
    s.kind = SettingSpec::Kind::kshot;
    s.k = k;
    return s;
  }
  throw Error::usage("cannot parse setting '" + text + "' (expected full, <p>%, or <k>-shot)");
}

std::vector<SettingSpec> default_settings() {
  return {parse_setting("full"), parse_setting("30-shot"), parse_setting("1%"),
          parse_setting("5-shot"), parse_setting("3-shot")};
}

std::vector<SettingResult> fewshot_suite(const FeatureDataset& train_feats,
                                         const FeatureDataset& test_feats,
                                         const std::vector<SettingSpec>& settings,
                                         const std::vector<std::uint64_t>& seeds,
                                         const LambdaPolicy& policy, const TrainConfig& cfg) {
  if (seeds.empty()) throw Error::usage("fewshot_suite: need at least one seed");
  std::vector<SettingResult> results;
  for (const auto& setting : settings) {
    SettingResult res;
    res.setting = setting;
    for (std::uint64_t seed : seeds) {
      try {
        FeatureDataset sub_train;
        const FeatureDataset* fit_on = &train_feats;
        if (setting.kind == SettingSpec::Kind::kshot) {
          SubsetSpec spec = stratified_kshot(train_feats, setting.k, seed);
          sub_train = take_rows(train_feats, spec.indices, train_feats.name + "/" + setting.label);
          fit_on = &sub_train;
        } else if (setting.kind == SettingSpec::Kind::fraction) {
          SubsetSpec spec = stratified_fraction(train_feats, setting.fraction, seed);
          sub_train = take_rows(train_feats, spec.indices, train_feats.name + "/" + setting.label);
          fit_on = &sub_train;
        }
        // The full setting must reproduce the hr_US computation exactly, so
        // its tuning seed is left untouched.
        LambdaPolicy seeded = policy;
        if (setting.kind != SettingSpec::Kind::full)
          seeded.seed = derive_seed(policy.seed, "fewshot") ^ seed;
        res.rows_used = fit_on->rows();
        res.per_seed_risks.push_back(tuned_holdout_risk(*fit_on, test_feats, seeded, cfg));
      } catch (const Error& e) {
        res.feasible = false;
        res.note = e.what();
        res.per_seed_risks.clear();
        break;
      }
      if (setting.kind == SettingSpec::Kind::full) break;  // deterministic, one fit suffices
    }
    if (res.feasible && !res.per_seed_risks.empty()) {
      double sum = 0.0;
      for (double r : res.per_seed_risks) sum += r;
      res.mean_risk = sum / static_cast<double>(res.per_seed_risks.size());
      double ss = 0.0;
      for (double r : res.per_seed_risks) ss += (r - res.mean_risk) * (r - res.mean_risk);
      res.std_risk = res.per_seed_risks.size() > 1
                         ? std::sqrt(ss / static_cast<double>(res.per_seed_risks.size() - 1))
                         : 0.0;
    }
    results.push_back(std::move(res));
  }
  return results;
}

json components_to_json(const RiskEstimates& est, const RiskComponents& comps) {
  json j;
  j["hr_FF"] = est.hr_ff;
  j["hr_AF"] = est.hr_af;
  j["hr_AS"] = est.hr_as;
  j["hr_US"] = est.hr_us;
  j["hr_FF_provenance"] = est.hr_ff_provenance;
  j["approx"] = comps.approx;
  j["usability"] = comps.usability;
  j["probe_gen"] = comps.probe_gen;
  j["encoder_gen"] = comps.encoder_gen;
  j["bayes_risk"] = comps.bayes_risk;
  j["total"] = comps.total;
  j["flags"] = comps.flags;
  return j;
}

json alt_components_to_json(const AltComponents& alt) {
  json j;
  j["hr_UF"] = alt.hr_uf;
  j["hr_US"] = alt.hr_us;
  j["hr_AF"] = alt.hr_af;
  j["probe_gen_alt"] = alt.probe_gen_alt;
  j["encoder_gen_alt"] = alt.encoder_gen_alt;
  j["flags"] = alt.flags;
  return j;
}

json setting_results_to_json(const std::vector<SettingResult>& results,
                             std::int64_t train_rows) {
  json rows = json::array();
  for (const auto& r : results) {
    json row;
    row["setting"] = r.setting.label;
    row["feasible"] = r.feasible;
    row["seeds"] = r.per_seed_risks.size();
    row["per_seed_risks"] = r.per_seed_risks;
    if (r.feasible) {
      row["mean_risk"] = r.mean_risk;
      row["std_risk"] = r.std_risk;
      row["mean_accuracy"] = 100.0 * (1.0 - r.mean_risk);
      row["train_rows_used"] = r.rows_used;
    } else {
      row["note"] = r.note;
    }
    rows.push_back(std::move(row));
  }
  json j;
  j["settings"] = std::move(rows);
  if (train_rows > 0) j["train_rows"] = train_rows;
  return j;
}

}  // namespace riskdec
