#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "riskdec/dataset.hpp"
#include "riskdec/jsonio.hpp"
#include "riskdec/probe.hpp"

namespace riskdec {

// The four raw risk estimates. hr_US trains on all training rows and
// evaluates on the test set; hr_AS trains on the training rows minus the
// carved subset and evaluates on the subset; hr_AF is the training error of
// the full-train probe; hr_FF is the training error of the supervised
// reference (computed from raw inputs or supplied externally).
struct RiskEstimates {
  double hr_ff = 0.0;
  double hr_af = 0.0;
  double hr_as = 0.0;
  double hr_us = 0.0;
  std::string hr_ff_provenance = "computed";  // "computed" | "external"
};

struct RiskComponents {
  double approx = 0.0;       // hr_FF - bayes_risk
  double usability = 0.0;    // hr_AF - hr_FF
  double probe_gen = 0.0;    // hr_AS - hr_AF
  double encoder_gen = 0.0;  // hr_US - hr_AS
  double bayes_risk = 0.0;
  double total = 0.0;        // == hr_US
  std::vector<std::string> flags;
};

// Pure difference arithmetic over the stored estimates. Negative components
// are reported with a flag, never clamped.
RiskComponents decompose(const RiskEstimates& est, double bayes_risk = 0.0);

// How the penalty strength is chosen for each fitted probe.
struct LambdaPolicy {
  enum class Mode { fixed, tuned };
  Mode mode = Mode::tuned;
  double fixed_lambda = 1e-2;
  std::vector<double> grid = default_lambda_grid();
  double val_fraction = 0.10;  // stratified tuning slice carved from the train partition
  std::uint64_t seed = 0;

  static LambdaPolicy fixed(double lambda) {
    LambdaPolicy p;
    p.mode = Mode::fixed;
    p.fixed_lambda = lambda;
    return p;
  }
  static LambdaPolicy tuned(std::uint64_t seed = 0) {
    LambdaPolicy p;
    p.seed = seed;
    return p;
  }
};

// Fit on `train` at a fixed strength, report zero-one risk on `eval`.
double risk(const FeatureDataset& train, const FeatureDataset& eval, double lambda,
            const TrainConfig& cfg);

// Tuning mirrors each estimate's train/eval relationship:
//  - held-out estimates (hr_US, hr_AS): candidates are validated on a
//    stratified slice held out of the train partition, then the winner is
//    refit on the whole partition;
//  - training-error estimates (hr_AF, hr_FF): candidates are trained and
//    scored on the same slice, so ties collapse to the smallest strength.
double tuned_holdout_risk(const FeatureDataset& train_part, const FeatureDataset& eval_part,
                          const LambdaPolicy& policy, const TrainConfig& cfg,
                          double* lambda_out = nullptr);
double tuned_train_error_risk(const FeatureDataset& ds, const LambdaPolicy& policy,
                              const TrainConfig& cfg, double* lambda_out = nullptr);

struct HrFFSource {
  std::optional<double> external_risk;        // published/supplied reference risk
  const FeatureDataset* raw_train = nullptr;  // or fit the reference on raw inputs

  static HrFFSource external(double r) { return {r, nullptr}; }
  static HrFFSource from_raw(const FeatureDataset& raw) { return {std::nullopt, &raw}; }
};

// Training error of a probe fit and evaluated on the raw (un-encoded) inputs.
// Shares the code path of the hr_AF estimate so that an identity encoder
// yields bit-identical hr_FF and hr_AF.
double estimate_hrff_from_raw(const FeatureDataset& raw_train, const LambdaPolicy& policy,
                              const TrainConfig& cfg);

std::pair<RiskEstimates, RiskComponents> estimate_components(
    const FeatureDataset& train_feats, const FeatureDataset& test_feats, const SplitPlan& plan,
    const HrFFSource& source, const LambdaPolicy& policy, const TrainConfig& cfg,
    double bayes_risk = 0.0);

// Variant that swaps the order of the two generalization errors:
//   probe_gen_alt   = hr_US - hr_UF
//   encoder_gen_alt = hr_UF - hr_AF
// where hr_UF trains and evaluates the probe on the test set.
struct AltComponents {
  double hr_uf = 0.0;
  double hr_us = 0.0;
  double hr_af = 0.0;
  double probe_gen_alt = 0.0;
  double encoder_gen_alt = 0.0;
  std::vector<std::string> flags;
};

AltComponents alt_components_from(const RiskEstimates& est, double hr_uf);

double estimate_hruf(const FeatureDataset& test_feats, const LambdaPolicy& policy,
                     const TrainConfig& cfg, std::vector<std::string>* flags = nullptr);

AltComponents alternative_components(const FeatureDataset& train_feats,
                                     const FeatureDataset& test_feats, const SplitPlan& plan,
                                     const LambdaPolicy& policy, const TrainConfig& cfg);

// Label-budget settings: "full", "30-shot", "1%", ...
struct SettingSpec {
  enum class Kind { full, fraction, kshot };
  Kind kind = Kind::full;
  double fraction = 1.0;
  std::int64_t k = 0;
  std::string label = "full";
};

SettingSpec parse_setting(const std::string& text);
std::vector<SettingSpec> default_settings();  // full, 30-shot, 1%, 5-shot, 3-shot

struct SettingResult {
  SettingSpec setting;
  std::vector<double> per_seed_risks;
  double mean_risk = 0.0;
  double std_risk = 0.0;
  std::int64_t rows_used = 0;  // probe training rows per seed (identical across seeds)
  bool feasible = true;
  std::string note;
};

// For each setting x seed: subsample the training rows, fit a tuned probe,
// report test risk. Infeasible settings are reported, not fatal.
std::vector<SettingResult> fewshot_suite(const FeatureDataset& train_feats,
                                         const FeatureDataset& test_feats,
                                         const std::vector<SettingSpec>& settings,
                                         const std::vector<std::uint64_t>& seeds,
                                         const LambdaPolicy& policy, const TrainConfig& cfg);

json components_to_json(const RiskEstimates& est, const RiskComponents& comps);
json alt_components_to_json(const AltComponents& alt);
json setting_results_to_json(const std::vector<SettingResult>& results,
                             std::int64_t train_rows = 0);

}  // namespace riskdec
