#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "riskdec/decomposition.hpp"
#include "riskdec/jsonio.hpp"

namespace riskdec {

struct ScalingObservation {
  std::string encoder;
  double approx = 0.0;
  double encoder_gen = 0.0;
  double usability = 0.0;
  double probe_gen = 0.0;
  double n_decomposition = 0.0;  // sample count the components were estimated with (N)
  double n_probe = 0.0;          // probe training count (n)
  double observed_risk = 0.0;
  std::optional<std::string> group;
  std::optional<double> probe_params;  // p, for the per-group baseline law
  std::vector<std::string> flags;
};

// risk(n) = approx + encoder_gen + (1-w)*usability
//           + (w*usability + probe_gen) * (N/n)^alpha
double predict_risk(double approx, double encoder_gen, double usability, double probe_gen,
                    double n_decomposition, double n_probe, double alpha, double w);
double predict_risk(const ScalingObservation& obs, double alpha, double w);

struct ScalingLawFit {
  double alpha = 0.0;  // in [0, 2]
  double w = 0.0;      // in [0, 1]
  double r2_train = 0.0;
  std::optional<double> r2_test;
  std::vector<double> residuals;  // training residuals, observation order
};

// Least squares over (alpha, w): 200x200 grid then a Nelder-Mead polish to
// simplex diameter 1e-8. Deterministic; grid ties resolve to the lowest
// alpha, then the lowest w.
ScalingLawFit fit_decomposition_law(std::span<const ScalingObservation> obs);

struct StandardLawGroup {
  std::string group;
  double intercept = 0.0;
  double coef = 0.0;
  double exponent = 0.0;  // alpha_e in [0, 2]
};

// risk(n, p, e) = I_e + C_e / n^alpha_e + K / p^beta
struct StandardLawFit {
  std::vector<StandardLawGroup> groups;
  double k = 0.0;
  double beta = 0.0;
  bool beta_indeterminate = false;
  double r2_train = 0.0;
  std::optional<double> r2_test;
  std::int64_t parameter_count = 0;  // 3 per group + 2 global (0 when beta indeterminate)
};

StandardLawFit fit_standard_law(std::span<const ScalingObservation> obs);

// 1 - SS_res / SS_tot; errors when `actual` is constant.
double r_squared(std::span<const double> pred, std::span<const double> actual);

struct HoldoutSpec {
  enum class Kind { none, iid, group };
  Kind kind = Kind::none;
  std::string group_key;
};

HoldoutSpec parse_holdout(const std::string& text);  // "iid" | "group:<key>"

// Index split (train, test). The iid protocol orders each encoder's
// observations by probe count and holds out ranks 1 and 3 (0-based) when it
// has at least four, else the last one.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_holdout(
    std::span<const ScalingObservation> obs, const HoldoutSpec& spec);

std::vector<ScalingObservation> observations_from_json(const json& j);
json observation_to_json(const ScalingObservation& obs);
json scaling_fit_to_json(const ScalingLawFit& fit);
json standard_fit_to_json(const StandardLawFit& fit);

}  // namespace riskdec
