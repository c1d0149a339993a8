#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "riskdec/analysis.hpp"
#include "riskdec/jsonio.hpp"

namespace riskdec {

struct RepStats {
  std::int64_t effective_dim = 0;
  double uniformity = 0.0;  // in [-8, 0]
  std::vector<std::string> warnings;
};

// Numerical rank of the column correlation matrix: singular values above
// max(atol, rtol * sigma_max). Zero-variance columns are excluded with a
// warning (their correlations are undefined); if none remain the spread is a
// single point and the dimension reports as 1.
std::int64_t effective_dim(const Eigen::MatrixXd& z, double atol = 1e-4, double rtol = 0.01,
                           std::vector<std::string>* warnings = nullptr);

// log mean over distinct row pairs of exp(-2 * ||z_i/|z_i| - z_j/|z_j|||^2).
// Computed as a max-shifted log-mean-exp so the boundary values 0 (identical
// rows) and -8 (antipodal rows) are produced exactly.
double uniformity(const Eigen::MatrixXd& z);

// Mean over rows of the squared distance between paired representations.
double alignment(const Eigen::MatrixXd& z1, const Eigen::MatrixXd& z2);

struct StatsRow {
  double effective_dim = 0.0;
  double uniformity = 0.0;
  double alignment = 0.0;
  double agg_risk = 0.0;
};

// OLS of agg_risk on [1, log(effective_dim), uniformity, alignment].
OlsFit stats_regression(const std::vector<StatsRow>& rows);

json repstats_to_json(const RepStats& stats, const double* alignment_value);

}  // namespace riskdec
