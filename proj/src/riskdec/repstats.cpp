#include "riskdec/repstats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "riskdec/error.hpp"

namespace riskdec {

std::int64_t effective_dim(const Eigen::MatrixXd& z, double atol, double rtol,
                           std::vector<std::string>* warnings) {
  const std::int64_t n = z.rows();
  const std::int64_t d = z.cols();
  if (n < 2) throw Error::usage("effective_dim: need at least 2 rows");

  // Columns with zero variance have no defined correlation; drop them.
  std::vector<std::int64_t> keep;
  Eigen::VectorXd mean = z.colwise().mean();
  for (std::int64_t j = 0; j < d; ++j) {
    const double var = (z.col(j).array() - mean(j)).matrix().squaredNorm();
    if (var > 0) {
      keep.push_back(j);
    } else if (warnings) {
      warnings->push_back("column " + std::to_string(j) + " has zero variance; excluded from the correlation matrix");
    }
  }
  if (keep.empty()) {
    if (warnings) warnings->push_back("all columns constant; representation spans a single point");
    return 1;
  }

  const std::int64_t k = static_cast<std::int64_t>(keep.size());
  Eigen::MatrixXd centered(n, k);
  for (std::int64_t j = 0; j < k; ++j)
    centered.col(j) = (z.col(keep[static_cast<std::size_t>(j)]).array() - mean(keep[static_cast<std::size_t>(j)])).matrix();
  Eigen::VectorXd inv_norm(k);
  for (std::int64_t j = 0; j < k; ++j) inv_norm(j) = 1.0 / centered.col(j).norm();
  Eigen::MatrixXd corr = centered.transpose() * centered;
  corr = inv_norm.asDiagonal() * corr * inv_norm.asDiagonal();

  // Symmetric PSD, so singular values are the eigenvalues clamped at zero.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(corr);
  Eigen::VectorXd sv = eig.eigenvalues().cwiseMax(0.0);
  const double sv_max = sv.maxCoeff();
  const double threshold = std::max(atol, rtol * sv_max);
  std::int64_t rank = 0;
  for (std::int64_t i = 0; i < sv.size(); ++i) {
    if (sv(i) > threshold) ++rank;
  }
  return std::max<std::int64_t>(rank, 1);
}

double uniformity(const Eigen::MatrixXd& z) {
  const std::int64_t n = z.rows();
  if (n < 2) throw Error::usage("uniformity: need at least 2 rows");
  Eigen::MatrixXd unit = z;
  for (std::int64_t i = 0; i < n; ++i) {
    const double norm = unit.row(i).norm();
    if (!(norm > 0)) throw Error::usage("uniformity: row " + std::to_string(i) + " has zero norm");
    unit.row(i) /= norm;
  }

  // Exponents -2*||u_i - u_j||^2 over distinct pairs, combined by a
  // max-shifted log-mean-exp with compensated summation.
  double max_e = -std::numeric_limits<double>::infinity();
  std::vector<double> exponents;
  exponents.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n - 1) / 2);
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = i + 1; j < n; ++j) {
      const double e = -2.0 * (unit.row(i) - unit.row(j)).squaredNorm();
      exponents.push_back(e);
      max_e = std::max(max_e, e);
    }
  }
  double sum = 0.0, comp = 0.0;
  for (double e : exponents) {
    const double term = std::exp(e - max_e);
    const double y = term - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return max_e + std::log(sum / static_cast<double>(exponents.size()));
}

double alignment(const Eigen::MatrixXd& z1, const Eigen::MatrixXd& z2) {
  if (z1.rows() != z2.rows() || z1.cols() != z2.cols())
    throw Error::usage("alignment: shapes differ");
  if (z1.rows() < 1) throw Error::usage("alignment: empty input");
  double sum = 0.0, comp = 0.0;
  for (std::int64_t i = 0; i < z1.rows(); ++i) {
    const double v = (z1.row(i) - z2.row(i)).squaredNorm();
    const double y = v - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return sum / static_cast<double>(z1.rows());
}

OlsFit stats_regression(const std::vector<StatsRow>& rows) {
  if (rows.size() < 5) throw Error::data("stats_regression: need at least 5 rows");
  const std::int64_t n = static_cast<std::int64_t>(rows.size());
  Eigen::MatrixXd design(n, 4);
  Eigen::VectorXd y(n);
  for (std::int64_t i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    if (!(r.effective_dim >= 1))
      throw Error::data("stats_regression: effective_dim must be >= 1");
    design(i, 0) = 1.0;
    design(i, 1) = std::log(r.effective_dim);
    design(i, 2) = r.uniformity;
    design(i, 3) = r.alignment;
    y(i) = r.agg_risk;
  }
  return ols(design, y, {"intercept", "log(effective_dim)", "uniformity", "alignment"});
}

json repstats_to_json(const RepStats& stats, const double* alignment_value) {
  json j;
  j["effective_dim"] = stats.effective_dim;
  j["uniformity"] = stats.uniformity;
  if (alignment_value) j["alignment"] = *alignment_value;
  if (!stats.warnings.empty()) j["warnings"] = stats.warnings;
  return j;
}

}  // namespace riskdec
