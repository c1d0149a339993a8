#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "riskdec/jsonio.hpp"

namespace riskdec {

struct OlsTerm {
  std::string name;
  double coef = 0.0;
  double std_error = 0.0;
  double t_stat = 0.0;
  double p_value = 1.0;
};

struct OlsFit {
  std::vector<OlsTerm> terms;
  double r2 = 0.0;          // centered R^2
  std::int64_t dof = 0;     // rows - rank(design)
  double sigma2 = 0.0;      // residual variance estimate
};

// Least squares via column-pivoted QR with classical standard errors and
// two-sided p-values from the t distribution. Throws on rank deficiency,
// naming the dependent columns.
OlsFit ols(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
           const std::vector<std::string>& column_names);

// Regularized incomplete beta I_x(a, b) (Lentz continued fraction) and the
// two-sided tail of the t distribution built on it.
double betainc_regularized(double a, double b, double x);
double student_t_two_sided_p(double t, double dof);

// Rectangular table of model records: design-choice and metric columns,
// numeric or categorical, with empty cells treated as missing.
struct ModelTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> cells;  // row-major, raw text

  std::int64_t rows() const { return static_cast<std::int64_t>(cells.size()); }
  std::int64_t column_index(const std::string& name) const;  // -1 when absent
  bool is_numeric(std::int64_t col) const;                   // all non-missing cells parse
};

ModelTable load_model_table(const std::filesystem::path& csv_path);

// Regression of a metric on one design choice plus one-hot fixed effects over
// the joint value of every other design-choice column. Only groups containing
// at least two rows with distinct values of the studied choice carry signal;
// rows outside such groups are dropped. The studied choice's row of the fit
// comes first in `terms`.
OlsFit controlled_fit(const ModelTable& table, const std::string& hparam,
                      const std::string& metric, bool log_hparam, bool log_metric);

// Regression of a metric on one design choice plus caller-chosen control
// columns (categoricals one-hot encoded, first level dropped alphabetically)
// and an intercept.
OlsFit global_fit(const ModelTable& table, const std::string& hparam,
                  const std::vector<std::string>& controls, const std::string& metric,
                  bool log_hparam = false, bool log_metric = false);

json ols_to_json(const OlsFit& fit);

}  // namespace riskdec
