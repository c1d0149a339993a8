#include "riskdec/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <Eigen/LU>
#include <Eigen/QR>

#include "riskdec/error.hpp"

namespace riskdec {

namespace {

double log_gamma(double x) { return std::lgamma(x); }

// Continued fraction for the incomplete beta (Numerical-Recipes style
// modified Lentz iteration).
double betacf(double a, double b, double x) {
  const double tiny = 1e-300;
  const double eps = 1e-15;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 500; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < eps) break;
  }
  return h;
}

}  // namespace

double betainc_regularized(double a, double b, double x) {
  if (!(a > 0) || !(b > 0)) throw Error::usage("betainc: parameters must be > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front =
      log_gamma(a + b) - log_gamma(a) - log_gamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * betacf(a, b, x) / a;
  }
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double dof) {
  if (dof <= 0) throw Error::usage("t distribution needs dof > 0");
  if (!std::isfinite(t)) return 0.0;
  const double x = dof / (dof + t * t);
  return betainc_regularized(dof / 2.0, 0.5, x);
}

OlsFit ols(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
           const std::vector<std::string>& column_names) {
  const std::int64_t n = design.rows();
  const std::int64_t p = design.cols();
  if (n != response.size()) throw Error::usage("ols: row counts of design and response differ");
  if (static_cast<std::int64_t>(column_names.size()) != p)
    throw Error::usage("ols: column name count does not match design width");
  if (n < p + 1)
    throw Error::data("ols: " + std::to_string(n) + " rows cannot identify " + std::to_string(p) +
                      " coefficients with a residual degree of freedom");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  const std::int64_t rank = qr.rank();
  if (rank < p) {
    // Pivots beyond the numerical rank name the dependent columns.
    std::string cols;
    const auto& perm = qr.colsPermutation().indices();
    for (std::int64_t i = rank; i < p; ++i) {
      if (!cols.empty()) cols += ", ";
      cols += column_names[static_cast<std::size_t>(perm[i])];
    }
    throw Error::data("ols: design is rank deficient; dependent columns: " + cols);
  }

  const Eigen::VectorXd beta = qr.solve(response);
  const Eigen::VectorXd resid = response - design * beta;
  const std::int64_t dof = n - rank;
  const double sigma2 = resid.squaredNorm() / static_cast<double>(dof);

  // (X'X)^-1 from the R factor of the pivoted QR.
  const Eigen::MatrixXd r_full = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd r_inv = r_full.inverse();
  const Eigen::MatrixXd xtx_inv_perm = r_inv * r_inv.transpose();
  const auto& perm = qr.colsPermutation();
  const Eigen::MatrixXd xtx_inv = perm * xtx_inv_perm * perm.transpose();

  OlsFit fit;
  fit.dof = dof;
  fit.sigma2 = sigma2;
  for (std::int64_t j = 0; j < p; ++j) {
    OlsTerm term;
    term.name = column_names[static_cast<std::size_t>(j)];
    term.coef = beta[j];
    term.std_error = std::sqrt(std::max(0.0, sigma2 * xtx_inv(j, j)));
    term.t_stat = term.std_error > 0 ? term.coef / term.std_error
                                     : std::numeric_limits<double>::infinity();
    term.p_value = student_t_two_sided_p(term.t_stat, static_cast<double>(dof));
    fit.terms.push_back(std::move(term));
  }

  const double mean_y = response.mean();
  const double ss_tot = (response.array() - mean_y).matrix().squaredNorm();
  const double ss_res = resid.squaredNorm();
  fit.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

std::int64_t ModelTable::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return static_cast<std::int64_t>(i);
  }
  return -1;
}

bool ModelTable::is_numeric(std::int64_t col) const {
  bool any = false;
  for (const auto& row : cells) {
    const std::string& cell = row[static_cast<std::size_t>(col)];
    if (cell.empty()) continue;
    any = true;
    std::size_t consumed = 0;
    try {
      (void)std::stod(cell, &consumed);
    } catch (const std::exception&) {
      return false;
    }
    if (consumed != cell.size()) return false;
  }
  return any;
}

ModelTable load_model_table(const std::filesystem::path& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw Error::data("cannot open " + csv_path.string());
  ModelTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      std::size_t comma = line.find(',', start);
      fields.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (lineno == 1) {
      std::set<std::string> seen;
      for (const auto& f : fields) {
        if (!seen.insert(f).second)
          throw Error::data(csv_path.string() + ": duplicate column name '" + f + "'");
      }
      table.columns = std::move(fields);
    } else {
      if (fields.size() != table.columns.size())
        throw Error::data(csv_path.string() + ":" + std::to_string(lineno) + ": ragged row");
      table.cells.push_back(std::move(fields));
    }
  }
  if (table.columns.empty()) throw Error::data(csv_path.string() + ": missing header row");
  return table;
}

namespace {

double numeric_cell(const ModelTable& table, std::int64_t row, std::int64_t col,
                    const std::string& what) {
  const std::string& cell = table.cells[static_cast<std::size_t>(row)][static_cast<std::size_t>(col)];
  try {
    std::size_t consumed = 0;
    double v = std::stod(cell, &consumed);
    if (consumed != cell.size()) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    throw Error::data(what + ": non-numeric cell '" + cell + "' in column '" +
                      table.columns[static_cast<std::size_t>(col)] + "'");
  }
}

double maybe_log(double v, bool log_it, const std::string& what) {
  if (!log_it) return v;
  if (!(v > 0)) throw Error::data(what + ": log transform needs positive values, got " + std::to_string(v));
  return std::log(v);
}

std::int64_t require_column(const ModelTable& table, const std::string& name) {
  const std::int64_t idx = table.column_index(name);
  if (idx < 0) throw Error::usage("column '" + name + "' not found in table");
  return idx;
}

bool row_complete(const ModelTable& table, std::int64_t row, const std::vector<std::int64_t>& cols) {
  for (std::int64_t c : cols) {
    if (table.cells[static_cast<std::size_t>(row)][static_cast<std::size_t>(c)].empty()) return false;
  }
  return true;
}

}  // namespace

OlsFit controlled_fit(const ModelTable& table, const std::string& hparam,
                      const std::string& metric, bool log_hparam, bool log_metric) {
  const std::int64_t h_col = require_column(table, hparam);
  const std::int64_t m_col = require_column(table, metric);

  // Group rows by the joint value of every other column.
  std::vector<std::int64_t> used_cols = {h_col, m_col};
  std::map<std::string, std::vector<std::int64_t>> groups;
  for (std::int64_t r = 0; r < table.rows(); ++r) {
    if (!row_complete(table, r, used_cols)) continue;
    std::string key;
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
      if (static_cast<std::int64_t>(c) == h_col || static_cast<std::int64_t>(c) == m_col) continue;
      key += table.cells[static_cast<std::size_t>(r)][c];
      key += '\x1f';
    }
    groups[key].push_back(r);
  }

  // Keep only groups in which the studied choice actually varies.
  std::vector<std::vector<std::int64_t>> informative;
  for (auto& [key, rows] : groups) {
    std::set<std::string> values;
    for (std::int64_t r : rows)
      values.insert(table.cells[static_cast<std::size_t>(r)][static_cast<std::size_t>(h_col)]);
    if (rows.size() >= 2 && values.size() >= 2) informative.push_back(rows);
  }
  if (informative.empty())
    throw Error::data("controlled analysis: no two rows differ only in '" + hparam +
                      "'; no controlled comparisons exist");

  std::int64_t n = 0;
  for (const auto& rows : informative) n += static_cast<std::int64_t>(rows.size());
  const std::int64_t g = static_cast<std::int64_t>(informative.size());

  Eigen::MatrixXd design = Eigen::MatrixXd::Zero(n, 1 + g);
  Eigen::VectorXd y(n);
  std::vector<std::string> names;
  names.push_back(log_hparam ? "log(" + hparam + ")" : hparam);
  for (std::int64_t i = 0; i < g; ++i) names.push_back("group_" + std::to_string(i));

  std::int64_t row_out = 0;
  for (std::int64_t i = 0; i < g; ++i) {
    for (std::int64_t r : informative[static_cast<std::size_t>(i)]) {
      design(row_out, 0) =
          maybe_log(numeric_cell(table, r, h_col, "controlled analysis"), log_hparam, hparam);
      design(row_out, 1 + i) = 1.0;
      y(row_out) = maybe_log(numeric_cell(table, r, m_col, "controlled analysis"), log_metric, metric);
      ++row_out;
    }
  }
  return ols(design, y, names);
}

OlsFit global_fit(const ModelTable& table, const std::string& hparam,
                  const std::vector<std::string>& controls, const std::string& metric,
                  bool log_hparam, bool log_metric) {
  const std::int64_t h_col = require_column(table, hparam);
  const std::int64_t m_col = require_column(table, metric);
  std::vector<std::int64_t> ctrl_cols;
  for (const auto& c : controls) {
    if (c == hparam || c == metric)
      throw Error::usage("control column '" + c + "' duplicates the studied choice or metric");
    ctrl_cols.push_back(require_column(table, c));
  }

  std::vector<std::int64_t> needed = {h_col, m_col};
  needed.insert(needed.end(), ctrl_cols.begin(), ctrl_cols.end());
  std::vector<std::int64_t> rows;
  for (std::int64_t r = 0; r < table.rows(); ++r) {
    if (row_complete(table, r, needed)) rows.push_back(r);
  }
  if (rows.empty()) throw Error::data("global analysis: no complete rows");
  const std::int64_t n = static_cast<std::int64_t>(rows.size());

  struct EncodedColumn {
    std::string name;
    Eigen::VectorXd values;
  };
  std::vector<EncodedColumn> encoded;

  encoded.push_back({"intercept", Eigen::VectorXd::Ones(n)});
  {
    Eigen::VectorXd v(n);
    for (std::int64_t i = 0; i < n; ++i)
      v(i) = maybe_log(numeric_cell(table, rows[static_cast<std::size_t>(i)], h_col, "global analysis"),
                       log_hparam, hparam);
    encoded.push_back({log_hparam ? "log(" + hparam + ")" : hparam, std::move(v)});
  }
  for (std::size_t k = 0; k < ctrl_cols.size(); ++k) {
    const std::int64_t col = ctrl_cols[k];
    if (table.is_numeric(col)) {
      Eigen::VectorXd v(n);
      for (std::int64_t i = 0; i < n; ++i)
        v(i) = numeric_cell(table, rows[static_cast<std::size_t>(i)], col, "global analysis");
      encoded.push_back({controls[k], std::move(v)});
    } else {
      std::set<std::string> levels;
      for (std::int64_t i = 0; i < n; ++i)
        levels.insert(
            table.cells[static_cast<std::size_t>(rows[static_cast<std::size_t>(i)])][static_cast<std::size_t>(col)]);
      bool first = true;  // drop the alphabetically first level
      for (const auto& level : levels) {
        if (first) {
          first = false;
          continue;
        }
        Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
        for (std::int64_t i = 0; i < n; ++i) {
          if (table.cells[static_cast<std::size_t>(rows[static_cast<std::size_t>(i)])][static_cast<std::size_t>(col)] ==
              level)
            v(i) = 1.0;
        }
        encoded.push_back({controls[k] + "=" + level, std::move(v)});
      }
    }
  }

  Eigen::MatrixXd design(n, static_cast<std::int64_t>(encoded.size()));
  std::vector<std::string> names;
  for (std::size_t j = 0; j < encoded.size(); ++j) {
    design.col(static_cast<std::int64_t>(j)) = encoded[j].values;
    names.push_back(encoded[j].name);
  }
  Eigen::VectorXd y(n);
  for (std::int64_t i = 0; i < n; ++i)
    y(i) = maybe_log(numeric_cell(table, rows[static_cast<std::size_t>(i)], m_col, "global analysis"),
                     log_metric, metric);

  OlsFit fit = ols(design, y, names);
  // Surface the studied choice first, ahead of intercept and controls.
  std::swap(fit.terms[0], fit.terms[1]);
  return fit;
}

json ols_to_json(const OlsFit& fit) {
  json terms = json::array();
  for (const auto& t : fit.terms) {
    terms.push_back({{"name", t.name},
                     {"coef", t.coef},
                     {"std_error", t.std_error},
                     {"t_stat", t.t_stat},
                     {"p_value", t.p_value}});
  }
  json j;
  j["terms"] = std::move(terms);
  j["r2"] = fit.r2;
  j["dof"] = fit.dof;
  j["sigma2"] = fit.sigma2;
  return j;
}

}  // namespace riskdec
