#include <doctest.h>

#include <cmath>
#include <fstream>

#include "riskdec/analysis.hpp"
#include "riskdec/error.hpp"
#include "riskdec/rng.hpp"
#include "test_util.hpp"

using namespace riskdec;
using testutil::temp_path;

TEST_CASE("regularized incomplete beta sanity") {
  CHECK(betainc_regularized(2.0, 3.0, 0.0) == 0.0);
  CHECK(betainc_regularized(2.0, 3.0, 1.0) == 1.0);
  // I_x(1,1) = x.
  CHECK(betainc_regularized(1.0, 1.0, 0.37) == doctest::Approx(0.37).epsilon(1e-12));
  // Symmetry I_x(a,b) = 1 - I_{1-x}(b,a).
  CHECK(betainc_regularized(2.5, 4.0, 0.3) ==
        doctest::Approx(1.0 - betainc_regularized(4.0, 2.5, 0.7)).epsilon(1e-12));
}

TEST_CASE("t distribution tails") {
  // dof = 1 is a Cauchy: two-sided p at t = 1 is exactly 1/2.
  CHECK(student_t_two_sided_p(1.0, 1.0) == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(student_t_two_sided_p(0.0, 7.0) == doctest::Approx(1.0));
  // For large dof the t tail matches the normal tail.
  const double normal_p = std::erfc(1.96 / std::sqrt(2.0));
  CHECK(std::fabs(student_t_two_sided_p(1.96, 500.0) - normal_p) < 1e-3);
}

TEST_CASE("noiseless line is recovered exactly") {
  const int n = 25;
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = i * 0.25;
    y(i) = 1.0 + 2.0 * x(i, 1);
  }
  auto fit = ols(x, y, {"intercept", "x"});
  CHECK(std::fabs(fit.terms[0].coef - 1.0) < 1e-10);
  CHECK(std::fabs(fit.terms[1].coef - 2.0) < 1e-10);
  CHECK(fit.r2 == doctest::Approx(1.0));
  CHECK(fit.dof == n - 2);
}

TEST_CASE("planted noisy slope is significant") {
  Rng rng(2024);
  const int n = 40;
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = rng.unit() * 2.0;
    y(i) = 2.0 * x(i, 1) + 0.1 * rng.normal();
  }
  auto fit = ols(x, y, {"intercept", "x"});
  CHECK(fit.terms[1].coef > 1.9);
  CHECK(fit.terms[1].coef < 2.1);
  CHECK(fit.terms[1].p_value < 1e-6);
}

TEST_CASE("null slope false-positive rate stays near the nominal level") {
  Rng rng(31337);
  int rejections = 0;
  const int reps = 200;
  for (int rep = 0; rep < reps; ++rep) {
    const int n = 30;
    Eigen::MatrixXd x(n, 2);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
      x(i, 0) = 1.0;
      x(i, 1) = rng.normal();
      y(i) = rng.normal();  // independent of x
    }
    auto fit = ols(x, y, {"intercept", "x"});
    if (fit.terms[1].p_value < 0.05) ++rejections;
  }
  CHECK(rejections <= reps / 10);
}

TEST_CASE("rank deficiency names the dependent columns") {
  Eigen::MatrixXd x(10, 3);
  Eigen::VectorXd y(10);
  for (int i = 0; i < 10; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = i;
    x(i, 2) = 2.0 * i;  // collinear with column 1
    y(i) = i;
  }
  CHECK_THROWS_WITH_AS(ols(x, y, {"intercept", "a", "b"}), doctest::Contains("rank deficient"),
                       Error);
}

TEST_CASE("scale equivariance of coefficients and invariance of inference") {
  Rng rng(5150);
  const int n = 60;
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = rng.normal();
    y(i) = 0.5 + 1.5 * x(i, 1) + 0.3 * rng.normal();
  }
  auto base = ols(x, y, {"intercept", "x"});
  Eigen::MatrixXd xs = x;
  const double c = 10.0;
  xs.col(1) *= c;
  auto scaled = ols(xs, y, {"intercept", "x"});
  CHECK(std::fabs(scaled.terms[1].coef - base.terms[1].coef / c) < 1e-9);
  CHECK(std::fabs(scaled.terms[1].t_stat - base.terms[1].t_stat) < 1e-9);
  CHECK(std::fabs(scaled.terms[1].p_value - base.terms[1].p_value) < 1e-9);
}

TEST_CASE("orthogonal irrelevant controls leave the studied coefficient alone") {
  const int n = 64;
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd extra(n);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = (i % 2 == 0) ? 1.0 : -1.0;
    extra(i) = (i % 4 < 2) ? 1.0 : -1.0;  // orthogonal to x1 by construction
    y(i) = 3.0 * x(i, 1) + 0.25 * ((i * 2654435761u) % 97 / 97.0 - 0.5);
  }
  auto base = ols(x, y, {"intercept", "x"});
  Eigen::MatrixXd wide(n, 3);
  wide << x, extra;
  auto with_control = ols(wide, y, {"intercept", "x", "noise"});
  CHECK(std::fabs(base.terms[1].coef - with_control.terms[1].coef) < 1e-9);
}

namespace {

std::filesystem::path write_table(const std::string& csv) {
  auto path = temp_path("table");
  std::ofstream(path) << csv;
  return path;
}

}  // namespace

TEST_CASE("model table loading and typing") {
  auto path = write_table("model,dim,objective,risk\nm1,64,contrastive,0.2\nm2,128,,0.3\n");
  auto table = load_model_table(path);
  CHECK(table.rows() == 2);
  CHECK(table.column_index("dim") == 1);
  CHECK(table.column_index("missing") == -1);
  CHECK(table.is_numeric(1));
  CHECK(!table.is_numeric(2));  // strings
  std::filesystem::remove(path);

  SUBCASE("duplicate headers rejected") {
    auto dup = write_table("a,a\n1,2\n");
    CHECK_THROWS_AS(load_model_table(dup), Error);
    std::filesystem::remove(dup);
  }
}

TEST_CASE("controlled comparison recovers a planted slope with fixed effects") {
  // Metric = 2*log(dim) + group offset; pairs differ only in dim.
  std::ostringstream csv_ss;
  csv_ss.precision(17);
  csv_ss << "objective,epochs,dim,metric\n";
  double offsets[3] = {0.5, -1.0, 2.0};
  const char* objectives[3] = {"a", "b", "c"};
  for (int g = 0; g < 3; ++g) {
    for (double dim : {32.0, 64.0, 128.0, 256.0}) {
      csv_ss << objectives[g] << ",100," << dim << "," << 2.0 * std::log(dim) + offsets[g] << "\n";
    }
  }
  std::string csv = csv_ss.str();
  auto path = write_table(csv);
  auto table = load_model_table(path);
  auto fit = controlled_fit(table, "dim", "metric", /*log_hparam=*/true, /*log_metric=*/false);
  CHECK(fit.terms[0].name == "log(dim)");
  CHECK(std::fabs(fit.terms[0].coef - 2.0) < 1e-9);
  CHECK(fit.r2 == doctest::Approx(1.0));
  std::filesystem::remove(path);

  SUBCASE("no controlled pairs is a coverage error") {
    auto lonely = write_table("objective,dim,metric\na,32,1.0\nb,64,2.0\n");
    auto t = load_model_table(lonely);
    CHECK_THROWS_WITH_AS(controlled_fit(t, "dim", "metric", false, false),
                         doctest::Contains("controlled"), Error);
    std::filesystem::remove(lonely);
  }
}

TEST_CASE("controlled fit on a stored fixture with a strong negative slope") {
  // Regression fixture: a steep negative log-dimensionality effect with small
  // group scatter should come back with the planted coefficient and a
  // vanishing p-value.
  Rng rng(390);
  std::ostringstream csv;
  csv.precision(17);
  csv << "objective,epochs,dim,metric\n";
  const double slope = -3.9;
  const char* objectives[4] = {"a", "b", "c", "d"};
  for (int g = 0; g < 4; ++g) {
    for (double dim : {64.0, 128.0, 256.0, 512.0, 1024.0}) {
      const double metric = slope * std::log(dim) + 2.0 * g + 0.02 * rng.normal();
      csv << objectives[g] << ",200," << dim << "," << metric << "\n";
    }
  }
  auto path = write_table(csv.str());
  auto fit = controlled_fit(load_model_table(path), "dim", "metric", true, false);
  CHECK(std::fabs(fit.terms[0].coef - slope) < 0.05);
  CHECK(fit.terms[0].p_value < 1e-8);
  std::filesystem::remove(path);
}

TEST_CASE("global fit with categorical controls") {
  Rng rng(808);
  std::string csv = "dim,family,metric\n";
  for (int i = 0; i < 100; ++i) {
    const double dim = 16.0 + rng.below(100);
    const bool vit = rng.unit() < 0.5;
    const double metric = 4.0 * dim / 100.0 + (vit ? -1.0 : 0.0) + 0.05 * rng.normal();
    csv += std::to_string(dim) + "," + (vit ? "vit" : "resnet") + "," + std::to_string(metric) + "\n";
  }
  auto path = write_table(csv);
  auto table = load_model_table(path);
  auto fit = global_fit(table, "dim", {"family"}, "metric");
  CHECK(fit.terms[0].name == "dim");
  CHECK(std::fabs(fit.terms[0].coef - 0.04) < 0.005);
  CHECK(fit.terms[0].p_value < 1e-4);
  // One-hot drops the alphabetically first level (resnet).
  bool has_vit = false;
  for (const auto& t : fit.terms) {
    if (t.name == "family=vit") has_vit = true;
    CHECK(t.name != "family=resnet");
  }
  CHECK(has_vit);
  std::filesystem::remove(path);

  SUBCASE("confounded control is a rank error") {
    auto conf = write_table("dim,copy,metric\n1,2,0.1\n2,4,0.2\n3,6,0.3\n4,8,0.4\n5,10,0.5\n");
    auto t = load_model_table(conf);
    CHECK_THROWS_AS(global_fit(t, "dim", {"copy"}, "metric"), Error);
    std::filesystem::remove(conf);
  }
}

TEST_CASE("planted effect survives correlated controls") {
  Rng rng(616);
  std::string csv = "hp,ctrl,metric\n";
  for (int i = 0; i < 100; ++i) {
    const double hp = rng.normal();
    const double ctrl = 0.5 * hp + std::sqrt(1 - 0.25) * rng.normal();  // rho = 0.5
    const double metric = 4.0 * hp + 1.0 * ctrl + 0.5 * rng.normal();
    csv += std::to_string(hp) + "," + std::to_string(ctrl) + "," + std::to_string(metric) + "\n";
  }
  auto path = write_table(csv);
  auto fit = global_fit(load_model_table(path), "hp", {"ctrl"}, "metric");
  CHECK(std::fabs(fit.terms[0].coef - 4.0) < 0.5);
  CHECK(fit.terms[0].p_value < 1e-4);
  std::filesystem::remove(path);
}

TEST_CASE("ols fit serializes its terms") {
  Eigen::MatrixXd x(5, 1);
  Eigen::VectorXd y(5);
  for (int i = 0; i < 5; ++i) {
    x(i, 0) = 1.0;
    y(i) = 2.0 + 0.001 * i;
  }
  auto j = ols_to_json(ols(x, y, {"intercept"}));
  CHECK(j.at("terms")[0].at("name") == "intercept");
  CHECK(j.at("dof") == 4);
  CHECK(j.contains("r2"));
}
