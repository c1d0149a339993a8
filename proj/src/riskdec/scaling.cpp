#include "riskdec/scaling.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "riskdec/error.hpp"

namespace riskdec {

double predict_risk(double approx, double encoder_gen, double usability, double probe_gen,
                    double n_decomposition, double n_probe, double alpha, double w) {
  if (!(n_probe >= 1) || !(n_decomposition >= 1))
    throw Error::usage("predict_risk: sample counts must be >= 1");
  const double ratio = n_decomposition / n_probe;
  return approx + encoder_gen + (1.0 - w) * usability +
         (w * usability + probe_gen) * std::pow(ratio, alpha);
}

double predict_risk(const ScalingObservation& obs, double alpha, double w) {
  return predict_risk(obs.approx, obs.encoder_gen, obs.usability, obs.probe_gen,
                      obs.n_decomposition, obs.n_probe, alpha, w);
}

namespace {

double sse(std::span<const ScalingObservation> obs, double alpha, double w) {
  double s = 0.0;
  for (const auto& o : obs) {
    const double r = predict_risk(o, alpha, w) - o.observed_risk;
    s += r * r;
  }
  return s;
}

constexpr double kAlphaMax = 2.0;

// Box-constrained objective: evaluate at the clamped point and add a
// quadratic penalty for the excursion, which keeps Nelder-Mead inside.
double boxed_sse(std::span<const ScalingObservation> obs, double alpha, double w) {
  const double ca = std::clamp(alpha, 0.0, kAlphaMax);
  const double cw = std::clamp(w, 0.0, 1.0);
  const double excess = (alpha - ca) * (alpha - ca) + (w - cw) * (w - cw);
  return sse(obs, ca, cw) + 1e3 * excess;
}

struct SimplexPoint {
  double alpha, w, value;
};

}  // namespace

ScalingLawFit fit_decomposition_law(std::span<const ScalingObservation> obs) {
  if (obs.size() < 2) throw Error::data("scaling fit: need at least 2 observations");
  std::set<double> distinct_n, distinct_ratio;
  for (const auto& o : obs) {
    distinct_n.insert(o.n_probe);
    if (!(o.n_probe >= 1) || !(o.n_decomposition >= 1))
      throw Error::data("scaling fit: sample counts must be >= 1");
    distinct_ratio.insert(o.n_decomposition / o.n_probe);
  }
  if (distinct_n.size() < 2 || distinct_ratio.size() < 2)
    throw Error::data("scaling fit: all observations share one probe count; the exponent is unidentifiable");

  // Coarse 200x200 scan.
  double best_a = 0.0, best_w = 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 200; ++i) {
    const double a = kAlphaMax * static_cast<double>(i) / 199.0;
    for (int j = 0; j < 200; ++j) {
      const double w = static_cast<double>(j) / 199.0;
      const double v = sse(obs, a, w);
      if (v < best) {
        best = v;
        best_a = a;
        best_w = w;
      }
    }
  }

  // Nelder-Mead polish.
  const double ha = kAlphaMax / 199.0, hw = 1.0 / 199.0;
  std::array<SimplexPoint, 3> simplex = {{
      {best_a, best_w, 0.0},
      {best_a + ha, best_w, 0.0},
      {best_a, best_w + hw, 0.0},
  }};
  for (auto& p : simplex) p.value = boxed_sse(obs, p.alpha, p.w);

  for (int iter = 0; iter < 500; ++iter) {
    std::sort(simplex.begin(), simplex.end(),
              [](const SimplexPoint& x, const SimplexPoint& y) { return x.value < y.value; });
    const double diameter = std::max(
        std::hypot(simplex[1].alpha - simplex[0].alpha, simplex[1].w - simplex[0].w),
        std::hypot(simplex[2].alpha - simplex[0].alpha, simplex[2].w - simplex[0].w));
    if (diameter < 1e-8) break;

    const double ca = (simplex[0].alpha + simplex[1].alpha) / 2.0;
    const double cw = (simplex[0].w + simplex[1].w) / 2.0;
    SimplexPoint refl{ca + (ca - simplex[2].alpha), cw + (cw - simplex[2].w), 0.0};
    refl.value = boxed_sse(obs, refl.alpha, refl.w);

    if (refl.value < simplex[0].value) {
      SimplexPoint expand{ca + 2.0 * (ca - simplex[2].alpha), cw + 2.0 * (cw - simplex[2].w), 0.0};
      expand.value = boxed_sse(obs, expand.alpha, expand.w);
      simplex[2] = expand.value < refl.value ? expand : refl;
    } else if (refl.value < simplex[1].value) {
      simplex[2] = refl;
    } else {
      SimplexPoint contract{ca + 0.5 * (simplex[2].alpha - ca), cw + 0.5 * (simplex[2].w - cw), 0.0};
      contract.value = boxed_sse(obs, contract.alpha, contract.w);
      if (contract.value < simplex[2].value) {
        simplex[2] = contract;
      } else {
        for (int i = 1; i < 3; ++i) {
          simplex[i].alpha = simplex[0].alpha + 0.5 * (simplex[i].alpha - simplex[0].alpha);
          simplex[i].w = simplex[0].w + 0.5 * (simplex[i].w - simplex[0].w);
          simplex[i].value = boxed_sse(obs, simplex[i].alpha, simplex[i].w);
        }
      }
    }
  }
  std::sort(simplex.begin(), simplex.end(),
            [](const SimplexPoint& x, const SimplexPoint& y) { return x.value < y.value; });

  ScalingLawFit fit;
  fit.alpha = std::clamp(simplex[0].alpha, 0.0, kAlphaMax);
  fit.w = std::clamp(simplex[0].w, 0.0, 1.0);

  std::vector<double> pred, actual;
  for (const auto& o : obs) {
    pred.push_back(predict_risk(o, fit.alpha, fit.w));
    actual.push_back(o.observed_risk);
    fit.residuals.push_back(pred.back() - actual.back());
  }
  fit.r2_train = r_squared(pred, actual);
  return fit;
}

namespace {

// For one group with fixed alpha, least squares for (I, C) in
// y ~ I + C * n^-alpha via 2x2 normal equations.
struct GroupSolve {
  double intercept, coef, sse;
};

GroupSolve solve_group(const std::vector<double>& n, const std::vector<double>& y, double alpha) {
  const std::size_t m = n.size();
  double s1 = static_cast<double>(m), sx = 0, sxx = 0, sy = 0, sxy = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const double x = std::pow(n[i], -alpha);
    sx += x;
    sxx += x * x;
    sy += y[i];
    sxy += x * y[i];
  }
  const double det = s1 * sxx - sx * sx;
  GroupSolve g{0, 0, std::numeric_limits<double>::infinity()};
  if (std::fabs(det) < 1e-14) {
    // alpha ~ 0 collapses the regressor into the intercept; fit intercept only.
    g.intercept = sy / s1;
    g.coef = 0.0;
  } else {
    g.intercept = (sxx * sy - sx * sxy) / det;
    g.coef = (s1 * sxy - sx * sy) / det;
  }
  g.sse = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double r = y[i] - g.intercept - g.coef * std::pow(n[i], -alpha);
    g.sse += r * r;
  }
  return g;
}

struct GroupData {
  std::string name;
  std::vector<double> n, y;
  std::vector<std::size_t> rows;
};

double best_alpha_for_group(const GroupData& g, const std::vector<double>& target,
                            GroupSolve* out) {
  // Grid then golden-section refinement on the bracketing interval.
  double best_alpha = 0.0;
  double best_sse = std::numeric_limits<double>::infinity();
  const int grid = 401;
  for (int i = 0; i < grid; ++i) {
    const double a = kAlphaMax * static_cast<double>(i) / (grid - 1);
    GroupSolve s = solve_group(g.n, target, a);
    if (s.sse < best_sse) {
      best_sse = s.sse;
      best_alpha = a;
    }
  }
  double lo = std::max(0.0, best_alpha - kAlphaMax / (grid - 1));
  double hi = std::min(kAlphaMax, best_alpha + kAlphaMax / (grid - 1));
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
  double f1 = solve_group(g.n, target, x1).sse;
  double f2 = solve_group(g.n, target, x2).sse;
  for (int it = 0; it < 80; ++it) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - phi * (hi - lo);
      f1 = solve_group(g.n, target, x1).sse;
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + phi * (hi - lo);
      f2 = solve_group(g.n, target, x2).sse;
    }
  }
  const double alpha = (lo + hi) / 2.0;
  *out = solve_group(g.n, target, alpha);
  return alpha;
}

}  // namespace

StandardLawFit fit_standard_law(std::span<const ScalingObservation> obs) {
  if (obs.empty()) throw Error::data("standard law: no observations");

  std::map<std::string, GroupData> groups;
  bool have_p = true;
  std::set<double> distinct_p;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const auto& o = obs[i];
    const std::string g = o.group.value_or("all");
    auto& gd = groups[g];
    gd.name = g;
    gd.n.push_back(o.n_probe);
    gd.y.push_back(o.observed_risk);
    gd.rows.push_back(i);
    if (o.probe_params.has_value()) {
      distinct_p.insert(*o.probe_params);
    } else {
      have_p = false;
    }
  }
  for (const auto& [name, gd] : groups) {
    std::set<double> ns(gd.n.begin(), gd.n.end());
    if (ns.size() < 3)
      throw Error::data("standard law: group '" + name + "' has fewer than 3 distinct probe counts");
  }

  StandardLawFit fit;
  fit.beta_indeterminate = !have_p || distinct_p.size() < 2;

  const std::size_t total = obs.size();
  const std::size_t n_groups = groups.size();

  if (fit.beta_indeterminate) {
    // Without usable probe sizes the groups decouple completely.
    for (auto& [name, gd] : groups) {
      GroupSolve s;
      const double a = best_alpha_for_group(gd, gd.y, &s);
      fit.groups.push_back({name, s.intercept, s.coef, a});
    }
    fit.beta = 0.0;
    fit.k = 0.0;
  } else {
    // For fixed beta and per-group exponents every remaining parameter is
    // linear, so K and the group terms are solved jointly; alternating them
    // separately stalls in the flat K-vs-intercept valley.
    struct LinearSolve {
      double sse = 0.0;
      double k = 0.0;
      std::vector<double> intercept, coef;
    };
    auto joint_solve = [&](double beta, const std::vector<double>& alphas) {
      const std::int64_t cols = 1 + 2 * static_cast<std::int64_t>(n_groups);
      Eigen::MatrixXd design = Eigen::MatrixXd::Zero(static_cast<std::int64_t>(total), cols);
      Eigen::VectorXd y(static_cast<std::int64_t>(total));
      std::size_t gi = 0;
      for (auto& [name, gd] : groups) {
        for (std::size_t i = 0; i < gd.rows.size(); ++i) {
          const std::int64_t r = static_cast<std::int64_t>(gd.rows[i]);
          design(r, 0) = std::pow(*obs[gd.rows[i]].probe_params, -beta);
          design(r, 1 + 2 * static_cast<std::int64_t>(gi)) = 1.0;
          design(r, 2 + 2 * static_cast<std::int64_t>(gi)) = std::pow(gd.n[i], -alphas[gi]);
          y(r) = gd.y[i];
        }
        ++gi;
      }
      Eigen::VectorXd sol = design.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(y);
      LinearSolve out;
      out.k = sol(0);
      for (std::size_t g = 0; g < n_groups; ++g) {
        out.intercept.push_back(sol(1 + 2 * static_cast<std::int64_t>(g)));
        out.coef.push_back(sol(2 + 2 * static_cast<std::int64_t>(g)));
      }
      out.sse = (y - design * sol).squaredNorm();
      return out;
    };

    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    // Block coordinate descent over the exponents, one grid + golden-section
    // line search per group, with the linear system re-solved at every probe.
    auto eval_beta = [&](double beta, std::vector<double>* alphas_out, LinearSolve* lin_out) {
      std::vector<double> alphas;
      for (auto& [name, gd] : groups) {
        GroupSolve s;
        alphas.push_back(best_alpha_for_group(gd, gd.y, &s));
      }
      LinearSolve lin = joint_solve(beta, alphas);
      for (int round = 0; round < 4; ++round) {
        const double before = lin.sse;
        for (std::size_t g = 0; g < n_groups; ++g) {
          auto sse_at = [&](double a) {
            std::vector<double> trial = alphas;
            trial[g] = a;
            return joint_solve(beta, trial).sse;
          };
          double best_a = alphas[g];
          double best_sse = lin.sse;
          const int grid = 101;
          for (int i = 0; i < grid; ++i) {
            const double a = kAlphaMax * static_cast<double>(i) / (grid - 1);
            const double sse = sse_at(a);
            if (sse < best_sse) {
              best_sse = sse;
              best_a = a;
            }
          }
          double lo = std::max(0.0, best_a - kAlphaMax / (grid - 1));
          double hi = std::min(kAlphaMax, best_a + kAlphaMax / (grid - 1));
          double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
          double f1 = sse_at(x1), f2 = sse_at(x2);
          for (int it = 0; it < 60; ++it) {
            if (f1 < f2) {
              hi = x2;
              x2 = x1;
              f2 = f1;
              x1 = hi - phi * (hi - lo);
              f1 = sse_at(x1);
            } else {
              lo = x1;
              x1 = x2;
              f1 = f2;
              x2 = lo + phi * (hi - lo);
              f2 = sse_at(x2);
            }
          }
          const double refined = (lo + hi) / 2.0;
          if (sse_at(refined) < best_sse) best_a = refined;
          alphas[g] = best_a;
          lin = joint_solve(beta, alphas);
        }
        if (before - lin.sse < 1e-16) break;
      }
      *alphas_out = alphas;
      *lin_out = lin;
      return lin.sse;
    };

    double best_beta = 0.0;
    double best_obj = std::numeric_limits<double>::infinity();
    std::vector<double> best_alphas;
    LinearSolve best_lin;
    for (int bi = 0; bi <= 80; ++bi) {
      const double beta = kAlphaMax * static_cast<double>(bi) / 80.0;
      std::vector<double> alphas;
      LinearSolve lin;
      const double obj = eval_beta(beta, &alphas, &lin);
      if (obj < best_obj) {
        best_obj = obj;
        best_beta = beta;
        best_alphas = alphas;
        best_lin = lin;
      }
    }
    {
      double lo = std::max(0.0, best_beta - kAlphaMax / 80.0);
      double hi = std::min(kAlphaMax, best_beta + kAlphaMax / 80.0);
      double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
      std::vector<double> a1, a2;
      LinearSolve l1, l2;
      double f1 = eval_beta(x1, &a1, &l1);
      double f2 = eval_beta(x2, &a2, &l2);
      for (int it = 0; it < 40; ++it) {
        if (f1 < f2) {
          hi = x2;
          x2 = x1;
          f2 = f1;
          x1 = hi - phi * (hi - lo);
          f1 = eval_beta(x1, &a1, &l1);
        } else {
          lo = x1;
          x1 = x2;
          f1 = f2;
          x2 = lo + phi * (hi - lo);
          f2 = eval_beta(x2, &a2, &l2);
        }
      }
      const double refined = (lo + hi) / 2.0;
      std::vector<double> ar;
      LinearSolve lr;
      const double fr = eval_beta(refined, &ar, &lr);
      if (fr < best_obj) {
        best_obj = fr;
        best_beta = refined;
        best_alphas = ar;
        best_lin = lr;
      }
    }
    fit.beta = best_beta;
    fit.k = best_lin.k;
    std::size_t gi = 0;
    for (auto& [name, gd] : groups) {
      fit.groups.push_back({name, best_lin.intercept[gi], best_lin.coef[gi], best_alphas[gi]});
      ++gi;
    }
  }

  fit.parameter_count = static_cast<std::int64_t>(fit.groups.size()) * 3 +
                        (fit.beta_indeterminate ? 0 : 2);

  std::vector<double> pred(total), actual(total);
  std::size_t gi = 0;
  for (auto& [name, gd] : groups) {
    const auto& g = fit.groups[gi];
    for (std::size_t i = 0; i < gd.rows.size(); ++i) {
      double v = g.intercept + g.coef * std::pow(gd.n[i], -g.exponent);
      if (!fit.beta_indeterminate) v += fit.k * std::pow(*obs[gd.rows[i]].probe_params, -fit.beta);
      pred[gd.rows[i]] = v;
      actual[gd.rows[i]] = gd.y[i];
    }
    ++gi;
  }
  fit.r2_train = r_squared(pred, actual);
  return fit;
}

double r_squared(std::span<const double> pred, std::span<const double> actual) {
  if (pred.size() != actual.size() || pred.empty())
    throw Error::usage("r_squared: lengths differ or empty");
  double mean = 0.0;
  for (double a : actual) mean += a;
  mean /= static_cast<double>(actual.size());
  double ss_tot = 0.0, ss_res = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    ss_tot += (actual[i] - mean) * (actual[i] - mean);
    ss_res += (actual[i] - pred[i]) * (actual[i] - pred[i]);
  }
  if (ss_tot == 0.0) throw Error::data("r_squared: responses are constant; R^2 undefined");
  return 1.0 - ss_res / ss_tot;
}

HoldoutSpec parse_holdout(const std::string& text) {
  HoldoutSpec spec;
  if (text.empty() || text == "none") {
    spec.kind = HoldoutSpec::Kind::none;
    return spec;
  }
  if (text == "iid") {
    spec.kind = HoldoutSpec::Kind::iid;
    return spec;
  }
  if (text.rfind("group:", 0) == 0) {
    spec.kind = HoldoutSpec::Kind::group;
    spec.group_key = text.substr(6);
    if (spec.group_key.empty()) throw Error::usage("holdout group key is empty");
    return spec;
  }
  throw Error::usage("cannot parse holdout '" + text + "' (expected none, iid, or group:<key>)");
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_holdout(
    std::span<const ScalingObservation> obs, const HoldoutSpec& spec) {
  std::vector<std::size_t> train, test;
  if (spec.kind == HoldoutSpec::Kind::none) {
    for (std::size_t i = 0; i < obs.size(); ++i) train.push_back(i);
    return {train, test};
  }
  if (spec.kind == HoldoutSpec::Kind::group) {
    for (std::size_t i = 0; i < obs.size(); ++i) {
      if (obs[i].group.value_or("") == spec.group_key) {
        test.push_back(i);
      } else {
        train.push_back(i);
      }
    }
    if (test.empty()) throw Error::data("holdout group '" + spec.group_key + "' matches no observation");
    return {train, test};
  }
  // iid: per encoder, hold out ranks 1 and 3 of the n-probe ordering.
  std::map<std::string, std::vector<std::size_t>> per_encoder;
  for (std::size_t i = 0; i < obs.size(); ++i) per_encoder[obs[i].encoder].push_back(i);
  for (auto& [enc, rows] : per_encoder) {
    std::sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) {
      if (obs[a].n_probe != obs[b].n_probe) return obs[a].n_probe < obs[b].n_probe;
      return a < b;
    });
    std::set<std::size_t> held;
    if (rows.size() >= 4) {
      held = {1, 3};
    } else if (rows.size() >= 2) {
      held = {rows.size() - 1};
    }
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (held.count(r)) {
        test.push_back(rows[r]);
      } else {
        train.push_back(rows[r]);
      }
    }
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {train, test};
}

std::vector<ScalingObservation> observations_from_json(const json& j) {
  if (!j.is_array()) throw Error::data("observations JSON must be an array");
  std::vector<ScalingObservation> out;
  for (const auto& item : j) {
    ScalingObservation o;
    o.encoder = item.at("encoder").get<std::string>();
    const auto& c = item.at("components");
    o.approx = c.at("approx").get<double>();
    o.encoder_gen = c.at("encoder_gen").get<double>();
    o.usability = c.at("usability").get<double>();
    o.probe_gen = c.at("probe_gen").get<double>();
    o.n_decomposition = item.at("N").get<double>();
    o.n_probe = item.at("n").get<double>();
    o.observed_risk = item.at("observed_risk").get<double>();
    if (item.contains("group")) o.group = item.at("group").get<std::string>();
    if (item.contains("p")) o.probe_params = item.at("p").get<double>();
    if (o.n_decomposition < o.n_probe) o.flags.push_back("n_exceeds_decomposition_count");
    out.push_back(std::move(o));
  }
  return out;
}

json observation_to_json(const ScalingObservation& obs) {
  json j;
  j["encoder"] = obs.encoder;
  j["components"] = {{"approx", obs.approx},
                     {"encoder_gen", obs.encoder_gen},
                     {"usability", obs.usability},
                     {"probe_gen", obs.probe_gen}};
  j["N"] = obs.n_decomposition;
  j["n"] = obs.n_probe;
  j["observed_risk"] = obs.observed_risk;
  if (obs.group) j["group"] = *obs.group;
  if (obs.probe_params) j["p"] = *obs.probe_params;
  if (!obs.flags.empty()) j["flags"] = obs.flags;
  return j;
}

json scaling_fit_to_json(const ScalingLawFit& fit) {
  json j;
  j["alpha"] = fit.alpha;
  j["w"] = fit.w;
  j["r2_train"] = fit.r2_train;
  if (fit.r2_test) j["r2_test"] = *fit.r2_test;
  j["residuals"] = fit.residuals;
  return j;
}

json standard_fit_to_json(const StandardLawFit& fit) {
  json groups = json::array();
  for (const auto& g : fit.groups) {
    groups.push_back({{"group", g.group},
                      {"intercept", g.intercept},
                      {"coef", g.coef},
                      {"exponent", g.exponent}});
  }
  json j;
  j["groups"] = std::move(groups);
  j["K"] = fit.k;
  j["beta"] = fit.beta;
  j["beta_indeterminate"] = fit.beta_indeterminate;
  j["r2_train"] = fit.r2_train;
  if (fit.r2_test) j["r2_test"] = *fit.r2_test;
  j["parameter_count"] = fit.parameter_count;
  return j;
}

}  // namespace riskdec
