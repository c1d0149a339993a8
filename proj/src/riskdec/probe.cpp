#include "riskdec/probe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "riskdec/error.hpp"

namespace riskdec {

namespace {

void check_shapes(const ProbeModel& model, std::int64_t dim, std::uint32_t n_classes,
                  const char* what) {
  if (model.weights.rows() != dim || model.weights.cols() != static_cast<std::int64_t>(n_classes) ||
      model.bias.size() != static_cast<std::int64_t>(n_classes))
    throw Error::usage(std::string(what) + ": model shape (" + std::to_string(model.weights.rows()) +
                       "x" + std::to_string(model.weights.cols()) + ") does not match data (d=" +
                       std::to_string(dim) + ", C=" + std::to_string(n_classes) + ")");
}

// Row-wise softmax probabilities and the mean negative log-likelihood.
double softmax_nll(const Eigen::MatrixXd& logits, const std::vector<std::uint32_t>& labels,
                   Eigen::MatrixXd& probs) {
  const std::int64_t n = logits.rows();
  probs.resizeLike(logits);
  double nll = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double m = logits.row(i).maxCoeff();
    probs.row(i) = (logits.row(i).array() - m).exp();
    const double z = probs.row(i).sum();
    probs.row(i) /= z;
    nll += m + std::log(z) - logits(i, labels[static_cast<std::size_t>(i)]);
  }
  return nll / static_cast<double>(n);
}

}  // namespace

LossGrad loss_and_grad(const ProbeModel& model, const FeatureDataset& ds) {
  check_shapes(model, ds.dim(), ds.n_classes, "loss_and_grad");
  const std::int64_t n = ds.rows();

  Eigen::MatrixXd logits = ds.features * model.weights;
  logits.rowwise() += model.bias.transpose();

  Eigen::MatrixXd probs;
  LossGrad out;
  out.loss = softmax_nll(logits, ds.labels, probs) +
             0.5 * model.lambda * model.weights.squaredNorm();

  // d(loss)/d(logits) = (P - Y) / n
  for (std::int64_t i = 0; i < n; ++i)
    probs(i, ds.labels[static_cast<std::size_t>(i)]) -= 1.0;
  probs /= static_cast<double>(n);

  out.grad_weights = ds.features.transpose() * probs + model.lambda * model.weights;
  out.grad_bias = probs.colwise().sum().transpose();
  return out;
}

ProbeModel train_probe(const FeatureDataset& train, double lambda, const TrainConfig& cfg,
                       FitInfo* info) {
  train.validate();
  if (lambda < 0) throw Error::usage("lambda must be >= 0");
  if (!(cfg.grad_tol > 0)) throw Error::usage("grad_tol must be > 0");
  if (cfg.max_iter < 1) throw Error::usage("max_iter must be >= 1");

  const std::int64_t d = train.dim();
  const std::int64_t c = static_cast<std::int64_t>(train.n_classes);

  ProbeModel model;
  model.lambda = lambda;
  model.weights = Eigen::MatrixXd::Zero(d, c);
  model.bias = Eigen::VectorXd::Zero(c);

  LossGrad lg = loss_and_grad(model, train);
  if (!std::isfinite(lg.loss)) throw Error::numeric("non-finite loss at iteration 0");

  double step = 1.0;
  Eigen::MatrixXd prev_w, prev_gw;
  Eigen::VectorXd prev_b, prev_gb;
  bool have_prev = false;

  int iter = 0;
  double ginf = std::max(lg.grad_weights.cwiseAbs().maxCoeff(), lg.grad_bias.cwiseAbs().maxCoeff());
  for (; iter < cfg.max_iter && ginf > cfg.grad_tol; ++iter) {
    // Barzilai-Borwein trial step from the last accepted move.
    if (have_prev) {
      const double sy = (model.weights - prev_w).cwiseProduct(lg.grad_weights - prev_gw).sum() +
                        (model.bias - prev_b).dot(lg.grad_bias - prev_gb);
      const double ss = (model.weights - prev_w).squaredNorm() + (model.bias - prev_b).squaredNorm();
      if (sy > 0 && std::isfinite(sy)) step = std::clamp(ss / sy, 1e-12, 1e8);
    }
    prev_w = model.weights;
    prev_b = model.bias;
    prev_gw = lg.grad_weights;
    prev_gb = lg.grad_bias;
    have_prev = true;

    const double gsq = lg.grad_weights.squaredNorm() + lg.grad_bias.squaredNorm();
    ProbeModel trial = model;
    LossGrad trial_lg;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      trial.weights = model.weights - step * lg.grad_weights;
      trial.bias = model.bias - step * lg.grad_bias;
      trial_lg = loss_and_grad(trial, train);
      if (!std::isfinite(trial_lg.loss))
        throw Error::numeric("non-finite loss at iteration " + std::to_string(iter + 1));
      if (trial_lg.loss <= lg.loss - 1e-4 * step * gsq) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // step underflow: no further progress possible
    model.weights.swap(trial.weights);
    model.bias.swap(trial.bias);
    lg = std::move(trial_lg);
    ginf = std::max(lg.grad_weights.cwiseAbs().maxCoeff(), lg.grad_bias.cwiseAbs().maxCoeff());
  }

  if (info) {
    info->iterations = iter;
    info->grad_inf_norm = ginf;
    info->converged = ginf <= cfg.grad_tol;
  }
  return model;
}

std::vector<std::uint32_t> predict(const ProbeModel& model, const Eigen::MatrixXd& features) {
  if (features.cols() != model.weights.rows())
    throw Error::usage("predict: feature dimension " + std::to_string(features.cols()) +
                       " does not match model dimension " + std::to_string(model.weights.rows()));
  Eigen::MatrixXd logits = features * model.weights;
  logits.rowwise() += model.bias.transpose();
  std::vector<std::uint32_t> out(static_cast<std::size_t>(features.rows()));
  for (std::int64_t i = 0; i < features.rows(); ++i) {
    std::uint32_t best = 0;
    double best_v = logits(i, 0);
    for (std::int64_t j = 1; j < logits.cols(); ++j) {
      if (logits(i, j) > best_v) {
        best_v = logits(i, j);
        best = static_cast<std::uint32_t>(j);
      }
    }
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

double zero_one_risk(const ProbeModel& model, const FeatureDataset& ds) {
  if (ds.rows() < 1) throw Error::usage("zero_one_risk: empty evaluation set");
  check_shapes(model, ds.dim(), ds.n_classes, "zero_one_risk");
  auto preds = predict(model, ds.features);
  std::int64_t wrong = 0;
  for (std::int64_t i = 0; i < ds.rows(); ++i) {
    if (preds[static_cast<std::size_t>(i)] != ds.labels[static_cast<std::size_t>(i)]) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(ds.rows());
}

TuneResult tune_lambda(const FeatureDataset& train, const FeatureDataset& val,
                       const std::vector<double>& grid, const TrainConfig& cfg,
                       bool refit_on_union) {
  if (grid.empty()) throw Error::usage("tune_lambda: empty grid");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0)) throw Error::usage("tune_lambda: grid values must be > 0");
    if (i > 0 && grid[i] <= grid[i - 1]) throw Error::usage("tune_lambda: grid must be strictly ascending");
  }

  TuneResult result;
  result.grid = grid;
  std::size_t best = 0;
  double best_risk = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    ProbeModel m;
    try {
      m = train_probe(train, grid[i], cfg);
    } catch (const Error& e) {
      throw Error(e.kind(), std::string(e.what()) + " (lambda=" + std::to_string(grid[i]) + ")");
    }
    const double r = zero_one_risk(m, val);
    result.val_risks.push_back(r);
    if (r < best_risk) {  // strict: ties keep the earlier (smaller) lambda
      best_risk = r;
      best = i;
      result.model = std::move(m);
    }
  }
  result.best_lambda = grid[best];

  if (refit_on_union) {
    FeatureDataset both;
    both.name = train.name + "+val";
    both.n_classes = train.n_classes;
    both.features.resize(train.rows() + val.rows(), train.dim());
    both.features << train.features, val.features;
    both.labels = train.labels;
    both.labels.insert(both.labels.end(), val.labels.begin(), val.labels.end());
    result.model = train_probe(both, result.best_lambda, cfg);
  }
  return result;
}

std::vector<double> default_lambda_grid() {
  return {1e-4, 1e-3, 1e-2, 1e-1, 1e0, 1e1, 1e2};
}

json probe_to_json(const ProbeModel& model) {
  json j;
  j["d"] = model.weights.rows();
  j["C"] = model.weights.cols();
  j["lambda"] = model.lambda;
  std::vector<double> w;
  w.reserve(static_cast<std::size_t>(model.weights.size()));
  for (std::int64_t i = 0; i < model.weights.rows(); ++i)
    for (std::int64_t jcol = 0; jcol < model.weights.cols(); ++jcol) w.push_back(model.weights(i, jcol));
  j["weights"] = w;
  j["bias"] = std::vector<double>(model.bias.data(), model.bias.data() + model.bias.size());
  return j;
}

ProbeModel probe_from_json(const json& j) {
  ProbeModel m;
  const std::int64_t d = j.at("d").get<std::int64_t>();
  const std::int64_t c = j.at("C").get<std::int64_t>();
  m.lambda = j.at("lambda").get<double>();
  const auto w = j.at("weights").get<std::vector<double>>();
  const auto b = j.at("bias").get<std::vector<double>>();
  if (static_cast<std::int64_t>(w.size()) != d * c || static_cast<std::int64_t>(b.size()) != c)
    throw Error::data("probe JSON: weight/bias sizes inconsistent with d, C");
  m.weights.resize(d, c);
  for (std::int64_t i = 0; i < d; ++i)
    for (std::int64_t jcol = 0; jcol < c; ++jcol)
      m.weights(i, jcol) = w[static_cast<std::size_t>(i * c + jcol)];
  m.bias = Eigen::Map<const Eigen::VectorXd>(b.data(), c);
  return m;
}

}  // namespace riskdec
