#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "riskdec/dataset.hpp"
#include "riskdec/jsonio.hpp"

namespace riskdec {

// L2-regularized multinomial linear classifier. The bias is never penalized.
struct ProbeModel {
  Eigen::MatrixXd weights;  // d x C
  Eigen::VectorXd bias;     // C
  double lambda = 0.0;      // penalty strength, per-sample-normalized loss units
};

struct TrainConfig {
  double grad_tol = 1e-6;   // infinity-norm stopping threshold
  int max_iter = 500;
  std::uint64_t seed = 0;   // kept for API stability; the zero init makes it inert
};

struct LossGrad {
  double loss = 0.0;
  Eigen::MatrixXd grad_weights;
  Eigen::VectorXd grad_bias;
};

struct FitInfo {
  int iterations = 0;
  double grad_inf_norm = 0.0;
  bool converged = false;
};

// Mean multinomial cross-entropy + (lambda/2)*||W||_F^2 and its exact gradient.
LossGrad loss_and_grad(const ProbeModel& model, const FeatureDataset& ds);

// Full-batch descent with a Barzilai-Borwein trial step safeguarded by Armijo
// backtracking. Starts from zero parameters, so the convex objective makes the
// result independent of cfg.seed. Stops at grad_tol (infinity norm) or
// max_iter; `info` reports which.
ProbeModel train_probe(const FeatureDataset& train, double lambda, const TrainConfig& cfg,
                       FitInfo* info = nullptr);

// Row-wise argmax of logits; ties resolve to the lowest class index.
std::vector<std::uint32_t> predict(const ProbeModel& model, const Eigen::MatrixXd& features);

// Fraction of misclassified rows.
double zero_one_risk(const ProbeModel& model, const FeatureDataset& ds);

struct TuneResult {
  double best_lambda = 0.0;
  std::vector<double> grid;
  std::vector<double> val_risks;  // parallel to grid
  ProbeModel model;               // fit at best_lambda (refit on train+val when requested)
};

// Fits one probe per grid point on `train`, picks the minimal validation
// zero-one risk (ties go to the smaller lambda).
TuneResult tune_lambda(const FeatureDataset& train, const FeatureDataset& val,
                       const std::vector<double>& grid, const TrainConfig& cfg,
                       bool refit_on_union = false);

// Seven log-spaced points, 1e-4 .. 1e2.
std::vector<double> default_lambda_grid();

json probe_to_json(const ProbeModel& model);
ProbeModel probe_from_json(const json& j);

}  // namespace riskdec
