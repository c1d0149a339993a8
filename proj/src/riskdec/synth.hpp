#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "riskdec/dataset.hpp"
#include "riskdec/decomposition.hpp"
#include "riskdec/jsonio.hpp"

namespace riskdec {

// Gaussian mixture classification task with shared isotropic covariance.
struct SynthTask {
  std::int64_t n_classes = 10;
  std::int64_t d_raw = 32;
  Eigen::MatrixXd means;  // C x d_raw
  double sigma = 1.0;
  std::int64_t n_pre = 1000;
  std::int64_t n_tr = 1000;
  std::int64_t n_te = 1000;
  std::uint64_t seed = 0;

  void validate() const;
};

// C=10, d=32, axis-aligned means spaced so the full-data probe risk lands
// near 0.15.
SynthTask default_task();
SynthTask task_from_json(const json& j);
json task_to_json(const SynthTask& task);

struct TaskData {
  FeatureDataset pretrain;
  FeatureDataset train;
  FeatureDataset test;
};

// Class-balanced i.i.d. draws, deterministic in the task seed.
TaskData gen_gaussian_task(const SynthTask& task);

struct EncoderSpec {
  enum class Kind {
    identity,
    constant,
    one_hot_train,
    random_projection,
    noisy_identity,
    pca_pretrained,
  };
  Kind kind = Kind::identity;
  std::int64_t d_out = 1;       // random_projection, pca_pretrained, constant
  bool nonlinearity = false;    // random_projection: odd sigmoidal (tanh) after projecting
  double sigma_noise = 0.0;     // noisy_identity
  std::uint64_t seed = 0;       // random_projection / noisy_identity draws
  std::string label;

  static EncoderSpec parse(const json& j);
  json to_json() const;
};

// A fitted encoder: any pretraining happens once against the task's raw
// pretrain/train sets, after which application is a pure function.
class Encoder {
 public:
  static Encoder fit(const EncoderSpec& spec, const FeatureDataset& pretrain,
                     const FeatureDataset& train);

  FeatureDataset apply(const FeatureDataset& ds) const;

  const EncoderSpec& spec() const { return spec_; }
  const Eigen::MatrixXd& projection() const { return projection_; }

 private:
  EncoderSpec spec_;
  Eigen::MatrixXd projection_;       // random_projection / pca_pretrained
  Eigen::VectorXd center_;           // pca_pretrained
  Eigen::MatrixXd train_rows_;       // one_hot_train lookup source
  std::int64_t out_dim_ = 0;
};

FeatureDataset apply_encoder(const EncoderSpec& spec, const FeatureDataset& pretrain,
                             const FeatureDataset& train, const FeatureDataset& ds);

struct BayesRisk {
  double risk = 0.0;
  double std_error = 0.0;  // zero for the closed form
  bool closed_form = false;
};

// Two equal-prior classes at mean distance D with isotropic sigma admit the
// closed form Phi(-D / (2 sigma)); anything else falls back to Monte Carlo
// over the stated sample count with its standard error reported.
BayesRisk bayes_risk_oracle(const SynthTask& task, std::int64_t mc_samples = 1000000);

struct LatticeSpec {
  double lo = -5.0;
  double hi = 5.0;
  double step = 0.5;
  // Optional per-parameter offsets: dimension i spans [center[i]+lo, center[i]+hi].
  // Lets a second pass zoom in around a coarse winner without widening the box.
  std::vector<double> center;
};

struct LatticeResult {
  double min_loss = 0.0;
  Eigen::MatrixXd weights;
  Eigen::VectorXd bias;
};

// Exhaustive minimum of the regularized objective over the parameter lattice.
// Independent of the trainer: plain-loop objective evaluation. Requires
// (d+1)*C <= 6 parameters and at most 1e8 lattice points.
LatticeResult brute_force_probe(const FeatureDataset& tiny, double lambda,
                                const LatticeSpec& lattice);

struct SweepRow {
  EncoderSpec spec;
  RiskEstimates estimates;
  RiskComponents components;
};

// Full decomposition per encoder on one generated task; the
// (usability, probe_gen) columns trace the frontier.
std::vector<SweepRow> tradeoff_sweep(const SynthTask& task, const std::vector<EncoderSpec>& specs,
                                     const LambdaPolicy& policy, const TrainConfig& cfg);

json sweep_to_json(const std::vector<SweepRow>& rows);

}  // namespace riskdec
