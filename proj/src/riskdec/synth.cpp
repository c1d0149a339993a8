#include "riskdec/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <string_view>

#include <Eigen/Eigenvalues>

#include "riskdec/error.hpp"
#include "riskdec/rng.hpp"

namespace riskdec {

void SynthTask::validate() const {
  if (n_classes < 2) throw Error::usage("task needs at least 2 classes");
  if (d_raw < 1) throw Error::usage("task needs at least 1 raw dimension");
  if (means.rows() != n_classes || means.cols() != d_raw)
    throw Error::usage("means must be C x d_raw");
  if (!(sigma > 0)) throw Error::usage("sigma must be > 0");
  if (n_pre < 1 || n_tr < 1 || n_te < 1)
    throw Error::usage("all split sizes must be >= 1");
  for (std::int64_t a = 0; a < n_classes; ++a) {
    for (std::int64_t b = a + 1; b < n_classes; ++b) {
      if ((means.row(a) - means.row(b)).norm() == 0.0)
        throw Error::usage("class means must be distinct");
    }
  }
}

SynthTask default_task() {
  SynthTask task;
  task.n_classes = 10;
  task.d_raw = 32;
  task.sigma = 1.0;
  // Axis-aligned means: pairwise distance delta * sqrt(2). delta = 2.8 puts
  // the tuned full-data probe risk near 0.15 with sigma = 1, and the unused
  // coordinates give the probe room to overfit.
  const double delta = 2.8;
  task.means = Eigen::MatrixXd::Zero(task.n_classes, task.d_raw);
  for (std::int64_t c = 0; c < task.n_classes; ++c) task.means(c, c) = delta;
  return task;
}

SynthTask task_from_json(const json& j) {
  SynthTask task = default_task();
  if (j.contains("n_classes")) task.n_classes = j.at("n_classes").get<std::int64_t>();
  if (j.contains("d_raw")) task.d_raw = j.at("d_raw").get<std::int64_t>();
  if (j.contains("sigma")) task.sigma = j.at("sigma").get<double>();
  if (j.contains("n_pre")) task.n_pre = j.at("n_pre").get<std::int64_t>();
  if (j.contains("n_tr")) task.n_tr = j.at("n_tr").get<std::int64_t>();
  if (j.contains("n_te")) task.n_te = j.at("n_te").get<std::int64_t>();
  if (j.contains("seed")) task.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("means")) {
    const auto& m = j.at("means");
    task.means = Eigen::MatrixXd::Zero(task.n_classes, task.d_raw);
    if (static_cast<std::int64_t>(m.size()) != task.n_classes)
      throw Error::usage("means must have one row per class");
    for (std::int64_t c = 0; c < task.n_classes; ++c) {
      const auto row = m.at(static_cast<std::size_t>(c)).get<std::vector<double>>();
      if (static_cast<std::int64_t>(row.size()) != task.d_raw)
        throw Error::usage("means rows must have d_raw entries");
      for (std::int64_t k = 0; k < task.d_raw; ++k) task.means(c, k) = row[static_cast<std::size_t>(k)];
    }
  } else if (j.contains("delta") || j.contains("n_classes") || j.contains("d_raw")) {
    if (task.n_classes > task.d_raw)
      throw Error::usage("axis-aligned default means need d_raw >= n_classes; supply means explicitly");
    const double delta = j.contains("delta") ? j.at("delta").get<double>() : 2.8;
    task.means = Eigen::MatrixXd::Zero(task.n_classes, task.d_raw);
    for (std::int64_t c = 0; c < task.n_classes; ++c) task.means(c, c) = delta;
  }
  task.validate();
  return task;
}

json task_to_json(const SynthTask& task) {
  json j;
  j["n_classes"] = task.n_classes;
  j["d_raw"] = task.d_raw;
  j["sigma"] = task.sigma;
  j["n_pre"] = task.n_pre;
  j["n_tr"] = task.n_tr;
  j["n_te"] = task.n_te;
  j["seed"] = task.seed;
  json means = json::array();
  for (std::int64_t c = 0; c < task.n_classes; ++c) {
    std::vector<double> row(static_cast<std::size_t>(task.d_raw));
    for (std::int64_t k = 0; k < task.d_raw; ++k) row[static_cast<std::size_t>(k)] = task.means(c, k);
    means.push_back(row);
  }
  j["means"] = std::move(means);
  return j;
}

namespace {

FeatureDataset draw_split(const SynthTask& task, std::int64_t n, Rng& rng, const std::string& name) {
  FeatureDataset ds;
  ds.name = name;
  ds.n_classes = static_cast<std::uint32_t>(task.n_classes);
  ds.features.resize(n, task.d_raw);
  ds.labels.resize(static_cast<std::size_t>(n));

  // Class-balanced counts: floor division with the remainder on the lowest
  // class indices, then a seeded shuffle of the row order.
  std::vector<std::uint32_t> labels;
  labels.reserve(static_cast<std::size_t>(n));
  const std::int64_t base = n / task.n_classes;
  const std::int64_t rem = n % task.n_classes;
  for (std::int64_t c = 0; c < task.n_classes; ++c) {
    const std::int64_t count = base + (c < rem ? 1 : 0);
    for (std::int64_t i = 0; i < count; ++i) labels.push_back(static_cast<std::uint32_t>(c));
  }
  rng.shuffle(labels);

  for (std::int64_t i = 0; i < n; ++i) {
    const std::uint32_t c = labels[static_cast<std::size_t>(i)];
    ds.labels[static_cast<std::size_t>(i)] = c;
    for (std::int64_t k = 0; k < task.d_raw; ++k)
      ds.features(i, k) = task.means(c, k) + task.sigma * rng.normal();
  }
  return ds;
}

}  // namespace

TaskData gen_gaussian_task(const SynthTask& task) {
  task.validate();
  TaskData data;
  {
    Rng rng(derive_seed(task.seed, "gen-pretrain"));
    data.pretrain = draw_split(task, task.n_pre, rng, "raw_pretrain");
  }
  {
    Rng rng(derive_seed(task.seed, "gen-train"));
    data.train = draw_split(task, task.n_tr, rng, "raw_train");
  }
  {
    Rng rng(derive_seed(task.seed, "gen-test"));
    data.test = draw_split(task, task.n_te, rng, "raw_test");
  }
  return data;
}

EncoderSpec EncoderSpec::parse(const json& j) {
  EncoderSpec spec;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "identity") {
    spec.kind = Kind::identity;
  } else if (kind == "constant") {
    spec.kind = Kind::constant;
    spec.d_out = j.value("d_out", std::int64_t{4});
  } else if (kind == "one_hot_train") {
    spec.kind = Kind::one_hot_train;
  } else if (kind == "random_projection") {
    spec.kind = Kind::random_projection;
    spec.d_out = j.at("d_out").get<std::int64_t>();
    spec.nonlinearity = j.value("nonlinearity", false);
    spec.seed = j.value("seed", std::uint64_t{0});
  } else if (kind == "noisy_identity") {
    spec.kind = Kind::noisy_identity;
    spec.sigma_noise = j.at("sigma_noise").get<double>();
    spec.seed = j.value("seed", std::uint64_t{0});
  } else if (kind == "pca_pretrained") {
    spec.kind = Kind::pca_pretrained;
    spec.d_out = j.at("d_out").get<std::int64_t>();
  } else {
    throw Error::usage("unknown encoder kind '" + kind + "'");
  }
  spec.label = j.value("label", kind);
  if (spec.d_out < 1) throw Error::usage("encoder d_out must be >= 1");
  return spec;
}

json EncoderSpec::to_json() const {
  json j;
  switch (kind) {
    case Kind::identity: j["kind"] = "identity"; break;
    case Kind::constant: j["kind"] = "constant"; j["d_out"] = d_out; break;
    case Kind::one_hot_train: j["kind"] = "one_hot_train"; break;
    case Kind::random_projection:
      j["kind"] = "random_projection";
      j["d_out"] = d_out;
      j["nonlinearity"] = nonlinearity;
      j["seed"] = seed;
      break;
    case Kind::noisy_identity:
      j["kind"] = "noisy_identity";
      j["sigma_noise"] = sigma_noise;
      j["seed"] = seed;
      break;
    case Kind::pca_pretrained: j["kind"] = "pca_pretrained"; j["d_out"] = d_out; break;
  }
  j["label"] = label;
  return j;
}

Encoder Encoder::fit(const EncoderSpec& spec, const FeatureDataset& pretrain,
                     const FeatureDataset& train) {
  Encoder enc;
  enc.spec_ = spec;
  switch (spec.kind) {
    case EncoderSpec::Kind::identity:
    case EncoderSpec::Kind::noisy_identity:
      enc.out_dim_ = pretrain.dim();
      break;
    case EncoderSpec::Kind::constant:
      enc.out_dim_ = spec.d_out;
      break;
    case EncoderSpec::Kind::one_hot_train:
      enc.train_rows_ = train.features;
      enc.out_dim_ = train.rows();
      break;
    case EncoderSpec::Kind::random_projection: {
      Rng rng(derive_seed(spec.seed, "random-projection"));
      enc.projection_.resize(pretrain.dim(), spec.d_out);
      const double scale = 1.0 / std::sqrt(static_cast<double>(pretrain.dim()));
      for (std::int64_t i = 0; i < enc.projection_.rows(); ++i)
        for (std::int64_t j = 0; j < enc.projection_.cols(); ++j)
          enc.projection_(i, j) = scale * rng.normal();
      enc.out_dim_ = spec.d_out;
      break;
    }
    case EncoderSpec::Kind::pca_pretrained: {
      if (pretrain.rows() < spec.d_out)
        throw Error::usage("pca_pretrained needs at least d_out pretraining rows");
      if (spec.d_out > pretrain.dim() || pretrain.dim() != train.dim())
        throw Error::usage("pca_pretrained d_out exceeds the input dimension");
      // The pretraining corpus is the unlabeled pretrain pool plus the train
      // inputs: the encoder always sees the training rows (they are its
      // pretraining data in the standard setting), while a growing pretrain
      // pool dilutes their influence toward the population projection.
      Eigen::MatrixXd corpus(pretrain.rows() + train.rows(), pretrain.dim());
      corpus << pretrain.features, train.features;
      enc.center_ = corpus.colwise().mean();
      Eigen::MatrixXd centered = corpus.rowwise() - enc.center_.transpose();
      Eigen::MatrixXd cov = centered.transpose() * centered /
                            static_cast<double>(std::max<std::int64_t>(corpus.rows() - 1, 1));
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
      // Eigenvalues come back ascending; take the top d_out, canonical sign.
      enc.projection_.resize(pretrain.dim(), spec.d_out);
      for (std::int64_t k = 0; k < spec.d_out; ++k) {
        Eigen::VectorXd v = eig.eigenvectors().col(pretrain.dim() - 1 - k);
        std::int64_t arg_max = 0;
        for (std::int64_t i = 1; i < v.size(); ++i)
          if (std::fabs(v(i)) > std::fabs(v(arg_max))) arg_max = i;
        if (v(arg_max) < 0) v = -v;
        enc.projection_.col(k) = v;
      }
      enc.out_dim_ = spec.d_out;
      break;
    }
  }
  return enc;
}

FeatureDataset Encoder::apply(const FeatureDataset& ds) const {
  FeatureDataset out;
  out.name = ds.name + "/" + spec_.label;
  out.n_classes = ds.n_classes;
  out.labels = ds.labels;
  switch (spec_.kind) {
    case EncoderSpec::Kind::identity:
      out.features = ds.features;
      break;
    case EncoderSpec::Kind::constant:
      out.features = Eigen::MatrixXd::Ones(ds.rows(), out_dim_);
      break;
    case EncoderSpec::Kind::one_hot_train: {
      // Rows of the memorized train split map to their indicator; anything
      // else maps to the zero vector, so prediction collapses onto the bias.
      std::map<std::string, std::int64_t> lookup;
      const std::int64_t d = train_rows_.cols();
      for (std::int64_t i = 0; i < train_rows_.rows(); ++i) {
        std::string key(reinterpret_cast<const char*>(train_rows_.row(i).eval().data()),
                        static_cast<std::size_t>(d) * sizeof(double));
        lookup.emplace(std::move(key), i);
      }
      out.features = Eigen::MatrixXd::Zero(ds.rows(), out_dim_);
      for (std::int64_t i = 0; i < ds.rows(); ++i) {
        std::string key(reinterpret_cast<const char*>(ds.features.row(i).eval().data()),
                        static_cast<std::size_t>(d) * sizeof(double));
        auto it = lookup.find(key);
        if (it != lookup.end()) out.features(i, it->second) = 1.0;
      }
      break;
    }
    case EncoderSpec::Kind::random_projection:
      out.features = ds.features * projection_;
      if (spec_.nonlinearity) out.features = out.features.array().tanh();
      break;
    case EncoderSpec::Kind::noisy_identity: {
      Rng rng(derive_seed(spec_.seed, "noisy-identity/" + ds.name));
      out.features = ds.features;
      for (std::int64_t i = 0; i < out.features.rows(); ++i)
        for (std::int64_t j = 0; j < out.features.cols(); ++j)
          out.features(i, j) += spec_.sigma_noise * rng.normal();
      break;
    }
    case EncoderSpec::Kind::pca_pretrained:
      out.features = (ds.features.rowwise() - center_.transpose()) * projection_;
      break;
  }
  return out;
}

FeatureDataset apply_encoder(const EncoderSpec& spec, const FeatureDataset& pretrain,
                             const FeatureDataset& train, const FeatureDataset& ds) {
  return Encoder::fit(spec, pretrain, train).apply(ds);
}

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

BayesRisk bayes_risk_oracle(const SynthTask& task, std::int64_t mc_samples) {
  task.validate();
  BayesRisk out;
  if (task.n_classes == 2) {
    const double dist = (task.means.row(0) - task.means.row(1)).norm();
    out.risk = normal_cdf(-dist / (2.0 * task.sigma));
    out.closed_form = true;
    return out;
  }
  // Equal priors and shared isotropic covariance: the optimal rule is the
  // nearest class mean. Monte Carlo the error rate.
  Rng rng(derive_seed(task.seed, "bayes-mc"));
  std::int64_t wrong = 0;
  for (std::int64_t s = 0; s < mc_samples; ++s) {
    const std::int64_t c = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(task.n_classes)));
    Eigen::VectorXd x(task.d_raw);
    for (std::int64_t k = 0; k < task.d_raw; ++k)
      x(k) = task.means(c, k) + task.sigma * rng.normal();
    std::int64_t best = 0;
    double best_d = (x.transpose() - task.means.row(0)).squaredNorm();
    for (std::int64_t m = 1; m < task.n_classes; ++m) {
      const double d2 = (x.transpose() - task.means.row(m)).squaredNorm();
      if (d2 < best_d) {
        best_d = d2;
        best = m;
      }
    }
    if (best != c) ++wrong;
  }
  out.risk = static_cast<double>(wrong) / static_cast<double>(mc_samples);
  out.std_error = std::sqrt(out.risk * (1.0 - out.risk) / static_cast<double>(mc_samples));
  out.closed_form = false;
  return out;
}

LatticeResult brute_force_probe(const FeatureDataset& tiny, double lambda,
                                const LatticeSpec& lattice) {
  tiny.validate();
  const std::int64_t d = tiny.dim();
  const std::int64_t c = static_cast<std::int64_t>(tiny.n_classes);
  const std::int64_t params = (d + 1) * c;
  if (params > 6)
    throw Error::usage("lattice search limited to (d+1)*C <= 6 parameters, got " +
                       std::to_string(params));
  if (!(lattice.step > 0) || lattice.hi < lattice.lo)
    throw Error::usage("lattice bounds are empty");
  if (!lattice.center.empty() && static_cast<std::int64_t>(lattice.center.size()) != params)
    throw Error::usage("lattice center must have one entry per parameter");
  const std::int64_t points_per_dim =
      static_cast<std::int64_t>(std::floor((lattice.hi - lattice.lo) / lattice.step)) + 1;
  double total = 1.0;
  for (std::int64_t i = 0; i < params; ++i) total *= static_cast<double>(points_per_dim);
  if (total > 1e8)
    throw Error::usage("lattice has " + std::to_string(total) + " points; refusing more than 1e8");

  const std::int64_t n = tiny.rows();
  // Plain-loop objective, independent of the gradient trainer.
  auto objective = [&](const std::vector<double>& theta) {
    double loss = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
      double max_z = -std::numeric_limits<double>::infinity();
      std::vector<double> z(static_cast<std::size_t>(c));
      for (std::int64_t k = 0; k < c; ++k) {
        double v = theta[static_cast<std::size_t>(d * c + k)];  // bias
        for (std::int64_t j = 0; j < d; ++j)
          v += tiny.features(i, j) * theta[static_cast<std::size_t>(j * c + k)];
        z[static_cast<std::size_t>(k)] = v;
        max_z = std::max(max_z, v);
      }
      double denom = 0.0;
      for (std::int64_t k = 0; k < c; ++k) denom += std::exp(z[static_cast<std::size_t>(k)] - max_z);
      loss += max_z + std::log(denom) - z[tiny.labels[static_cast<std::size_t>(i)]];
    }
    loss /= static_cast<double>(n);
    double penalty = 0.0;
    for (std::int64_t j = 0; j < d * c; ++j)
      penalty += theta[static_cast<std::size_t>(j)] * theta[static_cast<std::size_t>(j)];
    return loss + 0.5 * lambda * penalty;
  };

  auto center_of = [&](std::int64_t i) {
    return lattice.center.empty() ? 0.0 : lattice.center[static_cast<std::size_t>(i)];
  };
  std::vector<std::int64_t> odometer(static_cast<std::size_t>(params), 0);
  std::vector<double> theta(static_cast<std::size_t>(params));
  for (std::int64_t i = 0; i < params; ++i)
    theta[static_cast<std::size_t>(i)] = center_of(i) + lattice.lo;
  std::vector<double> best_theta = theta;
  double best = objective(theta);
  while (true) {
    std::int64_t pos = 0;
    while (pos < params) {
      if (odometer[static_cast<std::size_t>(pos)] + 1 < points_per_dim) {
        ++odometer[static_cast<std::size_t>(pos)];
        theta[static_cast<std::size_t>(pos)] =
            center_of(pos) + lattice.lo +
            lattice.step * static_cast<double>(odometer[static_cast<std::size_t>(pos)]);
        break;
      }
      odometer[static_cast<std::size_t>(pos)] = 0;
      theta[static_cast<std::size_t>(pos)] = center_of(pos) + lattice.lo;
      ++pos;
    }
    if (pos == params) break;
    const double v = objective(theta);
    if (v < best) {
      best = v;
      best_theta = theta;
    }
  }

  LatticeResult result;
  result.min_loss = best;
  result.weights.resize(d, c);
  for (std::int64_t j = 0; j < d; ++j)
    for (std::int64_t k = 0; k < c; ++k)
      result.weights(j, k) = best_theta[static_cast<std::size_t>(j * c + k)];
  result.bias.resize(c);
  for (std::int64_t k = 0; k < c; ++k) result.bias(k) = best_theta[static_cast<std::size_t>(d * c + k)];
  return result;
}

std::vector<SweepRow> tradeoff_sweep(const SynthTask& task, const std::vector<EncoderSpec>& specs,
                                     const LambdaPolicy& policy, const TrainConfig& cfg) {
  if (specs.empty()) throw Error::usage("tradeoff_sweep: no encoders given");
  TaskData data = gen_gaussian_task(task);
  SplitPlan plan = make_split_plan(data.train, data.test, 0, task.seed);

  std::vector<SweepRow> rows;
  for (const auto& spec : specs) {
    Encoder enc = Encoder::fit(spec, data.pretrain, data.train);
    FeatureDataset train_feats = enc.apply(data.train);
    FeatureDataset test_feats = enc.apply(data.test);
    auto [est, comps] = estimate_components(train_feats, test_feats, plan,
                                            HrFFSource::from_raw(data.train), policy, cfg);
    rows.push_back({spec, est, comps});
  }
  return rows;
}

json sweep_to_json(const std::vector<SweepRow>& rows) {
  json out = json::array();
  for (const auto& row : rows) {
    json j;
    j["encoder"] = row.spec.to_json();
    j["results"] = components_to_json(row.estimates, row.components);
    out.push_back(std::move(j));
  }
  return out;
}

}  // namespace riskdec
