#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace riskdec {

enum class FvecDtype : std::uint8_t { f32 = 0, f64 = 1 };

// Dense feature matrix with integer class labels. Immutable by convention
// after construction; all consumers take it by const reference.
struct FeatureDataset {
  Eigen::MatrixXd features;          // n x d
  std::vector<std::uint32_t> labels; // length n, each < n_classes
  std::uint32_t n_classes = 0;
  std::string name;
  FvecDtype dtype = FvecDtype::f64;  // payload width used on disk

  std::int64_t rows() const { return features.rows(); }
  std::int64_t dim() const { return features.cols(); }

  // Enforces the structural invariants; throws Error::data on violation.
  void validate() const;

  std::vector<std::int64_t> class_counts() const;
};

// Binary container, little-endian:
//   magic "FVEC" | u8 version=1 | u8 dtype (0=f32, 1=f64)
//   u32 n | u32 d | u32 C | n*d features row-major | n labels as u32
FeatureDataset load_fvec(const std::filesystem::path& path);
void save_fvec(const FeatureDataset& ds, const std::filesystem::path& path);

// Numeric CSV, last column = integer label. C is inferred as max label + 1;
// labels with no rows are permitted at load time (a warning is recorded) and
// rejected later by split/probe operations.
FeatureDataset load_csv(const std::filesystem::path& path, bool has_header,
                        std::vector<std::string>* warnings = nullptr);

// Row subset, preserving order of `indices`.
FeatureDataset take_rows(const FeatureDataset& ds, std::span<const std::int64_t> indices,
                         const std::string& name);

struct SubsetSpec {
  std::vector<std::int64_t> indices;  // sorted, unique, in range
  double k_per_class = 0;             // shots (k mode) or fraction (fraction mode)
  bool is_fraction = false;
  std::uint64_t seed = 0;
};

// Exactly k rows per class, drawn without replacement, deterministic in seed.
SubsetSpec stratified_kshot(const FeatureDataset& ds, std::int64_t k, std::uint64_t seed);

// Per-class ceil(frac * count) rows, deterministic in seed.
SubsetSpec stratified_fraction(const FeatureDataset& ds, double frac, std::uint64_t seed);

// Partition assignment for the four risk estimates. S_sub is drawn from the
// training rows stratified by class (largest-remainder allocation, so each
// class count is within 1 of proportional).
struct SplitPlan {
  std::int64_t sub_size = 0;
  std::uint64_t seed = 0;
  std::vector<std::int64_t> sub_indices;   // S_sub, sorted
  std::vector<std::int64_t> rest_indices;  // S_tr \ S_sub, sorted

  // Static role table: estimator -> (pretrain, train, eval) partition names.
  static std::vector<std::array<std::string, 4>> roles();
};

// sub_size <= 0 selects the default min(|test|, |train|/10).
SplitPlan make_split_plan(const FeatureDataset& train, const FeatureDataset& test,
                          std::int64_t sub_size, std::uint64_t seed);

std::int64_t default_sub_size(std::int64_t train_rows, std::int64_t test_rows);

// Stratified holdout used for regularization tuning: per-class
// ceil(frac * count) rows capped at count - 1 (singleton classes stay in the
// retained part). Returns (held_out, retained), both sorted.
std::pair<std::vector<std::int64_t>, std::vector<std::int64_t>> stratified_holdout(
    const FeatureDataset& ds, double frac, std::uint64_t seed);

}  // namespace riskdec
