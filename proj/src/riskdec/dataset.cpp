#include "riskdec/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "riskdec/error.hpp"
#include "riskdec/rng.hpp"

namespace riskdec {

namespace {

constexpr std::uint8_t kMagic[4] = {0x46, 0x56, 0x45, 0x43};  // "FVEC"
constexpr std::uint8_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  put_u32(out, static_cast<std::uint32_t>(v & 0xffffffffu));
  put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

class ByteReader {
 public:
  ByteReader(const std::string& buf, const std::string& path) : buf_(buf), path_(path) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(buf_[pos_++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf_[pos_ + static_cast<std::size_t>(i)])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t lo = u32();
    std::uint64_t hi = u32();
    return lo | (hi << 32);
  }
  bool exhausted() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t k) {
    if (pos_ + k > buf_.size())
      throw Error::data("truncated payload in " + path_);
  }
  const std::string& buf_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

void FeatureDataset::validate() const {
  if (rows() < 1) throw Error::data("dataset '" + name + "': needs at least one row");
  if (dim() < 1) throw Error::data("dataset '" + name + "': needs at least one feature column");
  if (n_classes < 1) throw Error::data("dataset '" + name + "': needs at least one class");
  if (static_cast<std::int64_t>(labels.size()) != rows())
    throw Error::data("dataset '" + name + "': label count does not match row count");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= n_classes)
      throw Error::data("dataset '" + name + "': label " + std::to_string(labels[i]) +
                        " at row " + std::to_string(i) + " exceeds class count " +
                        std::to_string(n_classes));
  }
  if (!features.allFinite())
    throw Error::data("dataset '" + name + "': non-finite feature value");
}

std::vector<std::int64_t> FeatureDataset::class_counts() const {
  std::vector<std::int64_t> counts(n_classes, 0);
  for (std::uint32_t y : labels) ++counts[y];
  return counts;
}

FeatureDataset load_fvec(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error::data("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string buf = ss.str();

  ByteReader r(buf, path.string());
  for (int i = 0; i < 4; ++i) {
    if (r.u8() != kMagic[i]) throw Error::data("bad magic, not an FVEC file: " + path.string());
  }
  const std::uint8_t version = r.u8();
  if (version != kVersion)
    throw Error::data("unsupported FVEC version " + std::to_string(version) + " in " + path.string());
  const std::uint8_t dtype = r.u8();
  if (dtype > 1) throw Error::data("unsupported FVEC dtype " + std::to_string(dtype) + " in " + path.string());
  const std::uint32_t n = r.u32();
  const std::uint32_t d = r.u32();
  const std::uint32_t c = r.u32();

  FeatureDataset ds;
  ds.name = path.stem().string();
  ds.n_classes = c;
  ds.dtype = static_cast<FvecDtype>(dtype);
  ds.features.resize(n, d);
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t j = 0; j < d; ++j) {
      double v;
      if (ds.dtype == FvecDtype::f32) {
        std::uint32_t bits = r.u32();
        float f;
        std::memcpy(&f, &bits, sizeof(f));
        v = static_cast<double>(f);
      } else {
        std::uint64_t bits = r.u64();
        std::memcpy(&v, &bits, sizeof(v));
      }
      ds.features(i, j) = v;
    }
  }
  ds.labels.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) ds.labels[i] = r.u32();
  if (!r.exhausted()) throw Error::data("trailing bytes after payload in " + path.string());
  ds.validate();
  return ds;
}

void save_fvec(const FeatureDataset& ds, const std::filesystem::path& path) {
  ds.validate();
  std::string out;
  const std::uint32_t n = static_cast<std::uint32_t>(ds.rows());
  const std::uint32_t d = static_cast<std::uint32_t>(ds.dim());
  out.reserve(14 + static_cast<std::size_t>(n) * d * (ds.dtype == FvecDtype::f32 ? 4 : 8) + 4ull * n);
  for (std::uint8_t b : kMagic) out.push_back(static_cast<char>(b));
  out.push_back(static_cast<char>(kVersion));
  out.push_back(static_cast<char>(ds.dtype));
  put_u32(out, n);
  put_u32(out, d);
  put_u32(out, ds.n_classes);
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t j = 0; j < d; ++j) {
      if (ds.dtype == FvecDtype::f32) {
        float f = static_cast<float>(ds.features(i, j));
        std::uint32_t bits;
        std::memcpy(&bits, &f, sizeof(f));
        put_u32(out, bits);
      } else {
        double v = ds.features(i, j);
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof(v));
        put_u64(out, bits);
      }
    }
  }
  for (std::uint32_t i = 0; i < n; ++i) put_u32(out, ds.labels[i]);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error::data("cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error::data("short write to " + path.string());
}

FeatureDataset load_csv(const std::filesystem::path& path, bool has_header,
                        std::vector<std::string>* warnings) {
  std::ifstream in(path);
  if (!in) throw Error::data("cannot open " + path.string());

  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1 && has_header) continue;
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t start = 0;
    while (true) {
      std::size_t comma = line.find(',', start);
      std::string cell = line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      std::size_t consumed = 0;
      double v;
      try {
        v = std::stod(cell, &consumed);
      } catch (const std::exception&) {
        throw Error::data(path.string() + ":" + std::to_string(lineno) + ": non-numeric cell '" + cell + "'");
      }
      while (consumed < cell.size() && std::isspace(static_cast<unsigned char>(cell[consumed]))) ++consumed;
      if (consumed != cell.size())
        throw Error::data(path.string() + ":" + std::to_string(lineno) + ": non-numeric cell '" + cell + "'");
      row.push_back(v);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (width == 0) {
      width = row.size();
      if (width < 2)
        throw Error::data(path.string() + ": rows need at least one feature and a label column");
    } else if (row.size() != width) {
      throw Error::data(path.string() + ":" + std::to_string(lineno) + ": ragged row, expected " +
                        std::to_string(width) + " cells, got " + std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error::data(path.string() + ": no data rows");

  FeatureDataset ds;
  ds.name = path.stem().string();
  const std::int64_t n = static_cast<std::int64_t>(rows.size());
  const std::int64_t d = static_cast<std::int64_t>(width) - 1;
  ds.features.resize(n, d);
  ds.labels.resize(static_cast<std::size_t>(n));
  std::uint32_t max_label = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    for (std::int64_t j = 0; j < d; ++j) ds.features(i, j) = row[static_cast<std::size_t>(j)];
    double lab = row[static_cast<std::size_t>(d)];
    if (lab < 0 || lab != std::floor(lab) || lab > 4294967295.0)
      throw Error::data(path.string() + ": label '" + std::to_string(lab) +
                        "' at data row " + std::to_string(i) + " is not a non-negative integer");
    ds.labels[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(lab);
    max_label = std::max(max_label, ds.labels[static_cast<std::size_t>(i)]);
  }
  ds.n_classes = max_label + 1;
  ds.validate();

  if (warnings) {
    auto counts = ds.class_counts();
    for (std::uint32_t c = 0; c < ds.n_classes; ++c) {
      if (counts[c] == 0)
        warnings->push_back("class " + std::to_string(c) + " has no rows (classes inferred as max label + 1)");
    }
  }
  return ds;
}

FeatureDataset take_rows(const FeatureDataset& ds, std::span<const std::int64_t> indices,
                         const std::string& name) {
  FeatureDataset out;
  out.name = name;
  out.n_classes = ds.n_classes;
  out.dtype = ds.dtype;
  out.features.resize(static_cast<std::int64_t>(indices.size()), ds.dim());
  out.labels.resize(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    std::int64_t r = indices[i];
    if (r < 0 || r >= ds.rows())
      throw Error::usage("row index " + std::to_string(r) + " out of range for dataset '" + ds.name + "'");
    out.features.row(static_cast<std::int64_t>(i)) = ds.features.row(r);
    out.labels[i] = ds.labels[static_cast<std::size_t>(r)];
  }
  return out;
}

namespace {

std::vector<std::vector<std::int64_t>> rows_by_class(const FeatureDataset& ds) {
  std::vector<std::vector<std::int64_t>> by_class(ds.n_classes);
  for (std::int64_t i = 0; i < ds.rows(); ++i)
    by_class[ds.labels[static_cast<std::size_t>(i)]].push_back(i);
  return by_class;
}

}  // namespace

SubsetSpec stratified_kshot(const FeatureDataset& ds, std::int64_t k, std::uint64_t seed) {
  ds.validate();
  if (k < 1) throw Error::usage("shots per class must be >= 1");
  auto by_class = rows_by_class(ds);
  for (std::uint32_t c = 0; c < ds.n_classes; ++c) {
    if (static_cast<std::int64_t>(by_class[c].size()) < k)
      throw Error::data("class " + std::to_string(c) + " has " + std::to_string(by_class[c].size()) +
                        " rows, fewer than k=" + std::to_string(k));
  }
  Rng rng(derive_seed(seed, "kshot"));
  SubsetSpec spec;
  spec.k_per_class = static_cast<double>(k);
  spec.is_fraction = false;
  spec.seed = seed;
  for (std::uint32_t c = 0; c < ds.n_classes; ++c) {
    auto picks = rng.sample_without_replacement(static_cast<std::int64_t>(by_class[c].size()), k);
    for (std::int64_t p : picks) spec.indices.push_back(by_class[c][static_cast<std::size_t>(p)]);
  }
  std::sort(spec.indices.begin(), spec.indices.end());
  return spec;
}

SubsetSpec stratified_fraction(const FeatureDataset& ds, double frac, std::uint64_t seed) {
  ds.validate();
  if (!(frac > 0.0) || frac > 1.0) throw Error::usage("fraction must be in (0, 1]");
  auto by_class = rows_by_class(ds);
  for (std::uint32_t c = 0; c < ds.n_classes; ++c) {
    if (by_class[c].empty())
      throw Error::data("class " + std::to_string(c) + " has no rows; cannot subsample");
  }
  Rng rng(derive_seed(seed, "fraction"));
  SubsetSpec spec;
  spec.k_per_class = frac;
  spec.is_fraction = true;
  spec.seed = seed;
  for (std::uint32_t c = 0; c < ds.n_classes; ++c) {
    const std::int64_t n_c = static_cast<std::int64_t>(by_class[c].size());
    const std::int64_t take = std::min<std::int64_t>(
        n_c, static_cast<std::int64_t>(std::ceil(frac * static_cast<double>(n_c))));
    auto picks = rng.sample_without_replacement(n_c, take);
    for (std::int64_t p : picks) spec.indices.push_back(by_class[c][static_cast<std::size_t>(p)]);
  }
  std::sort(spec.indices.begin(), spec.indices.end());
  return spec;
}

std::int64_t default_sub_size(std::int64_t train_rows, std::int64_t test_rows) {
  return std::min(test_rows, train_rows / 10);
}

std::vector<std::array<std::string, 4>> SplitPlan::roles() {
  return {
      {"hr_US", "S_tr", "S_tr", "S_te"},
      {"hr_AS", "S_tr", "S_tr\\S_sub", "S_sub"},
      {"hr_AF", "S_tr", "S_tr", "S_tr"},
      {"hr_FF", "S_tr", "S_tr", "S_tr (supervised reference)"},
  };
}

SplitPlan make_split_plan(const FeatureDataset& train, const FeatureDataset& test,
                          std::int64_t sub_size, std::uint64_t seed) {
  train.validate();
  test.validate();
  if (sub_size <= 0) sub_size = default_sub_size(train.rows(), test.rows());
  if (sub_size < 1)
    throw Error::data("subset size resolved to " + std::to_string(sub_size) +
                      "; training set too small to carve a probe-evaluation subset");
  if (sub_size >= train.rows())
    throw Error::data("subset size " + std::to_string(sub_size) +
                      " would leave no training rows (train has " + std::to_string(train.rows()) + ")");

  auto by_class = rows_by_class(train);
  const std::int64_t n = train.rows();
  const std::uint32_t c_count = train.n_classes;
  for (std::uint32_t c = 0; c < c_count; ++c) {
    if (by_class[c].empty())
      throw Error::data("class " + std::to_string(c) + " has no training rows; cannot build split plan");
  }

  // Largest-remainder allocation of sub_size across classes.
  std::vector<std::int64_t> alloc(c_count, 0);
  std::vector<std::pair<double, std::uint32_t>> rema;
  std::int64_t assigned = 0;
  for (std::uint32_t c = 0; c < c_count; ++c) {
    double quota = static_cast<double>(sub_size) * static_cast<double>(by_class[c].size()) /
                   static_cast<double>(n);
    alloc[c] = static_cast<std::int64_t>(std::floor(quota));
    alloc[c] = std::min(alloc[c], static_cast<std::int64_t>(by_class[c].size()));
    assigned += alloc[c];
    rema.emplace_back(quota - std::floor(quota), c);
  }
  std::sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::int64_t remaining = sub_size - assigned;
  while (remaining > 0) {
    bool progressed = false;
    for (const auto& [frac, c] : rema) {
      if (remaining == 0) break;
      if (alloc[c] < static_cast<std::int64_t>(by_class[c].size())) {
        ++alloc[c];
        --remaining;
        progressed = true;
      }
    }
    if (!progressed) break;
  }

  Rng rng(derive_seed(seed, "split-plan"));
  SplitPlan plan;
  plan.sub_size = sub_size;
  plan.seed = seed;
  for (std::uint32_t c = 0; c < c_count; ++c) {
    auto picks = rng.sample_without_replacement(static_cast<std::int64_t>(by_class[c].size()), alloc[c]);
    for (std::int64_t p : picks) plan.sub_indices.push_back(by_class[c][static_cast<std::size_t>(p)]);
  }
  std::sort(plan.sub_indices.begin(), plan.sub_indices.end());

  std::vector<char> in_sub(static_cast<std::size_t>(n), 0);
  for (std::int64_t i : plan.sub_indices) in_sub[static_cast<std::size_t>(i)] = 1;
  for (std::int64_t i = 0; i < n; ++i) {
    if (!in_sub[static_cast<std::size_t>(i)]) plan.rest_indices.push_back(i);
  }
  return plan;
}

std::pair<std::vector<std::int64_t>, std::vector<std::int64_t>> stratified_holdout(
    const FeatureDataset& ds, double frac, std::uint64_t seed) {
  ds.validate();
  if (!(frac > 0.0) || frac >= 1.0) throw Error::usage("holdout fraction must be in (0, 1)");
  auto by_class = rows_by_class(ds);
  Rng rng(derive_seed(seed, "holdout"));
  std::vector<std::int64_t> held;
  for (std::uint32_t c = 0; c < ds.n_classes; ++c) {
    const std::int64_t n_c = static_cast<std::int64_t>(by_class[c].size());
    if (n_c < 2) continue;  // singleton classes stay in the retained part
    std::int64_t take = static_cast<std::int64_t>(std::ceil(frac * static_cast<double>(n_c)));
    take = std::min(take, n_c - 1);
    auto picks = rng.sample_without_replacement(n_c, take);
    for (std::int64_t p : picks) held.push_back(by_class[c][static_cast<std::size_t>(p)]);
  }
  std::sort(held.begin(), held.end());
  std::vector<char> is_held(static_cast<std::size_t>(ds.rows()), 0);
  for (std::int64_t i : held) is_held[static_cast<std::size_t>(i)] = 1;
  std::vector<std::int64_t> retained;
  for (std::int64_t i = 0; i < ds.rows(); ++i) {
    if (!is_held[static_cast<std::size_t>(i)]) retained.push_back(i);
  }
  return {held, retained};
}

}  // namespace riskdec
