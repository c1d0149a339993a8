#include <doctest.h>

#include <fstream>
#include <map>
#include <set>

#include "riskdec/dataset.hpp"
#include "riskdec/error.hpp"
#include "test_util.hpp"

using namespace riskdec;
using testutil::make_dataset;
using testutil::temp_path;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("fvec round trip is bit exact") {
  auto ds = make_dataset({{1.0, 2.0, 3.0}, {4.5, -6.25, 0.125}}, {0, 1}, 2);
  SUBCASE("f64") { ds.dtype = FvecDtype::f64; }
  SUBCASE("f32") { ds.dtype = FvecDtype::f32; }
  auto path = temp_path("roundtrip");
  save_fvec(ds, path);
  auto loaded = load_fvec(path);
  CHECK(loaded.rows() == 2);
  CHECK(loaded.dim() == 3);
  CHECK(loaded.n_classes == 2);
  CHECK(loaded.labels == ds.labels);
  // Save the loaded copy again: identical bytes.
  auto path2 = temp_path("roundtrip2");
  save_fvec(loaded, path2);
  CHECK(slurp(path) == slurp(path2));
  std::filesystem::remove(path);
  std::filesystem::remove(path2);
}

TEST_CASE("fvec f32 file for a 2x3 dataset is exactly 50 bytes") {
  // 4 magic + 1 version + 1 dtype + 12 header + 24 payload + 8 labels
  auto ds = make_dataset({{1, 2, 3}, {4, 5, 6}}, {0, 1}, 2);
  ds.dtype = FvecDtype::f32;
  auto path = temp_path("bytes32");
  save_fvec(ds, path);
  CHECK(std::filesystem::file_size(path) == 50);
  // f64 payload doubles: 24 -> 48, total 74.
  ds.dtype = FvecDtype::f64;
  save_fvec(ds, path);
  CHECK(std::filesystem::file_size(path) == 74);
  std::filesystem::remove(path);
}

TEST_CASE("fvec loader rejects bad magic, bad label, truncation") {
  auto ds = make_dataset({{1, 2, 3}, {4, 5, 6}}, {0, 1}, 2);
  ds.dtype = FvecDtype::f32;
  auto path = temp_path("reject");
  save_fvec(ds, path);
  std::string bytes = slurp(path);

  auto write_bytes = [&](const std::string& b) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << b;
  };

  SUBCASE("bad magic") {
    std::string b = bytes;
    b[0] = 'X';
    write_bytes(b);
    CHECK_THROWS_WITH_AS(load_fvec(path), doctest::Contains("bad magic"), Error);
  }
  SUBCASE("bad version") {
    std::string b = bytes;
    b[4] = 9;
    write_bytes(b);
    CHECK_THROWS_WITH_AS(load_fvec(path), doctest::Contains("version"), Error);
  }
  SUBCASE("bad dtype") {
    std::string b = bytes;
    b[5] = 7;
    write_bytes(b);
    CHECK_THROWS_WITH_AS(load_fvec(path), doctest::Contains("dtype"), Error);
  }
  SUBCASE("label out of range") {
    std::string b = bytes;
    b[b.size() - 4] = 5;  // second label -> 5 with C=2
    write_bytes(b);
    CHECK_THROWS_WITH_AS(load_fvec(path), doctest::Contains("exceeds class count"), Error);
  }
  SUBCASE("truncated payload") {
    write_bytes(bytes.substr(0, bytes.size() - 5));
    CHECK_THROWS_WITH_AS(load_fvec(path), doctest::Contains("truncated"), Error);
  }
  std::filesystem::remove(path);
}

TEST_CASE("dataset invariants") {
  auto ds = make_dataset({{1, 2}}, {0}, 1);
  CHECK_NOTHROW(ds.validate());
  SUBCASE("d = 0 rejected") {
    ds.features.resize(1, 0);
    CHECK_THROWS_AS(ds.validate(), Error);
  }
  SUBCASE("non-finite rejected") {
    ds.features(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(ds.validate(), Error);
  }
  SUBCASE("label/row mismatch rejected") {
    ds.labels.push_back(0);
    CHECK_THROWS_AS(ds.validate(), Error);
  }
}

TEST_CASE("csv loader") {
  auto path = temp_path("csv");
  SUBCASE("basic two rows") {
    std::ofstream(path) << "1.0,2.0,0\n3.0,4.0,1\n";
    auto ds = load_csv(path, false);
    CHECK(ds.rows() == 2);
    CHECK(ds.dim() == 2);
    CHECK(ds.n_classes == 2);
    CHECK(ds.features(1, 0) == 3.0);
  }
  SUBCASE("header skipped") {
    std::ofstream(path) << "a,b,label\n1.0,2.0,0\n";
    auto ds = load_csv(path, true);
    CHECK(ds.rows() == 1);
  }
  SUBCASE("ragged row is a parse error") {
    std::ofstream(path) << "1,2,3,0\n1,2,0\n";
    CHECK_THROWS_WITH_AS(load_csv(path, false), doctest::Contains("ragged"), Error);
  }
  SUBCASE("non-numeric cell is a parse error") {
    std::ofstream(path) << "1,x,0\n";
    CHECK_THROWS_WITH_AS(load_csv(path, false), doctest::Contains("non-numeric"), Error);
  }
  SUBCASE("gap in labels infers C = max + 1 and warns") {
    std::ofstream(path) << "1,2,0\n3,4,2\n";
    std::vector<std::string> warnings;
    auto ds = load_csv(path, false, &warnings);
    CHECK(ds.n_classes == 3);
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("class 1") != std::string::npos);
  }
  std::filesystem::remove(path);
}

namespace {

FeatureDataset balanced_dataset(std::int64_t n, std::uint32_t c) {
  std::vector<std::vector<double>> rows;
  std::vector<std::uint32_t> labels;
  for (std::int64_t i = 0; i < n; ++i) {
    rows.push_back({static_cast<double>(i), static_cast<double>(i % 7)});
    labels.push_back(static_cast<std::uint32_t>(i) % c);
  }
  return make_dataset(rows, labels, c);
}

}  // namespace

TEST_CASE("split plan follows the partition algebra") {
  auto train = balanced_dataset(100, 5);
  auto test = balanced_dataset(10, 5);
  auto plan = make_split_plan(train, test, 0, 7);
  // Default carve size: min(|test|, |train|/10) = 10.
  CHECK(plan.sub_size == 10);
  CHECK(plan.sub_indices.size() == 10);
  CHECK(plan.rest_indices.size() == 90);

  std::set<std::int64_t> all(plan.sub_indices.begin(), plan.sub_indices.end());
  all.insert(plan.rest_indices.begin(), plan.rest_indices.end());
  CHECK(all.size() == 100);
  CHECK(*all.begin() == 0);
  CHECK(*all.rbegin() == 99);

  SUBCASE("same seed, same subset") {
    auto plan2 = make_split_plan(train, test, 0, 7);
    CHECK(plan2.sub_indices == plan.sub_indices);
  }
  SUBCASE("different seed, different subset") {
    auto plan2 = make_split_plan(train, test, 0, 8);
    CHECK(plan2.sub_indices != plan.sub_indices);
  }
  SUBCASE("stratification within 1 of proportional") {
    // 100 rows, 5 equal classes, carve 10 -> exactly 2 per class.
    std::map<std::uint32_t, int> counts;
    for (auto i : plan.sub_indices) ++counts[train.labels[static_cast<std::size_t>(i)]];
    for (auto& [c, k] : counts) CHECK(k == 2);
  }
}

TEST_CASE("split plan rejects degenerate requests") {
  auto train = balanced_dataset(20, 2);
  auto test = balanced_dataset(4, 2);
  CHECK_THROWS_AS(make_split_plan(train, test, 20, 1), Error);   // leaves nothing
  CHECK_THROWS_AS(make_split_plan(train, test, 21, 1), Error);   // exceeds train
  auto gap = balanced_dataset(20, 2);
  gap.n_classes = 3;  // class 2 exists but has no rows
  CHECK_THROWS_WITH_AS(make_split_plan(gap, test, 4, 1), doctest::Contains("class 2"), Error);
}

TEST_CASE("stratified k-shot sampling") {
  auto ds = balanced_dataset(100, 10);
  auto spec = stratified_kshot(ds, 3, 42);
  CHECK(spec.indices.size() == 30);
  std::map<std::uint32_t, int> counts;
  for (auto i : spec.indices) ++counts[ds.labels[static_cast<std::size_t>(i)]];
  for (auto& [c, k] : counts) CHECK(k == 3);

  SUBCASE("deterministic in seed") {
    CHECK(stratified_kshot(ds, 3, 42).indices == spec.indices);
    CHECK(stratified_kshot(ds, 3, 43).indices != spec.indices);
  }
  SUBCASE("k equal to the minimum class size takes the whole class") {
    auto small = make_dataset({{0, 0}, {1, 0}, {2, 0}, {3, 0}, {4, 0}},
                              {0, 0, 0, 1, 1}, 2);
    auto s = stratified_kshot(small, 2, 0);
    int class1 = 0;
    for (auto i : s.indices)
      if (small.labels[static_cast<std::size_t>(i)] == 1) ++class1;
    CHECK(class1 == 2);
  }
  SUBCASE("class below k errors naming the class") {
    auto lop = make_dataset({{0, 0}, {1, 0}, {2, 0}, {3, 0}, {4, 0}, {5, 0}, {6, 0}},
                            {0, 0, 0, 0, 0, 1, 1}, 2);
    CHECK_THROWS_WITH_AS(stratified_kshot(lop, 3, 0), doctest::Contains("class 1"), Error);
  }
}

TEST_CASE("stratified fraction uses per-class ceil") {
  auto ds = balanced_dataset(100, 10);
  auto spec = stratified_fraction(ds, 0.01, 3);
  CHECK(spec.indices.size() == 10);  // ceil(0.01 * 10) = 1 per class
  auto half = stratified_fraction(ds, 0.5, 3);
  CHECK(half.indices.size() == 50);
}

TEST_CASE("stratified holdout keeps singleton classes in the retained part") {
  auto ds = make_dataset({{0, 0}, {1, 0}, {2, 0}, {3, 0}, {4, 0}}, {0, 0, 0, 0, 1}, 2);
  auto [held, retained] = stratified_holdout(ds, 0.25, 0);
  for (auto i : held) CHECK(ds.labels[static_cast<std::size_t>(i)] == 0);
  CHECK(held.size() + retained.size() == 5);
  CHECK(!held.empty());
}
