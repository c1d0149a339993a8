#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "riskdec/jsonio.hpp"

namespace riskdec {

// Per-model metric table for summary charts. Values are raw metrics where
// lower is better (risks); normalization flips them so the best model scores
// 1 and the worst 0 on every axis.
struct MetricTable {
  std::vector<std::string> metrics;
  std::vector<std::string> models;
  std::vector<std::vector<double>> values;  // models x metrics
};

struct NormalizedTable {
  std::vector<std::string> metrics;  // constant columns removed
  std::vector<std::string> models;
  std::vector<std::vector<double>> values;
  std::vector<std::string> dropped;  // constant metric columns, with warning text
};

// value -> 1 - (v - min) / (max - min), per metric column.
NormalizedTable radar_normalize(const MetricTable& table);

MetricTable metric_table_from_json(const json& j);
json normalized_table_to_json(const NormalizedTable& table);

// Append-only directory of JSON result documents keyed by
// (command, encoder id, resolved-config hash). Re-running an identical
// resolved config is a cache hit unless forced.
class ResultStore {
 public:
  explicit ResultStore(std::filesystem::path dir);

  struct PutResult {
    std::filesystem::path path;
    bool was_cached = false;
  };

  PutResult put(const std::string& command, const std::string& encoder_id,
                const json& resolved_config, const json& result, bool force);

  struct Document {
    std::string command;
    std::string encoder_id;
    json config;
    json result;
    std::filesystem::path path;
  };

  std::vector<Document> list() const;

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

// Report bundle: per-model component CSV, radar JSON, scaling-law
// observation export, and the (usability, probe_gen) frontier CSV.
struct ReportPaths {
  std::filesystem::path components_csv;
  std::filesystem::path radar_json;
  std::filesystem::path scaling_obs_json;
  std::filesystem::path frontier_csv;
};

ReportPaths write_report_bundle(const ResultStore& store, const std::filesystem::path& out_dir);

}  // namespace riskdec
