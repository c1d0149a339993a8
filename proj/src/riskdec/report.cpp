#include "riskdec/report.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "riskdec/error.hpp"

namespace riskdec {

NormalizedTable radar_normalize(const MetricTable& table) {
  if (table.models.size() < 2)
    throw Error::data("radar normalization needs at least 2 models");
  for (const auto& row : table.values) {
    if (row.size() != table.metrics.size())
      throw Error::usage("metric table is ragged");
  }
  NormalizedTable out;
  out.models = table.models;
  for (std::size_t m = 0; m < table.metrics.size(); ++m) {
    double lo = table.values[0][m], hi = table.values[0][m];
    for (const auto& row : table.values) {
      lo = std::min(lo, row[m]);
      hi = std::max(hi, row[m]);
    }
    if (hi == lo) {
      out.dropped.push_back("metric '" + table.metrics[m] + "' is constant; column dropped");
      continue;
    }
    out.metrics.push_back(table.metrics[m]);
    for (std::size_t i = 0; i < table.models.size(); ++i) {
      if (out.values.size() <= i) out.values.emplace_back();
      out.values[i].push_back(1.0 - (table.values[i][m] - lo) / (hi - lo));
    }
  }
  if (out.metrics.empty()) throw Error::data("radar normalization: every metric column is constant");
  return out;
}

MetricTable metric_table_from_json(const json& j) {
  MetricTable table;
  table.metrics = j.at("metrics").get<std::vector<std::string>>();
  for (const auto& model : j.at("models")) {
    table.models.push_back(model.at("id").get<std::string>());
    table.values.push_back(model.at("values").get<std::vector<double>>());
  }
  return table;
}

json normalized_table_to_json(const NormalizedTable& table) {
  json models = json::array();
  for (std::size_t i = 0; i < table.models.size(); ++i) {
    models.push_back({{"id", table.models[i]}, {"values", table.values[i]}});
  }
  json j;
  j["metrics"] = table.metrics;
  j["models"] = std::move(models);
  j["dropped"] = table.dropped;
  return j;
}

ResultStore::ResultStore(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

ResultStore::PutResult ResultStore::put(const std::string& command, const std::string& encoder_id,
                                        const json& resolved_config, const json& result,
                                        bool force) {
  std::string safe_id = encoder_id;
  for (char& c : safe_id) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
  }
  const std::string hash = content_hash(resolved_config.dump());
  const std::filesystem::path path = dir_ / (command + "__" + safe_id + "__" + hash + ".json");

  PutResult out;
  out.path = path;
  if (!force && std::filesystem::exists(path)) {
    out.was_cached = true;
    return out;
  }
  json doc;
  doc["command"] = command;
  doc["encoder"] = encoder_id;
  doc["config"] = resolved_config;
  doc["result"] = result;
  write_text_file_atomic(path, doc.dump(2) + "\n");
  return out;
}

std::vector<ResultStore::Document> ResultStore::list() const {
  std::vector<Document> docs;
  if (!std::filesystem::exists(dir_)) return docs;
  std::vector<std::filesystem::path> paths;
  for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
    if (entry.path().extension() == ".json") paths.push_back(entry.path());
  }
  std::sort(paths.begin(), paths.end());
  for (const auto& path : paths) {
    json j = read_json_file(path);
    Document doc;
    doc.command = j.value("command", "");
    doc.encoder_id = j.value("encoder", "");
    doc.config = j.value("config", json::object());
    doc.result = j.value("result", json::object());
    doc.path = path;
    docs.push_back(std::move(doc));
  }
  return docs;
}

namespace {

std::string csv_number(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return "";
  std::ostringstream ss;
  ss.precision(17);
  ss << j.at(key).get<double>();
  return ss.str();
}

std::string setting_column_name(const std::string& label) {
  std::string out = "setting_";
  for (char c : label) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      out += c;
    } else if (c == '%') {
      out += "pct";
    }
  }
  return out;
}

}  // namespace

ReportPaths write_report_bundle(const ResultStore& store, const std::filesystem::path& out_dir) {
  auto docs = store.list();
  if (docs.empty()) throw Error::usage("result store is empty; nothing to report");
  std::filesystem::create_directories(out_dir);

  // Collate per-encoder documents. The newest decompose/fewshot document per
  // encoder wins (list() is sorted, so later hashes are deterministic ties).
  std::map<std::string, json> decompose_by_encoder;
  std::map<std::string, json> fewshot_by_encoder;
  for (const auto& doc : docs) {
    if (doc.command == "decompose") decompose_by_encoder[doc.encoder_id] = doc.result;
    if (doc.command == "fewshot") fewshot_by_encoder[doc.encoder_id] = doc.result;
  }
  if (decompose_by_encoder.empty())
    throw Error::usage("result store holds no decomposition documents");

  // Fixed setting column order: the defaults first, then anything else seen.
  std::vector<std::string> setting_labels = {"full", "30-shot", "1%", "5-shot", "3-shot"};
  std::set<std::string> known(setting_labels.begin(), setting_labels.end());
  for (const auto& [enc, result] : fewshot_by_encoder) {
    for (const auto& row : result.at("settings")) {
      const std::string label = row.at("setting").get<std::string>();
      if (known.insert(label).second) setting_labels.push_back(label);
    }
  }

  ReportPaths paths;
  paths.components_csv = out_dir / "components.csv";
  paths.radar_json = out_dir / "radar.json";
  paths.scaling_obs_json = out_dir / "scaling_obs.json";
  paths.frontier_csv = out_dir / "frontier.csv";

  // (a) per-model component table. Metadata columns stay empty unless the
  // stored config carried them; they keep the schema aligned with tables for
  // real encoders.
  {
    std::ostringstream csv;
    csv << "encoder,objective,architecture,epochs,hr_FF,hr_AF,hr_AS,hr_US,approx,usability,"
           "probe_gen,encoder_gen,bayes_risk,total";
    for (const auto& label : setting_labels) csv << "," << setting_column_name(label);
    csv << "\n";
    for (const auto& [enc, result] : decompose_by_encoder) {
      csv << enc << ",,," << "";
      for (const char* key : {"hr_FF", "hr_AF", "hr_AS", "hr_US", "approx", "usability",
                              "probe_gen", "encoder_gen", "bayes_risk", "total"})
        csv << "," << csv_number(result, key);
      auto few = fewshot_by_encoder.find(enc);
      for (const auto& label : setting_labels) {
        csv << ",";
        if (few == fewshot_by_encoder.end()) continue;
        for (const auto& row : few->second.at("settings")) {
          if (row.at("setting").get<std::string>() == label && row.value("feasible", false)) {
            std::ostringstream num;
            num.precision(17);
            num << row.at("mean_risk").get<double>();
            csv << num.str();
            break;
          }
        }
      }
      csv << "\n";
    }
    write_text_file_atomic(paths.components_csv, csv.str());
  }

  // (b) radar JSON over the four components plus total risk.
  {
    MetricTable table;
    table.metrics = {"approx", "usability", "probe_gen", "encoder_gen", "total"};
    for (const auto& [enc, result] : decompose_by_encoder) {
      table.models.push_back(enc);
      std::vector<double> row;
      for (const auto& m : table.metrics) row.push_back(result.at(m).get<double>());
      table.values.push_back(std::move(row));
    }
    json radar;
    if (table.models.size() >= 2) {
      try {
        radar = normalized_table_to_json(radar_normalize(table));
      } catch (const Error& e) {
        radar = {{"metrics", json::array()}, {"models", json::array()},
                 {"dropped", json::array({std::string(e.what())})}};
      }
    } else {
      radar = {{"metrics", json::array()}, {"models", json::array()},
               {"dropped", json::array({"fewer than 2 models; normalization skipped"})}};
    }
    write_text_file_atomic(paths.radar_json, radar.dump(2) + "\n");
  }

  // (c) scaling-law observation export: one observation per encoder per
  // feasible few-shot setting with a known training count.
  {
    json obs = json::array();
    for (const auto& [enc, result] : decompose_by_encoder) {
      auto few = fewshot_by_encoder.find(enc);
      if (few == fewshot_by_encoder.end()) continue;
      const double n_full = few->second.value("train_rows", 0.0);
      if (n_full <= 0) continue;
      for (const auto& row : few->second.at("settings")) {
        if (!row.value("feasible", false)) continue;
        const double n = row.value("train_rows_used", 0.0);
        if (n <= 0) continue;
        json o;
        o["encoder"] = enc;
        o["components"] = {{"approx", result.at("approx").get<double>()},
                           {"encoder_gen", result.at("encoder_gen").get<double>()},
                           {"usability", result.at("usability").get<double>()},
                           {"probe_gen", result.at("probe_gen").get<double>()}};
        o["N"] = n_full;
        o["n"] = n;
        o["observed_risk"] = row.at("mean_risk").get<double>();
        obs.push_back(std::move(o));
      }
    }
    write_text_file_atomic(paths.scaling_obs_json, obs.dump(2) + "\n");
  }

  // (d) tradeoff frontier, fixed column order (usability, probe_gen).
  {
    std::ostringstream csv;
    csv << "encoder,usability,probe_gen\n";
    for (const auto& [enc, result] : decompose_by_encoder) {
      std::ostringstream u, p;
      u.precision(17);
      p.precision(17);
      u << result.at("usability").get<double>();
      p << result.at("probe_gen").get<double>();
      csv << enc << "," << u.str() << "," << p.str() << "\n";
    }
    write_text_file_atomic(paths.frontier_csv, csv.str());
  }
  return paths;
}

}  // namespace riskdec
