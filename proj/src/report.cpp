#include "dcq/report.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <sstream>

#include "dcq/binary_io.hpp"

namespace dcq {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string metrics_csv(const std::vector<EpochMetrics>& rows) {
  std::string out = std::string(kMetricsHeader) + "\n";
  for (const auto& r : rows) {
    out += std::to_string(r.epoch) + ',' + format_double(r.lr) + ',' + format_double(r.train_loss) + ',' +
           format_double(r.ver_acc) + ',' + format_double(r.id_rank1) + ',' + format_double(r.wall_seconds) + '\n';
  }
  return out;
}

std::vector<EpochMetrics> parse_metrics_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) throw ConfigError("metrics CSV header mismatch");
  std::vector<EpochMetrics> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(fields, cell, ',')) cells.push_back(cell);
    if (cells.size() != 6) throw ConfigError("metrics CSV row must have 6 columns: " + line);
    EpochMetrics m;
    m.epoch = std::stoi(cells[0]);
    m.lr = std::strtod(cells[1].c_str(), nullptr);
    m.train_loss = std::strtod(cells[2].c_str(), nullptr);
    m.ver_acc = std::strtod(cells[3].c_str(), nullptr);
    m.id_rank1 = std::strtod(cells[4].c_str(), nullptr);
    m.wall_seconds = std::strtod(cells[5].c_str(), nullptr);
    rows.push_back(m);
  }
  return rows;
}

namespace {

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }
double number_or_nan(const nlohmann::json& j) { return j.is_null() ? std::nan("") : j.get<double>(); }

}  // namespace

nlohmann::json metrics_json(const std::vector<EpochMetrics>& rows) {
  nlohmann::json j = {{"epoch", nlohmann::json::array()},    {"lr", nlohmann::json::array()},
                      {"train_loss", nlohmann::json::array()}, {"ver_acc", nlohmann::json::array()},
                      {"id_rank1", nlohmann::json::array()},   {"wall_seconds", nlohmann::json::array()}};
  for (const auto& r : rows) {
    j["epoch"].push_back(r.epoch);
    j["lr"].push_back(number_or_null(r.lr));
    j["train_loss"].push_back(number_or_null(r.train_loss));
    j["ver_acc"].push_back(number_or_null(r.ver_acc));
    j["id_rank1"].push_back(number_or_null(r.id_rank1));
    j["wall_seconds"].push_back(number_or_null(r.wall_seconds));
  }
  return j;
}

std::vector<EpochMetrics> parse_metrics_json(const nlohmann::json& j) {
  std::vector<EpochMetrics> rows(j.at("epoch").size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].epoch = j.at("epoch").at(i).get<int>();
    rows[i].lr = number_or_nan(j.at("lr").at(i));
    rows[i].train_loss = number_or_nan(j.at("train_loss").at(i));
    rows[i].ver_acc = number_or_nan(j.at("ver_acc").at(i));
    rows[i].id_rank1 = number_or_nan(j.at("id_rank1").at(i));
    rows[i].wall_seconds = number_or_nan(j.at("wall_seconds").at(i));
  }
  return rows;
}

MetricsFormat parse_metrics_format(const std::string& s) {
  if (s == "csv") return MetricsFormat::csv;
  if (s == "json") return MetricsFormat::json;
  throw ConfigError("metrics format must be csv or json");
}

void write_metrics(const std::vector<EpochMetrics>& rows, const std::string& path, MetricsFormat format) {
  const std::string text = format == MetricsFormat::csv ? metrics_csv(rows) : metrics_json(rows).dump(2) + "\n";
  write_file_atomic(path, text);
}

nlohmann::json to_json(const RunManifest& m) {
  return {{"tool", "dcq"},
          {"tool_version", kToolVersion},
          {"seed", m.config.seed},
          {"config", to_json(m.config)},
          {"overrides", m.overrides},
          {"output_dir", m.output_dir},
          {"started_at", m.started_at},
          {"finished_at", m.finished_at}};
}

nlohmann::json config_section(const nlohmann::json& j) {
  if (j.is_object() && j.contains("config") && j.at("config").is_object()) return j.at("config");
  return j;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

}  // namespace dcq
