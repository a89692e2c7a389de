#pragma once

// Metrics tables and run manifests.

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dcq/trainer.hpp"

namespace dcq {

inline constexpr const char* kMetricsHeader = "epoch,lr,train_loss,ver_acc,id_rank1,wall_seconds";
inline constexpr const char* kToolVersion = "0.1.0";

/// 17 significant digits, enough to round-trip any double.
std::string format_double(double v);

std::string metrics_csv(const std::vector<EpochMetrics>& rows);
std::vector<EpochMetrics> parse_metrics_csv(const std::string& text);
/// Columns as arrays; NaN becomes null.
nlohmann::json metrics_json(const std::vector<EpochMetrics>& rows);
std::vector<EpochMetrics> parse_metrics_json(const nlohmann::json& j);

enum class MetricsFormat { csv, json };
MetricsFormat parse_metrics_format(const std::string& s);
void write_metrics(const std::vector<EpochMetrics>& rows, const std::string& path, MetricsFormat format);

/// Resolved config, seed, tool version, output directory, timestamps.
struct RunManifest {
  TrainConfig config;
  std::vector<std::string> overrides;
  std::string output_dir;
  std::string started_at;
  std::string finished_at;
};

nlohmann::json to_json(const RunManifest& m);
/// Accepts either a manifest (config under "config") or a bare config object.
nlohmann::json config_section(const nlohmann::json& j);

std::string utc_timestamp();

}  // namespace dcq
