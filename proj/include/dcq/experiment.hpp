#pragma once

// Experiment grids: one training run per value of a single config axis,
// sharing the seed and the generated data.

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dcq/trainer.hpp"

namespace dcq {

enum class GridAxis { K, alpha, sampling, method };

GridAxis parse_axis(const std::string& name);
std::string to_string(GridAxis axis);

/// `value` is parsed per axis. K accepts an absolute size or a fraction of the
/// class count written like "0.1C". Switching method resets s, m and lr0 to
/// that method's defaults.
TrainConfig apply_axis(const TrainConfig& base, GridAxis axis, const std::string& value);

struct GridRow {
  std::string value;
  TrainConfig config;
  EvalMetrics final_eval;
  std::vector<EpochMetrics> curve;
};

/// Rows follow the order of `values`. `experiment` may be shared with other
/// callers; when null it is built from `base`.
std::vector<GridRow> run_experiment_grid(const TrainConfig& base, const std::string& axis,
                                         const std::vector<std::string>& values, const Experiment* experiment = nullptr);

std::string grid_csv(const std::string& axis, const std::vector<GridRow>& rows);
nlohmann::json grid_json(const std::string& axis, const TrainConfig& base, const std::vector<GridRow>& rows);

}  // namespace dcq
