#include "dcq/experiment.hpp"

#include <cmath>
#include <sstream>

#include "dcq/report.hpp"

namespace dcq {

GridAxis parse_axis(const std::string& name) {
  if (name == "K") return GridAxis::K;
  if (name == "alpha") return GridAxis::alpha;
  if (name == "sampling") return GridAxis::sampling;
  if (name == "method") return GridAxis::method;
  throw ConfigError("invalid grid axis '" + name + "' (K, alpha, sampling, method)");
}

std::string to_string(GridAxis axis) {
  switch (axis) {
    case GridAxis::K: return "K";
    case GridAxis::alpha: return "alpha";
    case GridAxis::sampling: return "sampling";
    case GridAxis::method: return "method";
  }
  return "?";
}

namespace {

double parse_number(const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw ConfigError("expected a number, got '" + text + "'");
  }
  if (used != text.size()) throw ConfigError("expected a number, got '" + text + "'");
  return v;
}

}  // namespace

TrainConfig apply_axis(const TrainConfig& base, GridAxis axis, const std::string& value) {
  TrainConfig c = base;
  switch (axis) {
    case GridAxis::K:
      if (!value.empty() && value.back() == 'C') {
        const std::string factor = value.substr(0, value.size() - 1);
        const double f = factor.empty() ? 1.0 : parse_number(factor);
        c.K = static_cast<Index>(std::llround(f * static_cast<double>(c.C)));
      } else {
        c.K = static_cast<Index>(std::llround(parse_number(value)));
      }
      break;
    case GridAxis::alpha:
      c.alpha = parse_number(value);
      break;
    case GridAxis::sampling:
      c.sampling = parse_sampling(value);
      break;
    case GridAxis::method: {
      const TrainConfig d = default_config(parse_method(value));
      c.method = d.method;
      c.s = d.s;
      c.m = d.m;
      c.lr0 = d.lr0;
      break;
    }
  }
  c.validate();
  return c;
}

std::vector<GridRow> run_experiment_grid(const TrainConfig& base, const std::string& axis_name,
                                         const std::vector<std::string>& values, const Experiment* experiment) {
  const GridAxis axis = parse_axis(axis_name);
  std::vector<TrainConfig> configs;
  for (const auto& v : values) configs.push_back(apply_axis(base, axis, v));
  Experiment owned;
  if (experiment == nullptr) {
    owned = build_experiment(base);
    experiment = &owned;
  }
  std::vector<GridRow> rows;
  for (std::size_t i = 0; i < values.size(); ++i) {
    TrainResult r = run_training(configs[i], *experiment);
    rows.push_back({values[i], configs[i], r.final_eval, std::move(r.state.history)});
  }
  return rows;
}

std::string grid_csv(const std::string& axis, const std::vector<GridRow>& rows) {
  std::ostringstream os;
  os << "axis,value,ver_acc,id_rank1,tail_rank1,final_train_loss\n";
  for (const auto& r : rows) {
    const double loss = r.curve.empty() ? 0.0 : r.curve.back().train_loss;
    os << axis << ',' << r.value << ',' << format_double(r.final_eval.ver_acc) << ','
       << format_double(r.final_eval.id_rank1) << ',' << format_double(r.final_eval.tail_rank1) << ','
       << format_double(loss) << '\n';
  }
  return os.str();
}

nlohmann::json grid_json(const std::string& axis, const TrainConfig& base, const std::vector<GridRow>& rows) {
  nlohmann::json out;
  out["axis"] = axis;
  out["base_config"] = to_json(base);
  out["rows"] = nlohmann::json::array();
  for (const auto& r : rows) {
    out["rows"].push_back({{"value", r.value},
                           {"config", to_json(r.config)},
                           {"ver_acc", r.final_eval.ver_acc},
                           {"id_rank1", r.final_eval.id_rank1},
                           {"tail_rank1", std::isnan(r.final_eval.tail_rank1) ? nlohmann::json(nullptr)
                                                                              : nlohmann::json(r.final_eval.tail_rank1)},
                           {"curve", metrics_json(r.curve)}});
  }
  return out;
}

}  // namespace dcq
