#include "dcq/config.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "dcq/errors.hpp"

namespace dcq {

std::string to_string(Method m) {
  switch (m) {
    case Method::dcq: return "dcq";
    case Method::cosface_full: return "cosface-full";
    case Method::cosface_head_only: return "cosface-head-only";
  }
  return "?";
}

Method parse_method(const std::string& s) {
  if (s == "dcq") return Method::dcq;
  if (s == "cosface-full") return Method::cosface_full;
  if (s == "cosface-head-only") return Method::cosface_head_only;
  throw ConfigError("unknown method '" + s + "' (dcq, cosface-full, cosface-head-only)");
}

std::vector<Index> TrainConfig::layer_dims() const {
  std::vector<Index> dims{d_in};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(D);
  return dims;
}

void TrainConfig::validate() const {
  if (!(s > 0.0)) throw ConfigError("s must be positive");
  if (!(m >= 0.0 && m < 1.0)) throw ConfigError("m must lie in [0, 1)");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  if (B < 1) throw ConfigError("B must be positive");
  if (method == Method::dcq && K < B) throw ConfigError("K must be at least B for dcq");
  if (!(lr0 > 0.0)) throw ConfigError("lr0 must be positive");
  if (epochs < 1) throw ConfigError("epochs must be positive");
  if (!(decay_factor > 0.0)) throw ConfigError("decay_factor must be positive");
  if (!(sgd_momentum >= 0.0 && sgd_momentum < 1.0)) throw ConfigError("sgd_momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
  if (min_instances < 1) throw ConfigError("min_instances must be at least 1");
  if (C < 1 || d_in < 2 || D < 2) throw ConfigError("C >= 1, d_in >= 2 and D >= 2 required");
  if (hidden.empty()) throw ConfigError("at least one hidden layer required");
  if (eval_every < 0 || checkpoint_every < 0) throw ConfigError("eval_every and checkpoint_every must be >= 0");
  if (iterations_per_epoch < 0) throw ConfigError("iterations_per_epoch must be >= 0");
}

TrainConfig default_config(Method method) {
  TrainConfig c;
  c.method = method;
  if (method != Method::dcq) {
    c.s = 64.0;
    c.m = 0.35;
    c.lr0 = 0.1;
  }
  return c;
}

nlohmann::json to_json(const TrainConfig& c) {
  return {
      {"method", to_string(c.method)},
      {"s", c.s},
      {"m", c.m},
      {"alpha", c.alpha},
      {"K", c.K},
      {"B", c.B},
      {"lr0", c.lr0},
      {"decay_epochs", c.decay_epochs},
      {"decay_factor", c.decay_factor},
      {"epochs", c.epochs},
      {"sgd_momentum", c.sgd_momentum},
      {"weight_decay", c.weight_decay},
      {"sampling", to_string(c.sampling)},
      {"min_instances", c.min_instances},
      {"seed", c.seed},
      {"iterations_per_epoch", c.iterations_per_epoch},
      {"C", c.C},
      {"d_in", c.d_in},
      {"hidden", c.hidden},
      {"D", c.D},
      {"sigma", c.sigma},
      {"zipf_exponent", c.longtail.zipf_exponent},
      {"min_count", c.longtail.min_count},
      {"max_count", c.longtail.max_count},
      {"reserved", c.reserved},
      {"eval_pairs", c.eval_pairs},
      {"eval_probes", c.eval_probes},
      {"eval_distractors", c.eval_distractors},
      {"eval_every", c.eval_every},
      {"record_wall_time", c.record_wall_time},
      {"checkpoint_every", c.checkpoint_every},
  };
}

namespace {

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

}  // namespace

TrainConfig config_from_json(const nlohmann::json& j, std::uint64_t fallback_seed) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> known = [] {
    std::set<std::string> k;
    const nlohmann::json defaults = to_json(TrainConfig{});
    for (const auto& [key, _] : defaults.items()) k.insert(key);
    return k;
  }();
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  std::string method = "dcq";
  read(j, "method", method);
  TrainConfig c = default_config(parse_method(method));
  c.seed = fallback_seed;
  read(j, "s", c.s);
  read(j, "m", c.m);
  read(j, "alpha", c.alpha);
  read(j, "K", c.K);
  read(j, "B", c.B);
  read(j, "lr0", c.lr0);
  read(j, "decay_epochs", c.decay_epochs);
  read(j, "decay_factor", c.decay_factor);
  read(j, "epochs", c.epochs);
  read(j, "sgd_momentum", c.sgd_momentum);
  read(j, "weight_decay", c.weight_decay);
  std::string sampling = to_string(c.sampling);
  read(j, "sampling", sampling);
  c.sampling = parse_sampling(sampling);
  read(j, "min_instances", c.min_instances);
  read(j, "seed", c.seed);
  read(j, "iterations_per_epoch", c.iterations_per_epoch);
  read(j, "C", c.C);
  read(j, "d_in", c.d_in);
  read(j, "hidden", c.hidden);
  read(j, "D", c.D);
  read(j, "sigma", c.sigma);
  read(j, "zipf_exponent", c.longtail.zipf_exponent);
  read(j, "min_count", c.longtail.min_count);
  read(j, "max_count", c.longtail.max_count);
  read(j, "reserved", c.reserved);
  read(j, "eval_pairs", c.eval_pairs);
  read(j, "eval_probes", c.eval_probes);
  read(j, "eval_distractors", c.eval_distractors);
  read(j, "eval_every", c.eval_every);
  read(j, "record_wall_time", c.record_wall_time);
  read(j, "checkpoint_every", c.checkpoint_every);
  c.validate();
  return c;
}

void apply_override(nlohmann::json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);
  auto parsed = nlohmann::json::parse(value, nullptr, false);
  j[key] = parsed.is_discarded() ? nlohmann::json(value) : parsed;
}

double lr_at_step(const TrainConfig& c, int epoch) {
  const auto passed = std::count_if(c.decay_epochs.begin(), c.decay_epochs.end(), [epoch](int d) { return d <= epoch; });
  return c.lr0 * std::pow(c.decay_factor, static_cast<double>(passed));
}

}  // namespace dcq
