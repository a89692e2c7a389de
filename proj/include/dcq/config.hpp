#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dcq/synthdata.hpp"
#include "dcq/tensor.hpp"

namespace dcq {

enum class Method { dcq, cosface_full, cosface_head_only };

std::string to_string(Method m);
Method parse_method(const std::string& s);

/// Every knob of a run: method hyperparameters, schedule, data and evaluation.
/// Serialized as one flat JSON object.
struct TrainConfig {
  Method method = Method::dcq;
  double s = 50.0;
  double m = 0.3;
  double alpha = 0.999;
  Index K = 200;
  Index B = 64;
  double lr0 = 0.06;
  std::vector<int> decay_epochs{15, 25, 28};
  double decay_factor = 0.1;
  int epochs = 30;
  double sgd_momentum = 0.9;
  double weight_decay = 1e-4;
  Sampling sampling = Sampling::instance;
  int min_instances = 9;
  std::uint64_t seed = 1;
  Index iterations_per_epoch = 0;  // 0: ceil(training instances / B)

  // data
  Index C = 2000;
  Index d_in = 32;
  std::vector<Index> hidden{64, 64};
  Index D = 32;
  double sigma = 0.1;
  LongTailSpec longtail{1.0, 2, 200};
  Index reserved = 1000;

  // evaluation
  Index eval_pairs = 2000;
  Index eval_probes = 500;
  Index eval_distractors = 1000;
  int eval_every = 1;
  bool record_wall_time = false;
  int checkpoint_every = 0;

  std::vector<Index> layer_dims() const;
  void validate() const;
};

/// Defaults for `method`: the scale, margin and learning rate differ between
/// DCQ and the CosFace baselines.
TrainConfig default_config(Method method);

nlohmann::json to_json(const TrainConfig& c);
/// Starts from default_config(method) and applies every key present.
/// Unknown keys are rejected. `fallback_seed` is used when "seed" is absent.
TrainConfig config_from_json(const nlohmann::json& j, std::uint64_t fallback_seed = 1);

/// "key=value" with the value parsed as JSON, or taken as a string if that fails.
void apply_override(nlohmann::json& j, const std::string& assignment);

/// Learning rate for a (0-based) epoch: lr0 * decay_factor^(#decay epochs <= epoch).
double lr_at_step(const TrainConfig& c, int epoch);

}  // namespace dcq
