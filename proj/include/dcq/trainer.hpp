#pragma once

// Training loops: the DCQ iteration (extractor forward, generator forward,
// masked subset CosFace, SGD, EMA, enqueue) and the full-FC CosFace baseline.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dcq/baseline.hpp"
#include "dcq/class_queue.hpp"
#include "dcq/config.hpp"
#include "dcq/metrics.hpp"
#include "dcq/optimizer.hpp"
#include "dcq/synthdata.hpp"

namespace dcq {

/// Data shared by every run of one config: universe, counts, eval protocol.
struct Experiment {
  IdentityUniverse universe;
  std::vector<int> counts;
  EvalProtocol protocol;
  Tensor eval_inputs;
};

Experiment build_experiment(const TrainConfig& c);

struct EpochMetrics {
  int epoch = 0;  // 0-based
  double lr = 0.0;
  double train_loss = 0.0;
  double ver_acc = 0.0;
  double id_rank1 = 0.0;
  double wall_seconds = 0.0;
  double tail_rank1 = 0.0;
};

/// Everything needed to continue a run bit-exactly.
struct TrainingState {
  TrainConfig config;
  MlpParams extractor;
  std::optional<EmaGenerator> generator;  // dcq only
  std::optional<ClassQueue> queue;        // dcq only
  std::optional<FcHead> head;             // baselines only
  OptimizerState optimizer;               // extractor tensors, then the head weight for baselines
  int epoch = 0;                          // completed epochs
  std::uint64_t step = 0;                 // completed iterations; also the batch stream position
  std::vector<EpochMetrics> history;
};

/// Fresh state; the head is sized for `head_classes` columns.
TrainingState initial_state(const TrainConfig& c, Index head_classes);

struct StepResult {
  double loss = 0.0;
  Tensor positive_weights;  // dcq: generated w used at logit index 0
  std::vector<Index> labels;
};

class Trainer {
 public:
  Trainer(const Experiment& experiment, TrainingState state);
  explicit Trainer(const Experiment& experiment, const TrainConfig& config);

  /// One optimization step on `batch` at learning rate `lr`; does not advance the step counter.
  StepResult train_step(const PairBatch& batch, double lr);
  /// Draws the batch for the current step, trains on it, advances the counter.
  StepResult iterate();
  EpochMetrics run_epoch();
  bool finished() const { return state_.epoch >= state_.config.epochs; }

  EvalMetrics evaluate() const;

  const TrainingState& state() const { return state_; }
  TrainingState& mutable_state() { return state_; }
  const PairSampler& sampler() const { return sampler_; }
  Index iterations_per_epoch() const;
  /// Training label -> universe identity (head-only runs use a dense relabeling).
  const std::vector<Index>& identities() const { return identities_; }

 private:
  PairSampler make_sampler() const;

  const Experiment* experiment_;
  std::vector<Index> identities_;
  TrainingState state_;
  PairSampler sampler_;
  std::vector<double> weight_decay_;
};

struct TrainResult {
  TrainingState state;
  EvalMetrics final_eval;
};

using EpochCallback = std::function<void(const TrainingState&, const EpochMetrics&)>;

TrainResult run_training(const TrainConfig& config, const Experiment& experiment, const EpochCallback& on_epoch = {});
TrainResult resume_training(TrainingState state, const Experiment& experiment, const EpochCallback& on_epoch = {});

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const TrainingState& state);
TrainingState decode_checkpoint(std::string_view bytes);
void save_checkpoint(const std::string& path, const TrainingState& state);
TrainingState load_checkpoint(const std::string& path);

}  // namespace dcq
