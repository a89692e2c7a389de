#include "dcq/trainer.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace dcq {

namespace {

std::vector<Index> training_identities(const TrainConfig& c, std::span<const int> counts) {
  if (c.method == Method::cosface_head_only) return filter_head_classes(counts, c.min_instances).retained;
  std::vector<Index> ids(counts.size());
  std::iota(ids.begin(), ids.end(), Index{0});
  return ids;
}

std::string describe_batch(const PairBatch& batch, const Tensor& features, std::uint64_t step) {
  std::ostringstream os;
  os << "non-finite loss at step " << step << "; batch labels:";
  for (Index y : batch.y) os << ' ' << y;
  os << "; feature norms:";
  for (Index r = 0; r < features.rows(); ++r) os << ' ' << features.row(r).norm();
  os << "; input norms:";
  for (Index r = 0; r < batch.x_t.rows(); ++r) os << ' ' << batch.x_t.row(r).norm();
  return os.str();
}

}  // namespace

Experiment build_experiment(const TrainConfig& c) {
  c.validate();
  Experiment e;
  e.universe = build_universe(c.C, c.d_in, c.sigma, c.seed, c.reserved);
  e.counts = assign_longtail_counts(c.longtail, c.C);
  e.protocol = build_eval_protocol(e.universe, c.eval_pairs, c.eval_probes, c.eval_distractors, c.seed);
  e.eval_inputs = materialize(e.universe, e.protocol);
  return e;
}

TrainingState initial_state(const TrainConfig& c, Index head_classes) {
  c.validate();
  TrainingState s;
  s.config = c;
  s.extractor = init_extractor(c.layer_dims(), c.seed);
  std::vector<Tensor> optimized = s.extractor.tensors;
  if (c.method == Method::dcq) {
    s.generator = EmaGenerator::from_extractor(s.extractor, c.alpha);
    s.queue = ClassQueue(c.D, c.K);
  } else {
    s.head = init_head(c.D, head_classes, c.seed);
    optimized.push_back(s.head->weight);
  }
  s.optimizer = OptimizerState::zeros_like(optimized);
  return s;
}

Trainer::Trainer(const Experiment& experiment, TrainingState state)
    : experiment_(&experiment),
      identities_(training_identities(state.config, experiment.counts)),
      state_(std::move(state)),
      sampler_(make_sampler()) {
  for (std::size_t i = 0; i < state_.extractor.tensors.size(); ++i) {
    weight_decay_.push_back(MlpParams::decays(i) ? state_.config.weight_decay : 0.0);
  }
  if (state_.head) weight_decay_.push_back(state_.config.weight_decay);
  if (state_.optimizer.velocity.size() != weight_decay_.size()) {
    throw ContractError("optimizer state does not match the trained parameters");
  }
  if (state_.head && state_.head->classes() != static_cast<Index>(identities_.size())) {
    throw ContractError("head columns do not match the training label set");
  }
}

Trainer::Trainer(const Experiment& experiment, const TrainConfig& config)
    : Trainer(experiment, initial_state(config, static_cast<Index>(training_identities(config, experiment.counts).size()))) {}

PairSampler Trainer::make_sampler() const {
  std::vector<int> counts;
  counts.reserve(identities_.size());
  for (Index id : identities_) counts.push_back(experiment_->counts[static_cast<std::size_t>(id)]);
  return PairSampler(experiment_->universe, std::move(counts), identities_, state_.config.sampling);
}

Index Trainer::iterations_per_epoch() const {
  if (state_.config.iterations_per_epoch > 0) return state_.config.iterations_per_epoch;
  const auto b = static_cast<std::int64_t>(state_.config.B);
  return static_cast<Index>((sampler_.total_instances() + b - 1) / b);
}

StepResult Trainer::train_step(const PairBatch& batch, double lr) {
  const TrainConfig& c = state_.config;
  Tape tape;
  const MlpVars vars = bind_parameters(tape, state_.extractor);
  const Var features = extract_features(tape, state_.extractor, vars, tape.constant(batch.x_t));

  StepResult result;
  result.labels = batch.y;
  LossResult loss;
  Var head_var;
  if (c.method == Method::dcq) {
    // Generated weights never enter the tape: no gradient reaches them.
    result.positive_weights = generate_class_weights(*state_.generator, batch.x_w);
    const DcqLogits logits = dcq_logits_with_mask(tape, features, result.positive_weights, *state_.queue, batch.y);
    loss = dcq_cosface_loss(tape, logits, c.s, c.m);
  } else {
    head_var = tape.parameter(state_.head->weight);
    loss = fc_cosface_loss(tape, features, head_var, batch.y, c.s, c.m);
  }
  result.loss = tape.value(loss.loss)(0, 0);
  if (!std::isfinite(result.loss)) throw NumericError(describe_batch(batch, tape.value(features), state_.step));

  tape.backward(loss.loss);
  std::vector<Tensor> grads;
  grads.reserve(weight_decay_.size());
  for (Var v : vars.tensors) grads.push_back(tape.grad(v));
  if (state_.head) grads.push_back(tape.grad(head_var));

  std::vector<Tensor> params = std::move(state_.extractor.tensors);
  if (state_.head) params.push_back(std::move(state_.head->weight));
  sgd_momentum_step(params, grads, state_.optimizer, lr, c.sgd_momentum, weight_decay_);
  if (state_.head) {
    state_.head->weight = std::move(params.back());
    params.pop_back();
  }
  state_.extractor.tensors = std::move(params);

  if (c.method == Method::dcq) {
    ema_update(*state_.generator, state_.extractor);
    state_.queue->enqueue(result.positive_weights, batch.y);
  }
  return result;
}

StepResult Trainer::iterate() {
  const PairBatch batch = sampler_.sample(state_.config.B, state_.config.seed, state_.step);
  StepResult r = train_step(batch, lr_at_step(state_.config, state_.epoch));
  ++state_.step;
  return r;
}

EvalMetrics Trainer::evaluate() const {
  const Tensor emb = extract_features(state_.extractor, experiment_->eval_inputs);
  return evaluate_embeddings(emb, experiment_->protocol, experiment_->counts);
}

EpochMetrics Trainer::run_epoch() {
  if (finished()) throw ContractError("training already finished");
  const auto start = std::chrono::steady_clock::now();
  const TrainConfig& c = state_.config;
  EpochMetrics m;
  m.epoch = state_.epoch;
  m.lr = lr_at_step(c, state_.epoch);
  const Index iters = iterations_per_epoch();
  double total = 0.0;
  for (Index i = 0; i < iters; ++i) total += iterate().loss;
  m.train_loss = total / static_cast<double>(iters);
  ++state_.epoch;

  const bool last = state_.epoch == c.epochs;
  if (c.eval_every > 0 && (state_.epoch % c.eval_every == 0 || last)) {
    const EvalMetrics e = evaluate();
    m.ver_acc = e.ver_acc;
    m.id_rank1 = e.id_rank1;
    m.tail_rank1 = e.tail_rank1;
  } else {
    m.ver_acc = m.id_rank1 = m.tail_rank1 = std::numeric_limits<double>::quiet_NaN();
  }
  if (c.record_wall_time) {
    m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  state_.history.push_back(m);
  return m;
}

TrainResult resume_training(TrainingState state, const Experiment& experiment, const EpochCallback& on_epoch) {
  Trainer trainer(experiment, std::move(state));
  while (!trainer.finished()) {
    const EpochMetrics m = trainer.run_epoch();
    if (on_epoch) on_epoch(trainer.state(), m);
  }
  TrainResult r;
  r.final_eval = trainer.evaluate();
  r.state = trainer.state();
  return r;
}

TrainResult run_training(const TrainConfig& config, const Experiment& experiment, const EpochCallback& on_epoch) {
  const auto ids = training_identities(config, experiment.counts);
  return resume_training(initial_state(config, static_cast<Index>(ids.size())), experiment, on_epoch);
}

}  // namespace dcq
