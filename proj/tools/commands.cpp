#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "dcq/binary_io.hpp"
#include "dcq/cost.hpp"
#include "dcq/experiment.hpp"
#include "dcq/gradsuite.hpp"
#include "dcq/report.hpp"

namespace fs = std::filesystem;

namespace dcq::cli {

namespace {

struct ConfigArgs {
  std::string config_path;
  std::vector<std::string> overrides;
};

void add_config_options(CLI::App* cmd, ConfigArgs& args) {
  cmd->add_option("--config", args.config_path, "JSON config (or a run manifest)");
  cmd->add_option("--set", args.overrides, "key=value override, applied after --config")->allow_extra_args(false);
}

std::uint64_t env_seed() {
  if (const char* s = std::getenv("DCQ_SEED")) {
    try {
      return std::stoull(s);
    } catch (const std::exception&) {
      throw ConfigError(std::string("DCQ_SEED is not an integer: ") + s);
    }
  }
  return 1;
}

nlohmann::json merged_json(const ConfigArgs& args) {
  nlohmann::json j = nlohmann::json::object();
  if (!args.config_path.empty()) {
    auto parsed = nlohmann::json::parse(read_file(args.config_path), nullptr, false);
    if (parsed.is_discarded()) throw ConfigError(args.config_path + " is not valid JSON");
    j = config_section(parsed);
  }
  for (const auto& o : args.overrides) apply_override(j, o);
  return j;
}

TrainConfig resolve(const ConfigArgs& args) { return config_from_json(merged_json(args), env_seed()); }

void write_text(const fs::path& path, const std::string& text) { write_file_atomic(path.string(), text); }

// Builds a run directory under a temporary name and renames it into place
// only when everything was written.
class RunDirectory {
 public:
  RunDirectory(const fs::path& root, const std::string& name) : final_(root / name), partial_(root / ("." + name + ".partial")) {
    if (fs::exists(final_)) throw std::runtime_error("run directory already exists: " + final_.string());
    fs::create_directories(root);
    fs::remove_all(partial_);
    fs::create_directories(partial_);
  }
  ~RunDirectory() {
    if (!committed_) {
      std::error_code ec;
      fs::remove_all(partial_, ec);
    }
  }
  const fs::path& path() const { return partial_; }
  const fs::path& final_path() const { return final_; }
  void commit() {
    fs::rename(partial_, final_);
    committed_ = true;
  }

 private:
  fs::path final_;
  fs::path partial_;
  bool committed_ = false;
};

int cmd_gen_data(const ConfigArgs& args, const std::string& out, bool summary_only) {
  const TrainConfig c = resolve(args);
  const auto universe = build_universe(c.C, c.d_in, c.sigma, c.seed, c.reserved);
  const auto counts = assign_longtail_counts(c.longtail, c.C);
  nlohmann::json summary = to_json(summarize_counts(counts));
  summary["config"] = to_json(c);
  if (!out.empty()) {
    fs::create_directories(out);
    if (!summary_only) write_dataset((fs::path(out) / "dataset.bin").string(), universe, counts);
    write_text(fs::path(out) / "summary.json", summary.dump(2) + "\n");
  }
  std::cout << summary.dump(2) << "\n";
  return kExitOk;
}

int cmd_train(const ConfigArgs& args, const std::string& out_root, std::string run_name, const std::string& resume) {
  RunManifest manifest;
  TrainingState resumed;
  bool resuming = !resume.empty();
  if (resuming) {
    resumed = load_checkpoint(resume);
    manifest.config = resumed.config;
  } else {
    manifest.config = resolve(args);
  }
  manifest.overrides = args.overrides;
  const TrainConfig& c = manifest.config;
  manifest.started_at = utc_timestamp();
  if (run_name.empty()) run_name = manifest.started_at + "-seed" + std::to_string(c.seed);

  RunDirectory dir(out_root, run_name);
  manifest.output_dir = dir.final_path().string();
  write_text(dir.path() / "manifest.json", to_json(manifest).dump(2) + "\n");

  const Experiment experiment = build_experiment(c);
  const auto on_epoch = [&](const TrainingState& state, const EpochMetrics& m) {
    std::cerr << "epoch " << m.epoch << " lr " << m.lr << " loss " << m.train_loss << " ver_acc " << m.ver_acc
              << " id_rank1 " << m.id_rank1 << "\n";
    if (c.checkpoint_every > 0 && state.epoch % c.checkpoint_every == 0 && state.epoch < c.epochs) {
      save_checkpoint((dir.path() / ("checkpoint_epoch" + std::to_string(state.epoch) + ".bin")).string(), state);
    }
  };
  const TrainResult result =
      resuming ? resume_training(std::move(resumed), experiment, on_epoch) : run_training(c, experiment, on_epoch);

  write_metrics(result.state.history, (dir.path() / "metrics.csv").string(), MetricsFormat::csv);
  write_metrics(result.state.history, (dir.path() / "metrics.json").string(), MetricsFormat::json);
  save_checkpoint((dir.path() / "checkpoint.bin").string(), result.state);
  manifest.finished_at = utc_timestamp();
  write_text(dir.path() / "manifest.json", to_json(manifest).dump(2) + "\n");
  dir.commit();
  std::cout << dir.final_path().string() << "\n";
  return kExitOk;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int cmd_sweep(const ConfigArgs& args, const std::string& axis, const std::string& values, const std::string& out_root,
              std::string run_name) {
  const TrainConfig base = resolve(args);
  const auto list = split_list(values);
  if (list.empty()) throw ConfigError("--values needs at least one entry");
  parse_axis(axis);
  if (run_name.empty()) run_name = utc_timestamp() + "-sweep-" + axis + "-seed" + std::to_string(base.seed);
  RunDirectory dir(out_root, run_name);
  RunManifest manifest{base, args.overrides, dir.final_path().string(), utc_timestamp(), ""};
  nlohmann::json mj = to_json(manifest);
  mj["axis"] = axis;
  mj["values"] = list;
  write_text(dir.path() / "manifest.json", mj.dump(2) + "\n");
  const auto rows = run_experiment_grid(base, axis, list);
  write_text(dir.path() / "results.csv", grid_csv(axis, rows));
  write_text(dir.path() / "results.json", grid_json(axis, base, rows).dump(2) + "\n");
  mj["finished_at"] = utc_timestamp();
  write_text(dir.path() / "manifest.json", mj.dump(2) + "\n");
  dir.commit();
  std::cout << grid_csv(axis, rows);
  return kExitOk;
}

int cmd_eval(const std::string& checkpoint, const std::string& out) {
  const TrainingState state = load_checkpoint(checkpoint);
  const Experiment experiment = build_experiment(state.config);
  const Trainer trainer(experiment, state);
  const EvalMetrics m = trainer.evaluate();
  nlohmann::json j = {{"method", to_string(state.config.method)},
                      {"epoch", state.epoch},
                      {"ver_acc", m.ver_acc},
                      {"ver_threshold", m.ver_threshold},
                      {"id_rank1", m.id_rank1},
                      {"tail_probes", m.tail_probes},
                      {"tail_rank1", std::isnan(m.tail_rank1) ? nlohmann::json(nullptr) : nlohmann::json(m.tail_rank1)}};
  if (state.head) {
    std::vector<int> counts;
    for (Index id : trainer.identities()) counts.push_back(experiment.counts[static_cast<std::size_t>(id)]);
    const auto report = tail_alignment_diagnostic(*state.head, experiment.universe, counts, state.extractor, trainer.identities());
    nlohmann::json buckets = nlohmann::json::array();
    for (const auto& b : report.buckets) {
      buckets.push_back({{"bucket", b.name},
                         {"classes", b.classes},
                         {"mean_cosine", b.mean_cosine ? nlohmann::json(*b.mean_cosine) : nlohmann::json(nullptr)}});
    }
    j["tail_alignment"] = buckets;
  }
  if (!out.empty()) write_file_atomic(out, j.dump(2) + "\n");
  std::cout << j.dump(2) << "\n";
  return kExitOk;
}

int cmd_bench(const ConfigArgs& args, std::int64_t bytes_per_float) {
  const TrainConfig c = resolve(args);
  const std::int64_t gen = mlp_forward_macs(c.layer_dims());
  const CostReport full = head_cost_report(Method::cosface_full, c.C, c.K, c.D, c.B, bytes_per_float);
  const CostReport dcq = head_cost_report(Method::dcq, c.C, c.K, c.D, c.B, bytes_per_float, gen);
  const double ratio = static_cast<double>(dcq.head_param_bytes) / static_cast<double>(full.head_param_bytes);
  const nlohmann::json j = {{"full", to_json(full)}, {"dcq", to_json(dcq)}, {"param_bytes_ratio", ratio}};
  std::cout << j.dump(2) << "\n";
  return kExitOk;
}

int cmd_gradcheck(int configs, std::uint64_t seed, double tolerance) {
  const auto cases = run_gradient_suite(configs, seed);
  double worst = 0.0;
  for (const auto& c : cases) {
    worst = std::max(worst, c.report.max_relative_error);
    std::cout << c.loss << " dims=";
    for (std::size_t i = 0; i < c.dims.size(); ++i) std::cout << (i ? "-" : "") << c.dims[i];
    std::cout << " B=" << c.batch << " K/C=" << c.negatives << " max_rel_err=" << format_double(c.report.max_relative_error)
              << "\n";
  }
  std::cout << "worst " << format_double(worst) << (worst <= tolerance ? " PASS" : " FAIL") << "\n";
  return worst <= tolerance ? kExitOk : kExitRuntime;
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args) {
  CLI::App app{"Dynamic class queue training and evaluation", "dcq"};
  app.require_subcommand(1);

  ConfigArgs gen_args, train_args, sweep_args, bench_args;
  std::string gen_out;
  bool summary_only = false;
  auto* gen = app.add_subcommand("gen-data", "Generate and summarize a synthetic long-tailed universe");
  add_config_options(gen, gen_args);
  gen->add_option("--out", gen_out, "Directory for dataset.bin and summary.json");
  gen->add_flag("--summary-only", summary_only, "Skip the binary dump");

  std::string train_root = "runs", train_name, resume;
  auto* train = app.add_subcommand("train", "Train one model");
  add_config_options(train, train_args);
  train->add_option("--out-dir", train_root, "Root directory for run outputs");
  train->add_option("--run-name", train_name, "Run directory name (default: timestamp + seed)");
  train->add_option("--resume", resume, "Continue from a checkpoint");

  std::string axis, values, sweep_root = "runs", sweep_name;
  auto* sweep = app.add_subcommand("sweep", "Train one model per value of a config axis");
  add_config_options(sweep, sweep_args);
  sweep->add_option("--axis", axis, "K, alpha, sampling or method")->required();
  sweep->add_option("--values", values, "Comma-separated values")->required();
  sweep->add_option("--out-dir", sweep_root, "Root directory for sweep outputs");
  sweep->add_option("--run-name", sweep_name, "Sweep directory name");

  std::string checkpoint, eval_out;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval->add_option("--out", eval_out, "Write the JSON report here");

  std::int64_t bytes_per_float = 4;
  auto* bench = app.add_subcommand("bench", "Classifier head cost report");
  add_config_options(bench, bench_args);
  bench->add_option("--bytes-per-float", bytes_per_float, "Bytes per stored weight");

  int grad_configs = 20;
  std::uint64_t grad_seed = 2021;
  double grad_tol = 1e-5;
  auto* grad = app.add_subcommand("gradcheck", "Randomized autodiff vs finite-difference suite");
  grad->add_option("--configs", grad_configs, "Number of random configurations");
  grad->add_option("--seed", grad_seed, "Suite seed");
  grad->add_option("--tolerance", grad_tol, "Maximum relative error");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*gen) return cmd_gen_data(gen_args, gen_out, summary_only);
    if (*train) return cmd_train(train_args, train_root, train_name, resume);
    if (*sweep) return cmd_sweep(sweep_args, axis, values, sweep_root, sweep_name);
    if (*eval) return cmd_eval(checkpoint, eval_out);
    if (*bench) return cmd_bench(bench_args, bytes_per_float);
    if (*grad) return cmd_gradcheck(grad_configs, grad_seed, grad_tol);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace dcq::cli
