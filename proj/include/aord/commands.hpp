#pragma once

// Subcommand bodies behind the `aord` executable. Each takes an already merged
// configuration, validates it completely, then does the work; errors surface
// as ConfigError (exit 2) or runtime/numerical exceptions (exit 3).

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "aord/ar_model.hpp"
#include "aord/run_config.hpp"
#include "aord/synth_data.hpp"

namespace aord {

struct GenDataOptions {
  SynthConfig synth;
  int n_test = 1000;
  std::string out_dir = "data";
};

nlohmann::json to_json(const SynthConfig& cfg);
SynthConfig synth_config_from_json(const nlohmann::json& j);

struct GenDataResult {
  double bayes_train = 0.0;
  double bayes_test = 0.0;
};

// Writes train.txt, test.txt, their .latent.txt sidecars and manifest.json.
GenDataResult cmd_gen_data(const GenDataOptions& opts, std::ostream& log);

struct TrainResult {
  int epochs_done = 0;
  std::vector<EpochStats> epochs;  // only the epochs run by this call
};

// Trains cfg.epochs epochs, checkpointing after each one. With `resume`, the
// checkpoint at cfg.checkpoint is loaded and training continues from its
// completed epoch count. Also writes "<checkpoint>.manifest.json" and appends
// per-epoch losses to "<checkpoint>.log.jsonl".
TrainResult cmd_train(RunConfig cfg, bool resume, std::ostream& log);

struct EvalRequest {
  std::string checkpoint;
  nlohmann::json overlay = nlohmann::json::object();  // config file merged with flags
};

// Model keys in `overlay` must agree with the checkpoint; others (seed,
// samples_per_step, threads, paths) override it. Evaluates on `test` (or
// `data` when `test` is empty) and writes metrics.txt, metrics.json,
// breakdown.csv, breakdown.svg, table.txt, predictions.csv and manifest.json
// into report_dir.
EvalResult cmd_eval(const EvalRequest& req, std::ostream& log);

// Per-step trace of one feature vector.
PredictionTrace cmd_predict(const EvalRequest& req, const std::vector<double>& input, std::ostream& out);

struct ReportInput {
  std::string name;  // empty: the head recorded in the document
  std::string metrics_json;
};

// Writes comparison.md and comparison.csv into out_dir; returns the markdown.
std::string cmd_report(const std::vector<ReportInput>& inputs, const std::string& out_dir);

// Merges the checkpoint config with `overlay` and reports model-key conflicts.
RunConfig resolve_against_checkpoint(const RunConfig& stored, const nlohmann::json& overlay);

std::string file_digest(const std::filesystem::path& path);

}  // namespace aord
