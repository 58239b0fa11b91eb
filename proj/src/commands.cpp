#include "aord/commands.hpp"

#include <fstream>
#include <iterator>
#include <ostream>
#include <sstream>

#include "aord/baselines.hpp"
#include "aord/checkpoint.hpp"
#include "aord/errors.hpp"
#include "aord/report_io.hpp"

namespace aord {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) { write_file_atomic(path, text); }

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string hex(std::uint64_t v) {
  std::ostringstream out;
  out << std::hex << v;
  return out.str();
}

// K and D of a data file must agree with the model.
void check_data_shape(const Dataset& data, const RunConfig& cfg, const std::string& path) {
  if (data.num_classes != cfg.k) {
    throw ConfigError("k: config has K=" + std::to_string(cfg.k) + " but " + path + " declares K=" +
                      std::to_string(data.num_classes));
  }
  if (cfg.d != 0 && data.dim() != cfg.d) {
    throw ConfigError("d: model expects D=" + std::to_string(cfg.d) + " but " + path + " has D=" +
                      std::to_string(data.dim()));
  }
}

json run_manifest(const std::string& command, const RunConfig& cfg) {
  return {{"artifact_version", kArtifactVersion},
          {"command", command},
          {"config", to_json(cfg)},
          {"model_hash", model_hash(cfg)}};
}

json epoch_json(const EpochStats& s) {
  return {{"epoch", s.epoch + 1}, {"loss", s.total_loss}, {"step_loss", s.step_loss}, {"batches", s.batches}};
}

}  // namespace

std::string file_digest(const fs::path& path) { return hex(fnv1a(read_file(path))); }

json to_json(const SynthConfig& cfg) {
  return {{"k", cfg.num_classes}, {"n", cfg.n_total},        {"dim", cfg.dim},
          {"tail_ratio", cfg.tail_ratio}, {"ambiguity", cfg.ambiguity}, {"seed", cfg.seed}};
}

SynthConfig synth_config_from_json(const json& j) {
  try {
    SynthConfig cfg;
    cfg.num_classes = j.at("k").get<int>();
    cfg.n_total = j.at("n").get<int>();
    cfg.dim = j.at("dim").get<int>();
    cfg.tail_ratio = j.at("tail_ratio").get<double>();
    cfg.ambiguity = j.at("ambiguity").get<double>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    return cfg;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("synth config: ") + e.what());
  }
}

GenDataResult cmd_gen_data(const GenDataOptions& opts, std::ostream& log) {
  validate(opts.synth);
  if (opts.n_test < opts.synth.num_classes) {
    throw ConfigError("n_test: must be >= k (" + std::to_string(opts.synth.num_classes) + "), got " +
                      std::to_string(opts.n_test));
  }
  if (opts.out_dir.empty()) throw ConfigError("out: output directory must not be empty");

  SynthConfig test_cfg = opts.synth;
  test_cfg.n_total = opts.n_test;
  const SynthDataset train = generate(opts.synth, "train");
  const SynthDataset test = generate(test_cfg, "test");

  const fs::path dir = opts.out_dir;
  fs::create_directories(dir);
  const std::string note = "synthetic ordinal data, seed " + std::to_string(opts.synth.seed);
  write_text(dir / "train.txt", format_feature_text(train.data, note + ", train split"));
  write_text(dir / "test.txt", format_feature_text(test.data, note + ", test split"));
  write_text(dir / "train.latent.txt", format_feature_text(latent_sidecar(train), "latents, train split"));
  write_text(dir / "test.latent.txt", format_feature_text(latent_sidecar(test), "latents, test split"));

  GenDataResult result;
  result.bayes_train = bayes_accuracy(opts.synth, train);
  result.bayes_test = bayes_accuracy(test_cfg, test);

  json digests = json::object();
  for (const char* f : {"train.txt", "test.txt", "train.latent.txt", "test.latent.txt"}) {
    digests[f] = file_digest(dir / f);
  }
  const json manifest = {{"artifact_version", kArtifactVersion},
                         {"command", "gen-data"},
                         {"synth", to_json(opts.synth)},
                         {"n_test", opts.n_test},
                         {"files", digests},
                         {"bayes_accuracy", {{"train", result.bayes_train}, {"test", result.bayes_test}}}};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  log << "wrote " << train.data.size() << " train / " << test.data.size() << " test examples to " << dir.string()
      << " (Bayes accuracy: train " << result.bayes_train << ", test " << result.bayes_test << ")\n";
  return result;
}

TrainResult cmd_train(RunConfig cfg, bool resume, std::ostream& log) {
  validate_for_training(cfg);
  const Dataset data = load_feature_file(cfg.data);
  check_data_shape(data, cfg, cfg.data);
  if (cfg.d == 0) cfg.d = static_cast<int>(data.dim());

  std::unique_ptr<ModelBundle> bundle;
  AdamState adam;
  int start = 0;
  if (resume) {
    LoadedCheckpoint ck = load_checkpoint(cfg.checkpoint);
    RunConfig merged = cfg;
    const auto mismatched = model_mismatches(ck.config, merged);
    if (!mismatched.empty()) {
      std::string msg = "resume: config differs from checkpoint in";
      for (const auto& k : mismatched) msg += " " + k;
      throw ConfigError(msg);
    }
    if (ck.config.seed != cfg.seed || ck.config.batch_size != cfg.batch_size || ck.config.lr != cfg.lr) {
      throw ConfigError("resume: seed, batch_size and lr must match the checkpoint to continue its trajectory");
    }
    bundle = std::move(ck.bundle);
    adam = std::move(ck.adam);
    start = ck.epochs_done;
    log << "resuming from " << cfg.checkpoint << " after epoch " << start << "\n";
  } else {
    bundle = std::make_unique<ModelBundle>(model_config(cfg));
    bundle->init(cfg.seed);
  }

  json manifest = run_manifest("train", cfg);
  manifest["data_digest"] = file_digest(cfg.data);
  write_text(cfg.checkpoint + ".manifest.json", manifest.dump(2) + "\n");

  const fs::path log_path = cfg.checkpoint + ".log.jsonl";
  std::ofstream log_file(log_path, resume ? std::ios::app : std::ios::trunc);
  if (!log_file) throw std::runtime_error("cannot open training log '" + log_path.string() + "'");

  TrainResult result;
  result.epochs_done = start;
  const AdamConfig adam_cfg = adam_config(cfg);
  for (int e = start; e < cfg.epochs; ++e) {
    EpochStats stats = train_epoch(data, *bundle, adam, adam_cfg, cfg.batch_size, cfg.seed, e);
    save_checkpoint(cfg.checkpoint, cfg, *bundle, adam, e + 1);
    log_file << epoch_json(stats).dump() << '\n' << std::flush;
    log << "epoch " << e + 1 << "/" << cfg.epochs << " loss " << stats.total_loss;
    if (!stats.step_loss.empty()) {
      log << " steps";
      for (double s : stats.step_loss) log << ' ' << s;
    }
    log << '\n' << std::flush;
    result.epochs.push_back(std::move(stats));
    result.epochs_done = e + 1;
  }
  if (start >= cfg.epochs) log << "checkpoint already has " << start << " epochs; nothing to train\n";
  return result;
}

RunConfig resolve_against_checkpoint(const RunConfig& stored, const json& overlay) {
  RunConfig cfg = stored;
  apply_json(cfg, overlay);
  if (cfg.d == 0) cfg.d = stored.d;
  const auto mismatched = model_mismatches(stored, cfg);
  if (!mismatched.empty()) {
    const json a = to_json(stored);
    const json b = to_json(cfg);
    std::string msg = "checkpoint/config mismatch:";
    for (const auto& k : mismatched) msg += " " + k + " (checkpoint " + a[k].dump() + ", requested " + b[k].dump() + ")";
    throw ConfigError(msg);
  }
  validate(cfg);
  return cfg;
}

EvalResult cmd_eval(const EvalRequest& req, std::ostream& log) {
  if (req.checkpoint.empty()) throw ConfigError("checkpoint: path is required");
  LoadedCheckpoint ck = load_checkpoint(req.checkpoint);
  const RunConfig cfg = resolve_against_checkpoint(ck.config, req.overlay);
  const std::string path = cfg.test.empty() ? cfg.data : cfg.test;
  if (path.empty()) throw ConfigError("test: evaluation data path is required");
  if (cfg.report_dir.empty()) throw ConfigError("report_dir: must not be empty");
  const Dataset data = load_feature_file(path);
  check_data_shape(data, cfg, path);

  EvalOptions opts;
  opts.seed = cfg.seed;
  opts.samples_per_step = cfg.samples_per_step;
  opts.threads = cfg.threads;
  opts.keep_traces = true;
  EvalResult result = evaluate(data, *ck.bundle, opts);

  const fs::path dir = cfg.report_dir;
  fs::create_directories(dir);
  const MetricsReport& r = result.report;
  write_text(dir / "metrics.txt", metrics_kv(r, cfg.head));
  write_text(dir / "metrics.json", metrics_json(r, cfg.head).dump(2) + "\n");
  write_text(dir / "breakdown.csv", breakdown_csv(r));
  write_text(dir / "breakdown.svg", breakdown_svg(r, "correct / adjacent / other by class, head " + cfg.head));
  const std::string table = metrics_table(r, cfg.head);
  write_text(dir / "table.txt", table);

  std::ostringstream preds;
  preds << "index,truth,predicted,valid\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    const bool valid = result.traces.empty() || result.traces[i].valid;
    preds << i << ',' << data.labels[i] << ',' << result.predictions[i] << ',' << (valid ? 1 : 0) << '\n';
  }
  write_text(dir / "predictions.csv", preds.str());

  json manifest = run_manifest("eval", cfg);
  manifest["checkpoint_epochs"] = ck.epochs_done;
  manifest["data_digest"] = file_digest(path);
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  log << table;
  return result;
}

PredictionTrace cmd_predict(const EvalRequest& req, const std::vector<double>& input, std::ostream& out) {
  if (req.checkpoint.empty()) throw ConfigError("checkpoint: path is required");
  LoadedCheckpoint ck = load_checkpoint(req.checkpoint);
  const RunConfig cfg = resolve_against_checkpoint(ck.config, req.overlay);
  if (static_cast<int>(input.size()) != cfg.d) {
    throw ConfigError("input: expected D=" + std::to_string(cfg.d) + " values, got " + std::to_string(input.size()));
  }
  const Vector x = Eigen::Map<const Vector>(input.data(), static_cast<Eigen::Index>(input.size()));
  const ModelBundle& bundle = *ck.bundle;

  PredictionTrace trace;
  if (!bundle.autoregressive()) {
    const Matrix p = softmax_probabilities(bundle, Matrix(x));
    trace.label = argmax_smallest(p.col(0));
    trace.bits = encode_label({trace.label, cfg.k});
    out << "probabilities";
    for (Eigen::Index c = 0; c < p.rows(); ++c) out << ' ' << p(c, 0);
    out << "\nclass " << trace.label << " valid\n";
    return trace;
  }

  Rng rng = make_rng(cfg.seed, "eval", 0);
  PredictOptions opts;
  opts.samples_per_step = cfg.samples_per_step;
  trace = predict(bundle, x, rng, opts);
  for (std::size_t s = 0; s < trace.bits.size(); ++s) {
    out << "step " << s + 1 << ":";
    if (bundle.config.head == HeadKind::ArCe) {
      out << " p " << trace.step_value[s];
    } else {
      out << " samples";
      for (double v : trace.samples[s]) out << ' ' << v;
      out << " | mean " << trace.step_value[s];
    }
    out << " | bit " << static_cast<int>(trace.bits[s]) << '\n';
  }
  out << "bits ";
  for (auto b : trace.bits) out << static_cast<int>(b);
  out << '\n';
  out << "class " << trace.label << (trace.valid ? " valid" : " invalid") << '\n';
  return trace;
}

std::string cmd_report(const std::vector<ReportInput>& inputs, const std::string& out_dir) {
  if (inputs.empty()) throw ConfigError("report: at least one metrics.json is required");
  std::vector<ComparisonRow> rows;
  for (const auto& in : inputs) {
    json doc;
    try {
      doc = json::parse(read_file(in.metrics_json));
    } catch (const json::parse_error& e) {
      throw ConfigError(in.metrics_json + ": " + e.what());
    }
    rows.push_back(comparison_row(doc, in.name));
  }
  const std::string md = comparison_markdown(rows);
  fs::create_directories(out_dir);
  write_text(fs::path(out_dir) / "comparison.md", md);
  write_text(fs::path(out_dir) / "comparison.csv", comparison_csv(rows));
  return md;
}

}  // namespace aord
