// aord: synthetic data, training, evaluation, prediction and comparison
// reports for autoregressive ordinal regression with a diffusion head.
//
// Exit codes: 0 success, 2 invalid configuration or input, 3 runtime failure.

#include <CLI11.hpp>

#include <charconv>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

#include "aord/checkpoint.hpp"
#include "aord/commands.hpp"
#include "aord/errors.hpp"

namespace {

using nlohmann::json;

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

// Flags that were given on the command line become a JSON overlay applied on
// top of the config file.
class Overlay {
 public:
  template <class T>
  void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app->add_option(flag, *value, help);
    setters_.push_back([opt, value, key](json& j) {
      if (opt->count() > 0) j[key] = *value;
    });
  }

  json collect() const {
    json j = json::object();
    for (const auto& s : setters_) s(j);
    return j;
  }

 private:
  std::vector<std::function<void(json&)>> setters_;
};

void add_run_flags(CLI::App* app, Overlay& o) {
  o.add<std::string>(app, "--head", "head", "diffusion | ar_ce | softmax");
  o.add<std::string>(app, "--fusion", "fusion", "affine | cross_attention");
  o.add<bool>(app, "--attention-residual", "attention_residual", "add fc(x) to the cross-attention output");
  o.add<int>(app, "--k", "k", "number of classes");
  o.add<int>(app, "--d", "d", "input dimension (0: from data)");
  o.add<int>(app, "--w", "w", "condition width W");
  o.add<int>(app, "--r", "r", "denoiser blocks R");
  o.add<std::string>(app, "--encoder", "encoder", "mlp | identity");
  o.add<int>(app, "--encoder-hidden", "encoder_hidden", "encoder hidden width");
  o.add<int>(app, "--feature-dim", "feature_dim", "encoder output dimension");
  o.add<bool>(app, "--encoder-trainable", "encoder_trainable", "train the encoder");
  o.add<int>(app, "--t-train", "t_train", "diffusion training steps T");
  o.add<int>(app, "--inference-steps", "inference_steps", "respaced sampling steps");
  o.add<double>(app, "--lr", "lr", "learning rate");
  o.add<int>(app, "--batch-size", "batch_size", "mini-batch size");
  o.add<int>(app, "--epochs", "epochs", "training epochs (required for train)");
  o.add<int>(app, "--samples-per-step", "samples_per_step", "reverse-diffusion samples averaged per step");
  o.add<std::uint64_t>(app, "--seed", "seed", "master seed");
  o.add<int>(app, "--threads", "threads", "evaluation threads");
  o.add<std::string>(app, "--data", "data", "training feature file");
  o.add<std::string>(app, "--test", "test", "evaluation feature file");
  o.add<std::string>(app, "--checkpoint", "checkpoint", "checkpoint path");
  o.add<std::string>(app, "--report-dir", "report_dir", "report output directory");
}

json read_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw aord::ConfigError("config: cannot open '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw aord::ConfigError("config: " + path + ": " + e.what());
  }
  if (j.is_object() && j.contains("artifact_version") && j.contains("config")) j = j.at("config");
  if (!j.is_object()) throw aord::ConfigError("config: " + path + ": expected a JSON object");
  return j;
}

std::vector<double> parse_vector(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) throw aord::ConfigError("vector: empty value");
    const std::string t = item.substr(b, e - b + 1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size()) throw aord::ConfigError("vector: cannot parse '" + t + "'");
    out.push_back(v);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Autoregressive ordinal regression with a diffusion head"};
  app.require_subcommand(1);

  // gen-data
  aord::GenDataOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "write a synthetic long-tailed ordinal dataset");
  gen_cmd->add_option("--k", gen.synth.num_classes, "number of classes")->capture_default_str();
  gen_cmd->add_option("--n", gen.synth.n_total, "training examples")->capture_default_str();
  gen_cmd->add_option("--n-test", gen.n_test, "test examples")->capture_default_str();
  gen_cmd->add_option("--dim", gen.synth.dim, "input dimension D")->capture_default_str();
  gen_cmd->add_option("--tail-ratio", gen.synth.tail_ratio, "class c frequency ~ tail_ratio^c")->capture_default_str();
  gen_cmd->add_option("--ambiguity", gen.synth.ambiguity, "latent class spread")->capture_default_str();
  gen_cmd->add_option("--seed", gen.synth.seed, "seed")->capture_default_str();
  gen_cmd->add_option("--out", gen.out_dir, "output directory")->capture_default_str();

  // train / eval / predict share the run flags
  std::string config_path;
  Overlay train_flags, eval_flags, predict_flags;
  bool resume = false;
  auto* train_cmd = app.add_subcommand("train", "train a model and write a checkpoint");
  train_cmd->add_option("--config", config_path, "JSON config file (flags override it)");
  train_cmd->add_flag("--resume", resume, "continue from the checkpoint at --checkpoint");
  add_run_flags(train_cmd, train_flags);

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint and write reports");
  eval_cmd->add_option("--config", config_path, "JSON config file (flags override it)");
  add_run_flags(eval_cmd, eval_flags);

  std::string vector_text, input_file;
  std::size_t input_index = 0;
  auto* predict_cmd = app.add_subcommand("predict", "print the per-step trace for one feature vector");
  predict_cmd->add_option("--config", config_path, "JSON config file (flags override it)");
  auto* vec_opt = predict_cmd->add_option("--vector", vector_text, "comma-separated feature values");
  auto* file_opt = predict_cmd->add_option("--input", input_file, "feature file to take one row from");
  vec_opt->excludes(file_opt);
  predict_cmd->add_option("--index", input_index, "row of --input")->needs(file_opt);
  add_run_flags(predict_cmd, predict_flags);

  std::vector<std::string> report_inputs;
  std::string report_out = "report";
  auto* report_cmd = app.add_subcommand("report", "compare metrics.json files across heads");
  report_cmd->add_option("inputs", report_inputs, "[name=]path/to/metrics.json")->required();
  report_cmd->add_option("--out", report_out, "output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (gen_cmd->parsed()) {
      aord::cmd_gen_data(gen, std::cout);
    } else if (train_cmd->parsed()) {
      json overlay = read_config_file(config_path);
      overlay.update(train_flags.collect());
      aord::RunConfig cfg;
      aord::apply_json(cfg, overlay);
      aord::cmd_train(cfg, resume, std::cout);
    } else if (eval_cmd->parsed()) {
      json overlay = read_config_file(config_path);
      overlay.update(eval_flags.collect());
      aord::EvalRequest req;
      req.checkpoint = overlay.value("checkpoint", aord::RunConfig{}.checkpoint);
      req.overlay = overlay;
      aord::cmd_eval(req, std::cout);
    } else if (predict_cmd->parsed()) {
      json overlay = read_config_file(config_path);
      overlay.update(predict_flags.collect());
      aord::EvalRequest req;
      req.checkpoint = overlay.value("checkpoint", aord::RunConfig{}.checkpoint);
      req.overlay = overlay;
      std::vector<double> x;
      if (!vector_text.empty()) {
        x = parse_vector(vector_text);
      } else if (!input_file.empty()) {
        const aord::Dataset data = aord::load_feature_file(input_file);
        if (input_index >= data.size()) {
          throw aord::ConfigError("index: " + std::to_string(input_index) + " out of range for " +
                                  std::to_string(data.size()) + " rows");
        }
        const auto col = data.inputs.col(static_cast<Eigen::Index>(input_index));
        x.assign(col.data(), col.data() + col.size());
      } else {
        throw aord::ConfigError("predict: give --vector or --input");
      }
      aord::cmd_predict(req, x, std::cout);
    } else if (report_cmd->parsed()) {
      std::vector<aord::ReportInput> inputs;
      for (const auto& s : report_inputs) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) {
          inputs.push_back({"", s});
        } else {
          inputs.push_back({s.substr(0, eq), s.substr(eq + 1)});
        }
      }
      std::cout << aord::cmd_report(inputs, report_out);
    }
  } catch (const aord::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const aord::IngestionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const aord::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
