#include "aord/run_config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <type_traits>

#include "aord/errors.hpp"
#include "aord/fusion.hpp"
#include "aord/rng.hpp"

namespace aord {

using nlohmann::json;

namespace {

void need(bool ok, const std::string& key, const char* type) {
  if (!ok) throw ConfigError(key + ": expected " + type);
}

struct Field {
  std::function<void(RunConfig&, const json&)> set;
  std::function<json(const RunConfig&)> get;
};

template <class M>
Field field(M RunConfig::*member, std::string key) {
  Field f;
  f.get = [member](const RunConfig& c) { return json(c.*member); };
  f.set = [member, key](RunConfig& c, const json& v) {
    using T = std::remove_cvref_t<decltype(c.*member)>;
    if constexpr (std::is_same_v<T, bool>) {
      need(v.is_boolean(), key, "a boolean");
      c.*member = v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      need(v.is_string(), key, "a string");
      c.*member = v.get<std::string>();
    } else if constexpr (std::is_same_v<T, double>) {
      need(v.is_number(), key, "a number");
      c.*member = v.get<double>();
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      need(v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0), key,
           "a non-negative integer");
      c.*member = v.get<std::uint64_t>();
    } else {
      need(v.is_number_integer(), key, "an integer");
      const auto wide = v.get<long long>();
      if (wide < std::numeric_limits<int>::min() || wide > std::numeric_limits<int>::max()) {
        throw ConfigError(key + ": out of range");
      }
      c.*member = static_cast<int>(wide);
    }
  };
  return f;
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      {"head", field(&RunConfig::head, "head")},
      {"fusion", field(&RunConfig::fusion, "fusion")},
      {"attention_residual", field(&RunConfig::attention_residual, "attention_residual")},
      {"k", field(&RunConfig::k, "k")},
      {"d", field(&RunConfig::d, "d")},
      {"w", field(&RunConfig::w, "w")},
      {"r", field(&RunConfig::r, "r")},
      {"encoder", field(&RunConfig::encoder, "encoder")},
      {"encoder_hidden", field(&RunConfig::encoder_hidden, "encoder_hidden")},
      {"feature_dim", field(&RunConfig::feature_dim, "feature_dim")},
      {"encoder_trainable", field(&RunConfig::encoder_trainable, "encoder_trainable")},
      {"t_train", field(&RunConfig::t_train, "t_train")},
      {"inference_steps", field(&RunConfig::inference_steps, "inference_steps")},
      {"lr", field(&RunConfig::lr, "lr")},
      {"batch_size", field(&RunConfig::batch_size, "batch_size")},
      {"epochs", field(&RunConfig::epochs, "epochs")},
      {"samples_per_step", field(&RunConfig::samples_per_step, "samples_per_step")},
      {"seed", field(&RunConfig::seed, "seed")},
      {"threads", field(&RunConfig::threads, "threads")},
      {"data", field(&RunConfig::data, "data")},
      {"test", field(&RunConfig::test, "test")},
      {"checkpoint", field(&RunConfig::checkpoint, "checkpoint")},
      {"report_dir", field(&RunConfig::report_dir, "report_dir")},
  };
  return table;
}

void at_least(int value, int lo, const std::string& key) {
  if (value < lo) throw ConfigError(key + ": must be >= " + std::to_string(lo) + ", got " + std::to_string(value));
}

}  // namespace

json to_json(const RunConfig& cfg) {
  json j = json::object();
  for (const auto& [key, f] : fields()) j[key] = f.get(cfg);
  return j;
}

void apply_json(RunConfig& cfg, const json& j) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    const auto it = fields().find(key);
    if (it == fields().end()) throw ConfigError(key + ": unknown config key");
    it->second.set(cfg, value);
  }
}

RunConfig load_run_config(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + path + ": " + e.what());
  }
  // A run manifest carries its config under "config".
  if (j.is_object() && j.contains("artifact_version") && j.contains("config")) j = j.at("config");
  apply_json(base, j);
  return base;
}

void validate(const RunConfig& cfg) {
  parse_head(cfg.head);
  parse_fusion_mode(cfg.fusion);
  parse_encoder(cfg.encoder);
  at_least(cfg.k, 2, "k");
  at_least(cfg.d, 0, "d");
  at_least(cfg.w, 1, "w");
  at_least(cfg.r, 1, "r");
  at_least(cfg.encoder_hidden, 1, "encoder_hidden");
  at_least(cfg.feature_dim, 1, "feature_dim");
  at_least(cfg.t_train, 1, "t_train");
  at_least(cfg.inference_steps, 1, "inference_steps");
  if (cfg.inference_steps > cfg.t_train) {
    throw ConfigError("inference_steps: must be <= t_train (" + std::to_string(cfg.t_train) + "), got " +
                      std::to_string(cfg.inference_steps));
  }
  if (!std::isfinite(cfg.lr) || cfg.lr <= 0.0) throw ConfigError("lr: must be a positive finite number");
  at_least(cfg.batch_size, 1, "batch_size");
  at_least(cfg.epochs, 0, "epochs");
  at_least(cfg.samples_per_step, 1, "samples_per_step");
  at_least(cfg.threads, 1, "threads");
  if (cfg.checkpoint.empty()) throw ConfigError("checkpoint: path must not be empty");
}

void validate_for_training(const RunConfig& cfg) {
  validate(cfg);
  if (cfg.epochs < 1) throw ConfigError("epochs: required for training (set --epochs or \"epochs\" in the config)");
  if (cfg.data.empty()) throw ConfigError("data: training data path is required");
}

const std::vector<std::string>& model_keys() {
  static const std::vector<std::string> keys = {
      "head",           "fusion",      "attention_residual", "k",       "d",
      "w",              "r",           "encoder",            "encoder_hidden",
      "feature_dim",    "encoder_trainable", "t_train",      "inference_steps"};
  return keys;
}

std::string model_hash(const RunConfig& cfg) {
  json j = json::object();
  for (const auto& key : model_keys()) j[key] = fields().at(key).get(cfg);
  std::ostringstream out;
  out << std::hex << fnv1a(j.dump());
  return out.str();
}

std::vector<std::string> model_mismatches(const RunConfig& a, const RunConfig& b) {
  std::vector<std::string> out;
  for (const auto& key : model_keys()) {
    const auto& f = fields().at(key);
    if (f.get(a) != f.get(b)) out.push_back(key);
  }
  return out;
}

ModelConfig model_config(const RunConfig& cfg) {
  ModelConfig m;
  m.head = parse_head(cfg.head);
  m.fusion = parse_fusion_mode(cfg.fusion);
  m.attention_residual = cfg.attention_residual;
  m.num_classes = cfg.k;
  m.input_dim = cfg.d;
  m.encoder = parse_encoder(cfg.encoder);
  m.encoder_hidden = cfg.encoder_hidden;
  m.feature_dim = cfg.feature_dim;
  m.encoder_trainable = cfg.encoder_trainable;
  m.width = cfg.w;
  m.depth = cfg.r;
  m.t_train = cfg.t_train;
  m.inference_steps = cfg.inference_steps;
  return m;
}

AdamConfig adam_config(const RunConfig& cfg) {
  AdamConfig a;
  a.learning_rate = cfg.lr;
  return a;
}

}  // namespace aord
