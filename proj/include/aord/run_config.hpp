#pragma once

// Run configuration shared by every subcommand.
//
// Sources merge as defaults < config file < command-line flags. Both the file
// and the flag overlay are JSON objects applied through `apply_json`, so one
// code path type-checks every field. Unknown keys are rejected.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "aord/model_bundle.hpp"
#include "aord/nn.hpp"

namespace aord {

inline constexpr const char* kArtifactVersion = "aord 1.0.0";

struct RunConfig {
  // model
  std::string head = "diffusion";
  std::string fusion = "cross_attention";
  bool attention_residual = true;
  int k = 5;
  int d = 0;  // 0: taken from the training data
  int w = 256;
  int r = 3;
  std::string encoder = "mlp";
  int encoder_hidden = 64;
  int feature_dim = 64;
  bool encoder_trainable = true;
  int t_train = 1000;
  int inference_steps = 100;
  // optimization
  double lr = 1e-3;
  int batch_size = 32;
  int epochs = 0;  // required by train
  // inference
  int samples_per_step = 5;
  std::uint64_t seed = 0;
  int threads = 1;
  // paths
  std::string data;
  std::string test;
  std::string checkpoint = "model.ckpt";
  std::string report_dir = "report";
};

nlohmann::json to_json(const RunConfig& cfg);
// Overlays the keys present in `j`; throws ConfigError naming the field.
void apply_json(RunConfig& cfg, const nlohmann::json& j);
RunConfig load_run_config(const std::string& path, RunConfig base = {});

// Field-by-field checks that need no data. Throws ConfigError.
void validate(const RunConfig& cfg);
void validate_for_training(const RunConfig& cfg);

// Keys that determine parameter shapes and the noise schedule.
const std::vector<std::string>& model_keys();
std::string model_hash(const RunConfig& cfg);
// Names of model keys whose values differ.
std::vector<std::string> model_mismatches(const RunConfig& a, const RunConfig& b);

ModelConfig model_config(const RunConfig& cfg);
AdamConfig adam_config(const RunConfig& cfg);

}  // namespace aord
