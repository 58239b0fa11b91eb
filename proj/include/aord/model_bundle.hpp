#pragma once

#include <cstdint>
#include <string>

#include "aord/diffusion_head.hpp"
#include "aord/features.hpp"
#include "aord/fusion.hpp"

namespace aord {

enum class HeadKind { Diffusion, ArCe, Softmax };

std::string to_string(HeadKind head);
HeadKind parse_head(const std::string& s);
std::string to_string(EncoderKind kind);
EncoderKind parse_encoder(const std::string& s);

struct ModelConfig {
  HeadKind head = HeadKind::Diffusion;
  FusionMode fusion = FusionMode::CrossAttention;
  bool attention_residual = true;
  int num_classes = 5;
  int input_dim = 1;
  EncoderKind encoder = EncoderKind::Mlp;
  int encoder_hidden = 64;
  int feature_dim = 64;
  bool encoder_trainable = true;
  int width = 256;
  int depth = 3;
  int t_train = 1000;
  int inference_steps = 100;
};

// Per-step binary logit over the fused condition.
struct CeHead {
  Linear logit;
};

// K-way logits straight from the feature vector.
struct SoftmaxHead {
  Linear logits;
};

// Everything one model needs. Only the selected head carries parameters.
struct ModelBundle {
  ModelConfig config;
  Encoder encoder;
  Fusion fusion;
  Denoiser denoiser;
  CeHead ce;
  SoftmaxHead softmax;
  NoiseSchedule schedule;

  explicit ModelBundle(const ModelConfig& cfg);

  int num_classes() const { return config.num_classes; }
  int steps() const { return config.num_classes - 1; }
  bool autoregressive() const { return config.head != HeadKind::Softmax; }

  // Seeds every parameter group from the "init" stream of `seed`.
  void init(std::uint64_t seed);

  ParamRefs trainable_params();
  ParamRefs all_params();
};

}  // namespace aord
