#include "aord/model_bundle.hpp"

#include "aord/errors.hpp"

namespace aord {

std::string to_string(HeadKind head) {
  switch (head) {
    case HeadKind::Diffusion: return "diffusion";
    case HeadKind::ArCe: return "ar_ce";
    case HeadKind::Softmax: return "softmax";
  }
  return "?";
}

HeadKind parse_head(const std::string& s) {
  if (s == "diffusion") return HeadKind::Diffusion;
  if (s == "ar_ce") return HeadKind::ArCe;
  if (s == "softmax") return HeadKind::Softmax;
  throw ConfigError("head: expected one of diffusion, ar_ce, softmax; got '" + s + "'");
}

std::string to_string(EncoderKind kind) { return kind == EncoderKind::Mlp ? "mlp" : "identity"; }

EncoderKind parse_encoder(const std::string& s) {
  if (s == "mlp") return EncoderKind::Mlp;
  if (s == "identity" || s == "none") return EncoderKind::Identity;
  throw ConfigError("encoder: expected 'mlp' or 'identity', got '" + s + "'");
}

namespace {

EncoderConfig encoder_config(const ModelConfig& cfg) {
  return {cfg.encoder, cfg.input_dim, cfg.encoder_hidden, cfg.feature_dim, cfg.encoder_trainable};
}

int feature_width(const ModelConfig& cfg) {
  return cfg.encoder == EncoderKind::Identity ? cfg.input_dim : cfg.feature_dim;
}

}  // namespace

ModelBundle::ModelBundle(const ModelConfig& cfg)
    : config(cfg),
      encoder(encoder_config(cfg)),
      fusion(FusionConfig{feature_width(cfg), cfg.width, cfg.num_classes, cfg.fusion, cfg.attention_residual}),
      schedule(make_schedule(cfg.t_train, cfg.inference_steps)) {
  if (cfg.num_classes < 2) throw ConfigError("k: class count must be >= 2");
  switch (cfg.head) {
    case HeadKind::Diffusion: denoiser = Denoiser(DenoiserConfig{cfg.width, cfg.depth}); break;
    case HeadKind::ArCe: ce.logit = Linear("ce_head.logit", cfg.width, 1); break;
    case HeadKind::Softmax: softmax.logits = Linear("softmax_head.logits", feature_width(cfg), cfg.num_classes); break;
  }
}

void ModelBundle::init(std::uint64_t seed) {
  Rng enc_rng = make_rng(seed, "init", 0);
  Rng fusion_rng = make_rng(seed, "init", 1);
  Rng head_rng = make_rng(seed, "init", 2);
  encoder.init(enc_rng);
  switch (config.head) {
    case HeadKind::Diffusion:
      fusion.init(fusion_rng);
      denoiser.init(head_rng);
      break;
    case HeadKind::ArCe:
      fusion.init(fusion_rng);
      ce.logit.init(head_rng);
      break;
    case HeadKind::Softmax: softmax.logits.init(head_rng); break;
  }
}

ParamRefs ModelBundle::trainable_params() {
  ParamRefs out;
  encoder.collect(out);
  switch (config.head) {
    case HeadKind::Diffusion:
      fusion.collect(out);
      denoiser.collect(out);
      break;
    case HeadKind::ArCe:
      fusion.collect(out);
      ce.logit.collect(out);
      break;
    case HeadKind::Softmax: softmax.logits.collect(out); break;
  }
  return out;
}

ParamRefs ModelBundle::all_params() {
  ParamRefs out;
  encoder.collect_all(out);
  switch (config.head) {
    case HeadKind::Diffusion:
      fusion.collect(out);
      denoiser.collect(out);
      break;
    case HeadKind::ArCe:
      fusion.collect(out);
      ce.logit.collect(out);
      break;
    case HeadKind::Softmax: softmax.logits.collect(out); break;
  }
  return out;
}

}  // namespace aord
