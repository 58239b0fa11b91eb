#pragma once

// Synthetic long-tailed ordinal data.
//
// Class c is drawn with probability proportional to tail_ratio^c, a latent
// z ~ N(c, ambiguity^2) is drawn, and lifted to `dim` inputs as
// A z + b + eta with seed-fixed A, b and eta ~ N(0, 0.01 I).

#include <cstdint>
#include <string_view>
#include <vector>

#include "aord/features.hpp"

namespace aord {

struct SynthConfig {
  int num_classes = 5;
  int n_total = 5000;
  int dim = 32;
  double tail_ratio = 0.5;
  double ambiguity = 0.35;
  std::uint64_t seed = 0;
};

constexpr double kLiftNoiseVariance = 0.01;

// Throws ConfigError naming the offending field.
void validate(const SynthConfig& cfg);

std::vector<double> class_priors(const SynthConfig& cfg);

struct SynthDataset {
  Dataset data;
  std::vector<double> latents;
};

// Train and test splits of one config share the lift (A, b) and differ only in
// their sample stream.
SynthDataset generate(const SynthConfig& cfg, std::string_view split = "train");

// Latents as a D=1 feature-file dataset.
Dataset latent_sidecar(const SynthDataset& ds);
SynthDataset attach_latents(Dataset data, const Dataset& sidecar);

// Accuracy of argmax_c prior_c * N(z; c, ambiguity^2) on the true latents.
// Throws std::invalid_argument when latents are missing.
double bayes_accuracy(const SynthConfig& cfg, const SynthDataset& ds);
int bayes_predict(const SynthConfig& cfg, double latent);

}  // namespace aord
