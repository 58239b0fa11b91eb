#include "aord/synth_data.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "aord/errors.hpp"
#include "aord/rng.hpp"

namespace aord {

void validate(const SynthConfig& cfg) {
  if (cfg.num_classes < 2) throw ConfigError("k: class count must be >= 2, got " + std::to_string(cfg.num_classes));
  if (cfg.n_total < cfg.num_classes) {
    throw ConfigError("n: example count must be >= k (" + std::to_string(cfg.num_classes) + "), got " +
                      std::to_string(cfg.n_total));
  }
  if (cfg.dim < 1) throw ConfigError("dim: input dimension must be >= 1, got " + std::to_string(cfg.dim));
  if (!(cfg.tail_ratio > 0.0 && cfg.tail_ratio <= 1.0)) {
    throw ConfigError("tail_ratio: must lie in (0, 1], got " + std::to_string(cfg.tail_ratio));
  }
  if (!(cfg.ambiguity > 0.0) || !std::isfinite(cfg.ambiguity)) {
    throw ConfigError("ambiguity: must be > 0, got " + std::to_string(cfg.ambiguity));
  }
}

std::vector<double> class_priors(const SynthConfig& cfg) {
  std::vector<double> p(static_cast<std::size_t>(cfg.num_classes));
  double total = 0.0;
  for (int c = 0; c < cfg.num_classes; ++c) {
    p[static_cast<std::size_t>(c)] = std::pow(cfg.tail_ratio, c);
    total += p[static_cast<std::size_t>(c)];
  }
  for (auto& v : p) v /= total;
  return p;
}

SynthDataset generate(const SynthConfig& cfg, std::string_view split) {
  validate(cfg);
  const auto priors = class_priors(cfg);
  const auto n = static_cast<std::size_t>(cfg.n_total);

  Rng lift_rng = make_rng(cfg.seed, "data/lift");
  Vector lift_a(cfg.dim);
  Vector lift_b(cfg.dim);
  for (int i = 0; i < cfg.dim; ++i) lift_a(i) = standard_normal(lift_rng);
  for (int i = 0; i < cfg.dim; ++i) lift_b(i) = standard_normal(lift_rng);

  Rng rng = make_rng(cfg.seed, std::string("data/") + std::string(split));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  SynthDataset out;
  out.data.num_classes = cfg.num_classes;
  out.data.labels.resize(n);
  out.latents.resize(n);

  auto draw_latent = [&](int c) { return c + cfg.ambiguity * standard_normal(rng); };
  std::vector<int> counts(static_cast<std::size_t>(cfg.num_classes), 0);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = unif(rng);
    int c = cfg.num_classes - 1;
    double acc = 0.0;
    for (int k = 0; k < cfg.num_classes; ++k) {
      acc += priors[static_cast<std::size_t>(k)];
      if (u < acc) {
        c = k;
        break;
      }
    }
    out.data.labels[i] = c;
    out.latents[i] = draw_latent(c);
    ++counts[static_cast<std::size_t>(c)];
  }

  // Every class gets at least one example: missing classes overwrite examples
  // from the end whose class has spare members.
  std::size_t cursor = n;
  for (int c = 0; c < cfg.num_classes; ++c) {
    if (counts[static_cast<std::size_t>(c)] > 0) continue;
    while (cursor > 0) {
      --cursor;
      auto& old = counts[static_cast<std::size_t>(out.data.labels[cursor])];
      if (old > 1) {
        --old;
        out.data.labels[cursor] = c;
        out.latents[cursor] = draw_latent(c);
        ++counts[static_cast<std::size_t>(c)];
        break;
      }
    }
  }

  const double noise_sd = std::sqrt(kLiftNoiseVariance);
  out.data.inputs.resize(cfg.dim, static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    auto col = out.data.inputs.col(static_cast<Eigen::Index>(i));
    col = lift_a * out.latents[i] + lift_b;
    for (int r = 0; r < cfg.dim; ++r) col(r) += noise_sd * standard_normal(rng);
  }
  return out;
}

Dataset latent_sidecar(const SynthDataset& ds) {
  Dataset side;
  side.num_classes = ds.data.num_classes;
  side.labels = ds.data.labels;
  side.inputs = Eigen::Map<const Matrix>(ds.latents.data(), 1, static_cast<Eigen::Index>(ds.latents.size()));
  return side;
}

SynthDataset attach_latents(Dataset data, const Dataset& sidecar) {
  if (sidecar.dim() != 1 || sidecar.size() != data.size() || sidecar.labels != data.labels) {
    throw std::invalid_argument("latent sidecar does not match the dataset");
  }
  SynthDataset ds;
  ds.latents.assign(sidecar.inputs.data(), sidecar.inputs.data() + sidecar.inputs.size());
  ds.data = std::move(data);
  return ds;
}

int bayes_predict(const SynthConfig& cfg, double latent) {
  const auto priors = class_priors(cfg);
  int best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  const double var = cfg.ambiguity * cfg.ambiguity;
  for (int c = 0; c < cfg.num_classes; ++c) {
    const double d = latent - c;
    const double score = std::log(priors[static_cast<std::size_t>(c)]) - d * d / (2.0 * var);
    if (score > best_score) {
      best_score = score;
      best = c;
    }
  }
  return best;
}

double bayes_accuracy(const SynthConfig& cfg, const SynthDataset& ds) {
  if (ds.latents.size() != ds.data.size() || ds.latents.empty()) {
    throw std::invalid_argument("bayes_accuracy: dataset has no recorded latents");
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ds.latents.size(); ++i) {
    if (bayes_predict(cfg, ds.latents[i]) == ds.data.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(ds.latents.size());
}

}  // namespace aord
