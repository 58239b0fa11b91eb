#pragma once

// Autoregressive factorization over the K-1 cumulative bits.
//
// Training is teacher forced: step j is conditioned on BOS plus the true bits
// 1..j-1, and every (example, step) pair contributes one loss term. Inference
// conditions each step on the bits the model itself emitted, draws several
// reverse-diffusion samples per step, averages them and binarizes the mean.
// All K-1 steps always run; the class is the count of leading ones.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "aord/metrics.hpp"
#include "aord/model_bundle.hpp"
#include "aord/ordinal_codec.hpp"

namespace aord {

struct StepStats {
  double total_loss = 0.0;
  std::vector<double> step_loss;  // one entry per autoregressive step
  std::size_t terms = 0;
};

// Encoder + fusion forward pass over the teacher-forced prefixes of a batch.
// Column s*B + b of `conditions()` is the condition for step s+1 of example b.
class TeacherForcedPass {
 public:
  // Validates labels and shapes; throws before touching any parameter.
  TeacherForcedPass(ModelBundle& bundle, const Dataset& batch);

  const Matrix& conditions() const { return conditions_; }
  const Eigen::RowVectorXd& targets() const { return targets_; }
  const std::vector<std::vector<TokenSequence>>& prefixes() const { return prefixes_; }
  std::size_t batch_size() const { return batch_; }
  int steps() const { return steps_; }

  // Back-propagates d(loss)/d(conditions) through fusion and encoder.
  void backward(const Matrix& dconditions);

  std::vector<double> per_step_mean(const Eigen::RowVectorXd& per_term) const;

 private:
  ModelBundle* bundle_;
  std::size_t batch_;
  int steps_;
  EncoderCache encoder_cache_;
  std::vector<FusionCache> fusion_caches_;
  std::vector<std::vector<TokenSequence>> prefixes_;
  Matrix conditions_;
  Eigen::RowVectorXd targets_;
};

void check_batch(const ModelBundle& bundle, const Dataset& batch);

// One Adam update of the diffusion-head model on the batch.
StepStats train_step(const Dataset& batch, ModelBundle& bundle, AdamState& adam, const AdamConfig& adam_cfg, Rng& rng);

struct PredictionTrace {
  std::vector<std::vector<double>> samples;  // per step
  std::vector<double> step_value;            // averaged sample (or probability for ar_ce)
  CumulativeCode bits;
  int label = 0;
  bool valid = true;
};

// Overrides the denoiser: returns the y0 predictor used for step `step`
// (1-based) given the batch of conditions.
using StepPredictorFactory = std::function<X0Predictor(int step, const Matrix& conditions)>;

struct PredictOptions {
  int samples_per_step = 5;
  bool deterministic = false;
  StepPredictorFactory predictor;
};

// Raw inputs, one column per example; rngs[i] feeds example i.
std::vector<PredictionTrace> predict_batch(const ModelBundle& bundle, const Matrix& inputs, std::span<Rng* const> rngs,
                                           const PredictOptions& opts = {});
PredictionTrace predict(const ModelBundle& bundle, const Vector& input, Rng& rng, const PredictOptions& opts = {});

struct EvalOptions {
  std::uint64_t seed = 0;
  int samples_per_step = 5;
  int threads = 1;
  std::size_t chunk = 256;
  bool keep_traces = false;
  StepPredictorFactory predictor;
};

struct EvalResult {
  MetricsReport report;
  std::vector<int> predictions;
  std::vector<PredictionTrace> traces;
  std::size_t invalid_count = 0;
};

// Example i draws from the "eval" stream of opts.seed with index i, so results
// do not depend on chunking or thread count.
EvalResult evaluate(const Dataset& data, const ModelBundle& bundle, const EvalOptions& opts);

struct EpochStats {
  int epoch = 0;
  double total_loss = 0.0;
  std::vector<double> step_loss;
  std::size_t batches = 0;
};

// One pass over `data` in shuffled mini-batches; every head. Shuffling and
// noise draws come from the "data" and "diffusion-train" streams indexed by
// epoch, so epoch e is reproducible on its own.
EpochStats train_epoch(const Dataset& data, ModelBundle& bundle, AdamState& adam, const AdamConfig& adam_cfg,
                       int batch_size, std::uint64_t seed, int epoch);

}  // namespace aord
