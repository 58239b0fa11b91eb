#pragma once

// Diffusion head for one binary step y in {0,1} given a condition C.
//
// Forward noising uses the cumulative product of the schedule:
//   N_t = sqrt(abar_t) * y + sqrt(1 - abar_t) * eps.
// The denoiser predicts the clean target y0 directly and is trained with
// (y - denoise(N_t, t, C))^2. The sampler converts that prediction into a
// noise estimate and runs the ancestral DDPM update on a respaced chain.

#include <functional>
#include <span>
#include <vector>

#include "aord/nn.hpp"

namespace aord {

struct NoiseSchedule {
  int train_steps = 0;
  // 1-indexed: entry t for t in [1, T]; entry 0 holds beta=0, alpha=abar=1.
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;

  // Ascending respaced timesteps, first is 1, last is T (when more than one step).
  std::vector<int> timesteps;
  // Per respaced index i: the coarse-chain step coefficient abar[t_i] / abar[t_{i-1}]
  // and the DDPM posterior standard deviation. step_sigma[0] is 0.
  std::vector<double> step_alpha;
  std::vector<double> step_sigma;

  int inference_steps() const { return static_cast<int>(timesteps.size()); }
};

constexpr double kBetaStart = 1e-4;
constexpr double kBetaEnd = 0.02;

// Linear beta in [1e-4, 0.02] over T steps. Throws ConfigError unless
// 1 <= inference_steps <= T.
NoiseSchedule make_schedule(int train_steps, int inference_steps);

struct NoisyTarget {
  double value = 0.0;
  int t = 1;
  double eps = 0.0;
};

NoisyTarget forward_noise(double y, int t, double eps, const NoiseSchedule& schedule);

// 1 if y0 >= 0.5.
int binarize(double y0);

// [cos(t f_i), sin(t f_i)] with f_i = 10000^(-i / (dim/2)); odd dims pad one zero.
Matrix timestep_embedding(std::span<const int> t, int dim);

struct DenoiserConfig {
  int width = 256;
  int depth = 3;
};

struct DenoiserBlock {
  Linear modulation;  // W -> 3W, rows: scale | shift | gate
  Linear ff1;
  Linear ff2;
};

struct DenoiserBlockCache {
  Matrix modulation;
  LayerNormCache norm;
  Matrix modulated;
  Matrix pre_activation;
  Matrix activation;
  Matrix ff_out;
  Matrix input;
};

struct DenoiserCache {
  Eigen::RowVectorXd noisy;
  Matrix sinusoid;
  Matrix cond;  // C + time embedding
  std::vector<DenoiserBlockCache> blocks;
  Matrix last;
};

class ConditionedDenoiser;

// Residual MLP: u0 = in_proj(N_t); for each block
//   (scale, shift, gate) = modulation(C + time_proj(sinusoid(t)))
//   u <- u + gate * ff2(silu(ff1(scale * LN(u) + shift)))
// and the output is out_proj(u).
class Denoiser {
 public:
  Denoiser() = default;
  Denoiser(const DenoiserConfig& cfg);

  const DenoiserConfig& config() const { return cfg_; }

  void init(Rng& rng);

  Eigen::RowVectorXd forward(const Eigen::RowVectorXd& noisy, std::span<const int> t, const Matrix& conditions,
                             DenoiserCache& cache) const;
  Eigen::RowVectorXd denoise(const Eigen::RowVectorXd& noisy, std::span<const int> t,
                             const Matrix& conditions) const;
  double denoise(const NoisyTarget& noisy, const Vector& condition) const;
  // Accumulates parameter gradients; returns d(loss)/dC.
  Matrix backward(const DenoiserCache& cache, const Eigen::RowVectorXd& dout);

  ConditionedDenoiser conditioned(const Matrix& conditions) const;

  void collect(ParamRefs& out);

  Linear& time_projection() { return time_proj_; }
  Linear& input_projection() { return in_proj_; }
  Linear& output_projection() { return out_proj_; }
  std::vector<DenoiserBlock>& blocks() { return blocks_; }

 private:
  friend class ConditionedDenoiser;
  void check_conditions(const Matrix& conditions) const;

  DenoiserConfig cfg_;
  Linear time_proj_;
  Linear in_proj_;
  std::vector<DenoiserBlock> blocks_;
  Linear out_proj_;
};

// Denoiser with a fixed batch of conditions, for repeated evaluation along a
// sampling chain. The condition part of every modulation is computed once.
class ConditionedDenoiser {
 public:
  ConditionedDenoiser(const Denoiser& model, const Matrix& conditions);
  Eigen::RowVectorXd operator()(const Eigen::RowVectorXd& noisy, int t) const;

 private:
  const Denoiser* model_;
  std::vector<Matrix> cond_modulation_;
};

// Maps noisy values at timestep t to clean-target predictions.
using X0Predictor = std::function<Eigen::RowVectorXd(const Eigen::RowVectorXd& noisy, int t)>;

struct NoiseDraws {
  std::vector<int> t;
  std::vector<double> eps;
};

NoiseDraws draw_noise(std::size_t count, const NoiseSchedule& schedule, Rng& rng);

struct DiffusionLoss {
  double loss = 0.0;
  Eigen::RowVectorXd squared_error;
  Matrix dconditions;  // filled when gradients are requested
};

// Mean of (y - denoise(N_t, t, C))^2 over the batch. When `accumulate_grad`
// is set, parameter gradients of the mean loss scaled by `grad_scale` are
// accumulated into the denoiser and d/dC is returned.
DiffusionLoss diffusion_loss(const Eigen::RowVectorXd& targets, const Matrix& conditions, const NoiseDraws& draws,
                             Denoiser& denoiser, const NoiseSchedule& schedule, bool accumulate_grad,
                             double grad_scale = 1.0);

// Reverse diffusion from N(0,1) noise over the respaced chain. Column i draws
// its noise from *rngs[i]; columns may share a generator. With
// `deterministic` every sigma is treated as zero. Throws NumericalError on a
// non-finite intermediate.
Eigen::RowVectorXd reverse_sample(const X0Predictor& predictor, const NoiseSchedule& schedule,
                                  std::span<Rng* const> rngs, bool deterministic = false);

}  // namespace aord
