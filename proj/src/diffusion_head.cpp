#include "aord/diffusion_head.hpp"

#include <cmath>
#include <string>

#include "aord/errors.hpp"

namespace aord {

NoiseSchedule make_schedule(int train_steps, int inference_steps) {
  if (train_steps < 1) throw ConfigError("t_train must be >= 1, got " + std::to_string(train_steps));
  if (inference_steps < 1 || inference_steps > train_steps) {
    throw ConfigError("inference_steps must be in [1, t_train], got " + std::to_string(inference_steps));
  }
  NoiseSchedule s;
  s.train_steps = train_steps;
  const auto n = static_cast<std::size_t>(train_steps) + 1;
  s.beta.assign(n, 0.0);
  s.alpha.assign(n, 1.0);
  s.alpha_bar.assign(n, 1.0);
  for (int t = 1; t <= train_steps; ++t) {
    const double frac = train_steps == 1 ? 0.0 : static_cast<double>(t - 1) / (train_steps - 1);
    const auto i = static_cast<std::size_t>(t);
    s.beta[i] = kBetaStart + (kBetaEnd - kBetaStart) * frac;
    s.alpha[i] = 1.0 - s.beta[i];
    s.alpha_bar[i] = s.alpha_bar[i - 1] * s.alpha[i];
  }

  if (inference_steps == 1) {
    s.timesteps = {1};
  } else {
    for (int i = 0; i < inference_steps; ++i) {
      const double pos = static_cast<double>(i) * (train_steps - 1) / (inference_steps - 1);
      s.timesteps.push_back(1 + static_cast<int>(std::lround(pos)));
    }
  }
  double prev_bar = 1.0;
  for (int t : s.timesteps) {
    const double bar = s.alpha_bar[static_cast<std::size_t>(t)];
    const double step_alpha = bar / prev_bar;
    const double posterior_var = (1.0 - step_alpha) * (1.0 - prev_bar) / (1.0 - bar);
    s.step_alpha.push_back(step_alpha);
    s.step_sigma.push_back(std::sqrt(std::max(posterior_var, 0.0)));
    prev_bar = bar;
  }
  return s;
}

NoisyTarget forward_noise(double y, int t, double eps, const NoiseSchedule& schedule) {
  if (t < 1 || t > schedule.train_steps) throw std::out_of_range("timestep " + std::to_string(t) + " out of range");
  const double bar = schedule.alpha_bar[static_cast<std::size_t>(t)];
  return {std::sqrt(bar) * y + std::sqrt(1.0 - bar) * eps, t, eps};
}

int binarize(double y0) { return y0 >= 0.5 ? 1 : 0; }

Matrix timestep_embedding(std::span<const int> t, int dim) {
  const int half = dim / 2;
  Matrix out = Matrix::Zero(dim, static_cast<Eigen::Index>(t.size()));
  for (int i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * i / half);
    for (std::size_t b = 0; b < t.size(); ++b) {
      const double arg = t[b] * freq;
      out(i, static_cast<Eigen::Index>(b)) = std::cos(arg);
      out(half + i, static_cast<Eigen::Index>(b)) = std::sin(arg);
    }
  }
  return out;
}

Denoiser::Denoiser(const DenoiserConfig& cfg)
    : cfg_(cfg),
      time_proj_("denoiser.time_proj", cfg.width, cfg.width),
      in_proj_("denoiser.in_proj", 1, cfg.width),
      out_proj_("denoiser.out_proj", cfg.width, 1) {
  if (cfg.width < 1 || cfg.depth < 0) throw ConfigError("denoiser width must be >= 1 and depth >= 0");
  for (int r = 0; r < cfg.depth; ++r) {
    const std::string p = "denoiser.block" + std::to_string(r);
    blocks_.push_back({Linear(p + ".modulation", cfg.width, 3 * cfg.width), Linear(p + ".ff1", cfg.width, cfg.width),
                       Linear(p + ".ff2", cfg.width, cfg.width)});
  }
}

void Denoiser::init(Rng& rng) {
  time_proj_.init(rng);
  in_proj_.init(rng);
  for (auto& b : blocks_) {
    b.modulation.init(rng);
    b.modulation.bias.value.topRows(cfg_.width).array() += 1.0;
    b.ff1.init(rng);
    b.ff2.init(rng);
  }
  out_proj_.init(rng);
}

void Denoiser::collect(ParamRefs& out) {
  time_proj_.collect(out);
  in_proj_.collect(out);
  for (auto& b : blocks_) {
    b.modulation.collect(out);
    b.ff1.collect(out);
    b.ff2.collect(out);
  }
  out_proj_.collect(out);
}

void Denoiser::check_conditions(const Matrix& conditions) const {
  if (conditions.rows() != cfg_.width) {
    throw std::invalid_argument("denoiser: condition width " + std::to_string(conditions.rows()) +
                                " != " + std::to_string(cfg_.width));
  }
}

Eigen::RowVectorXd Denoiser::forward(const Eigen::RowVectorXd& noisy, std::span<const int> t,
                                     const Matrix& conditions, DenoiserCache& cache) const {
  check_conditions(conditions);
  if (noisy.size() != conditions.cols() || t.size() != static_cast<std::size_t>(noisy.size())) {
    throw std::invalid_argument("denoiser: batch sizes differ");
  }
  const int w = cfg_.width;
  cache.noisy = noisy;
  cache.sinusoid = timestep_embedding(t, w);
  cache.cond = conditions + time_proj_.forward(cache.sinusoid);
  cache.blocks.resize(blocks_.size());

  Matrix u = in_proj_.forward(noisy);
  for (std::size_t r = 0; r < blocks_.size(); ++r) {
    const auto& blk = blocks_[r];
    auto& bc = cache.blocks[r];
    bc.input = u;
    bc.modulation = blk.modulation.forward(cache.cond);
    bc.norm = layer_norm(u);
    bc.modulated = (bc.modulation.topRows(w).array() * bc.norm.normalized.array() +
                    bc.modulation.middleRows(w, w).array()).matrix();
    bc.pre_activation = blk.ff1.forward(bc.modulated);
    bc.activation = silu(bc.pre_activation);
    bc.ff_out = blk.ff2.forward(bc.activation);
    u += (bc.modulation.bottomRows(w).array() * bc.ff_out.array()).matrix();
  }
  cache.last = u;
  return out_proj_.forward(u).row(0);
}

Eigen::RowVectorXd Denoiser::denoise(const Eigen::RowVectorXd& noisy, std::span<const int> t,
                                     const Matrix& conditions) const {
  DenoiserCache cache;
  return forward(noisy, t, conditions, cache);
}

double Denoiser::denoise(const NoisyTarget& noisy, const Vector& condition) const {
  Eigen::RowVectorXd n(1);
  n(0) = noisy.value;
  const int t = noisy.t;
  return denoise(n, std::span<const int>(&t, 1), Matrix(condition))(0);
}

Matrix Denoiser::backward(const DenoiserCache& cache, const Eigen::RowVectorXd& dout) {
  const int w = cfg_.width;
  Matrix du = out_proj_.backward(cache.last, Matrix(dout));
  Matrix dcond = Matrix::Zero(w, dout.size());
  for (std::size_t ri = blocks_.size(); ri-- > 0;) {
    auto& blk = blocks_[ri];
    const auto& bc = cache.blocks[ri];
    Matrix dmod(3 * w, dout.size());
    dmod.bottomRows(w) = (du.array() * bc.ff_out.array()).matrix();
    const Matrix dff = (du.array() * bc.modulation.bottomRows(w).array()).matrix();
    const Matrix dact = blk.ff2.backward(bc.activation, dff);
    const Matrix dpre = (dact.array() * silu_grad(bc.pre_activation).array()).matrix();
    const Matrix dmodulated = blk.ff1.backward(bc.modulated, dpre);
    dmod.topRows(w) = (dmodulated.array() * bc.norm.normalized.array()).matrix();
    dmod.middleRows(w, w) = dmodulated;
    const Matrix dnorm = (dmodulated.array() * bc.modulation.topRows(w).array()).matrix();
    du += layer_norm_backward(bc.norm, dnorm);
    dcond += blk.modulation.backward(cache.cond, dmod);
  }
  in_proj_.backward_params(Matrix(cache.noisy), du);
  time_proj_.backward_params(cache.sinusoid, dcond);
  return dcond;
}

ConditionedDenoiser Denoiser::conditioned(const Matrix& conditions) const { return {*this, conditions}; }

ConditionedDenoiser::ConditionedDenoiser(const Denoiser& model, const Matrix& conditions) : model_(&model) {
  model.check_conditions(conditions);
  for (const auto& blk : model.blocks_) cond_modulation_.push_back(blk.modulation.weight.value * conditions);
}

Eigen::RowVectorXd ConditionedDenoiser::operator()(const Eigen::RowVectorXd& noisy, int t) const {
  const auto& m = *model_;
  const int w = m.cfg_.width;
  if (!m.blocks_.empty() && noisy.size() != cond_modulation_.front().cols()) {
    throw std::invalid_argument("conditioned denoiser: batch size differs from conditions");
  }
  const Matrix temb = m.time_proj_.forward(timestep_embedding(std::span<const int>(&t, 1), w));
  Matrix u = m.in_proj_.forward(noisy);
  for (std::size_t r = 0; r < m.blocks_.size(); ++r) {
    const auto& blk = m.blocks_[r];
    const Vector time_mod = blk.modulation.weight.value * temb.col(0) + blk.modulation.bias.value.col(0);
    const Matrix mod = cond_modulation_[r].colwise() + time_mod;
    const auto norm = layer_norm(u);
    const Matrix modulated = (mod.topRows(w).array() * norm.normalized.array() + mod.middleRows(w, w).array()).matrix();
    const Matrix ff = blk.ff2.forward(silu(blk.ff1.forward(modulated)));
    u += (mod.bottomRows(w).array() * ff.array()).matrix();
  }
  return m.out_proj_.forward(u).row(0);
}

NoiseDraws draw_noise(std::size_t count, const NoiseSchedule& schedule, Rng& rng) {
  std::uniform_int_distribution<int> tdist(1, schedule.train_steps);
  std::normal_distribution<double> ndist(0.0, 1.0);
  NoiseDraws d;
  d.t.reserve(count);
  d.eps.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    d.t.push_back(tdist(rng));
    d.eps.push_back(ndist(rng));
  }
  return d;
}

DiffusionLoss diffusion_loss(const Eigen::RowVectorXd& targets, const Matrix& conditions, const NoiseDraws& draws,
                             Denoiser& denoiser, const NoiseSchedule& schedule, bool accumulate_grad,
                             double grad_scale) {
  const auto n = targets.size();
  if (n == 0) throw std::invalid_argument("diffusion_loss: empty batch");
  if (draws.t.size() != static_cast<std::size_t>(n) || draws.eps.size() != static_cast<std::size_t>(n)) {
    throw std::invalid_argument("diffusion_loss: noise draws do not match the batch");
  }
  Eigen::RowVectorXd noisy(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    noisy(i) = forward_noise(targets(i), draws.t[static_cast<std::size_t>(i)], draws.eps[static_cast<std::size_t>(i)],
                             schedule).value;
  }
  DenoiserCache cache;
  const Eigen::RowVectorXd pred = denoiser.forward(noisy, draws.t, conditions, cache);
  const Eigen::RowVectorXd diff = pred - targets;
  DiffusionLoss out;
  out.squared_error = diff.array().square();
  out.loss = out.squared_error.mean();
  if (accumulate_grad) {
    const Eigen::RowVectorXd dpred = diff * (2.0 * grad_scale / static_cast<double>(n));
    out.dconditions = denoiser.backward(cache, dpred);
  }
  return out;
}

Eigen::RowVectorXd reverse_sample(const X0Predictor& predictor, const NoiseSchedule& schedule,
                                  std::span<Rng* const> rngs, bool deterministic) {
  const auto n = static_cast<Eigen::Index>(rngs.size());
  // A fresh distribution per draw: generators are shared between columns, so
  // no cached variate may leak from one column's generator into another's.
  Eigen::RowVectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y(i) = standard_normal(*rngs[static_cast<std::size_t>(i)]);

  for (int idx = schedule.inference_steps() - 1; idx >= 0; --idx) {
    const auto u = static_cast<std::size_t>(idx);
    const int t = schedule.timesteps[u];
    const double bar = schedule.alpha_bar[static_cast<std::size_t>(t)];
    const double step_alpha = schedule.step_alpha[u];
    const double sigma = (deterministic || idx == 0) ? 0.0 : schedule.step_sigma[u];

    const Eigen::RowVectorXd x0 = predictor(y, t);
    if (x0.size() != n) throw std::invalid_argument("reverse_sample: predictor returned wrong batch size");
    const double sq_one_minus_bar = std::sqrt(1.0 - bar);
    const Eigen::RowVectorXd eps_hat = (y - std::sqrt(bar) * x0) / sq_one_minus_bar;
    y = (y - ((1.0 - step_alpha) / sq_one_minus_bar) * eps_hat) / std::sqrt(step_alpha);
    if (sigma > 0.0) {
      for (Eigen::Index i = 0; i < n; ++i) y(i) += sigma * standard_normal(*rngs[static_cast<std::size_t>(i)]);
    }
    if (!y.allFinite()) {
      throw NumericalError("reverse diffusion produced a non-finite value at t=" + std::to_string(t));
    }
  }
  return y;
}

}  // namespace aord
