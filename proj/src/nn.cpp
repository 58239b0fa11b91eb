#include "aord/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace aord {

void zero_grads(const ParamRefs& params) {
  for (auto* p : params) p->zero_grad();
}

bool all_finite(const ParamRefs& params) {
  for (const auto* p : params) {
    if (!p->value.allFinite()) return false;
  }
  return true;
}

void init_fan_in(Param& p, Eigen::Index fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(fan_in, 1)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index j = 0; j < p.value.cols(); ++j)
    for (Eigen::Index i = 0; i < p.value.rows(); ++i) p.value(i, j) = dist(rng);
}

void init_normal(Param& p, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (Eigen::Index j = 0; j < p.value.cols(); ++j)
    for (Eigen::Index i = 0; i < p.value.rows(); ++i) p.value(i, j) = dist(rng);
}

Linear::Linear(const std::string& name, Eigen::Index in, Eigen::Index out)
    : weight(name + ".weight", out, in), bias(name + ".bias", out, 1) {}

void Linear::init(Rng& rng) {
  init_fan_in(weight, in_dim(), rng);
  init_fan_in(bias, in_dim(), rng);
}

Matrix Linear::forward(const Matrix& x) const {
  if (x.rows() != in_dim()) {
    throw std::invalid_argument(weight.name + ": expected input rows " + std::to_string(in_dim()) +
                                ", got " + std::to_string(x.rows()));
  }
  Matrix y = weight.value * x;
  y.colwise() += bias.value.col(0);
  return y;
}

void Linear::backward_params(const Matrix& x, const Matrix& dy) {
  weight.grad.noalias() += dy * x.transpose();
  bias.grad.col(0) += dy.rowwise().sum();
}

Matrix Linear::backward(const Matrix& x, const Matrix& dy) {
  backward_params(x, dy);
  return weight.value.transpose() * dy;
}

Matrix silu(const Matrix& z) {
  return z.unaryExpr([](double v) { return v / (1.0 + std::exp(-v)); });
}

Matrix silu_grad(const Matrix& z) {
  return z.unaryExpr([](double v) {
    const double s = 1.0 / (1.0 + std::exp(-v));
    return s * (1.0 + v * (1.0 - s));
  });
}

LayerNormCache layer_norm(const Matrix& u, double eps) {
  const auto n = static_cast<double>(u.rows());
  LayerNormCache cache;
  cache.normalized.resize(u.rows(), u.cols());
  cache.inv_std.resize(u.cols());
  for (Eigen::Index j = 0; j < u.cols(); ++j) {
    const double mean = u.col(j).sum() / n;
    const auto centered = (u.col(j).array() - mean).matrix();
    const double var = centered.squaredNorm() / n;
    const double inv = 1.0 / std::sqrt(var + eps);
    cache.inv_std(j) = inv;
    cache.normalized.col(j) = centered * inv;
  }
  return cache;
}

Matrix layer_norm_backward(const LayerNormCache& cache, const Matrix& dnormalized) {
  const auto& h = cache.normalized;
  const auto n = static_cast<double>(h.rows());
  Matrix du(h.rows(), h.cols());
  for (Eigen::Index j = 0; j < h.cols(); ++j) {
    const double mean_d = dnormalized.col(j).sum() / n;
    const double mean_dh = dnormalized.col(j).dot(h.col(j)) / n;
    du.col(j) = cache.inv_std(j) *
                (dnormalized.col(j).array() - mean_d - h.col(j).array() * mean_dh).matrix();
  }
  return du;
}

void AdamState::reset(const ParamRefs& params) {
  step = 0;
  m.clear();
  v.clear();
  for (const auto* p : params) {
    m.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    v.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

bool AdamState::matches(const ParamRefs& params) const {
  if (m.size() != params.size() || v.size() != params.size()) return false;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (m[i].rows() != params[i]->value.rows() || m[i].cols() != params[i]->value.cols()) return false;
  }
  return true;
}

void adam_update(const ParamRefs& params, AdamState& state, const AdamConfig& cfg) {
  if (!state.matches(params)) state.reset(params);
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    auto& m = state.m[i];
    auto& v = state.v[i];
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * p.grad;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * p.grad.cwiseAbs2();
    p.value.array() -= cfg.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.eps);
  }
}

}  // namespace aord
