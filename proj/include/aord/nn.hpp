#pragma once

// Minimal dense building blocks with hand-written reverse passes.
//
// Activations are column-major batches: one column per item. Every layer keeps
// its parameters in `Param` objects whose `grad` accumulates across backward
// calls until `zero_grad`.

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "aord/rng.hpp"

namespace aord {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Param {
  std::string name;
  Matrix value;
  Matrix grad;

  Param() = default;
  Param(std::string n, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(n)), value(Matrix::Zero(rows, cols)), grad(Matrix::Zero(rows, cols)) {}

  void zero_grad() { grad.setZero(); }
};

using ParamRefs = std::vector<Param*>;

void zero_grads(const ParamRefs& params);
bool all_finite(const ParamRefs& params);

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
void init_fan_in(Param& p, Eigen::Index fan_in, Rng& rng);
void init_normal(Param& p, double stddev, Rng& rng);

struct Linear {
  Param weight;  // out x in
  Param bias;    // out x 1

  Linear() = default;
  Linear(const std::string& name, Eigen::Index in, Eigen::Index out);

  Eigen::Index in_dim() const { return weight.value.cols(); }
  Eigen::Index out_dim() const { return weight.value.rows(); }

  void init(Rng& rng);
  Matrix forward(const Matrix& x) const;
  // Accumulates parameter gradients and returns d(loss)/dx.
  Matrix backward(const Matrix& x, const Matrix& dy);
  // Parameter gradients only.
  void backward_params(const Matrix& x, const Matrix& dy);
  void collect(ParamRefs& out) { out.push_back(&weight); out.push_back(&bias); }
};

Matrix silu(const Matrix& z);
// d silu(z) / dz evaluated at z.
Matrix silu_grad(const Matrix& z);

// Per-column layer normalization without learned affine parameters.
struct LayerNormCache {
  Matrix normalized;
  Eigen::RowVectorXd inv_std;
};
constexpr double kLayerNormEps = 1e-6;
LayerNormCache layer_norm(const Matrix& u, double eps = kLayerNormEps);
Matrix layer_norm_backward(const LayerNormCache& cache, const Matrix& dnormalized);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moment buffers, one per parameter, in parameter-list order.
struct AdamState {
  long long step = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;

  void reset(const ParamRefs& params);
  bool matches(const ParamRefs& params) const;
};

void adam_update(const ParamRefs& params, AdamState& state, const AdamConfig& cfg);

}  // namespace aord
