#include "aord/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "aord/errors.hpp"

namespace aord {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double bce_with_logit(double logit, double y) {
  return std::max(logit, 0.0) - logit * y + std::log1p(std::exp(-std::abs(logit)));
}

StepStats ce_ar_loss(const Dataset& batch, ModelBundle& bundle, bool accumulate_grad) {
  if (bundle.config.head != HeadKind::ArCe) throw std::invalid_argument("ce_ar_loss requires the ar_ce head");
  TeacherForcedPass pass(bundle, batch);
  const Matrix logits = bundle.ce.logit.forward(pass.conditions());
  const auto& y = pass.targets();
  const auto n = y.size();

  Eigen::RowVectorXd per_term(n);
  Eigen::RowVectorXd dlogit(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    per_term(i) = bce_with_logit(logits(0, i), y(i));
    dlogit(i) = (sigmoid(logits(0, i)) - y(i)) / static_cast<double>(n);
  }
  StepStats stats;
  stats.total_loss = per_term.mean();
  stats.step_loss = pass.per_step_mean(per_term);
  stats.terms = static_cast<std::size_t>(n);
  if (accumulate_grad) {
    const Matrix dcond = bundle.ce.logit.backward(pass.conditions(), Matrix(dlogit));
    pass.backward(dcond);
  }
  return stats;
}

StepStats ce_ar_train_step(const Dataset& batch, ModelBundle& bundle, AdamState& adam, const AdamConfig& adam_cfg) {
  check_batch(bundle, batch);
  const ParamRefs params = bundle.trainable_params();
  zero_grads(params);
  auto stats = ce_ar_loss(batch, bundle, true);
  if (!std::isfinite(stats.total_loss)) throw NumericalError("cross-entropy loss is not finite");
  adam_update(params, adam, adam_cfg);
  return stats;
}

std::vector<PredictionTrace> ce_ar_predict_batch(const ModelBundle& bundle, const Matrix& inputs) {
  if (bundle.config.head != HeadKind::ArCe) throw std::invalid_argument("ce_ar_predict requires the ar_ce head");
  const auto n = static_cast<std::size_t>(inputs.cols());
  const Matrix x = bundle.encoder.encode(inputs);
  std::vector<PredictionTrace> traces(n);
  for (int step = 1; step <= bundle.steps(); ++step) {
    std::vector<TokenSequence> prefixes;
    prefixes.reserve(n);
    for (const auto& tr : traces) prefixes.push_back(prefix_tokens(tr.bits, step - 1));
    const Matrix logits = bundle.ce.logit.forward(bundle.fusion.condition(x, prefixes));
    for (std::size_t b = 0; b < n; ++b) {
      const double p = sigmoid(logits(0, static_cast<Eigen::Index>(b)));
      traces[b].step_value.push_back(p);
      traces[b].bits.push_back(p >= 0.5 ? 1 : 0);
    }
  }
  for (auto& tr : traces) {
    const auto decoded = decode_code(tr.bits);
    tr.label = decoded.label.k;
    tr.valid = decoded.valid;
  }
  return traces;
}

PredictionTrace ce_ar_predict(const ModelBundle& bundle, const Vector& input) {
  return ce_ar_predict_batch(bundle, Matrix(input)).front();
}

int argmax_smallest(const Vector& scores) {
  int best = 0;
  for (Eigen::Index i = 1; i < scores.size(); ++i) {
    if (scores(i) > scores(best)) best = static_cast<int>(i);
  }
  return best;
}

namespace {

Matrix column_softmax(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (Eigen::Index b = 0; b < logits.cols(); ++b) {
    const auto e = (logits.col(b).array() - logits.col(b).maxCoeff()).exp();
    p.col(b) = e / e.sum();
  }
  return p;
}

}  // namespace

Matrix softmax_probabilities(const ModelBundle& bundle, const Matrix& inputs) {
  if (bundle.config.head != HeadKind::Softmax) throw std::invalid_argument("softmax head not configured");
  return column_softmax(bundle.softmax.logits.forward(bundle.encoder.encode(inputs)));
}

std::vector<int> softmax_predict(const ModelBundle& bundle, const Matrix& inputs) {
  if (bundle.config.head != HeadKind::Softmax) throw std::invalid_argument("softmax head not configured");
  const Matrix logits = bundle.softmax.logits.forward(bundle.encoder.encode(inputs));
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(logits.cols()));
  for (Eigen::Index b = 0; b < logits.cols(); ++b) out.push_back(argmax_smallest(logits.col(b)));
  return out;
}

double softmax_loss(const Dataset& batch, ModelBundle& bundle, bool accumulate_grad) {
  if (bundle.config.head != HeadKind::Softmax) throw std::invalid_argument("softmax head not configured");
  check_batch(bundle, batch);
  EncoderCache cache;
  const Matrix x = bundle.encoder.forward(batch.inputs, cache);
  const Matrix logits = bundle.softmax.logits.forward(x);
  const Matrix p = column_softmax(logits);
  const auto n = static_cast<double>(batch.size());
  double loss = 0.0;
  Matrix dlogits = p;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto col = static_cast<Eigen::Index>(b);
    const int y = batch.labels[b];
    const double mx = logits.col(col).maxCoeff();
    const double lse = mx + std::log((logits.col(col).array() - mx).exp().sum());
    loss += lse - logits(y, col);
    dlogits(y, col) -= 1.0;
  }
  if (accumulate_grad) {
    dlogits /= n;
    const Matrix dx = bundle.softmax.logits.backward(x, dlogits);
    bundle.encoder.backward(cache, dx);
  }
  return loss / n;
}

StepStats softmax_train_step(const Dataset& batch, ModelBundle& bundle, AdamState& adam, const AdamConfig& adam_cfg) {
  check_batch(bundle, batch);
  const ParamRefs params = bundle.trainable_params();
  zero_grads(params);
  StepStats stats;
  stats.total_loss = softmax_loss(batch, bundle, true);
  stats.terms = batch.size();
  if (!std::isfinite(stats.total_loss)) throw NumericalError("softmax loss is not finite");
  adam_update(params, adam, adam_cfg);
  return stats;
}

MetricsReport softmax_train_and_predict(const Dataset& train, const Dataset& test, ModelBundle& bundle, AdamState& adam,
                                        const AdamConfig& adam_cfg, int epochs, int batch_size, std::uint64_t seed) {
  for (int e = 0; e < epochs; ++e) train_epoch(train, bundle, adam, adam_cfg, batch_size, seed, e);
  check_batch(bundle, test);
  return report(confusion(test.labels, softmax_predict(bundle, test.inputs), bundle.num_classes()));
}

}  // namespace aord
