#pragma once

// Ablation heads sharing the encoder (and, for ar_ce, the fusion pipeline) of
// the diffusion model:
//  * ar_ce: per-step logistic head on the fused condition trained with binary
//    cross-entropy; a step bit is 1 iff sigmoid(logit) >= 0.5.
//  * softmax: K-way linear classifier on x with multinomial cross-entropy;
//    argmax ties go to the smaller class index.

#include "aord/ar_model.hpp"

namespace aord {

// Numerically stable binary cross-entropy of sigmoid(logit) against y.
double bce_with_logit(double logit, double y);
double sigmoid(double z);

StepStats ce_ar_train_step(const Dataset& batch, ModelBundle& bundle, AdamState& adam, const AdamConfig& adam_cfg);
// Loss of the current parameters without an update; gradients accumulate when requested.
StepStats ce_ar_loss(const Dataset& batch, ModelBundle& bundle, bool accumulate_grad);

std::vector<PredictionTrace> ce_ar_predict_batch(const ModelBundle& bundle, const Matrix& inputs);
PredictionTrace ce_ar_predict(const ModelBundle& bundle, const Vector& input);

StepStats softmax_train_step(const Dataset& batch, ModelBundle& bundle, AdamState& adam, const AdamConfig& adam_cfg);
double softmax_loss(const Dataset& batch, ModelBundle& bundle, bool accumulate_grad);
Matrix softmax_probabilities(const ModelBundle& bundle, const Matrix& inputs);
std::vector<int> softmax_predict(const ModelBundle& bundle, const Matrix& inputs);
int argmax_smallest(const Vector& scores);

// Trains the softmax head for `epochs` epochs and reports on `test`.
MetricsReport softmax_train_and_predict(const Dataset& train, const Dataset& test, ModelBundle& bundle, AdamState& adam,
                                        const AdamConfig& adam_cfg, int epochs, int batch_size, std::uint64_t seed);

}  // namespace aord
