#include "aord/ar_model.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <string>
#include <thread>

#include "aord/baselines.hpp"
#include "aord/errors.hpp"

namespace aord {

void check_batch(const ModelBundle& bundle, const Dataset& batch) {
  if (batch.size() == 0) throw std::invalid_argument("empty batch");
  if (batch.inputs.cols() != static_cast<Eigen::Index>(batch.size())) {
    throw std::invalid_argument("batch inputs and labels differ in count");
  }
  if (batch.dim() != bundle.encoder.config().input_dim) {
    throw ConfigError("input dimension " + std::to_string(batch.dim()) + " does not match the model's " +
                      std::to_string(bundle.encoder.config().input_dim));
  }
  if (batch.num_classes != bundle.num_classes()) {
    throw ConfigError("dataset has K=" + std::to_string(batch.num_classes) + " but the model has K=" +
                      std::to_string(bundle.num_classes()));
  }
  for (int label : batch.labels) check_label({label, bundle.num_classes()});
}

TeacherForcedPass::TeacherForcedPass(ModelBundle& bundle, const Dataset& batch)
    : bundle_(&bundle), batch_(batch.size()), steps_(bundle.steps()) {
  check_batch(bundle, batch);
  const auto b_count = static_cast<Eigen::Index>(batch_);
  const Matrix x = bundle.encoder.forward(batch.inputs, encoder_cache_);

  std::vector<CumulativeCode> codes;
  codes.reserve(batch_);
  for (int label : batch.labels) codes.push_back(encode_label({label, bundle.num_classes()}));

  conditions_.resize(bundle.fusion.width(), b_count * steps_);
  targets_.resize(b_count * steps_);
  prefixes_.resize(static_cast<std::size_t>(steps_));
  fusion_caches_.resize(static_cast<std::size_t>(steps_));
  for (int s = 0; s < steps_; ++s) {
    auto& prefixes = prefixes_[static_cast<std::size_t>(s)];
    prefixes.reserve(batch_);
    for (std::size_t b = 0; b < batch_; ++b) {
      prefixes.push_back(prefix_tokens(codes[b], s));
      targets_(s * b_count + static_cast<Eigen::Index>(b)) = codes[b][static_cast<std::size_t>(s)];
    }
    conditions_.middleCols(s * b_count, b_count) =
        bundle.fusion.forward(x, prefixes, fusion_caches_[static_cast<std::size_t>(s)]);
  }
}

void TeacherForcedPass::backward(const Matrix& dconditions) {
  const auto b_count = static_cast<Eigen::Index>(batch_);
  Matrix dx = Matrix::Zero(bundle_->fusion.config().feature_dim, b_count);
  for (int s = 0; s < steps_; ++s) {
    dx += bundle_->fusion.backward(fusion_caches_[static_cast<std::size_t>(s)],
                                   dconditions.middleCols(s * b_count, b_count));
  }
  bundle_->encoder.backward(encoder_cache_, dx);
}

std::vector<double> TeacherForcedPass::per_step_mean(const Eigen::RowVectorXd& per_term) const {
  const auto b_count = static_cast<Eigen::Index>(batch_);
  std::vector<double> out;
  for (int s = 0; s < steps_; ++s) out.push_back(per_term.segment(s * b_count, b_count).mean());
  return out;
}

StepStats train_step(const Dataset& batch, ModelBundle& bundle, AdamState& adam, const AdamConfig& adam_cfg,
                     Rng& rng) {
  if (bundle.config.head != HeadKind::Diffusion) throw std::invalid_argument("train_step requires the diffusion head");
  TeacherForcedPass pass(bundle, batch);
  const ParamRefs params = bundle.trainable_params();
  zero_grads(params);

  const auto draws = draw_noise(static_cast<std::size_t>(pass.targets().size()), bundle.schedule, rng);
  const auto loss =
      diffusion_loss(pass.targets(), pass.conditions(), draws, bundle.denoiser, bundle.schedule, true);
  if (!std::isfinite(loss.loss)) throw NumericalError("diffusion loss is not finite");
  pass.backward(loss.dconditions);
  adam_update(params, adam, adam_cfg);

  StepStats stats;
  stats.total_loss = loss.loss;
  stats.step_loss = pass.per_step_mean(loss.squared_error);
  stats.terms = static_cast<std::size_t>(pass.targets().size());
  return stats;
}

std::vector<PredictionTrace> predict_batch(const ModelBundle& bundle, const Matrix& inputs, std::span<Rng* const> rngs,
                                           const PredictOptions& opts) {
  if (bundle.config.head == HeadKind::ArCe) return ce_ar_predict_batch(bundle, inputs);
  if (bundle.config.head != HeadKind::Diffusion) throw std::invalid_argument("predict: head is not autoregressive");
  if (opts.samples_per_step < 1) throw ConfigError("samples_per_step must be >= 1");
  const auto n = static_cast<std::size_t>(inputs.cols());
  if (rngs.size() != n) throw std::invalid_argument("predict: need one generator per example");
  const auto per = static_cast<std::size_t>(opts.samples_per_step);

  const Matrix x = bundle.encoder.encode(inputs);
  std::vector<PredictionTrace> traces(n);
  std::vector<Rng*> column_rngs(n * per);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t s = 0; s < per; ++s) column_rngs[b * per + s] = rngs[b];

  for (int step = 1; step <= bundle.steps(); ++step) {
    std::vector<TokenSequence> prefixes;
    prefixes.reserve(n);
    for (const auto& tr : traces) prefixes.push_back(prefix_tokens(tr.bits, step - 1));
    const Matrix cond = bundle.fusion.condition(x, prefixes);

    Matrix repeated(cond.rows(), static_cast<Eigen::Index>(n * per));
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t s = 0; s < per; ++s)
        repeated.col(static_cast<Eigen::Index>(b * per + s)) = cond.col(static_cast<Eigen::Index>(b));

    X0Predictor predictor;
    if (opts.predictor) {
      predictor = opts.predictor(step, repeated);
    } else {
      predictor = [cd = bundle.denoiser.conditioned(repeated)](const Eigen::RowVectorXd& y, int t) { return cd(y, t); };
    }

    Eigen::RowVectorXd samples;
    try {
      samples = reverse_sample(predictor, bundle.schedule, column_rngs, opts.deterministic);
    } catch (const NumericalError& e) {
      throw NumericalError("step " + std::to_string(step) + ": " + e.what());
    }

    for (std::size_t b = 0; b < n; ++b) {
      auto& tr = traces[b];
      std::vector<double> vals(per);
      double sum = 0.0;
      for (std::size_t s = 0; s < per; ++s) {
        vals[s] = samples(static_cast<Eigen::Index>(b * per + s));
        sum += vals[s];
      }
      const double mean = sum / static_cast<double>(per);
      tr.samples.push_back(std::move(vals));
      tr.step_value.push_back(mean);
      tr.bits.push_back(static_cast<std::uint8_t>(binarize(mean)));
    }
  }
  for (auto& tr : traces) {
    const auto decoded = decode_code(tr.bits);
    tr.label = decoded.label.k;
    tr.valid = decoded.valid;
  }
  return traces;
}

PredictionTrace predict(const ModelBundle& bundle, const Vector& input, Rng& rng, const PredictOptions& opts) {
  Rng* r = &rng;
  return predict_batch(bundle, Matrix(input), std::span<Rng* const>(&r, 1), opts).front();
}

EvalResult evaluate(const Dataset& data, const ModelBundle& bundle, const EvalOptions& opts) {
  if (data.size() == 0) throw std::invalid_argument("evaluate: empty dataset");
  check_batch(bundle, data);
  const std::size_t n = data.size();
  const std::size_t chunk = std::max<std::size_t>(opts.chunk, 1);
  const std::size_t chunks = (n + chunk - 1) / chunk;

  EvalResult result;
  result.predictions.assign(n, 0);
  std::vector<PredictionTrace> traces(bundle.autoregressive() ? n : 0);

  PredictOptions popts;
  popts.samples_per_step = opts.samples_per_step;
  popts.predictor = opts.predictor;

  auto run_chunk = [&](std::size_t c) {
    const std::size_t begin = c * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    const auto len = static_cast<Eigen::Index>(end - begin);
    const Matrix inputs = data.inputs.middleCols(static_cast<Eigen::Index>(begin), len);
    if (!bundle.autoregressive()) {
      const auto pred = softmax_predict(bundle, inputs);
      std::copy(pred.begin(), pred.end(), result.predictions.begin() + static_cast<std::ptrdiff_t>(begin));
      return;
    }
    std::vector<Rng> rngs;
    rngs.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) rngs.push_back(make_rng(opts.seed, "eval", i));
    std::vector<Rng*> ptrs;
    for (auto& r : rngs) ptrs.push_back(&r);
    auto tr = predict_batch(bundle, inputs, ptrs, popts);
    for (std::size_t i = begin; i < end; ++i) {
      result.predictions[i] = tr[i - begin].label;
      traces[i] = std::move(tr[i - begin]);
    }
  };

  const int threads = std::max(1, std::min<int>(opts.threads, static_cast<int>(chunks)));
  if (threads == 1) {
    for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t c = next++; c < chunks; c = next++) {
          try {
            run_chunk(c);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
  }

  result.report = report(confusion(data.labels, result.predictions, bundle.num_classes()));
  for (const auto& tr : traces)
    if (!tr.valid) ++result.invalid_count;
  result.report.invalid_sequence_rate = static_cast<double>(result.invalid_count) / static_cast<double>(n);
  if (opts.keep_traces) result.traces = std::move(traces);
  return result;
}

EpochStats train_epoch(const Dataset& data, ModelBundle& bundle, AdamState& adam, const AdamConfig& adam_cfg,
                       int batch_size, std::uint64_t seed, int epoch) {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  check_batch(bundle, data);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffle_rng = make_rng(seed, "data", static_cast<std::uint64_t>(epoch));
  std::shuffle(order.begin(), order.end(), shuffle_rng);
  Rng noise_rng = make_rng(seed, "diffusion-train", static_cast<std::uint64_t>(epoch));

  EpochStats out;
  out.epoch = epoch;
  out.step_loss.assign(static_cast<std::size_t>(bundle.autoregressive() ? bundle.steps() : 0), 0.0);
  std::size_t seen = 0;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    const Dataset batch = data.subset({order.begin() + static_cast<std::ptrdiff_t>(start),
                                       order.begin() + static_cast<std::ptrdiff_t>(end)});
    StepStats stats;
    switch (bundle.config.head) {
      case HeadKind::Diffusion: stats = train_step(batch, bundle, adam, adam_cfg, noise_rng); break;
      case HeadKind::ArCe: stats = ce_ar_train_step(batch, bundle, adam, adam_cfg); break;
      case HeadKind::Softmax: stats = softmax_train_step(batch, bundle, adam, adam_cfg); break;
    }
    const double w = static_cast<double>(batch.size());
    out.total_loss += stats.total_loss * w;
    for (std::size_t s = 0; s < stats.step_loss.size(); ++s) out.step_loss[s] += stats.step_loss[s] * w;
    seen += batch.size();
    ++out.batches;
  }
  out.total_loss /= static_cast<double>(seen);
  for (auto& v : out.step_loss) v /= static_cast<double>(seen);
  return out;
}

}  // namespace aord
