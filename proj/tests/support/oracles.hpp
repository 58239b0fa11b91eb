#pragma once

// Reference computations written with plain loops, independent of the
// library's matrix code. Shared by unit tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "aord/ar_model.hpp"
#include "aord/diffusion_head.hpp"
#include "aord/fusion.hpp"
#include "aord/metrics.hpp"

namespace oracle {

using Vec = std::vector<double>;

inline Vec matvec(const aord::Matrix& m, const Vec& v) {
  Vec out(static_cast<std::size_t>(m.rows()), 0.0);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    double s = 0.0;
    for (Eigen::Index c = 0; c < m.cols(); ++c) s += m(r, c) * v[static_cast<std::size_t>(c)];
    out[static_cast<std::size_t>(r)] = s;
  }
  return out;
}

inline Vec column(const aord::Matrix& m, Eigen::Index c) {
  Vec out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) out[static_cast<std::size_t>(r)] = m(r, c);
  return out;
}

inline double max_relative_error(const Vec& got, const Vec& want) {
  double scale = 0.0;
  for (double v : want) scale = std::max(scale, std::abs(v));
  double err = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) err = std::max(err, std::abs(got[i] - want[i]));
  return err / std::max(scale, 1e-300);
}

// Embedded history slot i: token embedding plus position embedding.
inline std::vector<Vec> history(aord::Fusion& f, const aord::TokenSequence& prefix) {
  std::vector<Vec> out;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    Vec h = column(f.token_embedding().value, static_cast<int>(prefix[i]));
    const Vec p = column(f.position_embedding().value, static_cast<Eigen::Index>(i));
    for (std::size_t j = 0; j < h.size(); ++j) h[j] += p[j];
    out.push_back(h);
  }
  return out;
}

inline Vec projected(aord::Fusion& f, const Vec& x) {
  Vec q = matvec(f.projection().weight.value, x);
  for (std::size_t j = 0; j < q.size(); ++j) q[j] += f.projection().bias.value(static_cast<Eigen::Index>(j), 0);
  return q;
}

// softmax_i(<Wq fc(x), Wk h_i> / sqrt(W)) weighted sum of Wv h_i, plus fc(x)
// when the residual is enabled.
inline Vec cross_attention(aord::Fusion& f, const Vec& x, const aord::TokenSequence& prefix) {
  const auto hist = history(f, prefix);
  const Vec fx = projected(f, x);
  const Vec q = matvec(f.query_weight().value, fx);
  const double width = static_cast<double>(fx.size());
  Vec logits;
  for (const auto& h : hist) {
    const Vec k = matvec(f.key_weight().value, h);
    double dot = 0.0;
    for (std::size_t j = 0; j < k.size(); ++j) dot += q[j] * k[j];
    logits.push_back(dot / std::sqrt(width));
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double& l : logits) z += (l = std::exp(l - mx));
  Vec out(fx.size(), 0.0);
  for (std::size_t i = 0; i < hist.size(); ++i) {
    const Vec v = matvec(f.value_weight().value, hist[i]);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += logits[i] / z * v[j];
  }
  if (f.config().attention_residual) {
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += fx[j];
  }
  return out;
}

// fc(x) * mean_i(h_i) + fc(x)
inline Vec affine(aord::Fusion& f, const Vec& x, const aord::TokenSequence& prefix) {
  const auto hist = history(f, prefix);
  const Vec fx = projected(f, x);
  Vec out(fx.size());
  for (std::size_t j = 0; j < fx.size(); ++j) {
    double mean = 0.0;
    for (const auto& h : hist) mean += h[j];
    mean /= static_cast<double>(hist.size());
    out[j] = fx[j] * mean + fx[j];
  }
  return out;
}

// Linear betas, cumulative products and respaced chain, recomputed from scratch.
struct Schedule {
  std::vector<double> alpha_bar;  // index t in [0, T]
  std::vector<int> timesteps;
  std::vector<double> step_alpha, step_sigma;
};

inline Schedule schedule(int T, int S) {
  Schedule s;
  s.alpha_bar.assign(static_cast<std::size_t>(T) + 1, 1.0);
  for (int t = 1; t <= T; ++t) {
    const double beta = T == 1 ? 1e-4 : 1e-4 + (0.02 - 1e-4) * (t - 1) / (T - 1);
    s.alpha_bar[static_cast<std::size_t>(t)] = s.alpha_bar[static_cast<std::size_t>(t) - 1] * (1.0 - beta);
  }
  for (int i = 0; i < S; ++i) {
    s.timesteps.push_back(S == 1 ? 1 : 1 + static_cast<int>(std::lround(static_cast<double>(i) * (T - 1) / (S - 1))));
  }
  for (int i = 0; i < S; ++i) {
    const double bar = s.alpha_bar[static_cast<std::size_t>(s.timesteps[static_cast<std::size_t>(i)])];
    const double prev = i == 0 ? 1.0 : s.alpha_bar[static_cast<std::size_t>(s.timesteps[static_cast<std::size_t>(i - 1)])];
    const double a = bar / prev;
    s.step_alpha.push_back(a);
    s.step_sigma.push_back(i == 0 ? 0.0 : std::sqrt((1.0 - prev) / (1.0 - bar) * (1.0 - a)));
  }
  return s;
}

// Deterministic reverse chain from a given start value with a scalar y0 predictor.
inline double reverse_chain(const Schedule& s, double y, const std::function<double(double, int)>& x0) {
  for (int i = static_cast<int>(s.timesteps.size()) - 1; i >= 0; --i) {
    const int t = s.timesteps[static_cast<std::size_t>(i)];
    const double bar = s.alpha_bar[static_cast<std::size_t>(t)];
    const double a = s.step_alpha[static_cast<std::size_t>(i)];
    const double eps = (y - std::sqrt(bar) * x0(y, t)) / std::sqrt(1.0 - bar);
    y = (y - (1.0 - a) / std::sqrt(1.0 - bar) * eps) / std::sqrt(a);
  }
  return y;
}

struct PairMetrics {
  double accuracy = 0, macro_f1 = 0, sensitivity = 0, specificity = 0;
  std::vector<double> precision, recall, spec, f1, correct, adjacent, other;
  int present = 0;
};

// Every quantity counted directly from raw (truth, predicted) pairs.
inline PairMetrics pair_metrics(const std::vector<int>& truth, const std::vector<int>& pred, int K) {
  PairMetrics o;
  const std::size_t n = truth.size();
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) hits += truth[i] == pred[i];
  o.accuracy = n ? static_cast<double>(hits) / static_cast<double>(n) : 0.0;
  double f1_sum = 0, sen_sum = 0, spec_sum = 0;
  for (int c = 0; c < K; ++c) {
    long tp = 0, fp = 0, fn = 0, tn = 0, adj = 0, support = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool t = truth[i] == c, p = pred[i] == c;
      tp += t && p;
      fp += !t && p;
      fn += t && !p;
      tn += !t && !p;
      if (t) {
        ++support;
        if (pred[i] == c - 1 || pred[i] == c + 1) ++adj;
      }
    }
    const auto d = [](long a) { return static_cast<double>(a); };
    const double prec = tp + fp ? d(tp) / d(tp + fp) : 0.0;
    const double rec = tp + fn ? d(tp) / d(tp + fn) : 0.0;
    const double sp = tn + fp ? d(tn) / d(tn + fp) : 0.0;
    const double f = prec + rec > 0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
    o.precision.push_back(prec);
    o.recall.push_back(rec);
    o.spec.push_back(sp);
    o.f1.push_back(f);
    o.correct.push_back(support ? 100.0 * d(tp) / d(support) : 0.0);
    o.adjacent.push_back(support ? 100.0 * d(adj) / d(support) : 0.0);
    o.other.push_back(support ? 100.0 * d(support - tp - adj) / d(support) : 0.0);
    if (support) {
      ++o.present;
      f1_sum += f;
      sen_sum += rec;
      spec_sum += sp;
    }
  }
  if (o.present) {
    o.macro_f1 = f1_sum / o.present;
    o.sensitivity = sen_sum / o.present;
    o.specificity = spec_sum / o.present;
  }
  return o;
}

inline bool matches(const aord::MetricsReport& r, const PairMetrics& o) {
  if (r.accuracy != o.accuracy || r.macro_f1 != o.macro_f1 || r.sensitivity != o.sensitivity ||
      r.specificity != o.specificity || r.classes_present != o.present) {
    return false;
  }
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    const auto& m = r.per_class[c];
    if (m.precision != o.precision[c] || m.recall != o.recall[c] || m.specificity != o.spec[c] || m.f1 != o.f1[c] ||
        m.correct_pct != o.correct[c] || m.adjacent_pct != o.adjacent[c] || m.other_pct != o.other[c]) {
      return false;
    }
  }
  return true;
}

// Teacher-forced diffusion loss with fixed noise draws; a pure function of
// the parameters, for finite differences.
inline double pipeline_loss(aord::ModelBundle& bundle, const aord::Dataset& batch, const aord::NoiseDraws& draws,
                            bool accumulate_grad) {
  aord::TeacherForcedPass pass(bundle, batch);
  const auto loss = aord::diffusion_loss(pass.targets(), pass.conditions(), draws, bundle.denoiser, bundle.schedule,
                                         accumulate_grad);
  if (accumulate_grad) pass.backward(loss.dconditions);
  return loss.loss;
}

struct GradReport {
  double worst = 0.0;
  std::size_t checked = 0;
};

// Central differences on up to `per_param` entries of each trainable tensor.
inline GradReport pipeline_gradcheck(aord::ModelBundle& bundle, const aord::Dataset& batch,
                                     const aord::NoiseDraws& draws, aord::Rng& rng, int per_param = 4,
                                     double h = 1e-5) {
  const aord::ParamRefs params = bundle.trainable_params();
  aord::zero_grads(params);
  pipeline_loss(bundle, batch, draws, true);
  GradReport rep;
  for (aord::Param* p : params) {
    const auto n = p->value.size();
    for (int trial = 0; trial < std::min<long>(per_param, n); ++trial) {
      const auto idx = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(n));
      double& v = p->value.data()[idx];
      const double saved = v;
      v = saved + h;
      const double up = pipeline_loss(bundle, batch, draws, false);
      v = saved - h;
      const double down = pipeline_loss(bundle, batch, draws, false);
      v = saved;
      const double numeric = (up - down) / (2 * h);
      const double analytic = p->grad.data()[idx];
      const double err = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
      rep.worst = std::max(rep.worst, err);
      ++rep.checked;
    }
  }
  return rep;
}

}  // namespace oracle
