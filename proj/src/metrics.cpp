#include "aord/metrics.hpp"

#include <stdexcept>
#include <string>

namespace aord {

ConfusionMatrix::ConfusionMatrix(int num_classes) : k_(num_classes) {
  if (num_classes < 1) throw std::invalid_argument("confusion matrix needs at least one class");
  counts_.assign(static_cast<std::size_t>(num_classes) * static_cast<std::size_t>(num_classes), 0);
}

void ConfusionMatrix::add(int truth, int predicted, std::int64_t count) {
  if (truth < 0 || truth >= k_ || predicted < 0 || predicted >= k_) {
    throw std::out_of_range("confusion: label pair (" + std::to_string(truth) + ", " + std::to_string(predicted) +
                            ") outside [0, " + std::to_string(k_ - 1) + "]");
  }
  counts_[static_cast<std::size_t>(truth * k_ + predicted)] += count;
}

std::int64_t ConfusionMatrix::at(int truth, int predicted) const {
  return counts_.at(static_cast<std::size_t>(truth * k_ + predicted));
}

std::int64_t ConfusionMatrix::total() const {
  std::int64_t s = 0;
  for (auto c : counts_) s += c;
  return s;
}

std::int64_t ConfusionMatrix::row_total(int truth) const {
  std::int64_t s = 0;
  for (int p = 0; p < k_; ++p) s += at(truth, p);
  return s;
}

std::int64_t ConfusionMatrix::col_total(int predicted) const {
  std::int64_t s = 0;
  for (int t = 0; t < k_; ++t) s += at(t, predicted);
  return s;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.k_ != k_) throw std::invalid_argument("confusion: merging matrices of different class counts");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> predicted, int num_classes) {
  if (truth.size() != predicted.size()) throw std::invalid_argument("confusion: length mismatch");
  ConfusionMatrix cm(num_classes);
  for (std::size_t i = 0; i < truth.size(); ++i) cm.add(truth[i], predicted[i]);
  return cm;
}

MetricsReport report(const ConfusionMatrix& cm) {
  MetricsReport r;
  const int k = cm.num_classes();
  r.num_classes = k;
  r.total = cm.total();
  r.matrix = cm;
  r.per_class.resize(static_cast<std::size_t>(k));

  std::int64_t trace = 0;
  for (int c = 0; c < k; ++c) trace += cm.at(c, c);
  r.accuracy = r.total > 0 ? static_cast<double>(trace) / static_cast<double>(r.total) : 0.0;

  for (int c = 0; c < k; ++c) {
    auto& m = r.per_class[static_cast<std::size_t>(c)];
    const std::int64_t tp = cm.at(c, c);
    const std::int64_t support = cm.row_total(c);
    const std::int64_t predicted = cm.col_total(c);
    const std::int64_t fn = support - tp;
    const std::int64_t fp = predicted - tp;
    const std::int64_t tn = r.total - tp - fn - fp;

    m.support = support;
    m.present = support > 0;
    m.precision = predicted > 0 ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
    m.recall = support > 0 ? static_cast<double>(tp) / static_cast<double>(support) : 0.0;
    m.specificity = (tn + fp) > 0 ? static_cast<double>(tn) / static_cast<double>(tn + fp) : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;

    if (support > 0) {
      std::int64_t adjacent = 0;
      if (c > 0) adjacent += cm.at(c, c - 1);
      if (c + 1 < k) adjacent += cm.at(c, c + 1);
      const auto denom = static_cast<double>(support);
      m.correct_pct = 100.0 * static_cast<double>(tp) / denom;
      m.adjacent_pct = 100.0 * static_cast<double>(adjacent) / denom;
      m.other_pct = 100.0 * static_cast<double>(support - tp - adjacent) / denom;
    }
  }

  for (const auto& m : r.per_class) {
    if (!m.present) continue;
    ++r.classes_present;
    r.macro_f1 += m.f1;
    r.sensitivity += m.recall;
    r.specificity += m.specificity;
  }
  if (r.classes_present > 0) {
    r.macro_f1 /= r.classes_present;
    r.sensitivity /= r.classes_present;
    r.specificity /= r.classes_present;
  }
  return r;
}

}  // namespace aord
