#pragma once

// Evaluation metrics for K-class ordinal predictions.
//
// Conventions:
//  * macro averages run over classes present in the true labels only;
//  * a class never predicted (TP + FP = 0) has precision 0;
//  * sensitivity/specificity are one-vs-rest per class, then macro averaged;
//  * the correct/adjacent/other breakdown is in percent of the class support,
//    where adjacent means predicted as c-1 or c+1.

#include <cstdint>
#include <span>
#include <vector>

namespace aord {

class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(int num_classes);

  int num_classes() const { return k_; }
  // Throws std::out_of_range for labels outside [0, K-1].
  void add(int truth, int predicted, std::int64_t count = 1);
  std::int64_t at(int truth, int predicted) const;
  std::int64_t total() const;
  std::int64_t row_total(int truth) const;
  std::int64_t col_total(int predicted) const;
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  bool operator==(const ConfusionMatrix& other) const = default;

 private:
  int k_ = 0;
  std::vector<std::int64_t> counts_;
};

ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> predicted, int num_classes);

struct ClassMetrics {
  bool present = false;
  std::int64_t support = 0;
  double precision = 0.0;
  double recall = 0.0;
  double specificity = 0.0;
  double f1 = 0.0;
  double correct_pct = 0.0;
  double adjacent_pct = 0.0;
  double other_pct = 0.0;
};

struct MetricsReport {
  int num_classes = 0;
  std::int64_t total = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  int classes_present = 0;
  std::vector<ClassMetrics> per_class;
  double invalid_sequence_rate = 0.0;
  ConfusionMatrix matrix;
};

MetricsReport report(const ConfusionMatrix& cm);

}  // namespace aord
