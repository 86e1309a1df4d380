#pragma once

#include <cstdint>
#include <vector>

namespace gennli {

/// Square count matrix indexed [gold][predicted].
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(int n_labels) : n_(n_labels), counts_(static_cast<size_t>(n_labels) * n_labels, 0) {}

  int n_labels() const { return n_; }
  int64_t& at(int gold, int predicted) { return counts_[static_cast<size_t>(gold) * n_ + predicted]; }
  int64_t at(int gold, int predicted) const { return counts_[static_cast<size_t>(gold) * n_ + predicted]; }

  int64_t total() const;
  int64_t trace() const;
  int64_t gold_count(int label) const;       // row sum
  int64_t predicted_count(int label) const;  // column sum

 private:
  int n_ = 0;
  std::vector<int64_t> counts_;
};

double accuracy(const ConfusionMatrix& cm);

/// Matthews correlation coefficient in [-1, 1]. Binary matrices use the
/// classical TP/TN/FP/FN formula; larger ones the generalized multiclass
/// form. Any zero denominator factor yields 0.
double mcc(const ConfusionMatrix& cm);

}  // namespace gennli
