#include "gennli/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace gennli {

int64_t ConfusionMatrix::total() const {
  int64_t t = 0;
  for (int64_t c : counts_) t += c;
  return t;
}

int64_t ConfusionMatrix::trace() const {
  int64_t t = 0;
  for (int i = 0; i < n_; ++i) t += at(i, i);
  return t;
}

int64_t ConfusionMatrix::gold_count(int label) const {
  int64_t t = 0;
  for (int j = 0; j < n_; ++j) t += at(label, j);
  return t;
}

int64_t ConfusionMatrix::predicted_count(int label) const {
  int64_t t = 0;
  for (int i = 0; i < n_; ++i) t += at(i, label);
  return t;
}

double accuracy(const ConfusionMatrix& cm) {
  const int64_t total = cm.total();
  if (total == 0) throw std::invalid_argument("accuracy: empty confusion matrix");
  return static_cast<double>(cm.trace()) / static_cast<double>(total);
}

double mcc(const ConfusionMatrix& cm) {
  if (cm.n_labels() < 2) throw std::invalid_argument("mcc: confusion matrix needs at least 2 labels");
  if (cm.total() == 0) throw std::invalid_argument("mcc: empty confusion matrix");

  if (cm.n_labels() == 2) {
    // Class 1 as positive; the formula is symmetric under swapping classes.
    const double tp = static_cast<double>(cm.at(1, 1));
    const double tn = static_cast<double>(cm.at(0, 0));
    const double fp = static_cast<double>(cm.at(0, 1));
    const double fn = static_cast<double>(cm.at(1, 0));
    const double f1 = tp + fp, f2 = tp + fn, f3 = tn + fp, f4 = tn + fn;
    if (f1 == 0.0 || f2 == 0.0 || f3 == 0.0 || f4 == 0.0) return 0.0;
    return (tp * tn - fp * fn) / std::sqrt(f1 * f2 * f3 * f4);
  }

  // Generalized multiclass form (Gorodkin).
  const double s = static_cast<double>(cm.total());
  const double c = static_cast<double>(cm.trace());
  double pt = 0.0, pp = 0.0, tt = 0.0;
  for (int k = 0; k < cm.n_labels(); ++k) {
    const double t_k = static_cast<double>(cm.gold_count(k));
    const double p_k = static_cast<double>(cm.predicted_count(k));
    pt += p_k * t_k;
    pp += p_k * p_k;
    tt += t_k * t_k;
  }
  const double denom_sq = (s * s - pp) * (s * s - tt);
  if (denom_sq <= 0.0) return 0.0;
  return (c * s - pt) / std::sqrt(denom_sq);
}

}  // namespace gennli
