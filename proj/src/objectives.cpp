#include "gennli/objectives.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace gennli {

std::optional<LossKind> loss_kind_from_string(const std::string& name) {
  if (name == "generative") return LossKind::generative_nll;
  if (name == "perceptron") return LossKind::perceptron;
  if (name == "hinge") return LossKind::hinge;
  if (name == "log") return LossKind::log_loss;
  if (name == "softmax-margin") return LossKind::softmax_margin;
  if (name == "bayes-risk") return LossKind::bayes_risk;
  if (name == "infinilog") return LossKind::infinilog;
  return std::nullopt;
}

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::generative_nll: return "generative";
    case LossKind::perceptron: return "perceptron";
    case LossKind::hinge: return "hinge";
    case LossKind::log_loss: return "log";
    case LossKind::softmax_margin: return "softmax-margin";
    case LossKind::bayes_risk: return "bayes-risk";
    case LossKind::infinilog: return "infinilog";
  }
  throw std::logic_error("unknown loss kind");
}

CostFunction zero_one_cost() {
  return [](int gold, int candidate) { return gold == candidate ? 0.0 : 1.0; };
}

double generative_nll(double score_gold) {
  if (!std::isfinite(score_gold)) throw std::invalid_argument("generative_nll: score is not finite");
  return -score_gold;
}

ad::Value discriminative_loss(ad::Tape& tape, LossKind kind, std::span<const ad::Value> scores, int gold,
                              const CostFunction& cost) {
  const int n = static_cast<int>(scores.size());
  if (n < 1) throw std::invalid_argument("discriminative_loss: no label scores");
  if (gold < 0 || gold >= n) {
    throw std::invalid_argument("discriminative_loss: gold label " + std::to_string(gold) + " out of range");
  }
  if (kind == LossKind::generative_nll) {
    throw std::invalid_argument("discriminative_loss: generative objective is not a discriminative loss");
  }
  if (kind == LossKind::infinilog && n < 2) {
    throw std::invalid_argument("infinilog requires at least 2 labels; the non-gold sum is empty");
  }

  ad::Value score_vec = ad::concat(scores);
  ad::Value neg_gold = ad::affine(scores[static_cast<size_t>(gold)], -1.0, 0.0);

  auto cost_tensor = [&] {
    ad::Tensor c({n});
    for (int y = 0; y < n; ++y) c.at(y) = cost(gold, y);
    return c;
  };

  switch (kind) {
    case LossKind::perceptron:
      return ad::add(neg_gold, ad::vmax(score_vec));
    case LossKind::hinge:
      return ad::add(neg_gold, ad::vmax(ad::add(score_vec, tape.constant(cost_tensor()))));
    case LossKind::log_loss:
      return ad::add(neg_gold, ad::log_sum_exp(score_vec));
    case LossKind::softmax_margin:
      return ad::add(neg_gold, ad::log_sum_exp(ad::add(score_vec, tape.constant(cost_tensor()))));
    case LossKind::bayes_risk:
      return ad::dot(tape.constant(cost_tensor()), ad::softmax(score_vec));
    case LossKind::infinilog: {
      std::vector<int> others;
      others.reserve(static_cast<size_t>(n - 1));
      for (int y = 0; y < n; ++y) {
        if (y != gold) others.push_back(y);
      }
      return ad::add(neg_gold, ad::log_sum_exp(ad::gather(score_vec, std::move(others))));
    }
    default:
      throw std::logic_error("unhandled loss kind");
  }
}

double discriminative_loss(LossKind kind, std::span<const double> scores, int gold,
                           const CostFunction& cost) {
  ad::Tape tape;
  std::vector<ad::Value> values;
  values.reserve(scores.size());
  for (double s : scores) values.push_back(tape.constant(ad::Tensor::scalar(s)));
  return tape.val(discriminative_loss(tape, kind, values, gold, cost)).item();
}

}  // namespace gennli
