#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>

#include "gennli/tape.hpp"

namespace gennli {

/// The generative objective plus the six discriminative fine-tuning losses.
enum class LossKind {
  generative_nll,
  perceptron,
  hinge,
  log_loss,
  softmax_margin,
  bayes_risk,
  infinilog,
};

/// CLI-facing spellings: generative, perceptron, hinge, log, softmax-margin,
/// bayes-risk, infinilog.
std::optional<LossKind> loss_kind_from_string(const std::string& name);
std::string to_string(LossKind kind);

/// Label-pair penalty; cost(y, y) must be 0 for the bounds in the loss
/// algebra to hold. The default charges 1 for every wrong label.
using CostFunction = std::function<double(int gold, int candidate)>;

CostFunction zero_one_cost();

/// Negative log likelihood of the gold label's sequence score: -score.
double generative_nll(double score_gold);

/// Differentiable loss over per-label scalar scores on the caller's tape.
/// All log-sum-exp terms are max-shifted; tied maxima route their
/// subgradient to the lowest label index.
ad::Value discriminative_loss(ad::Tape& tape, LossKind kind, std::span<const ad::Value> scores, int gold,
                              const CostFunction& cost);

/// Plain evaluation of the same formulas.
double discriminative_loss(LossKind kind, std::span<const double> scores, int gold,
                           const CostFunction& cost);

}  // namespace gennli
