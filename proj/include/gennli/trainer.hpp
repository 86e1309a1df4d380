#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gennli/data.hpp"
#include "gennli/metrics.hpp"
#include "gennli/model.hpp"
#include "gennli/objectives.hpp"

namespace gennli {

struct OptimizerConfig {
  enum class Kind { adam, sgd };
  Kind kind = Kind::adam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  int gen_epochs = 20;
  int ft_epochs = 15;
  LossKind ft_loss = LossKind::infinilog;
  OptimizerConfig optimizer{};
  int batch_size = 16;
  double grad_clip_norm = 5.0;  // <= 0 disables clipping
  uint64_t seed = 1;
  int eval_every = 1;
  Direction direction = Direction::forward;
};

enum class TrainPhase { generative, fine_tune };

struct EpochRecord {
  int epoch = 0;  // 1-based, counted across both phases
  TrainPhase phase = TrainPhase::generative;
  double train_loss = 0.0;
  double dev_accuracy = -1.0;  // -1 when the epoch was not evaluated
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;  // 0 when nothing was evaluated
  double best_dev_accuracy = -1.0;
};

/// Serializes one record per epoch as "epoch=.. phase=.. loss=.. dev_acc=.. seconds=..".
std::string format_report(const TrainReport& report);

/// Adam (bias-corrected) or plain SGD over named parameter tensors, with
/// optional global gradient-norm clipping applied before each update.
class Optimizer {
 public:
  Optimizer(OptimizerConfig config, double grad_clip_norm)
      : config_(config), grad_clip_norm_(grad_clip_norm) {}

  void step(ModelParams& params, ad::Gradients& grads);
  /// Generic variant for arbitrary named tensors.
  void step(std::vector<std::pair<std::string, ad::Tensor*>>& params, ad::Gradients& grads);

  int64_t steps_taken() const { return t_; }

 private:
  OptimizerConfig config_;
  double grad_clip_norm_;
  int64_t t_ = 0;
  std::map<std::string, ad::Tensor> m_, v_;
};

/// Scales gradients in place so their global L2 norm is at most max_norm.
/// Returns the pre-clip norm.
double clip_grad_norm(ad::Gradients& grads, double max_norm);

struct EvalResult {
  double accuracy = 0.0;
  ConfusionMatrix confusion;
};

EvalResult evaluate(const Dataset& dataset, const ModelParams& params, const Vocabulary& vocab,
                    Direction dir = Direction::forward);

/// Two-phase schedule: gen_epochs of the generative objective, then
/// ft_epochs of the configured fine-tuning loss, all parameters updated in
/// both phases. Returns the parameters from the evaluated epoch with the
/// best dev accuracy (earliest on ties); with no evaluated epochs, the
/// final parameters. Deterministic in the seed.
std::pair<ModelParams, TrainReport> train(const Dataset& train_set, const Dataset& dev_set,
                                          ModelParams params, const Vocabulary& vocab,
                                          const TrainConfig& config);

}  // namespace gennli
