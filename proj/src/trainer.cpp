#include "gennli/trainer.hpp"

#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "gennli/rng.hpp"

namespace gennli {

std::string format_report(const TrainReport& report) {
  std::ostringstream os;
  for (const EpochRecord& e : report.epochs) {
    os << "epoch=" << e.epoch << " phase=" << (e.phase == TrainPhase::generative ? "gen" : "ft")
       << " loss=" << e.train_loss;
    if (e.dev_accuracy >= 0.0) os << " dev_acc=" << e.dev_accuracy;
    os << " seconds=" << e.seconds << "\n";
  }
  if (report.best_epoch > 0) {
    os << "best_epoch=" << report.best_epoch << " best_dev_acc=" << report.best_dev_accuracy << "\n";
  }
  return os.str();
}

double clip_grad_norm(ad::Gradients& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, g] : grads) {
    for (double x : g.data()) sq += x * x;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& [name, g] : grads) {
      for (double& x : g.data()) x *= scale;
    }
  }
  return norm;
}

void Optimizer::step(std::vector<std::pair<std::string, ad::Tensor*>>& params, ad::Gradients& grads) {
  clip_grad_norm(grads, grad_clip_norm_);
  ++t_;
  for (auto& [name, tensor] : params) {
    auto it = grads.find(name);
    if (it == grads.end()) continue;  // absent gradient means zero
    const ad::Tensor& g = it->second;
    if (!g.same_shape(*tensor)) {
      throw std::invalid_argument("optimizer: gradient shape mismatch for '" + name + "'");
    }
    if (config_.kind == OptimizerConfig::Kind::sgd) {
      for (int64_t i = 0; i < tensor->numel(); ++i) tensor->data()[i] -= config_.lr * g.data()[i];
      continue;
    }
    ad::Tensor& m = m_.try_emplace(name, ad::Tensor::zeros(tensor->shape())).first->second;
    ad::Tensor& v = v_.try_emplace(name, ad::Tensor::zeros(tensor->shape())).first->second;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    for (int64_t i = 0; i < tensor->numel(); ++i) {
      const double gi = g.data()[i];
      m.data()[i] = config_.beta1 * m.data()[i] + (1.0 - config_.beta1) * gi;
      v.data()[i] = config_.beta2 * v.data()[i] + (1.0 - config_.beta2) * gi * gi;
      const double m_hat = m.data()[i] / bc1;
      const double v_hat = v.data()[i] / bc2;
      tensor->data()[i] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.eps);
    }
  }
}

void Optimizer::step(ModelParams& params, ad::Gradients& grads) {
  std::vector<std::pair<std::string, ad::Tensor*>> named;
  params.for_each([&named](const std::string& name, ad::Tensor& t) { named.emplace_back(name, &t); });
  step(named, grads);
}

EvalResult evaluate(const Dataset& dataset, const ModelParams& params, const Vocabulary& vocab,
                    Direction dir) {
  if (dataset.instances.empty()) throw std::invalid_argument("evaluate: dataset is empty");
  EvalResult result;
  result.confusion = ConfusionMatrix(static_cast<int>(dataset.label_set.size()));
  int64_t correct = 0;
  for (const Instance& inst : dataset.instances) {
    auto [pred, scores] = predict(params, vocab, inst.premise, inst.hypothesis, dir);
    result.confusion.at(inst.label, pred) += 1;
    if (pred == inst.label) ++correct;
  }
  result.accuracy = static_cast<double>(correct) / static_cast<double>(dataset.instances.size());
  return result;
}

namespace {

void accumulate(ad::Gradients& total, const ad::Gradients& part) {
  for (const auto& [name, g] : part) {
    auto it = total.find(name);
    if (it == total.end()) {
      total.emplace(name, g);
    } else {
      for (int64_t i = 0; i < g.numel(); ++i) it->second.data()[i] += g.data()[i];
    }
  }
}

/// Loss and gradients for one instance under either phase's objective.
double instance_loss(const Instance& inst, const ModelParams& params, const Vocabulary& vocab,
                     TrainPhase phase, LossKind ft_loss, Direction dir, const CostFunction& cost,
                     ad::Gradients* grads_out) {
  ad::Tape tape;
  BoundModel bm = bind_model(tape, params, grads_out != nullptr);
  std::span<const std::string> conditioned =
      dir == Direction::forward ? std::span<const std::string>(inst.premise)
                                : std::span<const std::string>(inst.hypothesis);
  std::span<const std::string> decoded = dir == Direction::forward
                                             ? std::span<const std::string>(inst.hypothesis)
                                             : std::span<const std::string>(inst.premise);
  ad::Value loss;
  if (phase == TrainPhase::generative || ft_loss == LossKind::generative_nll) {
    loss = ad::affine(score_sequence_on_tape(bm, vocab, conditioned, decoded, inst.label), -1.0, 0.0);
  } else {
    std::vector<ad::Value> scores = score_all_labels_on_tape(bm, vocab, conditioned, decoded);
    loss = discriminative_loss(tape, ft_loss, scores, inst.label, cost);
  }
  const double value = tape.val(loss).item();
  if (grads_out != nullptr) *grads_out = tape.backward(loss);
  return value;
}

}  // namespace

std::pair<ModelParams, TrainReport> train(const Dataset& train_set, const Dataset& dev_set,
                                          ModelParams params, const Vocabulary& vocab,
                                          const TrainConfig& config) {
  if (train_set.instances.empty()) throw std::invalid_argument("train: training set is empty");
  if (dev_set.instances.empty()) throw std::invalid_argument("train: dev set is empty");
  if (config.gen_epochs < 0 || config.ft_epochs < 0) throw std::invalid_argument("train: epochs must be >= 0");
  if (config.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (!(config.optimizer.lr > 0.0)) throw std::invalid_argument("train: learning rate must be positive");
  if (config.eval_every < 1) throw std::invalid_argument("train: eval_every must be >= 1");

  TrainReport report;
  Optimizer optimizer(config.optimizer, config.grad_clip_norm);
  const CostFunction cost = zero_one_cost();

  ModelParams best_params = params;
  bool have_best = false;

  const int total_epochs = config.gen_epochs + config.ft_epochs;
  const int n = static_cast<int>(train_set.instances.size());
  std::vector<int> order(static_cast<size_t>(n));

  for (int epoch = 1; epoch <= total_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const TrainPhase phase = epoch <= config.gen_epochs ? TrainPhase::generative : TrainPhase::fine_tune;

    for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
    Rng shuffle_rng(mix_seed(config.seed, static_cast<uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    for (int begin = 0; begin < n; begin += config.batch_size) {
      const int end = std::min(begin + config.batch_size, n);
      ad::Gradients batch_grads;
      for (int k = begin; k < end; ++k) {
        const int idx = order[static_cast<size_t>(k)];
        const Instance& inst = train_set.instances[static_cast<size_t>(idx)];
        ad::Gradients grads;
        double loss;
        try {
          loss = instance_loss(inst, params, vocab, phase, config.ft_loss, config.direction, cost,
                               &grads);
        } catch (const std::invalid_argument& e) {
          throw std::runtime_error("train: aborted at epoch " + std::to_string(epoch) + ", instance " +
                                   std::to_string(idx) + " (premise: '" + join_tokens(inst.premise) +
                                   "'): " + e.what());
        }
        if (!std::isfinite(loss)) {
          throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                   ", instance " + std::to_string(idx) + " (premise: '" +
                                   join_tokens(inst.premise) + "')");
        }
        epoch_loss += loss;
        accumulate(batch_grads, grads);
      }
      const double inv = 1.0 / static_cast<double>(end - begin);
      for (auto& [name, g] : batch_grads) {
        for (double& x : g.data()) x *= inv;
      }
      optimizer.step(params, batch_grads);
    }

    EpochRecord record;
    record.epoch = epoch;
    record.phase = phase;
    record.train_loss = epoch_loss / static_cast<double>(n);
    if (epoch % config.eval_every == 0) {
      record.dev_accuracy = evaluate(dev_set, params, vocab, config.direction).accuracy;
      if (!have_best || record.dev_accuracy > report.best_dev_accuracy) {
        have_best = true;
        report.best_dev_accuracy = record.dev_accuracy;
        report.best_epoch = epoch;
        best_params = params;
      }
    }
    record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report.epochs.push_back(record);
  }

  if (!have_best) return {std::move(params), std::move(report)};
  return {std::move(best_params), std::move(report)};
}

}  // namespace gennli
