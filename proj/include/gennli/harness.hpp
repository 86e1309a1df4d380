#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gennli/data.hpp"
#include "gennli/metrics.hpp"
#include "gennli/trainer.hpp"

namespace gennli {

/// One of the stress protocols applied to a training set. Dev and test sets
/// are never perturbed.
struct Perturbation {
  enum class Kind { identity, subsample, noise, imbalance };
  Kind kind = Kind::identity;
  int subsample_k = 0;            // subsample: instances kept per class
  double noise_fraction = 0.0;    // noise: fraction of labels flipped
  std::string imbalance_label;    // imbalance: the subsampled class
  double keep_fraction = 1.0;     // imbalance: fraction of that class kept
};

/// Exactly k instances per class, sampled without replacement; relative
/// order of the surviving instances is preserved. A class smaller than k is
/// rejected by name.
Dataset subsample_per_class(const Dataset& dataset, int k, uint64_t seed);

/// Flips exactly round(fraction * n) labels, chosen without replacement;
/// each flip replaces the label with a uniformly chosen different label.
Dataset flip_labels(const Dataset& dataset, double fraction, uint64_t seed);

/// Keeps round(keep_fraction * count) instances of the target class and all
/// instances of every other class. Rounding to zero kept instances is
/// rejected.
Dataset imbalance(const Dataset& dataset, const std::string& target_label, double keep_fraction,
                  uint64_t seed);

Dataset apply_perturbation(const Dataset& dataset, const Perturbation& pert, uint64_t seed);

struct ExperimentConfig {
  std::string train_path, dev_path, test_path;  // test optional; dev reused when absent
  DataFormat format = DataFormat::jsonl;
  std::string embeddings_path;  // optional
  Perturbation perturbation{};
  TrainConfig train{};
  ModelInit model{};  // vocab_size/n_labels filled per run
  int min_freq = 1;
  std::vector<uint64_t> seeds{1, 2, 3, 4, 5};
};

struct SeedResult {
  uint64_t seed = 0;
  double accuracy = 0.0;
  double mcc_value = 0.0;
};

struct ExperimentReport {
  std::vector<SeedResult> per_seed;
  double median_accuracy = 0.0;
  double median_mcc = 0.0;
};

/// Parses the flat key=value experiment description. Keys not present keep
/// their defaults; run_experiment validates that the dataset paths are set.
ExperimentConfig load_experiment_config(const std::string& path);

/// For each seed: perturb the training set, build the vocabulary from it,
/// train with that seed, and evaluate on the untouched test (or dev) set.
ExperimentReport run_experiment(const ExperimentConfig& config);

std::string format_report(const ExperimentReport& report);
std::string report_csv(const ExperimentReport& report);

double median(std::vector<double> values);

}  // namespace gennli
