#include "gennli/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "gennli/rng.hpp"

namespace gennli {

namespace {

int round_half_up(double x) { return static_cast<int>(std::floor(x + 0.5)); }

std::vector<std::vector<int>> indices_by_class(const Dataset& dataset) {
  std::vector<std::vector<int>> by_class(dataset.label_set.size());
  for (size_t i = 0; i < dataset.instances.size(); ++i) {
    by_class[static_cast<size_t>(dataset.instances[i].label)].push_back(static_cast<int>(i));
  }
  return by_class;
}

Dataset keep_indices(const Dataset& dataset, const std::vector<char>& keep) {
  Dataset out;
  out.label_set = dataset.label_set;
  for (size_t i = 0; i < dataset.instances.size(); ++i) {
    if (keep[i]) out.instances.push_back(dataset.instances[i]);
  }
  return out;
}

}  // namespace

Dataset subsample_per_class(const Dataset& dataset, int k, uint64_t seed) {
  if (k < 1) throw std::invalid_argument("subsample_per_class: k must be >= 1");
  const auto by_class = indices_by_class(dataset);
  for (size_t y = 0; y < by_class.size(); ++y) {
    if (static_cast<int>(by_class[y].size()) < k) {
      throw std::invalid_argument("subsample_per_class: class '" + dataset.label_set[y] + "' has only " +
                                  std::to_string(by_class[y].size()) + " instances, need " + std::to_string(k));
    }
  }
  Rng rng(seed);
  std::vector<char> keep(dataset.instances.size(), 0);
  for (size_t y = 0; y < by_class.size(); ++y) {
    const std::vector<int>& pool = by_class[y];
    for (int pos : rng.sample_without_replacement(static_cast<int>(pool.size()), k)) {
      keep[static_cast<size_t>(pool[static_cast<size_t>(pos)])] = 1;
    }
  }
  return keep_indices(dataset, keep);
}

Dataset flip_labels(const Dataset& dataset, double fraction, uint64_t seed) {
  if (fraction < 0.0 || fraction > 1.0) throw std::invalid_argument("flip_labels: fraction must be in [0,1]");
  const int n_labels = static_cast<int>(dataset.label_set.size());
  if (n_labels < 2) throw std::invalid_argument("flip_labels: needs at least 2 labels");
  const int n = static_cast<int>(dataset.instances.size());
  const int n_flip = round_half_up(fraction * n);

  Dataset out = dataset;
  Rng rng(seed);
  for (int idx : rng.sample_without_replacement(n, n_flip)) {
    Instance& inst = out.instances[static_cast<size_t>(idx)];
    const int r = rng.next_below(n_labels - 1);
    inst.label = r >= inst.label ? r + 1 : r;
  }
  return out;
}

Dataset imbalance(const Dataset& dataset, const std::string& target_label, double keep_fraction,
                  uint64_t seed) {
  if (!(keep_fraction > 0.0) || keep_fraction > 1.0) {
    throw std::invalid_argument("imbalance: keep_fraction must be in (0,1]");
  }
  int target = -1;
  for (size_t y = 0; y < dataset.label_set.size(); ++y) {
    if (dataset.label_set[y] == target_label) target = static_cast<int>(y);
  }
  if (target < 0) throw std::invalid_argument("imbalance: unknown label '" + target_label + "'");

  const auto by_class = indices_by_class(dataset);
  const std::vector<int>& pool = by_class[static_cast<size_t>(target)];
  const int n_keep = round_half_up(keep_fraction * static_cast<double>(pool.size()));
  if (n_keep == 0) {
    throw std::invalid_argument("imbalance: keep_fraction " + std::to_string(keep_fraction) +
                                " rounds to zero kept instances of '" + target_label + "'");
  }
  Rng rng(seed);
  std::vector<char> keep(dataset.instances.size(), 1);
  for (int idx : pool) keep[static_cast<size_t>(idx)] = 0;
  for (int pos : rng.sample_without_replacement(static_cast<int>(pool.size()), n_keep)) {
    keep[static_cast<size_t>(pool[static_cast<size_t>(pos)])] = 1;
  }
  return keep_indices(dataset, keep);
}

Dataset apply_perturbation(const Dataset& dataset, const Perturbation& pert, uint64_t seed) {
  switch (pert.kind) {
    case Perturbation::Kind::identity: return dataset;
    case Perturbation::Kind::subsample: return subsample_per_class(dataset, pert.subsample_k, seed);
    case Perturbation::Kind::noise: return flip_labels(dataset, pert.noise_fraction, seed);
    case Perturbation::Kind::imbalance:
      return imbalance(dataset, pert.imbalance_label, pert.keep_fraction, seed);
  }
  throw std::logic_error("unknown perturbation kind");
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median: no values");
  std::sort(values.begin(), values.end());
  const size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

namespace {

std::map<std::string, std::string> parse_kv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const size_t last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected key=value");
    }
    auto trim = [](std::string s) {
      const size_t a = s.find_first_not_of(" \t");
      if (a == std::string::npos) return std::string();
      const size_t b = s.find_last_not_of(" \t");
      return s.substr(a, b - a + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

}  // namespace

ExperimentConfig load_experiment_config(const std::string& path) {
  const auto kv = parse_kv_file(path);
  ExperimentConfig cfg;
  auto get = [&kv](const std::string& key) -> const std::string* {
    auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };

  if (const auto* v = get("train")) cfg.train_path = *v;
  if (const auto* v = get("dev")) cfg.dev_path = *v;
  if (const auto* v = get("test")) cfg.test_path = *v;
  if (const auto* v = get("format")) {
    if (*v == "jsonl") cfg.format = DataFormat::jsonl;
    else if (*v == "tsv") cfg.format = DataFormat::tsv;
    else throw std::runtime_error(path + ": unknown format '" + *v + "'");
  }
  if (const auto* v = get("embeddings")) cfg.embeddings_path = *v;
  if (const auto* v = get("min_freq")) cfg.min_freq = std::stoi(*v);

  if (const auto* v = get("perturbation")) {
    if (*v == "identity") cfg.perturbation.kind = Perturbation::Kind::identity;
    else if (*v == "subsample") cfg.perturbation.kind = Perturbation::Kind::subsample;
    else if (*v == "noise") cfg.perturbation.kind = Perturbation::Kind::noise;
    else if (*v == "imbalance") cfg.perturbation.kind = Perturbation::Kind::imbalance;
    else throw std::runtime_error(path + ": unknown perturbation '" + *v + "'");
  }
  if (const auto* v = get("subsample_k")) cfg.perturbation.subsample_k = std::stoi(*v);
  if (const auto* v = get("noise")) cfg.perturbation.noise_fraction = std::stod(*v);
  if (const auto* v = get("imbalance_label")) cfg.perturbation.imbalance_label = *v;
  if (const auto* v = get("keep_fraction")) cfg.perturbation.keep_fraction = std::stod(*v);

  if (const auto* v = get("seeds")) {
    cfg.seeds.clear();
    std::istringstream ss(*v);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) cfg.seeds.push_back(std::stoull(item));
    }
    if (cfg.seeds.empty()) throw std::runtime_error(path + ": 'seeds' must list at least one seed");
  }

  if (const auto* v = get("gen_epochs")) cfg.train.gen_epochs = std::stoi(*v);
  if (const auto* v = get("ft_epochs")) cfg.train.ft_epochs = std::stoi(*v);
  if (const auto* v = get("loss")) {
    auto kind = loss_kind_from_string(*v);
    if (!kind) throw std::runtime_error(path + ": unknown loss '" + *v + "'");
    cfg.train.ft_loss = *kind;
  }
  if (const auto* v = get("optimizer")) {
    if (*v == "adam") cfg.train.optimizer.kind = OptimizerConfig::Kind::adam;
    else if (*v == "sgd") cfg.train.optimizer.kind = OptimizerConfig::Kind::sgd;
    else throw std::runtime_error(path + ": unknown optimizer '" + *v + "'");
  }
  if (const auto* v = get("lr")) cfg.train.optimizer.lr = std::stod(*v);
  if (const auto* v = get("batch_size")) cfg.train.batch_size = std::stoi(*v);
  if (const auto* v = get("grad_clip")) cfg.train.grad_clip_norm = std::stod(*v);
  if (const auto* v = get("eval_every")) cfg.train.eval_every = std::stoi(*v);
  if (const auto* v = get("direction")) {
    if (*v == "forward") cfg.train.direction = Direction::forward;
    else if (*v == "reverse") cfg.train.direction = Direction::reverse;
    else throw std::runtime_error(path + ": unknown direction '" + *v + "'");
  }

  if (const auto* v = get("d_w")) cfg.model.embed_dim = std::stoi(*v);
  if (const auto* v = get("d")) cfg.model.hidden_dim = std::stoi(*v);
  if (const auto* v = get("d_y")) cfg.model.label_dim = std::stoi(*v);
  return cfg;
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
  if (config.seeds.empty()) throw std::invalid_argument("run_experiment: at least one seed required");
  if (config.train_path.empty() || config.dev_path.empty()) {
    throw std::invalid_argument("run_experiment: train and dev dataset paths are required");
  }
  const Dataset train_set = load_dataset(config.train_path, config.format);
  const Dataset dev_set = load_dataset(config.dev_path, config.format);
  const Dataset eval_set =
      config.test_path.empty() ? dev_set : load_dataset(config.test_path, config.format);

  ExperimentReport report;
  for (uint64_t seed : config.seeds) {
    const Dataset perturbed = apply_perturbation(train_set, config.perturbation, seed);
    const Vocabulary vocab = build_vocab(perturbed, config.min_freq);

    ModelInit init = config.model;
    init.vocab_size = vocab.size();
    init.n_labels = vocab.n_labels();
    init.seed = seed;
    PretrainedEmbeddings pretrained;
    if (!config.embeddings_path.empty()) {
      pretrained = load_embeddings(config.embeddings_path, vocab, init.embed_dim);
      init.pretrained = &pretrained;
    }
    ModelParams params = init_params(init);

    TrainConfig tc = config.train;
    tc.seed = seed;
    auto [trained, train_report] = train(perturbed, dev_set, std::move(params), vocab, tc);

    const EvalResult eval = evaluate(eval_set, trained, vocab, tc.direction);
    report.per_seed.push_back({seed, eval.accuracy, mcc(eval.confusion)});
  }

  std::vector<double> accs, mccs;
  for (const SeedResult& r : report.per_seed) {
    accs.push_back(r.accuracy);
    mccs.push_back(r.mcc_value);
  }
  report.median_accuracy = median(std::move(accs));
  report.median_mcc = median(std::move(mccs));
  return report;
}

std::string format_report(const ExperimentReport& report) {
  std::ostringstream os;
  for (const SeedResult& r : report.per_seed) {
    os << "seed=" << r.seed << " accuracy=" << r.accuracy << " mcc=" << r.mcc_value << "\n";
  }
  os << "median accuracy=" << report.median_accuracy << " mcc=" << report.median_mcc << "\n";
  return os.str();
}

std::string report_csv(const ExperimentReport& report) {
  std::ostringstream os;
  os << "seed,accuracy,mcc\n";
  for (const SeedResult& r : report.per_seed) {
    os << r.seed << "," << r.accuracy << "," << r.mcc_value << "\n";
  }
  os << "median," << report.median_accuracy << "," << report.median_mcc << "\n";
  return os.str();
}

}  // namespace gennli
