#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "gennli/checkpoint.hpp"
#include "gennli/gradcheck.hpp"
#include "gennli/harness.hpp"

namespace {

using namespace gennli;

DataFormat format_for(const std::string& path, const std::string& explicit_format) {
  if (explicit_format == "jsonl") return DataFormat::jsonl;
  if (explicit_format == "tsv") return DataFormat::tsv;
  if (!explicit_format.empty()) throw std::runtime_error("unknown format '" + explicit_format + "'");
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".tsv") return DataFormat::tsv;
  return DataFormat::jsonl;
}

LossKind parse_loss(const std::string& name) {
  auto kind = loss_kind_from_string(name);
  if (!kind) {
    throw std::runtime_error("unknown loss '" + name +
                             "' (expected generative|perceptron|hinge|log|softmax-margin|bayes-risk|infinilog)");
  }
  return *kind;
}

struct TrainArgs {
  std::string data, dev, test, config, out, embeddings, format, loss, direction;
  int gen_epochs = -1, ft_epochs = -1, batch_size = -1;
  int d_w = -1, d = -1, d_y = -1, min_freq = -1;
  double lr = -1.0, grad_clip = -1.0;
  std::string optimizer;
  uint64_t seed = 0;
  bool seed_given = false;
};

ExperimentConfig merge_train_config(const TrainArgs& a) {
  ExperimentConfig cfg;
  if (!a.config.empty()) cfg = load_experiment_config(a.config);
  if (!a.data.empty()) cfg.train_path = a.data;
  if (!a.dev.empty()) cfg.dev_path = a.dev;
  if (!a.test.empty()) cfg.test_path = a.test;
  if (!a.embeddings.empty()) cfg.embeddings_path = a.embeddings;
  if (!a.format.empty()) cfg.format = format_for("", a.format);
  if (!a.loss.empty()) cfg.train.ft_loss = parse_loss(a.loss);
  if (a.gen_epochs >= 0) cfg.train.gen_epochs = a.gen_epochs;
  if (a.ft_epochs >= 0) cfg.train.ft_epochs = a.ft_epochs;
  if (a.batch_size > 0) cfg.train.batch_size = a.batch_size;
  if (a.lr > 0.0) cfg.train.optimizer.lr = a.lr;
  if (a.grad_clip >= 0.0) cfg.train.grad_clip_norm = a.grad_clip;
  if (!a.optimizer.empty()) {
    if (a.optimizer == "adam") cfg.train.optimizer.kind = OptimizerConfig::Kind::adam;
    else if (a.optimizer == "sgd") cfg.train.optimizer.kind = OptimizerConfig::Kind::sgd;
    else throw std::runtime_error("unknown optimizer '" + a.optimizer + "'");
  }
  if (!a.direction.empty()) {
    if (a.direction == "forward") cfg.train.direction = Direction::forward;
    else if (a.direction == "reverse") cfg.train.direction = Direction::reverse;
    else throw std::runtime_error("unknown direction '" + a.direction + "'");
  }
  if (a.d_w > 0) cfg.model.embed_dim = a.d_w;
  if (a.d > 0) cfg.model.hidden_dim = a.d;
  if (a.d_y > 0) cfg.model.label_dim = a.d_y;
  if (a.min_freq > 0) cfg.min_freq = a.min_freq;
  if (a.seed_given) cfg.seeds = {a.seed};
  return cfg;
}

int cmd_train(const TrainArgs& args) {
  ExperimentConfig cfg = merge_train_config(args);
  if (cfg.train_path.empty() || cfg.dev_path.empty()) {
    throw std::runtime_error("train: --data and --dev (or config keys train/dev) are required");
  }
  const uint64_t seed = cfg.seeds.empty() ? 1 : cfg.seeds.front();

  const Dataset train_set = load_dataset(cfg.train_path, cfg.format);
  const Dataset dev_set = load_dataset(cfg.dev_path, cfg.format);
  const Vocabulary vocab = build_vocab(train_set, cfg.min_freq);

  ModelInit init = cfg.model;
  init.vocab_size = vocab.size();
  init.n_labels = vocab.n_labels();
  init.seed = seed;
  PretrainedEmbeddings pretrained;
  if (!cfg.embeddings_path.empty()) {
    pretrained = load_embeddings(cfg.embeddings_path, vocab, init.embed_dim);
    std::cout << "embeddings: matched " << pretrained.matched_count << " of " << vocab.size()
              << " vocabulary rows\n";
    init.pretrained = &pretrained;
  }

  TrainConfig tc = cfg.train;
  tc.seed = seed;
  auto [params, report] = train(train_set, dev_set, init_params(init), vocab, tc);

  save_checkpoint(args.out, params, vocab);
  std::ofstream report_out(args.out + ".report.txt");
  report_out << format_report(report);
  std::cout << format_report(report);
  std::cout << "checkpoint written to " << args.out << "\n";

  if (!cfg.test_path.empty()) {
    const Dataset test_set = load_dataset(cfg.test_path, cfg.format);
    const EvalResult r = evaluate(test_set, params, vocab, tc.direction);
    std::cout << "test accuracy=" << r.accuracy << " mcc=" << mcc(r.confusion) << "\n";
  }
  return 0;
}

int cmd_evaluate(const std::string& checkpoint_path, const std::string& data_path,
                 const std::string& format, const std::string& direction) {
  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  const Dataset data = load_dataset(data_path, format_for(data_path, format));
  const Direction dir = direction == "reverse" ? Direction::reverse : Direction::forward;
  const EvalResult r = evaluate(data, ckpt.params, ckpt.vocab, dir);
  std::cout << "accuracy=" << r.accuracy << " mcc=" << mcc(r.confusion) << "\n";
  std::cout << "confusion (rows gold, cols predicted):\n";
  for (int g = 0; g < r.confusion.n_labels(); ++g) {
    std::cout << "  " << ckpt.vocab.labels()[static_cast<size_t>(g)] << ":";
    for (int p = 0; p < r.confusion.n_labels(); ++p) std::cout << " " << r.confusion.at(g, p);
    std::cout << "\n";
  }
  return 0;
}

int cmd_generate(const std::string& checkpoint_path, const std::string& premise_text,
                 const std::string& label_name, int max_len) {
  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  auto label = ckpt.vocab.label_id(label_name);
  if (!label) throw std::runtime_error("unknown label '" + label_name + "'");
  const std::vector<std::string> premise = tokenize(premise_text);
  const std::vector<std::string> out = generate_greedy(ckpt.params, ckpt.vocab, premise, *label, max_len);
  std::cout << join_tokens(out) << "\n";
  return 0;
}

int cmd_perturb(const std::string& data_path, const std::string& out_path, const std::string& format,
                int subsample_k, double noise, const std::string& imbalance_label, double keep_fraction,
                uint64_t seed) {
  const Dataset data = load_dataset(data_path, format_for(data_path, format));
  Perturbation pert;
  int chosen = 0;
  if (subsample_k > 0) {
    pert.kind = Perturbation::Kind::subsample;
    pert.subsample_k = subsample_k;
    ++chosen;
  }
  if (noise >= 0.0) {
    pert.kind = Perturbation::Kind::noise;
    pert.noise_fraction = noise;
    ++chosen;
  }
  if (!imbalance_label.empty()) {
    pert.kind = Perturbation::Kind::imbalance;
    pert.imbalance_label = imbalance_label;
    pert.keep_fraction = keep_fraction;
    ++chosen;
  }
  if (chosen != 1) {
    throw std::runtime_error("perturb: give exactly one of --subsample-k, --noise, --imbalance-label");
  }
  save_dataset_jsonl(apply_perturbation(data, pert, seed), out_path);
  std::cout << "perturbed dataset written to " << out_path << "\n";
  return 0;
}

int cmd_experiment(const std::string& config_path, const std::string& out_csv) {
  const ExperimentConfig cfg = load_experiment_config(config_path);
  const ExperimentReport report = run_experiment(cfg);
  std::cout << format_report(report);
  if (!out_csv.empty()) {
    std::ofstream out(out_csv);
    out << report_csv(report);
    std::cout << "csv written to " << out_csv << "\n";
  }
  return 0;
}

int cmd_gradcheck();

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GenNLI: a generative sequence-pair classifier with discriminative fine-tuning"};
  app.require_subcommand(1);

  TrainArgs train_args;
  std::string format, direction, checkpoint, data, out, label, premise;
  std::string config_path, out_csv;
  std::string imbalance_label;
  int max_len = 30;
  int subsample_k = 0;
  double noise = -1.0, keep_fraction = 1.0;
  uint64_t seed = 1;

  CLI::App* train = app.add_subcommand("train", "train a model and write a checkpoint");
  train->add_option("--data", train_args.data, "training set path");
  train->add_option("--dev", train_args.dev, "dev set path (model selection)");
  train->add_option("--test", train_args.test, "optional test set, evaluated after training");
  train->add_option("--config", train_args.config, "key=value config file; flags override");
  train->add_option("--out", train_args.out, "checkpoint output path")->required();
  train->add_option("--embeddings", train_args.embeddings, "pretrained embedding text file");
  train->add_option("--format", train_args.format, "jsonl|tsv (default: by extension)");
  train->add_option("--loss", train_args.loss, "fine-tuning loss");
  train->add_option("--gen-epochs", train_args.gen_epochs, "generative epochs");
  train->add_option("--ft-epochs", train_args.ft_epochs, "fine-tuning epochs");
  train->add_option("--batch-size", train_args.batch_size, "batch size");
  train->add_option("--lr", train_args.lr, "learning rate");
  train->add_option("--grad-clip", train_args.grad_clip, "global gradient norm clip (0 disables)");
  train->add_option("--optimizer", train_args.optimizer, "adam|sgd");
  train->add_option("--direction", train_args.direction, "forward|reverse");
  train->add_option("--d-w", train_args.d_w, "word embedding dimension");
  train->add_option("--d", train_args.d, "hidden dimension (even)");
  train->add_option("--d-y", train_args.d_y, "label embedding dimension");
  train->add_option("--min-freq", train_args.min_freq, "vocabulary frequency cutoff");
  auto* seed_opt = train->add_option("--seed", train_args.seed, "random seed");

  CLI::App* eval = app.add_subcommand("evaluate", "accuracy and MCC of a checkpoint on a dataset");
  eval->add_option("--checkpoint", checkpoint, "checkpoint path")->required();
  eval->add_option("--data", data, "dataset path")->required();
  eval->add_option("--format", format, "jsonl|tsv (default: by extension)");
  eval->add_option("--direction", direction, "forward|reverse");

  CLI::App* gen = app.add_subcommand("generate", "greedy label-conditioned generation");
  gen->add_option("--checkpoint", checkpoint, "checkpoint path")->required();
  gen->add_option("--premise", premise, "premise text")->required();
  gen->add_option("--label", label, "conditioning label")->required();
  gen->add_option("--max-len", max_len, "maximum generated length");

  CLI::App* perturb = app.add_subcommand("perturb", "write a perturbed copy of a dataset");
  perturb->add_option("--data", data, "dataset path")->required();
  perturb->add_option("--out", out, "output JSONL path")->required();
  perturb->add_option("--format", format, "jsonl|tsv (default: by extension)");
  perturb->add_option("--subsample-k", subsample_k, "instances kept per class");
  perturb->add_option("--noise", noise, "fraction of labels flipped");
  perturb->add_option("--imbalance-label", imbalance_label, "class to subsample");
  perturb->add_option("--keep-fraction", keep_fraction, "fraction of that class kept");
  perturb->add_option("--seed", seed, "random seed");

  CLI::App* experiment = app.add_subcommand("experiment", "run a seeded experiment from a config file");
  experiment->add_option("--config", config_path, "experiment config file")->required();
  experiment->add_option("--out", out_csv, "optional CSV report path");

  app.add_subcommand("gradcheck", "finite-difference check of the generative loss gradient");

  CLI11_PARSE(app, argc, argv);
  train_args.seed_given = seed_opt->count() > 0;

  try {
    if (train->parsed()) return cmd_train(train_args);
    if (eval->parsed()) return cmd_evaluate(checkpoint, data, format, direction);
    if (gen->parsed()) return cmd_generate(checkpoint, premise, label, max_len);
    if (perturb->parsed())
      return cmd_perturb(data, out, format, subsample_k, noise, imbalance_label, keep_fraction, seed);
    if (experiment->parsed()) return cmd_experiment(config_path, out_csv);
    return cmd_gradcheck();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

namespace {

int cmd_gradcheck() {
  // Small but complete reference model: every parameter group participates,
  // the premise carries an out-of-vocabulary token for the copy path.
  const std::vector<std::string> labels = {"contradiction", "entailment", "neutral"};
  std::vector<std::string> tokens;
  for (int i = 0; i < 14; ++i) tokens.push_back("w" + std::to_string(i));
  const Vocabulary vocab(labels, tokens);  // 3 reserved + 3 BOS + 14 = size 20

  ModelInit init;
  init.vocab_size = vocab.size();
  init.n_labels = vocab.n_labels();
  init.embed_dim = 8;
  init.hidden_dim = 8;
  init.label_dim = 4;
  init.seed = 7;
  ModelParams params = init_params(init);

  const std::vector<std::string> premise = {"w0", "w3", "oovtoken"};
  const std::vector<std::string> hypothesis = {"w3", "w1", "w5"};
  const int gold = 1;

  ad::ParamMap pm;
  params.for_each([&pm](const std::string& name, const ad::Tensor& t) { pm.emplace(name, t); });

  auto loss = [&](const ad::ParamMap& p, ad::Gradients* grads) {
    ModelParams local = params;
    local.for_each([&p](const std::string& name, ad::Tensor& t) { t = p.at(name); });
    ad::Tape tape;
    BoundModel bm = bind_model(tape, local, grads != nullptr);
    ad::Value nll = ad::affine(score_sequence_on_tape(bm, vocab, premise, hypothesis, gold), -1.0, 0.0);
    const double value = tape.val(nll).item();
    if (grads != nullptr) *grads = tape.backward(nll);
    return value;
  };

  const ad::FdReport report = ad::finite_difference_check(loss, pm);
  for (const auto& [name, err] : report.per_param) {
    std::printf("%-24s max_rel_err=%.3e\n", name.c_str(), err);
  }
  std::printf("max_rel_err=%.6e (worst: %s[%d], analytic=%.6e numeric=%.6e)\n", report.max_rel_error,
              report.worst_param.c_str(), report.worst_index, report.worst_analytic, report.worst_numeric);
  const bool ok = report.max_rel_error < 1e-4;
  std::printf("%s\n", ok ? "PASS" : "FAIL");
  return ok ? 0 : 1;
}

}  // namespace
