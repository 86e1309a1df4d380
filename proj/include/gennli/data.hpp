#pragma once

#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "gennli/tensor.hpp"

namespace gennli {

/// One premise/hypothesis/label triple. Tokens are stored post-tokenization;
/// `label` indexes into the owning Dataset's label_set.
struct Instance {
  std::vector<std::string> premise;
  std::vector<std::string> hypothesis;
  int label = -1;
};

struct Dataset {
  std::vector<Instance> instances;
  std::vector<std::string> label_set;  // sorted, ascending

  size_t size() const { return instances.size(); }
};

enum class DataFormat { jsonl, tsv };

/// Lowercases, splits punctuation into single-character tokens, and splits
/// on whitespace. Rejects text that is empty after trimming.
std::vector<std::string> tokenize(const std::string& text);

std::string join_tokens(std::span<const std::string> tokens);

/// Loads JSONL ({"premise","hypothesis","label"}) or headerless TSV
/// (premise<TAB>hypothesis<TAB>label). Malformed records are rejected with
/// their line number. Labels are collected into a sorted label_set.
Dataset load_dataset(const std::string& path, DataFormat format);

/// Writes the instances back out as JSONL, one record per line, with tokens
/// joined by single spaces. Output is byte-deterministic.
void save_dataset_jsonl(const Dataset& dataset, const std::string& path);

/// Token/id bijection with reserved ids PAD=0, UNK=1, EOS=2 and one BOS per
/// label at ids 3..3+|Y|-1. Regular tokens follow, ordered by descending
/// corpus frequency then lexicographically.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kEos = 2;
  static constexpr int kBosBase = 3;

  Vocabulary() = default;
  Vocabulary(std::vector<std::string> label_set, std::vector<std::string> tokens);

  int size() const { return kBosBase + n_labels() + static_cast<int>(tokens_.size()); }
  int n_labels() const { return static_cast<int>(label_set_.size()); }
  int bos_id(int label) const;
  int first_regular_id() const { return kBosBase + n_labels(); }

  std::optional<int> lookup(const std::string& token) const;
  int id_or_unk(const std::string& token) const;
  const std::string& token(int id) const;

  const std::vector<std::string>& labels() const { return label_set_; }
  const std::vector<std::string>& regular_tokens() const { return tokens_; }
  std::optional<int> label_id(const std::string& name) const;

 private:
  std::vector<std::string> label_set_;
  std::vector<std::string> tokens_;  // non-reserved, in id order
  std::vector<std::string> bos_names_;
  std::unordered_map<std::string, int> token_to_id_;
};

Vocabulary build_vocab(const Dataset& dataset, int min_freq = 1);

/// Per-pair vocabulary: base ids plus fresh ids for premise tokens missing
/// from the base, in first-occurrence order. A pure function of
/// (vocabulary, premise).
struct ExtendedVocab {
  const Vocabulary* base = nullptr;
  std::vector<std::string> extra;
  std::vector<int> premise_ext_ids;  // extended id of each premise position
  std::unordered_map<std::string, int> extra_ids;

  int size() const { return base->size() + static_cast<int>(extra.size()); }
  /// Target id for a decoder token: base id, else premise-extra id, else UNK.
  int target_id(const std::string& token) const;
  /// Surface form for any extended id.
  const std::string& token(int ext_id) const;
};

ExtendedVocab extend_for_pair(const Vocabulary& vocab, std::span<const std::string> premise);

/// Pretrained word vectors matched against a vocabulary. Unmatched rows are
/// left for init_params to fill with its seeded initializer.
struct PretrainedEmbeddings {
  ad::Tensor rows;             // |vocab| x dim; unmatched rows zero
  std::vector<uint8_t> matched;  // per vocab id
  int matched_count = 0;
};

/// Reads GloVe-style text ("word v1 .. v_dim" per line). A line whose value
/// count differs from `dim` is rejected with its line number.
PretrainedEmbeddings load_embeddings(const std::string& path, const Vocabulary& vocab, int dim);

}  // namespace gennli
