#include "gennli/data.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace gennli {

namespace {

bool is_word_char(unsigned char c) { return std::isalnum(c) != 0 || c >= 0x80; }

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      if (!current.empty()) {
        tokens.push_back(current);
        current.clear();
      }
    } else if (is_word_char(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else {
      if (!current.empty()) {
        tokens.push_back(current);
        current.clear();
      }
      tokens.emplace_back(1, static_cast<char>(c));
    }
  }
  if (!current.empty()) tokens.push_back(current);
  if (tokens.empty()) throw std::invalid_argument("tokenize: text is empty after trimming");
  return tokens;
}

std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

namespace {

struct RawRecord {
  std::string premise, hypothesis, label;
};

[[noreturn]] void record_error(const std::string& path, int line_no, const std::string& what) {
  throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + what);
}

std::vector<RawRecord> read_jsonl(const std::string& path, std::istream& in) {
  std::vector<RawRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      record_error(path, line_no, std::string("invalid JSON: ") + e.what());
    }
    for (const char* field : {"premise", "hypothesis", "label"}) {
      if (!j.contains(field) || !j[field].is_string()) {
        record_error(path, line_no, std::string("missing or non-string field '") + field + "'");
      }
    }
    records.push_back({j["premise"].get<std::string>(), j["hypothesis"].get<std::string>(),
                       j["label"].get<std::string>()});
  }
  return records;
}

std::vector<RawRecord> read_tsv(const std::string& path, std::istream& in) {
  std::vector<RawRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const size_t t1 = line.find('\t');
    const size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos) {
      record_error(path, line_no, "expected 3 tab-separated columns (premise, hypothesis, label)");
    }
    records.push_back({line.substr(0, t1), line.substr(t1 + 1, t2 - t1 - 1), line.substr(t2 + 1)});
  }
  return records;
}

}  // namespace

Dataset load_dataset(const std::string& path, DataFormat format) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);
  std::vector<RawRecord> records =
      format == DataFormat::jsonl ? read_jsonl(path, in) : read_tsv(path, in);
  if (records.empty()) throw std::runtime_error(path + ": no records found");

  std::set<std::string> labels;
  for (const RawRecord& r : records) labels.insert(r.label);
  if (labels.size() < 2) {
    throw std::runtime_error(path + ": dataset must contain at least 2 distinct labels, found " +
                             std::to_string(labels.size()));
  }

  Dataset ds;
  ds.label_set.assign(labels.begin(), labels.end());
  std::map<std::string, int> label_ids;
  for (size_t i = 0; i < ds.label_set.size(); ++i) label_ids[ds.label_set[i]] = static_cast<int>(i);

  int line_no = 0;
  for (const RawRecord& r : records) {
    ++line_no;
    Instance inst;
    try {
      inst.premise = tokenize(r.premise);
    } catch (const std::invalid_argument&) {
      throw std::runtime_error(path + ": record " + std::to_string(line_no) + ": empty premise");
    }
    try {
      inst.hypothesis = tokenize(r.hypothesis);
    } catch (const std::invalid_argument&) {
      throw std::runtime_error(path + ": record " + std::to_string(line_no) + ": empty hypothesis");
    }
    inst.label = label_ids.at(r.label);
    ds.instances.push_back(std::move(inst));
  }
  return ds;
}

void save_dataset_jsonl(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write dataset file: " + path);
  for (const Instance& inst : dataset.instances) {
    nlohmann::json j;
    j["premise"] = join_tokens(inst.premise);
    j["hypothesis"] = join_tokens(inst.hypothesis);
    j["label"] = dataset.label_set.at(static_cast<size_t>(inst.label));
    out << j.dump() << "\n";
  }
}

Vocabulary::Vocabulary(std::vector<std::string> label_set, std::vector<std::string> tokens)
    : label_set_(std::move(label_set)), tokens_(std::move(tokens)) {
  token_to_id_.reserve(tokens_.size());
  const int base = first_regular_id();
  for (size_t i = 0; i < tokens_.size(); ++i) {
    auto [it, inserted] = token_to_id_.emplace(tokens_[i], base + static_cast<int>(i));
    if (!inserted) throw std::invalid_argument("Vocabulary: duplicate token '" + tokens_[i] + "'");
  }
  bos_names_.reserve(label_set_.size());
  for (const std::string& label : label_set_) bos_names_.push_back("<bos:" + label + ">");
}

int Vocabulary::bos_id(int label) const {
  if (label < 0 || label >= n_labels()) {
    throw std::invalid_argument("bos_id: label " + std::to_string(label) + " outside the label set");
  }
  return kBosBase + label;
}

std::optional<int> Vocabulary::lookup(const std::string& token) const {
  auto it = token_to_id_.find(token);
  if (it == token_to_id_.end()) return std::nullopt;
  return it->second;
}

int Vocabulary::id_or_unk(const std::string& token) const { return lookup(token).value_or(kUnk); }

const std::string& Vocabulary::token(int id) const {
  static const std::string kPadName = "<pad>";
  static const std::string kUnkName = "<unk>";
  static const std::string kEosName = "<eos>";
  if (id == kPad) return kPadName;
  if (id == kUnk) return kUnkName;
  if (id == kEos) return kEosName;
  if (id >= kBosBase && id < first_regular_id()) {
    return bos_names_[static_cast<size_t>(id - kBosBase)];
  }
  const int reg = id - first_regular_id();
  if (reg < 0 || reg >= static_cast<int>(tokens_.size())) {
    throw std::invalid_argument("Vocabulary::token: id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<size_t>(reg)];
}

std::optional<int> Vocabulary::label_id(const std::string& name) const {
  for (size_t i = 0; i < label_set_.size(); ++i) {
    if (label_set_[i] == name) return static_cast<int>(i);
  }
  return std::nullopt;
}

Vocabulary build_vocab(const Dataset& dataset, int min_freq) {
  if (min_freq < 1) throw std::invalid_argument("build_vocab: min_freq must be >= 1");
  std::map<std::string, int64_t> freq;
  for (const Instance& inst : dataset.instances) {
    for (const std::string& t : inst.premise) ++freq[t];
    for (const std::string& t : inst.hypothesis) ++freq[t];
  }
  std::vector<std::pair<std::string, int64_t>> items;
  for (auto& [tok, f] : freq) {
    if (f >= min_freq) items.emplace_back(tok, f);
  }
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> tokens;
  tokens.reserve(items.size());
  for (auto& [tok, f] : items) tokens.push_back(tok);
  return Vocabulary(dataset.label_set, std::move(tokens));
}

int ExtendedVocab::target_id(const std::string& tok) const {
  if (auto id = base->lookup(tok)) return *id;
  auto it = extra_ids.find(tok);
  if (it != extra_ids.end()) return it->second;
  return Vocabulary::kUnk;
}

const std::string& ExtendedVocab::token(int ext_id) const {
  if (ext_id < base->size()) return base->token(ext_id);
  const int k = ext_id - base->size();
  if (k >= static_cast<int>(extra.size())) {
    throw std::invalid_argument("ExtendedVocab::token: id " + std::to_string(ext_id) + " out of range");
  }
  return extra[static_cast<size_t>(k)];
}

ExtendedVocab extend_for_pair(const Vocabulary& vocab, std::span<const std::string> premise) {
  ExtendedVocab ext;
  ext.base = &vocab;
  ext.premise_ext_ids.reserve(premise.size());
  for (const std::string& tok : premise) {
    if (auto id = vocab.lookup(tok)) {
      ext.premise_ext_ids.push_back(*id);
      continue;
    }
    auto it = ext.extra_ids.find(tok);
    if (it == ext.extra_ids.end()) {
      const int fresh = vocab.size() + static_cast<int>(ext.extra.size());
      ext.extra.push_back(tok);
      it = ext.extra_ids.emplace(tok, fresh).first;
    }
    ext.premise_ext_ids.push_back(it->second);
  }
  return ext;
}

PretrainedEmbeddings load_embeddings(const std::string& path, const Vocabulary& vocab, int dim) {
  if (dim < 1) throw std::invalid_argument("load_embeddings: dim must be positive");
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open embedding file: " + path);

  PretrainedEmbeddings emb;
  emb.rows = ad::Tensor({vocab.size(), dim});
  emb.matched.assign(static_cast<size_t>(vocab.size()), 0);

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string word;
    ss >> word;
    auto id = vocab.lookup(word);
    std::vector<double> values;
    values.reserve(static_cast<size_t>(dim));
    double v;
    while (ss >> v) values.push_back(v);
    if (static_cast<int>(values.size()) != dim) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(dim) +
                               " values, found " + std::to_string(values.size()));
    }
    if (!id || emb.matched[static_cast<size_t>(*id)]) continue;
    for (int j = 0; j < dim; ++j) emb.rows.at(*id, j) = values[static_cast<size_t>(j)];
    emb.matched[static_cast<size_t>(*id)] = 1;
    ++emb.matched_count;
  }
  return emb;
}

}  // namespace gennli
