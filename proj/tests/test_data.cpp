#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "gennli/data.hpp"
#include "gennli/rng.hpp"

using namespace gennli;

namespace {

std::filesystem::path write_tmp(const std::string& name, const std::string& content) {
  const auto dir = std::filesystem::temp_directory_path() / "gennli_tests";
  std::filesystem::create_directories(dir);
  const auto path = dir / name;
  std::ofstream out(path, std::ios::binary);
  out << content;
  return path;
}

}  // namespace

TEST_CASE("tokenize lowercases and splits punctuation") {
  CHECK(tokenize("A man is sitting.") == std::vector<std::string>{"a", "man", "is", "sitting", "."});
  CHECK(tokenize("Don't stop") == std::vector<std::string>{"don", "'", "t", "stop"});
  CHECK_THROWS_AS(tokenize("   "), std::invalid_argument);
  CHECK(tokenize("a  b\tc") == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("tokenize is idempotent over join") {
  const auto tokens = tokenize("A man, riding his bike; fast!");
  CHECK(tokenize(join_tokens(tokens)) == tokens);
}

TEST_CASE("jsonl loading collects a sorted label set") {
  const auto path = write_tmp("basic.jsonl",
                              R"({"premise": "A dog runs.", "hypothesis": "An animal moves.", "label": "entailment"})"
                              "\n"
                              R"({"premise": "A dog runs.", "hypothesis": "A cat sleeps.", "label": "contradiction"})"
                              "\n"
                              R"({"premise": "Kids play.", "hypothesis": "Children play.", "label": "entailment"})"
                              "\n");
  const Dataset ds = load_dataset(path.string(), DataFormat::jsonl);
  CHECK(ds.instances.size() == 3);
  CHECK(ds.label_set == std::vector<std::string>{"contradiction", "entailment"});
  CHECK(ds.instances[0].premise == std::vector<std::string>{"a", "dog", "runs", "."});
  CHECK(ds.instances[0].label == 1);
}

TEST_CASE("label set order is independent of file order") {
  const auto path = write_tmp("labels.jsonl",
                              R"({"premise": "x", "hypothesis": "y", "label": "c"})" "\n"
                              R"({"premise": "x", "hypothesis": "y", "label": "a"})" "\n"
                              R"({"premise": "x", "hypothesis": "y", "label": "b"})" "\n");
  CHECK(load_dataset(path.string(), DataFormat::jsonl).label_set == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("tsv errors cite the offending line") {
  const auto path = write_tmp("bad.tsv", "p one\th one\tentailment\nonly two columns\tmissing\n");
  CHECK_THROWS_WITH_AS(load_dataset(path.string(), DataFormat::tsv), doctest::Contains(":2:"),
                       std::runtime_error);
}

TEST_CASE("jsonl errors cite the offending line") {
  const auto path = write_tmp("bad.jsonl",
                              R"({"premise": "x", "hypothesis": "y", "label": "a"})" "\n"
                              "{not json}\n");
  CHECK_THROWS_WITH_AS(load_dataset(path.string(), DataFormat::jsonl), doctest::Contains(":2:"),
                       std::runtime_error);
  const auto missing = write_tmp("missing.jsonl", R"({"premise": "x", "label": "a"})" "\n");
  CHECK_THROWS_WITH_AS(load_dataset(missing.string(), DataFormat::jsonl), doctest::Contains("hypothesis"),
                       std::runtime_error);
}

TEST_CASE("empty and single-label files are rejected") {
  const auto empty = write_tmp("empty.jsonl", "\n\n");
  CHECK_THROWS_WITH_AS(load_dataset(empty.string(), DataFormat::jsonl), doctest::Contains("no records"),
                       std::runtime_error);
  const auto single = write_tmp("single.jsonl", R"({"premise": "x", "hypothesis": "y", "label": "a"})" "\n");
  CHECK_THROWS_AS(load_dataset(single.string(), DataFormat::jsonl), std::runtime_error);
}

TEST_CASE("dataset round-trips through jsonl serialization") {
  const auto path = write_tmp("round.jsonl",
                              R"({"premise": "A man, smiling!", "hypothesis": "Someone is happy.", "label": "yes"})"
                              "\n"
                              R"({"premise": "It rains.", "hypothesis": "The sun shines.", "label": "no"})"
                              "\n");
  const Dataset ds = load_dataset(path.string(), DataFormat::jsonl);
  const auto out = write_tmp("round_out.jsonl", "");
  save_dataset_jsonl(ds, out.string());
  const Dataset again = load_dataset(out.string(), DataFormat::jsonl);
  REQUIRE(again.instances.size() == ds.instances.size());
  CHECK(again.label_set == ds.label_set);
  for (size_t i = 0; i < ds.instances.size(); ++i) {
    CHECK(again.instances[i].premise == ds.instances[i].premise);
    CHECK(again.instances[i].hypothesis == ds.instances[i].hypothesis);
    CHECK(again.instances[i].label == ds.instances[i].label);
  }
}

namespace {

Dataset toy_dataset() {
  Dataset ds;
  ds.label_set = {"entailment", "neutral", "contradiction"};
  std::sort(ds.label_set.begin(), ds.label_set.end());
  ds.instances.push_back({{"a", "a", "a", "b"}, {"a", "c"}, 0});
  ds.instances.push_back({{"b", "c"}, {"c", "c"}, 1});
  return ds;
}

}  // namespace

TEST_CASE("vocabulary respects min_freq and reserved ids") {
  Dataset ds;
  ds.label_set = {"e", "n"};
  ds.instances.push_back({{"a", "a", "a"}, {"b"}, 0});
  ds.instances.push_back({{"a"}, {"b"}, 1});

  const Vocabulary all = build_vocab(ds, 1);
  CHECK(all.lookup("a").has_value());
  CHECK(all.lookup("b").has_value());

  const Vocabulary cut = build_vocab(ds, 3);
  CHECK(cut.lookup("a").has_value());
  CHECK_FALSE(cut.lookup("b").has_value());
}

TEST_CASE("vocabulary id layout: three labels give BOS ids 3,4,5") {
  const Vocabulary v = build_vocab(toy_dataset(), 1);
  CHECK(v.n_labels() == 3);
  CHECK(v.bos_id(0) == 3);
  CHECK(v.bos_id(1) == 4);
  CHECK(v.bos_id(2) == 5);
  CHECK(v.first_regular_id() == 6);
  // Frequency order: a(5), c(4), b(2).
  CHECK(v.lookup("a") == 6);
  CHECK(v.lookup("c") == 7);
  CHECK(v.lookup("b") == 8);
}

TEST_CASE("vocabulary ties break lexicographically") {
  Dataset ds;
  ds.label_set = {"x", "y"};
  ds.instances.push_back({{"zz", "mm"}, {"aa"}, 0});
  ds.instances.push_back({{"aa", "mm"}, {"zz"}, 1});
  const Vocabulary v = build_vocab(ds, 1);  // all frequency 2
  CHECK(*v.lookup("aa") < *v.lookup("mm"));
  CHECK(*v.lookup("mm") < *v.lookup("zz"));
}

TEST_CASE("token ids round-trip") {
  const Vocabulary v = build_vocab(toy_dataset(), 1);
  for (int id = v.first_regular_id(); id < v.size(); ++id) {
    CHECK(v.lookup(v.token(id)) == id);
  }
  CHECK(v.token(Vocabulary::kUnk) == "<unk>");
  CHECK(v.id_or_unk("nonexistent") == Vocabulary::kUnk);
}

TEST_CASE("extended vocabulary covers premise OOV tokens once") {
  const Vocabulary v = build_vocab(toy_dataset(), 1);

  const std::vector<std::string> in_vocab = {"a", "b", "c"};
  CHECK(extend_for_pair(v, in_vocab).extra.empty());

  const std::vector<std::string> with_oov = {"zyx", "a", "zyx"};
  const ExtendedVocab ext = extend_for_pair(v, with_oov);
  REQUIRE(ext.extra == std::vector<std::string>{"zyx"});
  CHECK(ext.size() == v.size() + 1);
  CHECK(ext.premise_ext_ids == std::vector<int>{v.size(), *v.lookup("a"), v.size()});
  CHECK(ext.target_id("zyx") == v.size());
  CHECK(ext.token(v.size()) == "zyx");

  // A token missing from both the vocabulary and the premise trains as UNK.
  CHECK(ext.target_id("qqq") == Vocabulary::kUnk);
}

TEST_CASE("extension is a pure function of vocabulary and premise") {
  const Vocabulary v = build_vocab(toy_dataset(), 1);
  const std::vector<std::string> premise = {"foo", "a", "bar", "foo"};
  const ExtendedVocab e1 = extend_for_pair(v, premise);
  const ExtendedVocab e2 = extend_for_pair(v, premise);
  CHECK(e1.extra == e2.extra);
  CHECK(e1.premise_ext_ids == e2.premise_ext_ids);
  for (int id : e1.premise_ext_ids) {
    if (id >= v.size()) continue;
    CHECK(id < v.size());
  }
}

TEST_CASE("embedding loading matches tokens and reports oversized lines") {
  const Vocabulary v = build_vocab(toy_dataset(), 1);

  SUBCASE("full coverage") {
    const auto path = write_tmp("emb_full.txt", "a 1 2\nb 3 4\nc 5 6\n");
    const PretrainedEmbeddings emb = load_embeddings(path.string(), v, 2);
    CHECK(emb.matched_count == v.size() - v.first_regular_id());
    CHECK(emb.rows.at(*v.lookup("a"), 0) == 1.0);
    CHECK(emb.rows.at(*v.lookup("c"), 1) == 6.0);
    CHECK(emb.matched[static_cast<size_t>(Vocabulary::kUnk)] == 0);
  }
  SUBCASE("empty file") {
    const auto path = write_tmp("emb_empty.txt", "");
    CHECK(load_embeddings(path.string(), v, 2).matched_count == 0);
  }
  SUBCASE("dimension mismatch cites the line") {
    const auto path = write_tmp("emb_bad.txt", "a 1 2\nb 3\n");
    CHECK_THROWS_WITH_AS(load_embeddings(path.string(), v, 2), doctest::Contains(":2:"),
                         std::runtime_error);
  }
  SUBCASE("words outside the vocabulary are ignored") {
    const auto path = write_tmp("emb_extra.txt", "zzz 1 2\na 3 4\n");
    CHECK(load_embeddings(path.string(), v, 2).matched_count == 1);
  }
}
