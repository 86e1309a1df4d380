#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gennli/data.hpp"
#include "gennli/lstm.hpp"
#include "gennli/tape.hpp"

namespace gennli {

/// All learnable tensors of the classifier. The bidirectional encoder runs
/// two cells of hidden size d/2 so the concatenated state matches the
/// decoder's hidden size d, which dot-product attention requires.
struct ModelParams {
  ad::Tensor word_embeddings;    // |vocab| x d_w (BOS rows live at the reserved ids)
  ad::Tensor label_embeddings;   // |Y| x d_y
  ad::LstmCellParams encoder_fwd, encoder_bwd;  // input d_w, hidden d/2
  ad::LstmCellParams decoder;                   // input d_w, hidden d
  ad::Tensor V;      // d x (2d + d_y)
  ad::Tensor b;      // d
  ad::Tensor V_out;  // |vocab| x d
  ad::Tensor b_out;  // |vocab|
  ad::Tensor copy_w;  // 2d + d_y
  ad::Tensor copy_b;  // scalar {1}

  int vocab_size() const { return word_embeddings.rows(); }
  int n_labels() const { return label_embeddings.rows(); }
  int embed_dim() const { return word_embeddings.cols(); }
  int hidden_dim() const { return decoder.hidden_dim(); }
  int label_dim() const { return label_embeddings.cols(); }

  /// Visits every tensor with its checkpoint/gradient name, in a fixed order.
  template <typename Fn>
  void for_each(Fn&& fn) {
    fn("word_embeddings", word_embeddings);
    fn("label_embeddings", label_embeddings);
    encoder_fwd.for_each("encoder_fwd", fn);
    encoder_bwd.for_each("encoder_bwd", fn);
    decoder.for_each("decoder", fn);
    fn("output_proj.V", V);
    fn("output_proj.b", b);
    fn("output_proj.V_out", V_out);
    fn("output_proj.b_out", b_out);
    fn("copy.w", copy_w);
    fn("copy.b", copy_b);
  }
  template <typename Fn>
  void for_each(Fn&& fn) const {
    const_cast<ModelParams*>(this)->for_each(
        [&fn](const std::string& n, ad::Tensor& t) { fn(n, static_cast<const ad::Tensor&>(t)); });
  }
};

struct ModelInit {
  int vocab_size = 0;
  int n_labels = 0;
  int embed_dim = 300;   // d_w
  int hidden_dim = 300;  // d, must be even
  int label_dim = 100;   // d_y
  uint64_t seed = 1;
  const PretrainedEmbeddings* pretrained = nullptr;
};

/// Glorot-uniform initialization of every tensor, deterministic in the seed.
/// Pretrained rows, where provided, override the initialized embedding rows.
ModelParams init_params(const ModelInit& init);

/// Encoder output: one state per premise position, each the concatenation of
/// the forward and backward direction at that position.
struct EncoderStates {
  std::vector<ad::Tensor> states;  // N tensors of shape {d}
};

/// Everything one decoder step exposes, as plain tensors.
struct DecoderStep {
  ad::Tensor h, c;        // new recurrent state
  ad::Tensor context;     // attention-weighted encoder summary
  ad::Tensor alpha;       // attention weights over premise positions
  double p_copy = 0.0;    // copy-gate value
  ad::Tensor p_vocab;     // generation distribution over the base vocabulary
  ad::Tensor dist;        // mixed distribution over the extended vocabulary
};

using LabelScores = std::vector<double>;  // log p(decoded | conditioned, y) per label

inline constexpr double kProbFloor = 1e-12;

// ---- tape-level building blocks (used by the trainer) ----------------------

struct BoundModel {
  ad::Tape* tape = nullptr;
  ad::Value word_embeddings, label_embeddings;
  ad::LstmCell encoder_fwd, encoder_bwd, decoder;
  ad::Value V, b, V_out, b_out, copy_w, copy_b;
};

BoundModel bind_model(ad::Tape& tape, const ModelParams& params, bool trainable);

/// Teacher-forced log-likelihood of `decoded` given `conditioned` and the
/// label, on the caller's tape: sum over positions 1..T+1 (EOS last) of
/// log P(token), probabilities floored at kProbFloor. The encoder reads
/// `conditioned`; the extended vocabulary is built from it.
ad::Value score_sequence_on_tape(const BoundModel& bound, const Vocabulary& vocab,
                                 std::span<const std::string> conditioned,
                                 std::span<const std::string> decoded, int label);

/// Per-label scores sharing a single encoder pass, in label order.
std::vector<ad::Value> score_all_labels_on_tape(const BoundModel& bound, const Vocabulary& vocab,
                                                std::span<const std::string> conditioned,
                                                std::span<const std::string> decoded);

// ---- plain (no-gradient) operations ----------------------------------------

EncoderStates encode(const ModelParams& params, const Vocabulary& vocab,
                     std::span<const std::string> premise);

/// One decoder step from explicit state. `prev_token_id` is an extended-space
/// id (extended ids embed as UNK). Pass empty h/c tensors for the initial
/// zero state.
std::pair<DecoderStep, std::pair<ad::Tensor, ad::Tensor>> decode_step(
    const ModelParams& params, const Vocabulary& vocab, const ExtendedVocab& ext,
    const EncoderStates& enc, int prev_token_id, const ad::Tensor& h_prev, const ad::Tensor& c_prev,
    int label);

/// log p(hypothesis | premise, label); always <= 0.
double score_hypothesis(const ModelParams& params, const Vocabulary& vocab,
                        std::span<const std::string> premise, std::span<const std::string> hypothesis,
                        int label);

/// Reverse-direction score: log p(premise | hypothesis, label).
double score_reverse(const ModelParams& params, const Vocabulary& vocab,
                     std::span<const std::string> premise, std::span<const std::string> hypothesis,
                     int label);

enum class Direction { forward, reverse };

double score_direction(const ModelParams& params, const Vocabulary& vocab, const Instance& inst,
                       int label, Direction dir);

/// Arg max over labels of the per-label score, ties to the lowest label index.
std::pair<int, LabelScores> predict(const ModelParams& params, const Vocabulary& vocab,
                                    std::span<const std::string> premise,
                                    std::span<const std::string> hypothesis,
                                    Direction dir = Direction::forward);

/// Greedy label-conditioned generation from the premise. Stops at EOS or
/// after max_len tokens; copied extended ids are rendered as their premise
/// surface form. Optional gate forcing pins p_copy to the given value.
std::vector<std::string> generate_greedy(const ModelParams& params, const Vocabulary& vocab,
                                         std::span<const std::string> premise, int label, int max_len,
                                         std::optional<double> force_p_copy = std::nullopt);

}  // namespace gennli
