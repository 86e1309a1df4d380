#include "gennli/model.hpp"

#include <cmath>
#include <stdexcept>

#include "gennli/rng.hpp"

namespace gennli {

namespace {

double glorot_radius(const ad::Tensor& t) {
  const int fan_out = t.shape()[0];
  const int fan_in = t.ndim() == 2 ? t.shape()[1] : 1;
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

ad::LstmCellParams make_cell(int input_dim, int hidden_dim) {
  ad::LstmCellParams c;
  auto mat = [&](ad::Tensor& t, int rows, int cols) { t = ad::Tensor({rows, cols}); };
  auto vec = [&](ad::Tensor& t, int n) { t = ad::Tensor({n}); };
  mat(c.W_xi, hidden_dim, input_dim); mat(c.W_hi, hidden_dim, hidden_dim); vec(c.b_i, hidden_dim);
  mat(c.W_xf, hidden_dim, input_dim); mat(c.W_hf, hidden_dim, hidden_dim); vec(c.b_f, hidden_dim);
  mat(c.W_xg, hidden_dim, input_dim); mat(c.W_hg, hidden_dim, hidden_dim); vec(c.b_g, hidden_dim);
  mat(c.W_xo, hidden_dim, input_dim); mat(c.W_ho, hidden_dim, hidden_dim); vec(c.b_o, hidden_dim);
  return c;
}

}  // namespace

ModelParams init_params(const ModelInit& init) {
  if (init.vocab_size <= 0 || init.n_labels <= 0 || init.embed_dim <= 0 || init.hidden_dim <= 0 ||
      init.label_dim <= 0) {
    throw std::invalid_argument("init_params: all sizes must be positive");
  }
  if (init.hidden_dim % 2 != 0) {
    throw std::invalid_argument("init_params: hidden_dim must be even to split across encoder directions");
  }
  const int d = init.hidden_dim;
  ModelParams p;
  p.word_embeddings = ad::Tensor({init.vocab_size, init.embed_dim});
  p.label_embeddings = ad::Tensor({init.n_labels, init.label_dim});
  p.encoder_fwd = make_cell(init.embed_dim, d / 2);
  p.encoder_bwd = make_cell(init.embed_dim, d / 2);
  p.decoder = make_cell(init.embed_dim, d);
  p.V = ad::Tensor({d, 2 * d + init.label_dim});
  p.b = ad::Tensor({d});
  p.V_out = ad::Tensor({init.vocab_size, d});
  p.b_out = ad::Tensor({init.vocab_size});
  p.copy_w = ad::Tensor({2 * d + init.label_dim});
  p.copy_b = ad::Tensor({1});

  Rng rng(init.seed);
  p.for_each([&rng](const std::string&, ad::Tensor& t) {
    const double r = glorot_radius(t);
    for (double& x : t.data()) x = rng.next_uniform(-r, r);
  });

  if (init.pretrained != nullptr) {
    const PretrainedEmbeddings& pre = *init.pretrained;
    if (pre.rows.rows() != init.vocab_size || pre.rows.cols() != init.embed_dim) {
      throw std::invalid_argument("init_params: pretrained embedding shape " + ad::shape_str(pre.rows.shape()) +
                                  " does not match {" + std::to_string(init.vocab_size) + "," +
                                  std::to_string(init.embed_dim) + "}");
    }
    for (int i = 0; i < init.vocab_size; ++i) {
      if (!pre.matched[static_cast<size_t>(i)]) continue;
      for (int j = 0; j < init.embed_dim; ++j) p.word_embeddings.at(i, j) = pre.rows.at(i, j);
    }
  }
  return p;
}

BoundModel bind_model(ad::Tape& tape, const ModelParams& params, bool trainable) {
  BoundModel bm;
  bm.tape = &tape;
  auto bind = [&](const std::string& name, const ad::Tensor& t) {
    return trainable ? tape.param(name, t) : tape.constant(t);
  };
  bm.word_embeddings = bind("word_embeddings", params.word_embeddings);
  bm.label_embeddings = bind("label_embeddings", params.label_embeddings);
  bm.encoder_fwd = ad::bind_lstm(tape, params.encoder_fwd, "encoder_fwd", trainable);
  bm.encoder_bwd = ad::bind_lstm(tape, params.encoder_bwd, "encoder_bwd", trainable);
  bm.decoder = ad::bind_lstm(tape, params.decoder, "decoder", trainable);
  bm.V = bind("output_proj.V", params.V);
  bm.b = bind("output_proj.b", params.b);
  bm.V_out = bind("output_proj.V_out", params.V_out);
  bm.b_out = bind("output_proj.b_out", params.b_out);
  bm.copy_w = bind("copy.w", params.copy_w);
  bm.copy_b = bind("copy.b", params.copy_b);
  return bm;
}

namespace {

int vocab_size_of(const BoundModel& bm) { return bm.tape->val(bm.word_embeddings).rows(); }

ad::Value embed_token(const BoundModel& bm, int ext_id) {
  const int base = vocab_size_of(bm);
  const int eff = ext_id < base ? ext_id : Vocabulary::kUnk;
  return ad::row(bm.word_embeddings, eff);
}

struct EncodedPair {
  ExtendedVocab ext;
  std::vector<ad::Value> states;
  ad::Value enc_matrix;  // {N, d}
};

std::vector<ad::Value> run_encoder(const BoundModel& bm, const std::vector<ad::Value>& inputs) {
  ad::Tape& tape = *bm.tape;
  const int half = tape.val(bm.encoder_fwd.b_i).dim(0);
  const int n = static_cast<int>(inputs.size());
  ad::Value zero = tape.constant(ad::Tensor({half}));

  std::vector<ad::Value> fwd(static_cast<size_t>(n)), bwd(static_cast<size_t>(n));
  ad::Value h = zero, c = zero;
  for (int i = 0; i < n; ++i) {
    std::tie(h, c) = ad::lstm_cell(bm.encoder_fwd, inputs[static_cast<size_t>(i)], h, c);
    fwd[static_cast<size_t>(i)] = h;
  }
  h = zero, c = zero;
  for (int i = n - 1; i >= 0; --i) {
    std::tie(h, c) = ad::lstm_cell(bm.encoder_bwd, inputs[static_cast<size_t>(i)], h, c);
    bwd[static_cast<size_t>(i)] = h;
  }
  std::vector<ad::Value> states(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const ad::Value parts[] = {fwd[static_cast<size_t>(i)], bwd[static_cast<size_t>(i)]};
    states[static_cast<size_t>(i)] = ad::concat(parts);
  }
  return states;
}

EncodedPair encode_on_tape(const BoundModel& bm, const Vocabulary& vocab,
                           std::span<const std::string> conditioned) {
  if (conditioned.empty()) throw std::invalid_argument("encode: input sequence is empty");
  EncodedPair enc;
  enc.ext = extend_for_pair(vocab, conditioned);
  std::vector<ad::Value> inputs;
  inputs.reserve(conditioned.size());
  for (const std::string& tok : conditioned) inputs.push_back(embed_token(bm, vocab.id_or_unk(tok)));
  enc.states = run_encoder(bm, inputs);
  enc.enc_matrix = ad::stack_rows(enc.states);
  return enc;
}

struct StepValues {
  ad::Value h, c, context, alpha, p_vocab, p_copy, dist;
};

StepValues step_on_tape(const BoundModel& bm, const EncodedPair& enc, ad::Value label_emb,
                        int prev_ext_id, ad::Value h_prev, ad::Value c_prev,
                        std::optional<double> force_gate) {
  ad::Tape& tape = *bm.tape;
  StepValues out;
  ad::Value w = embed_token(bm, prev_ext_id);
  std::tie(out.h, out.c) = ad::lstm_cell(bm.decoder, w, h_prev, c_prev);

  out.alpha = ad::softmax(ad::matvec(enc.enc_matrix, out.h));
  out.context = ad::vecmat(out.alpha, enc.enc_matrix);

  const ad::Value feat_parts[] = {out.h, out.context, label_emb};
  ad::Value feat = ad::concat(feat_parts);
  out.p_vocab = ad::softmax(ad::add(ad::matvec(bm.V_out, ad::add(ad::matvec(bm.V, feat), bm.b)), bm.b_out));
  if (force_gate.has_value()) {
    out.p_copy = tape.constant(ad::Tensor::scalar(*force_gate));
  } else {
    out.p_copy = ad::sigmoid(ad::add(ad::dot(bm.copy_w, feat), bm.copy_b));
  }

  const int ext_size = enc.ext.size();
  ad::Value gen_part = ad::pad_zeros(ad::smul(ad::affine(out.p_copy, -1.0, 1.0), out.p_vocab), ext_size);
  ad::Value copy_part = ad::scatter_sum(ad::smul(out.p_copy, out.alpha), enc.ext.premise_ext_ids, ext_size);
  out.dist = ad::add(gen_part, copy_part);
  return out;
}

ad::Value score_decoded_on_tape(const BoundModel& bm, const Vocabulary& vocab, const EncodedPair& enc,
                                std::span<const std::string> decoded, int label) {
  if (decoded.empty()) throw std::invalid_argument("score: decoded sequence is empty");
  if (label < 0 || label >= vocab.n_labels()) {
    throw std::invalid_argument("score: label " + std::to_string(label) + " outside the label set");
  }
  ad::Tape& tape = *bm.tape;
  const int d = tape.val(bm.decoder.b_i).dim(0);
  ad::Value label_emb = ad::row(bm.label_embeddings, label);
  ad::Value h = tape.constant(ad::Tensor({d}));
  ad::Value c = h;

  std::vector<int> targets;
  targets.reserve(decoded.size() + 1);
  for (const std::string& tok : decoded) targets.push_back(enc.ext.target_id(tok));
  targets.push_back(Vocabulary::kEos);

  ad::Value total;
  int prev = vocab.bos_id(label);
  for (size_t t = 0; t < targets.size(); ++t) {
    StepValues step = step_on_tape(bm, enc, label_emb, prev, h, c, std::nullopt);
    h = step.h;
    c = step.c;
    ad::Value term = ad::log_clamped(ad::pick(step.dist, targets[t]), kProbFloor);
    total = t == 0 ? term : ad::add(total, term);
    if (t < decoded.size()) prev = vocab.id_or_unk(decoded[t]);
  }
  return total;
}

}  // namespace

ad::Value score_sequence_on_tape(const BoundModel& bound, const Vocabulary& vocab,
                                 std::span<const std::string> conditioned,
                                 std::span<const std::string> decoded, int label) {
  EncodedPair enc = encode_on_tape(bound, vocab, conditioned);
  return score_decoded_on_tape(bound, vocab, enc, decoded, label);
}

std::vector<ad::Value> score_all_labels_on_tape(const BoundModel& bound, const Vocabulary& vocab,
                                                std::span<const std::string> conditioned,
                                                std::span<const std::string> decoded) {
  EncodedPair enc = encode_on_tape(bound, vocab, conditioned);
  std::vector<ad::Value> scores;
  scores.reserve(static_cast<size_t>(vocab.n_labels()));
  for (int y = 0; y < vocab.n_labels(); ++y) {
    scores.push_back(score_decoded_on_tape(bound, vocab, enc, decoded, y));
  }
  return scores;
}

EncoderStates encode(const ModelParams& params, const Vocabulary& vocab,
                     std::span<const std::string> premise) {
  ad::Tape tape;
  BoundModel bm = bind_model(tape, params, false);
  EncodedPair enc = encode_on_tape(bm, vocab, premise);
  EncoderStates out;
  out.states.reserve(enc.states.size());
  for (ad::Value v : enc.states) out.states.push_back(tape.val(v));
  return out;
}

std::pair<DecoderStep, std::pair<ad::Tensor, ad::Tensor>> decode_step(
    const ModelParams& params, const Vocabulary& vocab, const ExtendedVocab& ext,
    const EncoderStates& enc, int prev_token_id, const ad::Tensor& h_prev, const ad::Tensor& c_prev,
    int label) {
  if (label < 0 || label >= vocab.n_labels()) {
    throw std::invalid_argument("decode_step: label " + std::to_string(label) + " outside the label set");
  }
  if (enc.states.size() != ext.premise_ext_ids.size()) {
    throw std::invalid_argument("decode_step: encoder states and extended vocabulary describe different premises");
  }
  if (prev_token_id < 0 || prev_token_id >= ext.size()) {
    throw std::invalid_argument("decode_step: previous token id " + std::to_string(prev_token_id) +
                                " outside the extended vocabulary");
  }
  ad::Tape tape;
  BoundModel bm = bind_model(tape, params, false);

  EncodedPair pair;
  pair.ext = ext;
  pair.states.reserve(enc.states.size());
  for (const ad::Tensor& s : enc.states) pair.states.push_back(tape.constant(s));
  pair.enc_matrix = ad::stack_rows(pair.states);

  const int d = params.hidden_dim();
  ad::Value h = tape.constant(h_prev.numel() > 0 ? h_prev : ad::Tensor({d}));
  ad::Value c = tape.constant(c_prev.numel() > 0 ? c_prev : ad::Tensor({d}));
  ad::Value label_emb = ad::row(bm.label_embeddings, label);

  StepValues sv = step_on_tape(bm, pair, label_emb, prev_token_id, h, c, std::nullopt);
  DecoderStep step;
  step.h = tape.val(sv.h);
  step.c = tape.val(sv.c);
  step.context = tape.val(sv.context);
  step.alpha = tape.val(sv.alpha);
  step.p_copy = tape.val(sv.p_copy).item();
  step.p_vocab = tape.val(sv.p_vocab);
  step.dist = tape.val(sv.dist);
  return {step, {step.h, step.c}};
}

double score_hypothesis(const ModelParams& params, const Vocabulary& vocab,
                        std::span<const std::string> premise, std::span<const std::string> hypothesis,
                        int label) {
  ad::Tape tape;
  BoundModel bm = bind_model(tape, params, false);
  return tape.val(score_sequence_on_tape(bm, vocab, premise, hypothesis, label)).item();
}

double score_reverse(const ModelParams& params, const Vocabulary& vocab,
                     std::span<const std::string> premise, std::span<const std::string> hypothesis,
                     int label) {
  return score_hypothesis(params, vocab, hypothesis, premise, label);
}

double score_direction(const ModelParams& params, const Vocabulary& vocab, const Instance& inst,
                       int label, Direction dir) {
  return dir == Direction::forward ? score_hypothesis(params, vocab, inst.premise, inst.hypothesis, label)
                                   : score_reverse(params, vocab, inst.premise, inst.hypothesis, label);
}

std::pair<int, LabelScores> predict(const ModelParams& params, const Vocabulary& vocab,
                                    std::span<const std::string> premise,
                                    std::span<const std::string> hypothesis, Direction dir) {
  ad::Tape tape;
  BoundModel bm = bind_model(tape, params, false);
  std::span<const std::string> conditioned = dir == Direction::forward ? premise : hypothesis;
  std::span<const std::string> decoded = dir == Direction::forward ? hypothesis : premise;
  std::vector<ad::Value> values = score_all_labels_on_tape(bm, vocab, conditioned, decoded);
  LabelScores scores;
  scores.reserve(values.size());
  for (ad::Value v : values) scores.push_back(tape.val(v).item());
  int best = 0;
  for (int y = 1; y < static_cast<int>(scores.size()); ++y) {
    if (scores[static_cast<size_t>(y)] > scores[static_cast<size_t>(best)]) best = y;
  }
  return {best, scores};
}

std::vector<std::string> generate_greedy(const ModelParams& params, const Vocabulary& vocab,
                                         std::span<const std::string> premise, int label, int max_len,
                                         std::optional<double> force_p_copy) {
  if (max_len < 1) throw std::invalid_argument("generate_greedy: max_len must be >= 1");
  if (label < 0 || label >= vocab.n_labels()) {
    throw std::invalid_argument("generate_greedy: label " + std::to_string(label) + " outside the label set");
  }
  ad::Tape tape;
  BoundModel bm = bind_model(tape, params, false);
  EncodedPair enc = encode_on_tape(bm, vocab, premise);
  ad::Value label_emb = ad::row(bm.label_embeddings, label);
  const int d = params.hidden_dim();
  ad::Value h = tape.constant(ad::Tensor({d}));
  ad::Value c = h;

  std::vector<std::string> out;
  int prev = vocab.bos_id(label);
  for (int t = 0; t < max_len; ++t) {
    StepValues sv = step_on_tape(bm, enc, label_emb, prev, h, c, force_p_copy);
    h = sv.h;
    c = sv.c;
    const ad::Tensor& dist = tape.val(sv.dist);
    int arg = 0;
    for (int i = 1; i < dist.dim(0); ++i) {
      if (dist.at(i) > dist.at(arg)) arg = i;
    }
    if (arg == Vocabulary::kEos) break;
    out.push_back(enc.ext.token(arg));
    prev = arg;
  }
  return out;
}

}  // namespace gennli
