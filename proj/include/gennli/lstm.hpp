#pragma once

#include <string>
#include <utility>

#include "gennli/tape.hpp"

namespace gennli::ad {

/// Learnable tensors of one LSTM cell: per-gate input and recurrent weights
/// plus biases. Gate order throughout is input, forget, candidate, output.
struct LstmCellParams {
  Tensor W_xi, W_hi, b_i;
  Tensor W_xf, W_hf, b_f;
  Tensor W_xg, W_hg, b_g;
  Tensor W_xo, W_ho, b_o;

  int input_dim() const { return W_xi.cols(); }
  int hidden_dim() const { return W_xi.rows(); }

  template <typename Fn>
  void for_each(const std::string& prefix, Fn&& fn) {
    fn(prefix + ".W_xi", W_xi); fn(prefix + ".W_hi", W_hi); fn(prefix + ".b_i", b_i);
    fn(prefix + ".W_xf", W_xf); fn(prefix + ".W_hf", W_hf); fn(prefix + ".b_f", b_f);
    fn(prefix + ".W_xg", W_xg); fn(prefix + ".W_hg", W_hg); fn(prefix + ".b_g", b_g);
    fn(prefix + ".W_xo", W_xo); fn(prefix + ".W_ho", W_ho); fn(prefix + ".b_o", b_o);
  }
  template <typename Fn>
  void for_each(const std::string& prefix, Fn&& fn) const {
    const_cast<LstmCellParams*>(this)->for_each(prefix, [&fn](const std::string& n, Tensor& t) {
      fn(n, static_cast<const Tensor&>(t));
    });
  }
};

/// Tape-bound view of an LstmCellParams.
struct LstmCell {
  Value W_xi, W_hi, b_i;
  Value W_xf, W_hf, b_f;
  Value W_xg, W_hg, b_g;
  Value W_xo, W_ho, b_o;
};

/// Binds every cell tensor onto the tape, as parameters named
/// "<prefix>.W_xi" etc. when trainable, or as constants otherwise.
LstmCell bind_lstm(Tape& tape, const LstmCellParams& p, const std::string& prefix, bool trainable);

/// One gated recurrence step:
///   i = sigmoid(W_xi x + W_hi h + b_i), f/o likewise, g = tanh(...),
///   c = f (*) c_prev + i (*) g,  h = o (*) tanh(c).
std::pair<Value, Value> lstm_cell(const LstmCell& cell, Value x, Value h_prev, Value c_prev);

}  // namespace gennli::ad
