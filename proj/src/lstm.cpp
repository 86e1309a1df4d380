#include "gennli/lstm.hpp"

namespace gennli::ad {

LstmCell bind_lstm(Tape& tape, const LstmCellParams& p, const std::string& prefix, bool trainable) {
  auto bind = [&](const std::string& name, const Tensor& t) {
    return trainable ? tape.param(prefix + "." + name, t) : tape.constant(t);
  };
  LstmCell c;
  c.W_xi = bind("W_xi", p.W_xi); c.W_hi = bind("W_hi", p.W_hi); c.b_i = bind("b_i", p.b_i);
  c.W_xf = bind("W_xf", p.W_xf); c.W_hf = bind("W_hf", p.W_hf); c.b_f = bind("b_f", p.b_f);
  c.W_xg = bind("W_xg", p.W_xg); c.W_hg = bind("W_hg", p.W_hg); c.b_g = bind("b_g", p.b_g);
  c.W_xo = bind("W_xo", p.W_xo); c.W_ho = bind("W_ho", p.W_ho); c.b_o = bind("b_o", p.b_o);
  return c;
}

std::pair<Value, Value> lstm_cell(const LstmCell& cell, Value x, Value h_prev, Value c_prev) {
  auto gate = [&](Value W_x, Value W_h, Value b) { return add(add(matvec(W_x, x), matvec(W_h, h_prev)), b); };
  Value i = sigmoid(gate(cell.W_xi, cell.W_hi, cell.b_i));
  Value f = sigmoid(gate(cell.W_xf, cell.W_hf, cell.b_f));
  Value g = tanh(gate(cell.W_xg, cell.W_hg, cell.b_g));
  Value o = sigmoid(gate(cell.W_xo, cell.W_ho, cell.b_o));
  Value c = add(mul(f, c_prev), mul(i, g));
  Value h = mul(o, tanh(c));
  return {h, c};
}

}  // namespace gennli::ad
