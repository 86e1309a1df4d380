#include "gennli/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gennli::ad {

struct TapeOps {
  static Tape& tape_of(Value v, const char* op) {
    if (v.tape == nullptr || v.id < 0) {
      throw std::invalid_argument(std::string(op) + ": operand is not bound to a tape");
    }
    return *v.tape;
  }
  static void same_tape(Tape& t, Value v, const char* op) {
    if (v.tape != &t) throw std::invalid_argument(std::string(op) + ": operands belong to different tapes");
    t.check(v);
  }
  static Value emit(Tape& t, Tensor value, bool needs_grad, std::function<void(Tape&)> backprop) {
    return t.emit(std::move(value), needs_grad, std::move(backprop));
  }
  static const Tensor& val(Tape& t, int id) { return t.node_val(id); }
  static Tensor& grad(Tape& t, int id) { return t.grad(id); }
  static bool needs(Tape& t, int id) { return t.nodes_[static_cast<size_t>(id)].needs_grad; }
  static int next_id(Tape& t) { return t.size(); }
};

namespace {

using Ops = TapeOps;

void require_rank(const Tensor& t, int rank, const char* op, const char* operand) {
  if (t.ndim() != rank) {
    throw std::invalid_argument(std::string(op) + ": " + operand + " must have rank " + std::to_string(rank) +
                                ", got shape " + shape_str(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  }
}

void require_finite(const Tensor& t, const char* op) {
  if (!t.all_finite()) throw std::invalid_argument(std::string(op) + ": input contains non-finite values");
}

}  // namespace

Value Tape::emit(Tensor value, bool needs_grad, std::function<void(Tape&)> backprop) {
  if (consumed_) throw std::logic_error("tape already consumed by backward(); start a new forward pass");
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return Value{this, static_cast<int>(nodes_.size()) - 1};
}

int Tape::check(Value v) const {
  if (v.tape != this || v.id < 0 || v.id >= size()) throw std::invalid_argument("value does not belong to this tape");
  return v.id;
}

Value Tape::constant(Tensor t) { return emit(std::move(t), false, nullptr); }

Value Tape::param(const std::string& name, const Tensor& t) {
  for (const auto& [n, id] : params_) {
    if (n == name) throw std::invalid_argument("parameter '" + name + "' bound twice on the same tape");
  }
  Value v = emit(t, true, nullptr);
  params_.emplace_back(name, v.id);
  return v;
}

const Tensor& Tape::val(Value v) const { return nodes_[static_cast<size_t>(check(v))].value; }

Gradients Tape::backward(Value seed, const Tensor* seed_grad) {
  if (consumed_) throw std::logic_error("tape already consumed by backward(); record a fresh forward pass");
  int seed_id = check(seed);
  const Tensor& out = nodes_[static_cast<size_t>(seed_id)].value;
  Tensor seed_tensor;
  if (seed_grad != nullptr) {
    if (!seed_grad->same_shape(out)) {
      throw std::invalid_argument("seed gradient shape " + shape_str(seed_grad->shape()) +
                                  " does not match output shape " + shape_str(out.shape()));
    }
    seed_tensor = *seed_grad;
  } else {
    if (out.numel() != 1) {
      throw std::invalid_argument("backward() without an explicit seed gradient requires a scalar output, got " +
                                  shape_str(out.shape()));
    }
    seed_tensor = Tensor::scalar(1.0);
  }
  consumed_ = true;

  if (nodes_[static_cast<size_t>(seed_id)].needs_grad) {
    for (int i = 0; i <= seed_id; ++i) {
      Node& n = nodes_[static_cast<size_t>(i)];
      if (n.needs_grad) n.grad = Tensor::zeros(n.value.shape());
    }
    nodes_[static_cast<size_t>(seed_id)].grad = std::move(seed_tensor);
    for (int i = seed_id; i >= 0; --i) {
      Node& n = nodes_[static_cast<size_t>(i)];
      if (n.needs_grad && n.backprop) n.backprop(*this);
    }
  }

  Gradients out_grads;
  for (const auto& [name, id] : params_) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.grad.numel() > 0) {
      out_grads[name] = n.grad;
    } else {
      out_grads[name] = Tensor::zeros(n.value.shape());
    }
  }
  return out_grads;
}

// ---- primitives -----------------------------------------------------------

Value add(Value a, Value b) {
  Tape& t = Ops::tape_of(a, "add");
  Ops::same_tape(t, b, "add");
  const Tensor& av = Ops::val(t, a.id);
  const Tensor& bv = Ops::val(t, b.id);
  require_same_shape(av, bv, "add");
  Tensor out(av.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out.data()[i] = av.data()[i] + bv.data()[i];
  bool ng = Ops::needs(t, a.id) || Ops::needs(t, b.id);
  int out_id = Ops::next_id(t);
  std::function<void(Tape&)> bp;
  if (ng) {
    bp = [out_id, ai = a.id, bi = b.id](Tape& tp) {
      const Tensor& g = Ops::grad(tp, out_id);
      if (Ops::needs(tp, ai)) {
        Tensor& ga = Ops::grad(tp, ai);
        for (int64_t i = 0; i < g.numel(); ++i) ga.data()[i] += g.data()[i];
      }
      if (Ops::needs(tp, bi)) {
        Tensor& gb = Ops::grad(tp, bi);
        for (int64_t i = 0; i < g.numel(); ++i) gb.data()[i] += g.data()[i];
      }
    };
  }
  return Ops::emit(t, std::move(out), ng, std::move(bp));
}

Value mul(Value a, Value b) {
  Tape& t = Ops::tape_of(a, "mul");
  Ops::same_tape(t, b, "mul");
  const Tensor& av = Ops::val(t, a.id);
  const Tensor& bv = Ops::val(t, b.id);
  require_same_shape(av, bv, "mul");
  Tensor out(av.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out.data()[i] = av.data()[i] * bv.data()[i];
  bool ng = Ops::needs(t, a.id) || Ops::needs(t, b.id);
  int out_id = Ops::next_id(t);
  std::function<void(Tape&)> bp;
  if (ng) {
    bp = [out_id, ai = a.id, bi = b.id](Tape& tp) {
      const Tensor& g = Ops::grad(tp, out_id);
      const Tensor& av2 = Ops::val(tp, ai);
      const Tensor& bv2 = Ops::val(tp, bi);
      if (Ops::needs(tp, ai)) {
        Tensor& ga = Ops::grad(tp, ai);
        for (int64_t i = 0; i < g.numel(); ++i) ga.data()[i] += g.data()[i] * bv2.data()[i];
      }
      if (Ops::needs(tp, bi)) {
        Tensor& gb = Ops::grad(tp, bi);
        for (int64_t i = 0; i < g.numel(); ++i) gb.data()[i] += g.data()[i] * av2.data()[i];
      }
    };
  }
  return Ops::emit(t, std::move(out), ng, std::move(bp));
}

Value smul(Value s, Value x) {
  Tape& t = Ops::tape_of(s, "smul");
  Ops::same_tape(t, x, "smul");
  const Tensor& sv = Ops::val(t, s.id);
  const Tensor& xv = Ops::val(t, x.id);
  if (sv.numel() != 1) throw std::invalid_argument("smul: scale must be a scalar, got " + shape_str(sv.shape()));
  Tensor out(xv.shape());
  const double sc = sv.data()[0];
  for (int64_t i = 0; i < out.numel(); ++i) out.data()[i] = sc * xv.data()[i];
  bool ng = Ops::needs(t, s.id) || Ops::needs(t, x.id);
  int out_id = Ops::next_id(t);
  std::function<void(Tape&)> bp;
  if (ng) {
    bp = [out_id, si = s.id, xi = x.id](Tape& tp) {
      const Tensor& g = Ops::grad(tp, out_id);
      const Tensor& sv2 = Ops::val(tp, si);
      const Tensor& xv2 = Ops::val(tp, xi);
      if (Ops::needs(tp, si)) {
        double acc = 0.0;
        for (int64_t i = 0; i < g.numel(); ++i) acc += g.data()[i] * xv2.data()[i];
        Ops::grad(tp, si).data()[0] += acc;
      }
      if (Ops::needs(tp, xi)) {
        Tensor& gx = Ops::grad(tp, xi);
        const double sc2 = sv2.data()[0];
        for (int64_t i = 0; i < g.numel(); ++i) gx.data()[i] += sc2 * g.data()[i];
      }
    };
  }
  return Ops::emit(t, std::move(out), ng, std::move(bp));
}

Value affine(Value x, double a, double b) {
  Tape& t = Ops::tape_of(x, "affine");
  const Tensor& xv = Ops::val(t, x.id);
  Tensor out(xv.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out.data()[i] = a * xv.data()[i] + b;
  bool ng = Ops::needs(t, x.id);
  int out_id = Ops::next_id(t);
  std::function<void(Tape&)> bp;
  if (ng) {
    bp = [out_id, xi = x.id, a](Tape& tp) {
      const Tensor& g = Ops::grad(tp, out_id);
      Tensor& gx = Ops::grad(tp, xi);
      for (int64_t i = 0; i < g.numel(); ++i) gx.data()[i] += a * g.data()[i];
    };
  }
  return Ops::emit(t, std::move(out), ng, std::move(bp));
}

Value matmul(Value a, Value b) {
  Tape& t = Ops::tape_of(a, "matmul");
  Ops::same_tape(t, b, "matmul");
  const Tensor& av = Ops::val(t, a.id);
  const Tensor& bv = Ops::val(t, b.id);
  require_rank(av, 2, "matmul", "lhs");
  require_rank(bv, 2, "matmul", "rhs");
  if (av.cols() != bv.rows()) {
    throw std::invalid_argument("matmul: inner dimensions differ, " + shape_str(av.shape()) + " x " +
                                shape_str(bv.shape()));
  }
  const int m = av.rows(), k = av.cols(), n = bv.cols();
  Tensor out({m, n});
  for (int i = 0; i < m; ++i) {
    for (int p = 0; p < k; ++p) {
      const double aip = av.at(i, p);
      if (aip == 0.0) continue;
      for (int j = 0; j < n; ++j) out.at(i, j) += aip * bv.at(p, j);
    }
  }
  bool ng = Ops::needs(t, a.id) || Ops::needs(t, b.id);
  int out_id = Ops::next_id(t);
  std::function<void(Tape&)> bp;
  if (ng) {
    bp = [out_id, ai = a.id, bi = b.id, m, k, n](Tape& tp) {
      const Tensor& g = Ops::grad(tp, out_id);
      const Tensor& av2 = Ops::val(tp, ai);
      const Tensor& bv2 = Ops::val(tp, bi);
      if (Ops::needs(tp, ai)) {
        Tensor& ga = Ops::grad(tp, ai);
        for (int i = 0; i < m; ++i)
          for (int p = 0; p < k; ++p) {
            double acc = 0.0;
            for (int j = 0; j < n; ++j) acc += g.at(i, j) * bv2.at(p, j);
            ga.at(i, p) += acc;
          }
      }
      if (Ops::needs(tp, bi)) {
        Tensor& gb = Ops::grad(tp, bi);
        for (int p = 0; p < k; ++p)
          for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int i = 0; i < m; ++i) acc += av2.at(i, p) * g.at(i, j);
            gb.at(p, j) += acc;
          }
      }
    };
  }
  return Ops::emit(t, std::move(out), ng, std::move(bp));
}

Value matvec(Value w, Value x) {
  Tape& t = Ops::tape_of(w, "matvec");
  Ops::same_tape(t, x, "matvec");
  const Tensor& wv = Ops::val(t, w.id);
  const Tensor& xv = Ops::val(t, x.id);
  require_rank(wv, 2, "matvec", "matrix");
  require_rank(xv, 1, "matvec", "vector");
  if (wv.cols() != xv.dim(0)) {
    throw std::invalid_argument("matvec: dimensions differ, " + shape_str(wv.shape()) + " x " +
                                shape_str(xv.shape()));
  }
  const int m = wv.rows(), k = wv.cols();
  Tensor out({m});
  for (int i = 0; i < m; ++i) {
    double acc = 0.0;
    for (int p = 0; p < k; ++p) acc += wv.at(i, p) * xv.at(p);
    out.at(i) = acc;
  }
  bool ng = Ops::needs(t, w.id) || Ops::needs(t, x.id);
  int out_id = Ops::next_id(t);
  std::function<void(Tape&)> bp;
  if (ng) {
    bp = [out_id, wi = w.id, xi = x.id, m, k](Tape& tp) {
      const Tensor& g = Ops::grad(tp, out_id);
      const Tensor& wv2 = Ops::val(tp, wi);
      const Tensor& xv2 = Ops::val(tp, xi);
      if (Ops::needs(tp, wi)) {
        Tensor& gw = Ops::grad(tp, wi);
        for (int i = 0; i < m; ++i) {
          const double gi = g.at(i);
          if (gi == 0.0) continue;
          for (int p = 0; p < k; ++p) gw.at(i, p) += gi * xv2.at(p);
        }
      }
      if (Ops::needs(tp, xi)) {
        Tensor& gx = Ops::grad(tp, xi);
        for (int i = 0; i < m; ++i) {
          const double gi = g.at(i);
          if (gi == 0.0) continue;
          for (int p = 0; p < k; ++p) gx.at(p) += wv2.at(i, p) * gi;
        }
      }
    };
  }
  return Ops::emit(t, std::move(out), ng, std::move(bp));
}

Value vecmat(Value x, Value m) {
  Tape& t = Ops::tape_of(x, "vecmat");
  Ops::same_tape(t, m, "vecmat");
  const Tensor& xv = Ops::val(t, x.id);
  const Tensor& mv = Ops::val(t, m.id);
  require_rank(xv, 1, "vecmat", "vector");
  require_rank(mv, 2, "vecmat", "matrix");
  if (xv.dim(0) != mv.rows()) {
    throw std::invalid_argument("vecmat: dimensions differ, " + shape_str(xv.shape()) + " x " +
                                shape_str(mv.shape()));
  }
  const int k = mv.rows(), n = mv.cols();
  Tensor out({n});
  for (int p = 0; p < k; ++p) {
    const double xp = xv.at(p);
    if (xp == 0.0) continue;
    for (int j = 0; j < n; ++j) out.at(j) += xp * mv.at(p, j);
  }
  bool ng = Ops::needs(t, x.id) || Ops::needs(t, m.id);
  int out_id = Ops::next_id(t);
  std::function<void(Tape&)> bp;
  if (ng) {
    bp = [out_id, xi = x.id, mi = m.id, k, n](Tape& tp) {
      const Tensor& g = Ops::grad(tp, out_id);
      const Tensor& xv2 = Ops::val(tp, xi);
      const Tensor& mv2 = Ops::val(tp, mi);
      if (Ops::needs(tp, xi)) {
        Tensor& gx = Ops::grad(tp, xi);
        for (int p = 0; p < k; ++p) {
          double acc = 0.0;
          for (int j = 0; j < n; ++j) acc += mv2.at(p, j) * g.at(j);
          gx.at(p) += acc;
        }
      }
      if (Ops::needs(tp, mi)) {
        Tensor& gm = Ops::grad(tp, mi);
        for (int p = 0; p < k; ++p) {
          const double xp = xv2.at(p);
          if (xp == 0.0) continue;
          for (int j = 0; j < n; ++j) gm.at(p, j) += xp * g.at(j);
        }
      }
    };
  }
  return Ops::emit(t, std::move(out), ng, std::move(bp));
}

Value dot(Value a, Value b) {
  Tape& t = Ops::tape_of(a, "dot");
  Ops::same_tape(t, b, "dot");
  const Tensor& av = Ops::val(t, a.id);
  const Tensor& bv = Ops::val(t, b.id);
  require_rank(av, 1, "dot", "lhs");
  require_same_shape(av, bv, "dot");
  double acc = 0.0;
  for (int64_t i = 0; i < av.numel(); ++i) acc += av.data()[i] * bv.data()[i];
  bool ng = Ops::needs(t, a.id) || Ops::needs(t, b.id);
  int out_id = Ops::next_id(t);
  std::function<void(Tape&)> bp;
  if (ng) {
    bp = [out_id, ai = a.id, bi = b.id](Tape& tp) {
      const double g0 = Ops::grad(tp, out_id).data()[0];
      const Tensor& av2 = Ops::val(tp, ai);
      const Tensor& bv2 = Ops::val(tp, bi);
      if (Ops::needs(tp, ai)) {
        Tensor& ga = Ops::grad(tp, ai);
        for (int64_t i = 0; i < av2.numel(); ++i) ga.data()[i] += g0 * bv2.data()[i];
      }
      if (Ops::needs(tp, bi)) {
        Tensor& gb = Ops::grad(tp, bi);
        for (int64_t i = 0; i < bv2.numel(); ++i) gb.data()[i] += g0 * av2.data()[i];
      }
    };
  }
  return Ops::emit(t, Tensor::scalar(acc), ng, std::move(bp));
}

Value concat(std::span<const Value> parts) {
  if (parts.empty()) throw std::invalid_argument("concat: needs at least one operand");
  Tape& t = Ops::tape_of(parts[0], "concat");
  int total = 0;
  bool ng = false;
  for (const Value& p : parts) {
    Ops::same_tape(t, p, "concat");
    const Tensor& pv = Ops::val(t, p.id);
    require_rank(pv, 1, "concat", "operand");
    total += pv.dim(0);
    ng = ng || Ops::needs(t, p.id);
  }
  Tensor out({total});
  std::vector<std::pair<int, int>> spans;  // (id, offset)
  spans.reserve(parts.size());
  int off = 0;
  for (const Value& p : parts) {
    const Tensor& pv = Ops::val(t, p.id);
    std::copy(pv.data().begin(), pv.data().end(), out.data().begin() + off);
    spans.emplace_back(p.id, off);
    off += pv.dim(0);
  }
  int out_id = Ops::next_id(t);
  std::function<void(Tape&)> bp;
  if (ng) {
    bp = [out_id, spans](Tape& tp) {
      const Tensor& g = Ops::grad(tp, out_id);
      for (const auto& [pid, poff] : spans) {
        if (!Ops::needs(tp, pid)) continue;
        Tensor& gp = Ops::grad(tp, pid);
        for (int64_t i = 0; i < gp.numel(); ++i) gp.data()[i] += g.data()[poff + i];
      }
    };
  }
  return Ops::emit(t, std::move(out), ng, std::move(bp));
}

Value stack_rows(std::span<const Value> rows) {
  if (rows.empty()) throw std::invalid_argument("stack_rows: needs at least one row");
  Tape& t = Ops::tape_of(rows[0], "stack_rows");
  const int d = Ops::val(t, rows[0].id).dim(0);
  bool ng = false;
  std::vector<int> ids;
  ids.reserve(rows.size());
  for (const Value& r : rows) {
    Ops::same_tape(t, r, "stack_rows");
    const Tensor& rv = Ops::val(t, r.id);
    require_rank(rv, 1, "stack_rows", "row");
    if (rv.dim(0) != d) {
      throw std::invalid_argument("stack_rows: row shapes differ, " + shape_str({d}) + " vs " +
                                  shape_str(rv.shape()));
    }
    ng = ng || Ops::needs(t, r.id);
    ids.push_back(r.id);
  }
  const int n = static_cast<int>(rows.size());
  Tensor out({n, d});
  for (int i = 0; i < n; ++i) {
    const Tensor& rv = Ops::val(t, ids[static_cast<size_t>(i)]);
    std::copy(rv.data().begin(), rv.data().end(), out.data().begin() + static_cast<int64_t>(i) * d);
  }
  int out_id = Ops::next_id(t);
  std::function<void(Tape&)> bp;
  if (ng) {
    bp = [out_id, ids, d](Tape& tp) {
      const Tensor& g = Ops::grad(tp, out_id);
      for (size_t i = 0; i < ids.size(); ++i) {
        if (!Ops::needs(tp, ids[i])) continue;
        Tensor& gr = Ops::grad(tp, ids[i]);
        for (int j = 0; j < d; ++j) gr.at(j) += g.at(static_cast<int>(i), j);
      }
    };
  }
  return Ops::emit(t, std::move(out), ng, std::move(bp));
}

Value tanh(Value x) {
  Tape& t = Ops::tape_of(x, "tanh");
  const Tensor& xv = Ops::val(t, x.id);
  Tensor out(xv.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out.data()[i] = std::tanh(xv.data()[i]);
  bool ng = Ops::needs(t, x.id);
  int out_id = Ops::next_id(t);
  std::function<void(Tape&)> bp;
  if (ng) {
    bp = [out_id, xi = x.id](Tape& tp) {
      const Tensor& g = Ops::grad(tp, out_id);
      const Tensor& y = Ops::val(tp, out_id);
      Tensor& gx = Ops::grad(tp, xi);
      for (int64_t i = 0; i < g.numel(); ++i) gx.data()[i] += g.data()[i] * (1.0 - y.data()[i] * y.data()[i]);
    };
  }
  return Ops::emit(t, std::move(out), ng, std::move(bp));
}

Value sigmoid(Value x) {
  Tape& t = Ops::tape_of(x, "sigmoid");
  const Tensor& xv = Ops::val(t, x.id);
  Tensor out(xv.shape());
  for (int64_t i = 0; i < out.numel(); ++i) {
    const double v = xv.data()[i];
    if (v >= 0.0) {
      out.data()[i] = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      out.data()[i] = e / (1.0 + e);
    }
  }
  bool ng = Ops::needs(t, x.id);
  int out_id = Ops::next_id(t);
  std::function<void(Tape&)> bp;
  if (ng) {
    bp = [out_id, xi = x.id](Tape& tp) {
      const Tensor& g = Ops::grad(tp, out_id);
      const Tensor& y = Ops::val(tp, out_id);
      Tensor& gx = Ops::grad(tp, xi);
      for (int64_t i = 0; i < g.numel(); ++i) gx.data()[i] += g.data()[i] * y.data()[i] * (1.0 - y.data()[i]);
    };
  }
  return Ops::emit(t, std::move(out), ng, std::move(bp));
}

Value softmax(Value x) {
  Tape& t = Ops::tape_of(x, "softmax");
  const Tensor& xv = Ops::val(t, x.id);
  require_rank(xv, 1, "softmax", "input");
  require_finite(xv, "softmax");
  const int n = xv.dim(0);
  double m = xv.at(0);
  for (int i = 1; i < n; ++i) m = std::max(m, xv.at(i));
  Tensor out({n});
  double z = 0.0;
  for (int i = 0; i < n; ++i) {
    out.at(i) = std::exp(xv.at(i) - m);
    z += out.at(i);
  }
  for (int i = 0; i < n; ++i) out.at(i) /= z;
  bool ng = Ops::needs(t, x.id);
  int out_id = Ops::next_id(t);
  std::function<void(Tape&)> bp;
  if (ng) {
    bp = [out_id, xi = x.id, n](Tape& tp) {
      const Tensor& g = Ops::grad(tp, out_id);
      const Tensor& y = Ops::val(tp, out_id);
      Tensor& gx = Ops::grad(tp, xi);
      double gy = 0.0;
      for (int i = 0; i < n; ++i) gy += g.at(i) * y.at(i);
      for (int i = 0; i < n; ++i) gx.at(i) += y.at(i) * (g.at(i) - gy);
    };
  }
  return Ops::emit(t, std::move(out), ng, std::move(bp));
}

Value log_sum_exp(Value x) {
  Tape& t = Ops::tape_of(x, "log_sum_exp");
  const Tensor& xv = Ops::val(t, x.id);
  require_rank(xv, 1, "log_sum_exp", "input");
  require_finite(xv, "log_sum_exp");
  const int n = xv.dim(0);
  double m = xv.at(0);
  for (int i = 1; i < n; ++i) m = std::max(m, xv.at(i));
  double z = 0.0;
  for (int i = 0; i < n; ++i) z += std::exp(xv.at(i) - m);
  const double lse = m + std::log(z);
  bool ng = Ops::needs(t, x.id);
  int out_id = Ops::next_id(t);
  std::function<void(Tape&)> bp;
  if (ng) {
    bp = [out_id, xi = x.id, n](Tape& tp) {
      const double g0 = Ops::grad(tp, out_id).data()[0];
      const double out0 = Ops::val(tp, out_id).data()[0];
      const Tensor& xv2 = Ops::val(tp, xi);
      Tensor& gx = Ops::grad(tp, xi);
      for (int i = 0; i < n; ++i) gx.at(i) += g0 * std::exp(xv2.at(i) - out0);
    };
  }
  return Ops::emit(t, Tensor::scalar(lse), ng, std::move(bp));
}

Value row(Value m, int i) {
  Tape& t = Ops::tape_of(m, "row");
  const Tensor& mv = Ops::val(t, m.id);
  require_rank(mv, 2, "row", "matrix");
  if (i < 0 || i >= mv.rows()) {
    throw std::invalid_argument("row: index " + std::to_string(i) + " out of range for " + shape_str(mv.shape()));
  }
  const int c = mv.cols();
  Tensor out({c});
  for (int j = 0; j < c; ++j) out.at(j) = mv.at(i, j);
  bool ng = Ops::needs(t, m.id);
  int out_id = Ops::next_id(t);
  std::function<void(Tape&)> bp;
  if (ng) {
    bp = [out_id, mi = m.id, i, c](Tape& tp) {
      const Tensor& g = Ops::grad(tp, out_id);
      Tensor& gm = Ops::grad(tp, mi);
      for (int j = 0; j < c; ++j) gm.at(i, j) += g.at(j);
    };
  }
  return Ops::emit(t, std::move(out), ng, std::move(bp));
}

Value pick(Value x, int i) {
  Tape& t = Ops::tape_of(x, "pick");
  const Tensor& xv = Ops::val(t, x.id);
  require_rank(xv, 1, "pick", "input");
  if (i < 0 || i >= xv.dim(0)) {
    throw std::invalid_argument("pick: index " + std::to_string(i) + " out of range for " + shape_str(xv.shape()));
  }
  bool ng = Ops::needs(t, x.id);
  int out_id = Ops::next_id(t);
  std::function<void(Tape&)> bp;
  if (ng) {
    bp = [out_id, xi = x.id, i](Tape& tp) {
      Ops::grad(tp, xi).at(i) += Ops::grad(tp, out_id).data()[0];
    };
  }
  return Ops::emit(t, Tensor::scalar(xv.at(i)), ng, std::move(bp));
}

Value gather(Value x, std::vector<int> idx) {
  Tape& t = Ops::tape_of(x, "gather");
  const Tensor& xv = Ops::val(t, x.id);
  require_rank(xv, 1, "gather", "input");
  if (idx.empty()) throw std::invalid_argument("gather: empty index list");
  Tensor out({static_cast<int>(idx.size())});
  for (size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] < 0 || idx[k] >= xv.dim(0)) {
      throw std::invalid_argument("gather: index " + std::to_string(idx[k]) + " out of range for " +
                                  shape_str(xv.shape()));
    }
    out.at(static_cast<int>(k)) = xv.at(idx[k]);
  }
  bool ng = Ops::needs(t, x.id);
  int out_id = Ops::next_id(t);
  std::function<void(Tape&)> bp;
  if (ng) {
    bp = [out_id, xi = x.id, idx = std::move(idx)](Tape& tp) {
      const Tensor& g = Ops::grad(tp, out_id);
      Tensor& gx = Ops::grad(tp, xi);
      for (size_t k = 0; k < idx.size(); ++k) gx.at(idx[k]) += g.at(static_cast<int>(k));
    };
  }
  return Ops::emit(t, std::move(out), ng, std::move(bp));
}

Value scatter_sum(Value x, std::vector<int> idx, int size) {
  Tape& t = Ops::tape_of(x, "scatter_sum");
  const Tensor& xv = Ops::val(t, x.id);
  require_rank(xv, 1, "scatter_sum", "input");
  if (static_cast<int>(idx.size()) != xv.dim(0)) {
    throw std::invalid_argument("scatter_sum: index count " + std::to_string(idx.size()) +
                                " does not match input shape " + shape_str(xv.shape()));
  }
  Tensor out({size});
  for (size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] < 0 || idx[k] >= size) {
      throw std::invalid_argument("scatter_sum: index " + std::to_string(idx[k]) + " out of range for size " +
                                  std::to_string(size));
    }
    out.at(idx[k]) += xv.at(static_cast<int>(k));
  }
  bool ng = Ops::needs(t, x.id);
  int out_id = Ops::next_id(t);
  std::function<void(Tape&)> bp;
  if (ng) {
    bp = [out_id, xi = x.id, idx = std::move(idx)](Tape& tp) {
      const Tensor& g = Ops::grad(tp, out_id);
      Tensor& gx = Ops::grad(tp, xi);
      for (size_t k = 0; k < idx.size(); ++k) gx.at(static_cast<int>(k)) += g.at(idx[k]);
    };
  }
  return Ops::emit(t, std::move(out), ng, std::move(bp));
}

Value pad_zeros(Value x, int size) {
  Tape& t = Ops::tape_of(x, "pad_zeros");
  const Tensor& xv = Ops::val(t, x.id);
  require_rank(xv, 1, "pad_zeros", "input");
  const int n = xv.dim(0);
  if (size < n) {
    throw std::invalid_argument("pad_zeros: target size " + std::to_string(size) + " smaller than input " +
                                shape_str(xv.shape()));
  }
  Tensor out({size});
  std::copy(xv.data().begin(), xv.data().end(), out.data().begin());
  bool ng = Ops::needs(t, x.id);
  int out_id = Ops::next_id(t);
  std::function<void(Tape&)> bp;
  if (ng) {
    bp = [out_id, xi = x.id, n](Tape& tp) {
      const Tensor& g = Ops::grad(tp, out_id);
      Tensor& gx = Ops::grad(tp, xi);
      for (int i = 0; i < n; ++i) gx.at(i) += g.at(i);
    };
  }
  return Ops::emit(t, std::move(out), ng, std::move(bp));
}

Value vmax(Value x) {
  Tape& t = Ops::tape_of(x, "vmax");
  const Tensor& xv = Ops::val(t, x.id);
  require_rank(xv, 1, "vmax", "input");
  int am = 0;
  for (int i = 1; i < xv.dim(0); ++i) {
    if (xv.at(i) > xv.at(am)) am = i;
  }
  bool ng = Ops::needs(t, x.id);
  int out_id = Ops::next_id(t);
  std::function<void(Tape&)> bp;
  if (ng) {
    bp = [out_id, xi = x.id, am](Tape& tp) {
      Ops::grad(tp, xi).at(am) += Ops::grad(tp, out_id).data()[0];
    };
  }
  return Ops::emit(t, Tensor::scalar(xv.at(am)), ng, std::move(bp));
}

Value sum(Value x) {
  Tape& t = Ops::tape_of(x, "sum");
  const Tensor& xv = Ops::val(t, x.id);
  double acc = 0.0;
  for (double v : xv.data()) acc += v;
  bool ng = Ops::needs(t, x.id);
  int out_id = Ops::next_id(t);
  std::function<void(Tape&)> bp;
  if (ng) {
    bp = [out_id, xi = x.id](Tape& tp) {
      const double g0 = Ops::grad(tp, out_id).data()[0];
      Tensor& gx = Ops::grad(tp, xi);
      for (int64_t i = 0; i < gx.numel(); ++i) gx.data()[i] += g0;
    };
  }
  return Ops::emit(t, Tensor::scalar(acc), ng, std::move(bp));
}

Value log_clamped(Value x, double floor) {
  Tape& t = Ops::tape_of(x, "log_clamped");
  if (!(floor > 0.0)) throw std::invalid_argument("log_clamped: floor must be positive");
  const Tensor& xv = Ops::val(t, x.id);
  Tensor out(xv.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out.data()[i] = std::log(std::max(xv.data()[i], floor));
  bool ng = Ops::needs(t, x.id);
  int out_id = Ops::next_id(t);
  std::function<void(Tape&)> bp;
  if (ng) {
    bp = [out_id, xi = x.id, floor](Tape& tp) {
      const Tensor& g = Ops::grad(tp, out_id);
      const Tensor& xv2 = Ops::val(tp, xi);
      Tensor& gx = Ops::grad(tp, xi);
      for (int64_t i = 0; i < g.numel(); ++i) {
        if (xv2.data()[i] > floor) gx.data()[i] += g.data()[i] / xv2.data()[i];
      }
    };
  }
  return Ops::emit(t, std::move(out), ng, std::move(bp));
}

}  // namespace gennli::ad
