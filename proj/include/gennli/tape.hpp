#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "gennli/tensor.hpp"

namespace gennli::ad {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; only meaningful
/// while its tape is alive.
struct Value {
  Tape* tape = nullptr;
  int id = -1;
};

/// Per-parameter gradients, keyed by the name the parameter was bound with.
using Gradients = std::map<std::string, Tensor>;

/// Records a forward pass as an ordered list of primitive operations.
/// Creation order is topological order, so the backward sweep is a single
/// reverse walk. A tape is single-threaded and backward() may run once.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf with no gradient tracking.
  Value constant(Tensor t);
  /// Leaf tracked for gradients under `name`. The tensor is copied onto the
  /// tape, so later mutation of the caller's copy cannot desynchronize a
  /// recorded pass. Binding the same name twice is rejected.
  Value param(const std::string& name, const Tensor& t);

  const Tensor& val(Value v) const;
  int size() const { return static_cast<int>(nodes_.size()); }

  /// Reverse sweep from `seed`. Returns the gradient of the seeded scalar
  /// (or the vector-Jacobian product against `seed_grad`) for every bound
  /// parameter; parameters never touched by the pass get zero tensors.
  Gradients backward(Value seed, const Tensor* seed_grad = nullptr);

 private:
  friend struct TapeOps;

  struct Node {
    Tensor value;
    Tensor grad;
    bool needs_grad = false;
    std::function<void(Tape&)> backprop;
  };

  Value emit(Tensor value, bool needs_grad, std::function<void(Tape&)> backprop);
  Tensor& grad(int id) { return nodes_[static_cast<size_t>(id)].grad; }
  const Tensor& node_val(int id) const { return nodes_[static_cast<size_t>(id)].value; }
  int check(Value v) const;

  std::vector<Node> nodes_;
  std::vector<std::pair<std::string, int>> params_;
  bool consumed_ = false;
};

// ---- primitives -----------------------------------------------------------
// All operands must live on the same tape; shape mismatches throw
// std::invalid_argument with both shapes in the message.

Value add(Value a, Value b);                 // elementwise, same shape
Value mul(Value a, Value b);                 // elementwise, same shape
Value smul(Value s, Value x);                // scalar {1} times any shape
Value affine(Value x, double a, double b);   // a*x + b elementwise, constants
Value matmul(Value a, Value b);              // {m,k} x {k,n} -> {m,n}
Value matvec(Value w, Value x);              // {m,k} x {k} -> {m}
Value vecmat(Value x, Value m);              // {k} x {k,n} -> {n}
Value dot(Value a, Value b);                 // {k} . {k} -> {1}
Value concat(std::span<const Value> parts);  // rank-1 concat
Value stack_rows(std::span<const Value> rows);  // n rows of {d} -> {n,d}
Value tanh(Value x);
Value sigmoid(Value x);
Value softmax(Value x);       // rank-1, max-shifted; input must be finite
Value log_sum_exp(Value x);   // rank-1 -> {1}, max-shifted; input must be finite
Value row(Value m, int i);    // {r,c} -> {c} embedding-style row lookup
Value pick(Value x, int i);   // rank-1 -> {1}
Value gather(Value x, std::vector<int> idx);             // rank-1 -> {|idx|}
Value scatter_sum(Value x, std::vector<int> idx, int size);  // out[idx[i]] += x[i]
Value pad_zeros(Value x, int size);   // rank-1 -> {size}, prefix copy
Value vmax(Value x);   // rank-1 -> {1}; ties give the subgradient to the lowest index
Value sum(Value x);    // all-element sum -> {1}
Value log_clamped(Value x, double floor);  // log(max(x, floor)) elementwise

inline Value sub(Value a, Value b) { return add(a, affine(b, -1.0, 0.0)); }
inline Value neg(Value a) { return affine(a, -1.0, 0.0); }

}  // namespace gennli::ad
