#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "acumen/errors.hpp"

namespace acumen {

// One recorded arithmetic primitive. `a`/`b` index earlier nodes, `aux`
// carries a constant operand where one side of the op is not a tape value.
// Replaying the tape in order reproduces every `val` bit-for-bit; the
// reverse sweep visits nodes in exact reverse order.
enum class Op : std::uint8_t {
  kLeaf,   // independent input (e.g. a model parameter)
  kConst,  // constant promoted to a tape value
  kAdd,    // a + b
  kSub,    // a - b
  kMul,    // a * b
  kDiv,    // a / b
  kNeg,    // -a
  kAddC,   // a + aux
  kMulC,   // a * aux
  kRsubC,  // aux - a
  kTanh,
  kSqrt,   // derivative defined as 0 at the origin
  kSin,
  kCos,
};

struct TapeNode {
  std::int32_t a = -1;
  std::int32_t b = -1;
  Op op = Op::kConst;
  double aux = 0.0;
  double val = 0.0;
};

class Tape {
 public:
  void reset() { nodes_.clear(); }
  void reserve(std::size_t n) { nodes_.reserve(n); }
  std::size_t size() const { return nodes_.size(); }
  const TapeNode& node(std::int32_t i) const { return nodes_[static_cast<std::size_t>(i)]; }

  std::int32_t leaf(double v) { return push({-1, -1, Op::kLeaf, 0.0, v}); }
  std::int32_t constant(double v) { return push({-1, -1, Op::kConst, 0.0, v}); }

  std::int32_t push(TapeNode n) {
    nodes_.push_back(n);
    return static_cast<std::int32_t>(nodes_.size() - 1);
  }

  // Recompute every node value from its operands, in recording order.
  void replay() {
    for (auto& n : nodes_) {
      switch (n.op) {
        case Op::kLeaf:
        case Op::kConst:
          break;
        case Op::kAdd:  n.val = nodes_[n.a].val + nodes_[n.b].val; break;
        case Op::kSub:  n.val = nodes_[n.a].val - nodes_[n.b].val; break;
        case Op::kMul:  n.val = nodes_[n.a].val * nodes_[n.b].val; break;
        case Op::kDiv:  n.val = nodes_[n.a].val / nodes_[n.b].val; break;
        case Op::kNeg:  n.val = -nodes_[n.a].val; break;
        case Op::kAddC: n.val = nodes_[n.a].val + n.aux; break;
        case Op::kMulC: n.val = nodes_[n.a].val * n.aux; break;
        case Op::kRsubC: n.val = n.aux - nodes_[n.a].val; break;
        case Op::kTanh: n.val = std::tanh(nodes_[n.a].val); break;
        case Op::kSqrt: n.val = std::sqrt(nodes_[n.a].val); break;
        case Op::kSin:  n.val = std::sin(nodes_[n.a].val); break;
        case Op::kCos:  n.val = std::cos(nodes_[n.a].val); break;
      }
    }
  }

  // Adjoints of every node w.r.t. the scalar rooted at `output`. The
  // buffer is reused across calls on the same thread.
  const std::vector<double>& backward(std::int32_t output) const {
    static thread_local std::vector<double> adj;
    adj.assign(nodes_.size(), 0.0);
    adj[static_cast<std::size_t>(output)] = 1.0;
    for (std::int32_t i = static_cast<std::int32_t>(nodes_.size()) - 1; i >= 0; --i) {
      const TapeNode& n = nodes_[static_cast<std::size_t>(i)];
      const double g = adj[static_cast<std::size_t>(i)];
      if (g == 0.0) continue;
      switch (n.op) {
        case Op::kLeaf:
        case Op::kConst:
          break;
        case Op::kAdd:
          adj[n.a] += g;
          adj[n.b] += g;
          break;
        case Op::kSub:
          adj[n.a] += g;
          adj[n.b] -= g;
          break;
        case Op::kMul:
          adj[n.a] += g * nodes_[n.b].val;
          adj[n.b] += g * nodes_[n.a].val;
          break;
        case Op::kDiv: {
          const double inv_b = 1.0 / nodes_[n.b].val;
          adj[n.a] += g * inv_b;
          adj[n.b] -= g * n.val * inv_b;
          break;
        }
        case Op::kNeg:  adj[n.a] -= g; break;
        case Op::kAddC: adj[n.a] += g; break;
        case Op::kMulC: adj[n.a] += g * n.aux; break;
        case Op::kRsubC: adj[n.a] -= g; break;
        case Op::kTanh: adj[n.a] += g * (1.0 - n.val * n.val); break;
        case Op::kSqrt:
          // subgradient 0 at the origin keeps exact-fit losses finite
          if (n.val > 0.0) adj[n.a] += g * 0.5 / n.val;
          break;
        case Op::kSin:  adj[n.a] += g * std::cos(nodes_[n.a].val); break;
        case Op::kCos:  adj[n.a] -= g * std::sin(nodes_[n.a].val); break;
      }
    }
    return adj;
  }

  // Gradient w.r.t. the first `n_params` nodes (the registered leaves).
  // Throws GradientOverflowError naming the first non-finite entry.
  std::vector<double> gradient(std::int32_t output, std::size_t n_params) const {
    const std::vector<double>& adj = backward(output);
    std::vector<double> grad(adj.begin(), adj.begin() + static_cast<std::ptrdiff_t>(n_params));
    for (std::size_t i = 0; i < grad.size(); ++i) {
      if (!std::isfinite(grad[i])) throw GradientOverflowError(i);
    }
    return grad;
  }

 private:
  std::vector<TapeNode> nodes_;
};

// Value handle into a tape. Carries the forward value so arithmetic does
// not re-read the node vector.
struct Ad {
  Tape* tape = nullptr;
  std::int32_t idx = -1;
  double val = 0.0;
};

inline Ad make_leaf(Tape& t, double v) { return {&t, t.leaf(v), v}; }
inline Ad make_const(Tape& t, double v) { return {&t, t.constant(v), v}; }

inline Ad operator+(Ad a, Ad b) {
  assert(a.tape == b.tape);
  return {a.tape, a.tape->push({a.idx, b.idx, Op::kAdd, 0.0, a.val + b.val}), a.val + b.val};
}
inline Ad operator-(Ad a, Ad b) {
  assert(a.tape == b.tape);
  return {a.tape, a.tape->push({a.idx, b.idx, Op::kSub, 0.0, a.val - b.val}), a.val - b.val};
}
inline Ad operator*(Ad a, Ad b) {
  assert(a.tape == b.tape);
  return {a.tape, a.tape->push({a.idx, b.idx, Op::kMul, 0.0, a.val * b.val}), a.val * b.val};
}
inline Ad operator/(Ad a, Ad b) {
  assert(a.tape == b.tape);
  return {a.tape, a.tape->push({a.idx, b.idx, Op::kDiv, 0.0, a.val / b.val}), a.val / b.val};
}
inline Ad operator-(Ad a) {
  return {a.tape, a.tape->push({a.idx, -1, Op::kNeg, 0.0, -a.val}), -a.val};
}
inline Ad operator+(Ad a, double c) {
  return {a.tape, a.tape->push({a.idx, -1, Op::kAddC, c, a.val + c}), a.val + c};
}
inline Ad operator+(double c, Ad a) { return a + c; }
inline Ad operator-(Ad a, double c) { return a + (-c); }
inline Ad operator-(double c, Ad a) {
  return {a.tape, a.tape->push({a.idx, -1, Op::kRsubC, c, c - a.val}), c - a.val};
}
inline Ad operator*(Ad a, double c) {
  return {a.tape, a.tape->push({a.idx, -1, Op::kMulC, c, a.val * c}), a.val * c};
}
inline Ad operator*(double c, Ad a) { return a * c; }
inline Ad operator/(Ad a, double c) { return a * (1.0 / c); }

inline Ad& operator+=(Ad& a, Ad b) { a = a + b; return a; }
inline Ad& operator-=(Ad& a, Ad b) { a = a - b; return a; }

// Unary math, usable from code templated over double / Ad.
inline double ad_tanh(double x) { return std::tanh(x); }
inline double ad_sqrt(double x) { return std::sqrt(x); }
inline double ad_sin(double x) { return std::sin(x); }
inline double ad_cos(double x) { return std::cos(x); }
inline double ad_value(double x) { return x; }

inline Ad ad_tanh(Ad a) {
  const double v = std::tanh(a.val);
  return {a.tape, a.tape->push({a.idx, -1, Op::kTanh, 0.0, v}), v};
}
inline Ad ad_sqrt(Ad a) {
  const double v = std::sqrt(a.val);
  return {a.tape, a.tape->push({a.idx, -1, Op::kSqrt, 0.0, v}), v};
}
inline Ad ad_sin(Ad a) {
  const double v = std::sin(a.val);
  return {a.tape, a.tape->push({a.idx, -1, Op::kSin, 0.0, v}), v};
}
inline Ad ad_cos(Ad a) {
  const double v = std::cos(a.val);
  return {a.tape, a.tape->push({a.idx, -1, Op::kCos, 0.0, v}), v};
}
inline double ad_value(Ad a) { return a.val; }

}  // namespace acumen
