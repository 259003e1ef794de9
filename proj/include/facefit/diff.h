#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "facefit/vec.h"

namespace facefit {

inline constexpr std::uint32_t kNoNode = 0xffffffffu;

class RecordError : public std::runtime_error {
 public:
  RecordError(std::uint32_t node, double value)
      : std::runtime_error("diff: non-finite value " + std::to_string(value) +
                           " recorded at tape node " + std::to_string(node)),
        node_id(node), bad_value(value) {}
  std::uint32_t node_id;
  double bad_value;
};

// Branch trace for the FD kink detector: abs/min/max push their branch choice
// here when a trace is armed.  Two loss evaluations that take different
// branches are separated by a non-smooth point.
class KinkTrace {
 public:
  void arm() { bits_.clear(); armed_ = true; }
  void disarm() { armed_ = false; }
  bool armed() const { return armed_; }
  void push(bool b) { bits_.push_back(b ? 1 : 0); }
  bool operator==(const KinkTrace& o) const { return bits_ == o.bits_; }
  bool operator!=(const KinkTrace& o) const { return bits_ != o.bits_; }
  std::size_t size() const { return bits_.size(); }

 private:
  std::vector<std::uint8_t> bits_;
  bool armed_ = false;
};

// Append-only reverse-mode tape.  A node stores a span into the shared edge
// arrays (parent id + local partial); leaves have no edges.  Recording is
// single-writer; there is one active tape per thread.
class Tape {
 public:
  std::uint32_t leaf() {
    nodes_.push_back({std::uint32_t(parent_.size()), 0});
    return std::uint32_t(nodes_.size() - 1);
  }

  std::uint32_t push1(std::uint32_t p, double w) {
    parent_.push_back(p);
    weight_.push_back(w);
    nodes_.push_back({std::uint32_t(parent_.size() - 1), 1});
    return std::uint32_t(nodes_.size() - 1);
  }

  std::uint32_t push2(std::uint32_t p0, double w0, std::uint32_t p1, double w1) {
    parent_.push_back(p0);
    parent_.push_back(p1);
    weight_.push_back(w0);
    weight_.push_back(w1);
    nodes_.push_back({std::uint32_t(parent_.size() - 2), 2});
    return std::uint32_t(nodes_.size() - 1);
  }

  // Incremental n-ary node: stage edges, then seal.
  void stage_edge(std::uint32_t p, double w) {
    parent_.push_back(p);
    weight_.push_back(w);
    staged_++;
  }
  std::uint32_t seal_node() {
    nodes_.push_back({std::uint32_t(parent_.size() - staged_), staged_});
    staged_ = 0;
    return std::uint32_t(nodes_.size() - 1);
  }

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const { return parent_.size(); }

  void clear() {
    nodes_.clear();
    parent_.clear();
    weight_.clear();
    staged_ = 0;
  }

  // Adjoints of every node w.r.t. the given loss node.  Single-threaded,
  // fixed reverse order; zero-adjoint nodes are skipped.
  std::vector<double> backward(std::uint32_t loss) const {
    std::vector<double> adj(nodes_.size(), 0.0);
    if (loss == kNoNode) return adj;  // constant loss: all-zero gradients
    if (loss >= nodes_.size()) throw std::runtime_error("diff: backward on unknown node");
    adj[loss] = 1.0;
    for (std::uint32_t i = loss + 1; i-- > 0;) {
      double a = adj[i];
      if (a == 0.0) continue;
      const Node& n = nodes_[i];
      for (std::uint32_t e = 0; e < n.count; ++e)
        adj[parent_[n.first + e]] += a * weight_[n.first + e];
    }
    return adj;
  }

  static Tape*& active() {
    thread_local Tape* t = nullptr;
    return t;
  }
  static KinkTrace*& kinks() {
    thread_local KinkTrace* k = nullptr;
    return k;
  }

  struct Scope {
    explicit Scope(Tape& t) : prev_(active()) { active() = &t; }
    ~Scope() { active() = prev_; }
    Tape* prev_;
  };
  // Temporarily stops recording (plan building inside a recorded loss).
  struct Pause {
    Pause() : prev_(active()) { active() = nullptr; }
    ~Pause() { active() = prev_; }
    Tape* prev_;
  };

 private:
  struct Node {
    std::uint32_t first;
    std::uint32_t count;
  };
  std::vector<Node> nodes_;
  std::vector<std::uint32_t> parent_;
  std::vector<double> weight_;
  std::uint32_t staged_ = 0;
};

// Scalar with an optional tape node.  id == kNoNode means constant; arithmetic
// on constants never touches the tape, so plain evaluation is the same code
// path with no tape active (bit-identical values).
struct DiffValue {
  double v = 0.0;
  std::uint32_t id = kNoNode;

  DiffValue() = default;
  DiffValue(double value) : v(value) {}
  DiffValue(double value, std::uint32_t node) : v(value), id(node) {}
  bool constant() const { return id == kNoNode; }
};

namespace detail {
inline std::uint32_t checked(Tape& t, std::uint32_t node, double value) {
  if (!std::isfinite(value)) throw RecordError(node, value);
  return node;
}
inline DiffValue unary(double value, const DiffValue& a, double wa) {
  Tape* t = Tape::active();
  if (!t || a.constant()) return DiffValue(value);
  return DiffValue(value, detail::checked(*t, t->push1(a.id, wa), value));
}
inline DiffValue binary(double value, const DiffValue& a, double wa, const DiffValue& b, double wb) {
  Tape* t = Tape::active();
  if (!t || (a.constant() && b.constant())) return DiffValue(value);
  std::uint32_t node;
  if (a.constant())
    node = t->push1(b.id, wb);
  else if (b.constant())
    node = t->push1(a.id, wa);
  else
    node = t->push2(a.id, wa, b.id, wb);
  return DiffValue(value, detail::checked(*t, node, value));
}
}  // namespace detail

inline DiffValue operator+(const DiffValue& a, const DiffValue& b) { return detail::binary(a.v + b.v, a, 1.0, b, 1.0); }
inline DiffValue operator-(const DiffValue& a, const DiffValue& b) { return detail::binary(a.v - b.v, a, 1.0, b, -1.0); }
inline DiffValue operator*(const DiffValue& a, const DiffValue& b) { return detail::binary(a.v * b.v, a, b.v, b, a.v); }
inline DiffValue operator/(const DiffValue& a, const DiffValue& b) {
  double inv = 1.0 / b.v;
  return detail::binary(a.v * inv, a, inv, b, -a.v * inv * inv);
}
inline DiffValue operator-(const DiffValue& a) { return detail::unary(-a.v, a, -1.0); }
inline DiffValue& operator+=(DiffValue& a, const DiffValue& b) { a = a + b; return a; }
inline DiffValue& operator-=(DiffValue& a, const DiffValue& b) { a = a - b; return a; }
inline DiffValue& operator*=(DiffValue& a, const DiffValue& b) { a = a * b; return a; }

inline bool operator<(const DiffValue& a, const DiffValue& b) { return a.v < b.v; }
inline bool operator>(const DiffValue& a, const DiffValue& b) { return a.v > b.v; }
inline bool operator<=(const DiffValue& a, const DiffValue& b) { return a.v <= b.v; }
inline bool operator>=(const DiffValue& a, const DiffValue& b) { return a.v >= b.v; }

inline DiffValue detach(const DiffValue& a) { return DiffValue(a.v); }

inline DiffValue abs(const DiffValue& a) {
  if (KinkTrace* k = Tape::kinks(); k && k->armed()) k->push(a.v >= 0.0);
  return detail::unary(std::fabs(a.v), a, a.v >= 0.0 ? 1.0 : -1.0);
}
inline DiffValue max(const DiffValue& a, const DiffValue& b) {
  bool left = a.v >= b.v;
  if (KinkTrace* k = Tape::kinks(); k && k->armed()) k->push(left);
  return left ? detail::unary(a.v, a, 1.0) : detail::unary(b.v, b, 1.0);
}
inline DiffValue min(const DiffValue& a, const DiffValue& b) {
  bool left = a.v <= b.v;
  if (KinkTrace* k = Tape::kinks(); k && k->armed()) k->push(left);
  return left ? detail::unary(a.v, a, 1.0) : detail::unary(b.v, b, 1.0);
}
inline DiffValue clamp01(const DiffValue& a) { return min(max(a, DiffValue(0.0)), DiffValue(1.0)); }

inline DiffValue sqrt(const DiffValue& a) {
  double r = std::sqrt(a.v);
  return detail::unary(r, a, 0.5 / r);
}
inline DiffValue exp(const DiffValue& a) {
  double r = std::exp(a.v);
  return detail::unary(r, a, r);
}
inline DiffValue log(const DiffValue& a) { return detail::unary(std::log(a.v), a, 1.0 / a.v); }
inline DiffValue sin(const DiffValue& a) { return detail::unary(std::sin(a.v), a, std::cos(a.v)); }
inline DiffValue cos(const DiffValue& a) { return detail::unary(std::cos(a.v), a, -std::sin(a.v)); }
// Constant exponent only; the lobe exponent is a config scalar.
inline DiffValue pow(const DiffValue& a, double p) {
  return detail::unary(std::pow(a.v, p), a, p * std::pow(a.v, p - 1.0));
}
inline DiffValue sq(const DiffValue& a) { return a * a; }

// Fused n-ary ops: one node, one edge per differentiable input.  These keep
// the tape compact for basis mat-vecs and long reductions.
inline DiffValue fsum(std::span<const DiffValue> xs) {
  double s = 0.0;
  for (const DiffValue& x : xs) s += x.v;
  Tape* t = Tape::active();
  if (!t) return DiffValue(s);
  bool any = false;
  for (const DiffValue& x : xs)
    if (!x.constant()) { t->stage_edge(x.id, 1.0), any = true; }
  if (!any) return DiffValue(s);
  std::uint32_t node = t->seal_node();
  return DiffValue(s, detail::checked(*t, node, s));
}

inline DiffValue fdot(std::span<const DiffValue> a, std::span<const DiffValue> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i].v * b[i].v;
  Tape* t = Tape::active();
  if (!t) return DiffValue(s);
  bool any = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].constant()) { t->stage_edge(a[i].id, b[i].v); any = true; }
    if (!b[i].constant()) { t->stage_edge(b[i].id, a[i].v); any = true; }
  }
  if (!any) return DiffValue(s);
  std::uint32_t node = t->seal_node();
  return DiffValue(s, detail::checked(*t, node, s));
}

// bias + sum_i w_i * x_i with constant weights.
inline DiffValue faffine(double bias, std::span<const double> ws, std::span<const DiffValue> xs) {
  double s = bias;
  for (std::size_t i = 0; i < xs.size(); ++i) s += ws[i] * xs[i].v;
  Tape* t = Tape::active();
  if (!t) return DiffValue(s);
  bool any = false;
  for (std::size_t i = 0; i < xs.size(); ++i)
    if (!xs[i].constant()) { t->stage_edge(xs[i].id, ws[i]); any = true; }
  if (!any) return DiffValue(s);
  std::uint32_t node = t->seal_node();
  return DiffValue(s, detail::checked(*t, node, s));
}

using DVec2 = Vec2T<DiffValue>;
using DVec3 = Vec3T<DiffValue>;
using DMat3 = Mat3T<DiffValue>;

inline Vec3 value(const DVec3& a) { return {a.x.v, a.y.v, a.z.v}; }
inline DVec3 lift_const(const Vec3& a) { return {DiffValue(a.x), DiffValue(a.y), DiffValue(a.z)}; }
inline DVec3 detach(const DVec3& a) { return {detach(a.x), detach(a.y), detach(a.z)}; }

// Runs fn with the tape active and returns its (scalar) result.
template <class F>
DiffValue record(Tape& tape, F&& fn) {
  Tape::Scope scope(tape);
  return fn();
}

struct BlockGrad {
  std::string name;
  std::vector<double> grad;
};

struct GradientReport {
  std::vector<BlockGrad> blocks;
  std::size_t tape_nodes = 0;
  std::uint64_t seed = 0;

  const BlockGrad* find(const std::string& name) const {
    for (const BlockGrad& b : blocks)
      if (b.name == name) return &b;
    return nullptr;
  }
};

inline std::vector<double> gather(const std::vector<double>& adj, std::span<const std::uint32_t> ids) {
  std::vector<double> g(ids.size(), 0.0);
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (ids[i] != kNoNode && ids[i] < adj.size()) g[i] = adj[ids[i]];
  return g;
}

}  // namespace facefit
