#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "hgcn/tensor.hpp"

namespace hgcn {

// Named trainable tensors with a per-tensor gradient accumulator. Iteration
// order is insertion order and is stable, which training and finite-difference
// checks rely on.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor value;
    Tensor grad;
  };

  std::size_t add(const std::string& name, Tensor init) {
    if (index_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
    Entry e;
    e.name = name;
    e.grad = Tensor::zeros(init.shape);
    e.value = std::move(init);
    entries_.push_back(std::move(e));
    index_[name] = entries_.size() - 1;
    return entries_.size() - 1;
  }

  bool has(const std::string& name) const { return index_.count(name) != 0; }
  std::size_t index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("no parameter named " + name);
    return it->second;
  }
  Entry& at(const std::string& name) { return entries_[index_of(name)]; }
  const Entry& at(const std::string& name) const { return entries_[index_of(name)]; }
  Entry& entry(std::size_t i) { return entries_[i]; }
  const Entry& entry(std::size_t i) const { return entries_[i]; }
  std::size_t size() const { return entries_.size(); }

  void zero_grad() {
    for (auto& e : entries_) std::fill(e.grad.data.begin(), e.grad.data.end(), 0.0);
  }

  std::int64_t total_values() const {
    std::int64_t n = 0;
    for (const auto& e : entries_) n += e.value.numel();
    return n;
  }

  std::int64_t count_by_prefix(const std::string& prefix) const {
    std::int64_t n = 0;
    for (const auto& e : entries_)
      if (e.name.rfind(prefix, 0) == 0) n += e.value.numel();
    return n;
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write parameter file: " + path);
    out << entries_.size() << "\n";
    char buf[32];
    for (const auto& e : entries_) {
      out << e.name << " " << e.value.shape.size();
      for (auto d : e.value.shape) out << " " << d;
      out << "\n";
      for (std::size_t i = 0; i < e.value.data.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", e.value.data[i]);
        out << buf << (i + 1 == e.value.data.size() ? "" : " ");
      }
      out << "\n";
    }
  }

  static ParamStore load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read parameter file: " + path);
    std::size_t count = 0;
    in >> count;
    ParamStore store;
    for (std::size_t i = 0; i < count; ++i) {
      std::string name;
      std::size_t rank = 0;
      in >> name >> rank;
      Shape shape(rank);
      for (auto& d : shape) in >> d;
      Tensor t((Shape(shape)));
      for (auto& v : t.data) in >> v;
      if (!in) throw std::runtime_error("truncated parameter file: " + path);
      store.add(name, std::move(t));
    }
    return store;
  }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Ordered record of primitive operations. Each op appends one node holding its
// output value and a closure computing the vector-Jacobian product into its
// inputs' grad buffers. Nodes are recorded in topological order by
// construction; backward() replays them once in reverse.
class Tape {
 public:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void()> backward;  // empty for leaves/constants
  };

  Node* emplace(Tensor value) {
    nodes_.push_back(std::make_unique<Node>());
    nodes_.back()->value = std::move(value);
    return nodes_.back().get();
  }

  std::size_t size() const { return nodes_.size(); }

  void record_param_link(ParamStore* store, std::size_t param_idx, Node* node) {
    links_.push_back({store, param_idx, node});
  }

  // Seeds d(loss)/d(loss) = 1, replays the record in reverse, then adds each
  // linked leaf's gradient into its parameter's accumulator. Repeated calls
  // accumulate; the caller zeroes the store between optimization steps.
  void backward(Node* loss, ParamStore* store = nullptr) {
    if (loss->value.rank() != 0)
      throw std::invalid_argument("backward: loss must be a scalar, got shape " +
                                  shape_str(loss->value.shape));
    for (auto& n : nodes_) {
      n->grad.shape = n->value.shape;
      n->grad.data.assign(n->value.data.size(), 0.0);
    }
    loss->grad.data[0] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it)
      if ((*it)->backward) (*it)->backward();
    if (store) {
      for (const auto& link : links_) {
        if (link.store != store) continue;
        auto& acc = store->entry(link.param_idx).grad;
        const auto& g = link.node->grad;
        for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += g.data[i];
      }
    }
  }

 private:
  struct ParamLink {
    ParamStore* store;
    std::size_t param_idx;
    Node* node;
  };
  std::vector<std::unique_ptr<Node>> nodes_;
  std::vector<ParamLink> links_;
};

// Lightweight handle to a tape node.
struct Var {
  Tape* tape = nullptr;
  Tape::Node* node = nullptr;

  const Tensor& val() const { return node->value; }
  const Tensor& grad() const { return node->grad; }
  const Shape& shape() const { return node->value.shape; }
  double item() const {
    if (node->value.rank() != 0) throw std::invalid_argument("item(): not a scalar");
    return node->value.data[0];
  }
};

inline Var constant(Tape& tape, Tensor value) { return {&tape, tape.emplace(std::move(value))}; }
inline Var constant(Tape& tape, double value) { return constant(tape, Tensor::scalar(value)); }

// Leaf with a gradient (model inputs in tests).
inline Var leaf(Tape& tape, Tensor value) { return {&tape, tape.emplace(std::move(value))}; }

// Leaf bound to a ParamStore entry; backward() accumulates into the store.
inline Var param(Tape& tape, ParamStore& store, const std::string& name) {
  std::size_t idx = store.index_of(name);
  Tape::Node* n = tape.emplace(store.entry(idx).value);
  tape.record_param_link(&store, idx, n);
  return {&tape, n};
}

inline void backward(const Var& loss, ParamStore& store) {
  loss.tape->backward(loss.node, &store);
}

namespace detail {

inline void check_same_tape(const Var& a, const Var& b, const char* op) {
  if (a.tape != b.tape) throw std::invalid_argument(std::string(op) + ": operands on different tapes");
}

// Broadcast rules over rank <= 2, numpy style: shapes are right-aligned and
// each axis must match or be 1.
struct Broadcast2 {
  std::int64_t rows, cols;      // output
  std::int64_t ar, ac, br, bc;  // padded operand extents
  bool ok;
};

inline Broadcast2 broadcast2(const Shape& a, const Shape& b) {
  auto pad = [](const Shape& s, std::int64_t& r, std::int64_t& c) {
    if (s.size() == 2) {
      r = s[0];
      c = s[1];
    } else if (s.size() == 1) {
      r = 1;
      c = s[0];
    } else {
      r = 1;
      c = 1;
    }
  };
  Broadcast2 o{};
  pad(a, o.ar, o.ac);
  pad(b, o.br, o.bc);
  o.ok = (o.ar == o.br || o.ar == 1 || o.br == 1) && (o.ac == o.bc || o.ac == 1 || o.bc == 1);
  o.rows = std::max(o.ar, o.br);
  o.cols = std::max(o.ac, o.bc);
  return o;
}

// Sum g over the axes along which `shape` was broadcast, restoring its rank.
inline Tensor reduce_to(const Tensor& g, const Shape& shape) {
  if (g.shape == shape) return g;
  std::int64_t tr, tc;
  if (shape.size() == 2) {
    tr = shape[0];
    tc = shape[1];
  } else if (shape.size() == 1) {
    tr = 1;
    tc = shape[0];
  } else {
    tr = 1;
    tc = 1;
  }
  const std::int64_t gr = g.rows(), gc = g.cols();
  Tensor out(shape);
  for (std::int64_t i = 0; i < gr; ++i)
    for (std::int64_t j = 0; j < gc; ++j) {
      const std::int64_t ti = tr == 1 ? 0 : i, tj = tc == 1 ? 0 : j;
      out.data[ti * tc + tj] += g.data[i * gc + j];
    }
  return out;
}

template <typename FwdFn, typename DaFn, typename DbFn>
Var binary_op(const char* name, const Var& a, const Var& b, FwdFn fwd, DaFn da, DbFn db) {
  check_same_tape(a, b, name);
  const auto bc = broadcast2(a.shape(), b.shape());
  if (!bc.ok)
    throw std::invalid_argument(std::string(name) + ": shapes " + shape_str(a.shape()) +
                                " and " + shape_str(b.shape()) + " do not broadcast");
  Shape out_shape;
  if (a.shape().size() == 2 || b.shape().size() == 2)
    out_shape = {bc.rows, bc.cols};
  else if (a.shape().size() == 1 || b.shape().size() == 1)
    out_shape = {bc.cols};
  Tensor out(out_shape);
  const auto& av = a.val();
  const auto& bv = b.val();
  for (std::int64_t i = 0; i < bc.rows; ++i)
    for (std::int64_t j = 0; j < bc.cols; ++j) {
      const double x = av.data[(bc.ar == 1 ? 0 : i) * bc.ac + (bc.ac == 1 ? 0 : j)];
      const double y = bv.data[(bc.br == 1 ? 0 : i) * bc.bc + (bc.bc == 1 ? 0 : j)];
      out.data[i * bc.cols + j] = fwd(x, y);
    }
  Tape::Node* n = a.tape->emplace(std::move(out));
  Tape::Node* an = a.node;
  Tape::Node* bn = b.node;
  n->backward = [n, an, bn, bc, da, db]() {
    const std::int64_t R = bc.rows, C = bc.cols;
    Tensor ga({R, C}), gb({R, C});
    for (std::int64_t i = 0; i < R; ++i)
      for (std::int64_t j = 0; j < C; ++j) {
        const double x = an->value.data[(bc.ar == 1 ? 0 : i) * bc.ac + (bc.ac == 1 ? 0 : j)];
        const double y = bn->value.data[(bc.br == 1 ? 0 : i) * bc.bc + (bc.bc == 1 ? 0 : j)];
        const double g = n->grad.data[i * C + j];
        ga.data[i * C + j] = g * da(x, y);
        gb.data[i * C + j] = g * db(x, y);
      }
    Tensor ra = reduce_to(ga, an->value.shape);
    for (std::size_t k = 0; k < ra.data.size(); ++k) an->grad.data[k] += ra.data[k];
    Tensor rb = reduce_to(gb, bn->value.shape);
    for (std::size_t k = 0; k < rb.data.size(); ++k) bn->grad.data[k] += rb.data[k];
  };
  return {a.tape, n};
}

template <typename FwdFn, typename VjpFn>
Var unary_op(const Var& a, FwdFn fwd, VjpFn vjp) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = fwd(a.val().data[i]);
  Tape::Node* n = a.tape->emplace(std::move(out));
  Tape::Node* an = a.node;
  n->backward = [n, an, vjp]() {
    for (std::size_t i = 0; i < n->grad.data.size(); ++i)
      an->grad.data[i] += n->grad.data[i] * vjp(an->value.data[i], n->value.data[i]);
  };
  return {a.tape, n};
}

}  // namespace detail

inline Var add(const Var& a, const Var& b) {
  return detail::binary_op("add", a, b, [](double x, double y) { return x + y; },
                           [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

inline Var sub(const Var& a, const Var& b) {
  return detail::binary_op("sub", a, b, [](double x, double y) { return x - y; },
                           [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

inline Var mul(const Var& a, const Var& b) {
  return detail::binary_op("mul", a, b, [](double x, double y) { return x * y; },
                           [](double, double y) { return y; }, [](double x, double) { return x; });
}

inline Var divide(const Var& a, const Var& b) {
  return detail::binary_op("div", a, b, [](double x, double y) { return x / y; },
                           [](double, double y) { return 1.0 / y; },
                           [](double x, double y) { return -x / (y * y); });
}

inline Var scale(const Var& a, double c) {
  return detail::unary_op(a, [c](double x) { return c * x; },
                          [c](double, double) { return c; });
}

inline Var add_scalar(const Var& a, double c) {
  return detail::unary_op(a, [c](double x) { return x + c; },
                          [](double, double) { return 1.0; });
}

inline Var tanh(const Var& a) {
  return detail::unary_op(a, [](double x) { return std::tanh(x); },
                          [](double, double y) { return 1.0 - y * y; });
}

inline Var sigmoid(const Var& a) {
  return detail::unary_op(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                          [](double, double y) { return y * (1.0 - y); });
}

inline Var exp(const Var& a) {
  return detail::unary_op(a, [](double x) { return std::exp(x); },
                          [](double, double y) { return y; });
}

inline Var log(const Var& a) {
  // Reject structurally invalid (non-positive) inputs; NaN propagates so the
  // training loop can report which graph produced it.
  for (double v : a.val().data)
    if (std::isfinite(v) && v <= 0.0)
      throw std::domain_error("log: non-positive input " + std::to_string(v) +
                              "; clamp before taking logs");
  return detail::unary_op(a, [](double x) { return std::log(x); },
                          [](double x, double) { return 1.0 / x; });
}

inline Var square(const Var& a) {
  return detail::unary_op(a, [](double x) { return x * x; },
                          [](double x, double) { return 2.0 * x; });
}

inline Var relu(const Var& a) {
  return detail::unary_op(a, [](double x) { return x > 0.0 ? x : 0.0; },
                          [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

// x^(-1/2); inputs must be positive (degrees of A + I always are). NaN
// propagates so the training loop can report which graph produced it.
inline Var rsqrt(const Var& a) {
  for (double v : a.val().data)
    if (std::isfinite(v) && v <= 0.0)
      throw std::domain_error("rsqrt: non-positive input " + std::to_string(v));
  return detail::unary_op(a, [](double x) { return 1.0 / std::sqrt(x); },
                          [](double, double y) { return -0.5 * y * y * y; });
}

// Clamp to [lo, hi]; gradient passes through strictly inside the interval.
inline Var clamp(const Var& a, double lo, double hi) {
  return detail::unary_op(a, [lo, hi](double x) { return std::min(std::max(x, lo), hi); },
                          [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

inline Var matmul(const Var& a, const Var& b) {
  detail::check_same_tape(a, b, "matmul");
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0])
    throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                                shape_str(b.shape()));
  Tape::Node* n = a.tape->emplace(matmul_plain(a.val(), b.val()));
  Tape::Node* an = a.node;
  Tape::Node* bn = b.node;
  n->backward = [n, an, bn]() {
    const std::int64_t N = an->value.shape[0], K = an->value.shape[1], M = bn->value.shape[1];
    // dA += G B^T
    for (std::int64_t i = 0; i < N; ++i)
      for (std::int64_t j = 0; j < M; ++j) {
        const double g = n->grad.data[i * M + j];
        if (g == 0.0) continue;
        for (std::int64_t p = 0; p < K; ++p) an->grad.data[i * K + p] += g * bn->value.data[p * M + j];
      }
    // dB += A^T G
    for (std::int64_t i = 0; i < N; ++i)
      for (std::int64_t p = 0; p < K; ++p) {
        const double av = an->value.data[i * K + p];
        if (av == 0.0) continue;
        for (std::int64_t j = 0; j < M; ++j) bn->grad.data[p * M + j] += av * n->grad.data[i * M + j];
      }
  };
  return {a.tape, n};
}

inline Var transpose(const Var& a) {
  Tape::Node* n = a.tape->emplace(transpose_plain(a.val()));
  Tape::Node* an = a.node;
  n->backward = [n, an]() {
    const std::int64_t R = n->value.shape[0], C = n->value.shape[1];
    for (std::int64_t i = 0; i < R; ++i)
      for (std::int64_t j = 0; j < C; ++j) an->grad.data[j * R + i] += n->grad.data[i * C + j];
  };
  return {a.tape, n};
}

inline Var reshape(const Var& a, Shape shape) {
  if (shape_numel(shape) != a.val().numel())
    throw std::invalid_argument("reshape: cannot view " + shape_str(a.shape()) + " as " +
                                shape_str(shape));
  Tensor out(std::move(shape), a.val().data);
  Tape::Node* n = a.tape->emplace(std::move(out));
  Tape::Node* an = a.node;
  n->backward = [n, an]() {
    for (std::size_t i = 0; i < n->grad.data.size(); ++i) an->grad.data[i] += n->grad.data[i];
  };
  return {a.tape, n};
}

inline Var sum_all(const Var& a) {
  double s = 0.0;
  for (double v : a.val().data) s += v;
  Tape::Node* n = a.tape->emplace(Tensor::scalar(s));
  Tape::Node* an = a.node;
  n->backward = [n, an]() {
    const double g = n->grad.data[0];
    for (auto& x : an->grad.data) x += g;
  };
  return {a.tape, n};
}

// Sum along an axis of a matrix, keeping the reduced axis with extent 1.
inline Var sum_axis(const Var& a, int axis) {
  if (a.shape().size() != 2 || (axis != 0 && axis != 1))
    throw std::invalid_argument("sum_axis: rank-2 input and axis in {0,1} required, got " +
                                shape_str(a.shape()));
  const std::int64_t R = a.shape()[0], C = a.shape()[1];
  Tensor out(axis == 0 ? Shape{1, C} : Shape{R, 1});
  for (std::int64_t i = 0; i < R; ++i)
    for (std::int64_t j = 0; j < C; ++j) out.data[axis == 0 ? j : i] += a.val().data[i * C + j];
  Tape::Node* n = a.tape->emplace(std::move(out));
  Tape::Node* an = a.node;
  n->backward = [n, an, axis, R, C]() {
    for (std::int64_t i = 0; i < R; ++i)
      for (std::int64_t j = 0; j < C; ++j)
        an->grad.data[i * C + j] += n->grad.data[axis == 0 ? j : i];
  };
  return {a.tape, n};
}

inline Var mean_axis(const Var& a, int axis) {
  const double inv = 1.0 / static_cast<double>(a.shape()[axis]);
  return scale(sum_axis(a, axis), inv);
}

inline Var concat(const std::vector<Var>& parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  if (axis != 0 && axis != 1) throw std::invalid_argument("concat: axis in {0,1} required");
  Tape* tape = parts[0].tape;
  std::int64_t R = parts[0].shape()[0], C = parts[0].shape()[1];
  std::int64_t total = 0;
  for (const auto& p : parts) {
    detail::check_same_tape(parts[0], p, "concat");
    if (p.shape().size() != 2)
      throw std::invalid_argument("concat: rank-2 inputs required, got " + shape_str(p.shape()));
    if ((axis == 0 && p.shape()[1] != C) || (axis == 1 && p.shape()[0] != R))
      throw std::invalid_argument("concat: mismatched shapes " + shape_str(parts[0].shape()) +
                                  " vs " + shape_str(p.shape()));
    total += p.shape()[axis];
  }
  Tensor out(axis == 0 ? Shape{total, C} : Shape{R, total});
  std::int64_t off = 0;
  for (const auto& p : parts) {
    const std::int64_t pr = p.shape()[0], pc = p.shape()[1];
    for (std::int64_t i = 0; i < pr; ++i)
      for (std::int64_t j = 0; j < pc; ++j) {
        if (axis == 0)
          out.data[(off + i) * C + j] = p.val().data[i * pc + j];
        else
          out.data[i * total + off + j] = p.val().data[i * pc + j];
      }
    off += p.shape()[axis];
  }
  Tape::Node* n = tape->emplace(std::move(out));
  std::vector<Tape::Node*> srcs;
  for (const auto& p : parts) srcs.push_back(p.node);
  n->backward = [n, srcs, axis, C, total]() {
    std::int64_t off = 0;
    for (Tape::Node* s : srcs) {
      const std::int64_t pr = s->value.shape[0], pc = s->value.shape[1];
      for (std::int64_t i = 0; i < pr; ++i)
        for (std::int64_t j = 0; j < pc; ++j) {
          if (axis == 0)
            s->grad.data[i * pc + j] += n->grad.data[(off + i) * C + j];
          else
            s->grad.data[i * pc + j] += n->grad.data[i * total + off + j];
        }
      off += s->value.shape[axis];
    }
  };
  return {tape, n};
}

// Row-wise softmax of a matrix; every output row is on the simplex.
inline Var softmax_rows(const Var& a) {
  if (a.shape().size() != 2)
    throw std::invalid_argument("softmax_rows: rank-2 required, got " + shape_str(a.shape()));
  const std::int64_t R = a.shape()[0], C = a.shape()[1];
  Tensor out({R, C});
  for (std::int64_t i = 0; i < R; ++i) {
    double mx = a.val().data[i * C];
    for (std::int64_t j = 1; j < C; ++j) mx = std::max(mx, a.val().data[i * C + j]);
    double denom = 0.0;
    for (std::int64_t j = 0; j < C; ++j) {
      out.data[i * C + j] = std::exp(a.val().data[i * C + j] - mx);
      denom += out.data[i * C + j];
    }
    for (std::int64_t j = 0; j < C; ++j) out.data[i * C + j] /= denom;
  }
  Tape::Node* n = a.tape->emplace(std::move(out));
  Tape::Node* an = a.node;
  n->backward = [n, an, R, C]() {
    for (std::int64_t i = 0; i < R; ++i) {
      double dot = 0.0;
      for (std::int64_t j = 0; j < C; ++j) dot += n->grad.data[i * C + j] * n->value.data[i * C + j];
      for (std::int64_t j = 0; j < C; ++j)
        an->grad.data[i * C + j] += n->value.data[i * C + j] * (n->grad.data[i * C + j] - dot);
    }
  };
  return {a.tape, n};
}

// L2 norm along the last axis of a matrix, keepdims: (N,d) -> (N,1).
// The subgradient at an all-zero row is 0.
inline Var norm_rows(const Var& a) {
  if (a.shape().size() != 2)
    throw std::invalid_argument("norm_rows: rank-2 required, got " + shape_str(a.shape()));
  const std::int64_t R = a.shape()[0], C = a.shape()[1];
  Tensor out({R, 1});
  for (std::int64_t i = 0; i < R; ++i) {
    double s = 0.0;
    for (std::int64_t j = 0; j < C; ++j) {
      const double v = a.val().data[i * C + j];
      s += v * v;
    }
    out.data[i] = std::sqrt(s);
  }
  Tape::Node* n = a.tape->emplace(std::move(out));
  Tape::Node* an = a.node;
  n->backward = [n, an, R, C]() {
    for (std::int64_t i = 0; i < R; ++i) {
      const double norm = n->value.data[i];
      if (norm == 0.0) continue;
      const double g = n->grad.data[i] / norm;
      for (std::int64_t j = 0; j < C; ++j) an->grad.data[i * C + j] += g * an->value.data[i * C + j];
    }
  };
  return {a.tape, n};
}

}  // namespace hgcn
