// Reverse-mode automatic differentiation over dense tensors.
//
// Every primitive returns a new Node that remembers its parents and a
// backward rule. Leaves with requires_grad accumulate gradients across
// backward() calls until zero_grad(); interior nodes are reset on each call.
// A graph belongs to one thread. Parameter leaves may be shared read-only by
// several graphs as long as only one of them runs backward().
#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "crossnet/tensor.hpp"

namespace crossnet {

enum class Op {
  Leaf,
  MatMul,
  MatVec,
  Transpose,
  Add,
  AddBroadcast,
  Mul,
  Scale,
  Tanh,
  Sigmoid,
  Log,
  Concat,
  Slice,
  Row,
  StackRows,
  Gather,
  Pick,
  Sum,
  Mean,
  Softmax,
};

inline const char* op_name(Op op) {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::MatMul: return "matmul";
    case Op::MatVec: return "matvec";
    case Op::Transpose: return "transpose";
    case Op::Add: return "add";
    case Op::AddBroadcast: return "add_broadcast";
    case Op::Mul: return "mul";
    case Op::Scale: return "scale";
    case Op::Tanh: return "tanh";
    case Op::Sigmoid: return "sigmoid";
    case Op::Log: return "log";
    case Op::Concat: return "concat";
    case Op::Slice: return "slice";
    case Op::Row: return "row";
    case Op::StackRows: return "stack_rows";
    case Op::Gather: return "gather";
    case Op::Pick: return "pick";
    case Op::Sum: return "sum";
    case Op::Mean: return "mean";
    case Op::Softmax: return "softmax";
  }
  return "?";
}

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
  Tensor value;
  Tensor grad;
  Op op = Op::Leaf;
  std::vector<Var> parents;
  bool requires_grad = false;
  std::string name;
  std::function<void(Node&)> backward_fn;

  void zero_grad() { grad.fill(0.0); }
  const Shape& shape() const { return value.shape(); }
};

inline Var leaf(Tensor value, bool requires_grad = true, std::string name = {}) {
  auto n = std::make_shared<Node>();
  n->grad = Tensor::zeros_like(value);
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  n->name = std::move(name);
  return n;
}

inline Var constant(Tensor value) { return leaf(std::move(value), false); }

namespace detail {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;
using MapVec = Eigen::Map<Eigen::VectorXd>;
using CMapVec = Eigen::Map<const Eigen::VectorXd>;

inline CMapMat as_mat(const Tensor& t) {
  return CMapMat(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                 static_cast<Eigen::Index>(t.cols()));
}
inline MapMat as_mat(Tensor& t) {
  return MapMat(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                static_cast<Eigen::Index>(t.cols()));
}
inline CMapVec as_vec(const Tensor& t) {
  return CMapVec(t.data().data(), static_cast<Eigen::Index>(t.size()));
}
inline MapVec as_vec(Tensor& t) {
  return MapVec(t.data().data(), static_cast<Eigen::Index>(t.size()));
}

inline Var make(Op op, Tensor value, std::vector<Var> parents, std::function<void(Node&)> bw) {
  auto n = std::make_shared<Node>();
  n->grad = Tensor::zeros_like(value);
  n->value = std::move(value);
  n->op = op;
  n->requires_grad = std::any_of(parents.begin(), parents.end(),
                                 [](const Var& p) { return p->requires_grad; });
  if (n->requires_grad) n->backward_fn = std::move(bw);
  n->parents = std::move(parents);
  return n;
}

template <typename F>
Var unary(Op op, const Var& a, F&& f, std::function<void(Node&)> bw) {
  Tensor out = Tensor::zeros_like(a->value);
  const auto& in = a->value.storage();
  auto& o = out.storage();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = f(in[i]);
  return make(op, std::move(out), {a}, std::move(bw));
}

inline void require_vector(const char* op, const Var& a) {
  if (!a->value.is_vector()) throw ShapeError(op, a->shape(), Shape{a->value.size()});
}

}  // namespace detail

// ---- linear algebra -------------------------------------------------------

inline Var matmul(const Var& a, const Var& b) {
  if (!a->value.is_matrix() || !b->value.is_matrix() || a->value.cols() != b->value.rows())
    throw ShapeError("matmul", a->shape(), b->shape());
  Tensor out({a->value.rows(), b->value.cols()});
  detail::as_mat(out).noalias() = detail::as_mat(a->value) * detail::as_mat(b->value);
  return detail::make(Op::MatMul, std::move(out), {a, b}, [](Node& self) {
    auto& A = *self.parents[0];
    auto& B = *self.parents[1];
    auto g = detail::as_mat(std::as_const(self.grad));
    if (A.requires_grad)
      detail::as_mat(A.grad).noalias() += g * detail::as_mat(B.value).transpose();
    if (B.requires_grad)
      detail::as_mat(B.grad).noalias() += detail::as_mat(A.value).transpose() * g;
  });
}

inline Var matvec(const Var& a, const Var& x) {
  if (!a->value.is_matrix() || !x->value.is_vector() || a->value.cols() != x->value.size())
    throw ShapeError("matvec", a->shape(), x->shape());
  Tensor out({a->value.rows()});
  detail::as_vec(out).noalias() = detail::as_mat(a->value) * detail::as_vec(x->value);
  return detail::make(Op::MatVec, std::move(out), {a, x}, [](Node& self) {
    auto& A = *self.parents[0];
    auto& X = *self.parents[1];
    auto g = detail::as_vec(std::as_const(self.grad));
    if (A.requires_grad)
      detail::as_mat(A.grad).noalias() += g * detail::as_vec(X.value).transpose();
    if (X.requires_grad)
      detail::as_vec(X.grad).noalias() += detail::as_mat(A.value).transpose() * g;
  });
}

inline Var transpose(const Var& a) {
  if (!a->value.is_matrix()) throw ShapeError("transpose", a->shape(), a->shape());
  Tensor out({a->value.cols(), a->value.rows()});
  detail::as_mat(out) = detail::as_mat(a->value).transpose();
  return detail::make(Op::Transpose, std::move(out), {a}, [](Node& self) {
    auto& A = *self.parents[0];
    detail::as_mat(A.grad) += detail::as_mat(std::as_const(self.grad)).transpose();
  });
}

// ---- elementwise ----------------------------------------------------------

inline Var add(const Var& a, const Var& b) {
  if (a->shape() != b->shape()) throw ShapeError("add", a->shape(), b->shape());
  Tensor out = a->value;
  detail::as_vec(out) += detail::as_vec(b->value);
  return detail::make(Op::Add, std::move(out), {a, b}, [](Node& self) {
    for (auto& p : self.parents)
      if (p->requires_grad) detail::as_vec(p->grad) += detail::as_vec(std::as_const(self.grad));
  });
}

inline Var add(const Var& a, const Var& b, const Var& c) { return add(add(a, b), c); }

// Adds a row vector to every row of a matrix, or a {1} scalar to every entry.
inline Var add_broadcast(const Var& m, const Var& v) {
  const bool scalar = v->value.is_scalar();
  if (!scalar && !(m->value.is_matrix() && v->value.is_vector() && v->value.size() == m->value.cols()))
    throw ShapeError("add_broadcast", m->shape(), v->shape());
  Tensor out = m->value;
  const std::size_t cols = scalar ? 1 : v->value.size();
  auto& o = out.storage();
  const auto& vv = v->value.storage();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += vv[scalar ? 0 : i % cols];
  return detail::make(Op::AddBroadcast, std::move(out), {m, v}, [scalar, cols](Node& self) {
    auto& M = *self.parents[0];
    auto& V = *self.parents[1];
    const auto& g = self.grad.storage();
    if (M.requires_grad) detail::as_vec(M.grad) += detail::as_vec(std::as_const(self.grad));
    if (V.requires_grad) {
      auto& vg = V.grad.storage();
      for (std::size_t i = 0; i < g.size(); ++i) vg[scalar ? 0 : i % cols] += g[i];
    }
  });
}

inline Var mul(const Var& a, const Var& b) {
  if (a->shape() != b->shape()) throw ShapeError("mul", a->shape(), b->shape());
  Tensor out = a->value;
  detail::as_vec(out).array() *= detail::as_vec(b->value).array();
  return detail::make(Op::Mul, std::move(out), {a, b}, [](Node& self) {
    auto& A = *self.parents[0];
    auto& B = *self.parents[1];
    auto g = detail::as_vec(std::as_const(self.grad)).array();
    if (A.requires_grad) detail::as_vec(A.grad).array() += g * detail::as_vec(B.value).array();
    if (B.requires_grad) detail::as_vec(B.grad).array() += g * detail::as_vec(A.value).array();
  });
}

inline Var scale(const Var& a, double k) {
  return detail::unary(Op::Scale, a, [k](double x) { return k * x; }, [k](Node& self) {
    detail::as_vec(self.parents[0]->grad) += k * detail::as_vec(std::as_const(self.grad));
  });
}

inline Var tanh(const Var& a) {
  return detail::unary(Op::Tanh, a, [](double x) { return std::tanh(x); }, [](Node& self) {
    auto& A = *self.parents[0];
    const auto& y = self.value.storage();
    const auto& g = self.grad.storage();
    auto& ag = A.grad.storage();
    for (std::size_t i = 0; i < y.size(); ++i) ag[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

inline double logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Var sigmoid(const Var& a) {
  return detail::unary(Op::Sigmoid, a, logistic, [](Node& self) {
    auto& A = *self.parents[0];
    const auto& y = self.value.storage();
    const auto& g = self.grad.storage();
    auto& ag = A.grad.storage();
    for (std::size_t i = 0; i < y.size(); ++i) ag[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

// log(max(x, floor)); the gradient is zero where the floor is active.
inline Var log(const Var& a, double floor = 1e-12) {
  return detail::unary(Op::Log, a, [floor](double x) { return std::log(std::max(x, floor)); },
                       [floor](Node& self) {
                         auto& A = *self.parents[0];
                         const auto& x = A.value.storage();
                         const auto& g = self.grad.storage();
                         auto& ag = A.grad.storage();
                         for (std::size_t i = 0; i < x.size(); ++i)
                           if (x[i] > floor) ag[i] += g[i] / x[i];
                       });
}

// ---- structural -----------------------------------------------------------

inline Var concat(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  std::vector<double> out;
  for (const auto& p : parts) {
    detail::require_vector("concat", p);
    out.insert(out.end(), p->value.storage().begin(), p->value.storage().end());
  }
  return detail::make(Op::Concat, Tensor::vector(std::move(out)), parts, [](Node& self) {
    const auto& g = self.grad.storage();
    std::size_t off = 0;
    for (auto& p : self.parents) {
      const auto n = p->value.size();
      if (p->requires_grad) {
        auto& pg = p->grad.storage();
        for (std::size_t i = 0; i < n; ++i) pg[i] += g[off + i];
      }
      off += n;
    }
  });
}

inline Var slice(const Var& v, std::size_t offset, std::size_t len) {
  detail::require_vector("slice", v);
  if (len == 0 || offset + len > v->value.size())
    throw ShapeError("slice", v->shape(), Shape{offset + len});
  const auto& src = v->value.storage();
  std::vector<double> out(src.begin() + static_cast<std::ptrdiff_t>(offset),
                          src.begin() + static_cast<std::ptrdiff_t>(offset + len));
  return detail::make(Op::Slice, Tensor::vector(std::move(out)), {v}, [offset](Node& self) {
    auto& pg = self.parents[0]->grad.storage();
    const auto& g = self.grad.storage();
    for (std::size_t i = 0; i < g.size(); ++i) pg[offset + i] += g[i];
  });
}

inline Var row(const Var& m, std::size_t r) {
  if (!m->value.is_matrix() || r >= m->value.rows())
    throw ShapeError("row", m->shape(), Shape{r + 1});
  const std::size_t cols = m->value.cols();
  const auto& src = m->value.storage();
  std::vector<double> out(src.begin() + static_cast<std::ptrdiff_t>(r * cols),
                          src.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols));
  return detail::make(Op::Row, Tensor::vector(std::move(out)), {m}, [r, cols](Node& self) {
    auto& pg = self.parents[0]->grad.storage();
    const auto& g = self.grad.storage();
    for (std::size_t i = 0; i < cols; ++i) pg[r * cols + i] += g[i];
  });
}

inline Var stack_rows(const std::vector<Var>& rows) {
  if (rows.empty()) throw std::invalid_argument("stack_rows: no inputs");
  const std::size_t cols = rows.front()->value.size();
  std::vector<double> out;
  out.reserve(rows.size() * cols);
  for (const auto& r : rows) {
    detail::require_vector("stack_rows", r);
    if (r->value.size() != cols) throw ShapeError("stack_rows", rows.front()->shape(), r->shape());
    out.insert(out.end(), r->value.storage().begin(), r->value.storage().end());
  }
  return detail::make(Op::StackRows, Tensor::matrix(rows.size(), cols, std::move(out)), rows,
                      [cols](Node& self) {
                        const auto& g = self.grad.storage();
                        for (std::size_t r = 0; r < self.parents.size(); ++r) {
                          auto& p = *self.parents[r];
                          if (!p.requires_grad) continue;
                          auto& pg = p.grad.storage();
                          for (std::size_t i = 0; i < cols; ++i) pg[i] += g[r * cols + i];
                        }
                      });
}

// Row lookup: out[i] = table[indices[i]].
inline Var gather(const Var& table, const std::vector<std::size_t>& indices) {
  if (!table->value.is_matrix()) throw ShapeError("gather", table->shape(), Shape{indices.size()});
  if (indices.empty()) throw std::invalid_argument("gather: no indices");
  const std::size_t cols = table->value.cols();
  std::vector<double> out;
  out.reserve(indices.size() * cols);
  const auto& src = table->value.storage();
  for (auto idx : indices) {
    if (idx >= table->value.rows()) throw ShapeError("gather", table->shape(), Shape{idx + 1, cols});
    out.insert(out.end(), src.begin() + static_cast<std::ptrdiff_t>(idx * cols),
               src.begin() + static_cast<std::ptrdiff_t>((idx + 1) * cols));
  }
  return detail::make(Op::Gather, Tensor::matrix(indices.size(), cols, std::move(out)), {table},
                      [indices, cols](Node& self) {
                        auto& pg = self.parents[0]->grad.storage();
                        const auto& g = self.grad.storage();
                        for (std::size_t r = 0; r < indices.size(); ++r)
                          for (std::size_t i = 0; i < cols; ++i) pg[indices[r] * cols + i] += g[r * cols + i];
                      });
}

// Single entry of a vector as a {1} scalar.
inline Var pick(const Var& v, std::size_t i) {
  detail::require_vector("pick", v);
  if (i >= v->value.size()) throw ShapeError("pick", v->shape(), Shape{i + 1});
  return detail::make(Op::Pick, Tensor::scalar(v->value[i]), {v}, [i](Node& self) {
    self.parents[0]->grad[i] += self.grad[0];
  });
}

// ---- reductions -----------------------------------------------------------

inline Var sum(const Var& a) {
  return detail::make(Op::Sum, Tensor::scalar(detail::as_vec(a->value).sum()), {a}, [](Node& self) {
    detail::as_vec(self.parents[0]->grad).array() += self.grad[0];
  });
}

inline Var sum(const std::vector<Var>& scalars) {
  if (scalars.empty()) throw std::invalid_argument("sum: no inputs");
  double s = 0.0;
  for (const auto& v : scalars) {
    if (!v->value.is_scalar()) throw ShapeError("sum", v->shape(), Shape{1});
    s += v->value[0];
  }
  return detail::make(Op::Sum, Tensor::scalar(s), scalars, [](Node& self) {
    for (auto& p : self.parents)
      if (p->requires_grad) p->grad[0] += self.grad[0];
  });
}

inline Var mean(const Var& a) {
  const double n = static_cast<double>(a->value.size());
  return detail::make(Op::Mean, Tensor::scalar(detail::as_vec(a->value).sum() / n), {a},
                      [n](Node& self) { detail::as_vec(self.parents[0]->grad).array() += self.grad[0] / n; });
}

inline Tensor softmax_values(const Tensor& x) {
  const auto& in = x.storage();
  const double mx = *std::max_element(in.begin(), in.end());
  Tensor out = Tensor::zeros_like(x);
  auto& o = out.storage();
  double z = 0.0;
  for (std::size_t i = 0; i < in.size(); ++i) z += (o[i] = std::exp(in[i] - mx));
  for (auto& v : o) v /= z;
  return out;
}

inline Var softmax(const Var& x) {
  detail::require_vector("softmax", x);
  if (!x->value.all_finite()) throw std::domain_error("softmax: non-finite input");
  return detail::make(Op::Softmax, softmax_values(x->value), {x}, [](Node& self) {
    auto y = detail::as_vec(std::as_const(self.value));
    auto g = detail::as_vec(std::as_const(self.grad));
    const double dot = y.dot(g);
    detail::as_vec(self.parents[0]->grad).array() += y.array() * (g.array() - dot);
  });
}

// ---- backward -------------------------------------------------------------

namespace detail {

inline std::vector<Node*> topo_order(Node* root) {
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root, 0}};
  seen.insert(root);
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && !seen.contains(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  return order;  // parents before children
}

}  // namespace detail

// Propagates d(loss)/d(node) to every requires_grad ancestor. Leaf gradients
// accumulate across calls; call zero_grad on them between steps.
inline void backward(const Var& loss) {
  if (!loss->value.is_scalar())
    throw std::invalid_argument("backward: loss must be scalar, got " + shape_str(loss->shape()));
  if (!loss->requires_grad) return;
  auto order = detail::topo_order(loss.get());
  for (Node* n : order)
    if (n->op != Op::Leaf) n->zero_grad();
  loss->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backward_fn) (*it)->backward_fn(**it);
}

inline void zero_grad(const std::vector<Var>& params) {
  for (const auto& p : params) p->zero_grad();
}

// Largest |analytic - numeric| / max(1, |analytic| + |numeric|) over every
// entry of every parameter, using central differences. f must rebuild the
// graph from the current parameter values on each call.
inline double gradient_check(const std::function<Var()>& f, const std::vector<Var>& params,
                             double epsilon = 1e-5) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("gradient_check: epsilon must be positive");
  zero_grad(params);
  Var base = f();
  const double v0 = base->value.item();
  const double v1 = f()->value.item();
  if (v0 != v1) throw std::runtime_error("gradient_check: objective is not deterministic");
  backward(base);

  double worst = 0.0;
  for (const auto& p : params) {
    auto& vals = p->value.storage();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double orig = vals[i];
      vals[i] = orig + epsilon;
      const double up = f()->value.item();
      vals[i] = orig - epsilon;
      const double down = f()->value.item();
      vals[i] = orig;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double analytic = p->grad[i];
      const double err =
          std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic) + std::abs(numeric));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace crossnet
