#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "left/tensor.hpp"

// Reverse-mode automatic differentiation on a dynamic tape. Nodes are
// created per forward pass and freed when the last Var handle drops.
// Single-threaded math keeps results bit-reproducible under a fixed seed.

namespace left::ag {

class VarNode;
using Var = std::shared_ptr<VarNode>;

inline std::uint64_t next_node_id() {
  static std::atomic<std::uint64_t> counter{0};
  return ++counter;
}

class VarNode {
 public:
  Tensor val;
  Tensor grad;  // allocated on first use, same shape as val
  bool requires_grad = false;
  std::uint64_t id;
  std::vector<Var> parents;
  std::function<void(VarNode&)> backfn;  // accumulates self.grad into parents

  explicit VarNode(Tensor v, bool rg = false)
      : val(std::move(v)), requires_grad(rg), id(next_node_id()) {}

  Tensor& ensure_grad() {
    if (grad.data.size() != val.data.size()) grad = Tensor(val.shape);
    return grad;
  }
  void zero_grad() {
    if (!grad.data.empty()) std::fill(grad.data.begin(), grad.data.end(), 0.0);
  }
};

inline Var constant(Tensor v) { return std::make_shared<VarNode>(std::move(v), false); }
inline Var param(Tensor v) { return std::make_shared<VarNode>(std::move(v), true); }

inline bool any_requires(const std::vector<Var>& ps) {
  for (const auto& p : ps)
    if (p->requires_grad) return true;
  return false;
}

inline Var make_node(Tensor out, std::vector<Var> parents,
                     std::function<void(VarNode&)> backfn) {
  bool rg = any_requires(parents);
  auto n = std::make_shared<VarNode>(std::move(out), rg);
  if (rg) {
    n->parents = std::move(parents);
    n->backfn = std::move(backfn);
  }
  return n;
}

/// Run backpropagation from a scalar root. Gradients accumulate into
/// every reachable node with requires_grad set.
inline void backward(const Var& root) {
  if (root->val.numel() != 1)
    throw invalid_input("backward() expects a scalar root");
  if (!root->requires_grad) return;

  // Iterative DFS; ids increase with creation order so sorting by id
  // descending yields a valid reverse-topological order.
  std::vector<VarNode*> order;
  std::unordered_set<VarNode*> seen;
  std::vector<VarNode*> stack{root.get()};
  while (!stack.empty()) {
    VarNode* n = stack.back();
    stack.pop_back();
    if (!n->requires_grad || seen.count(n)) continue;
    seen.insert(n);
    order.push_back(n);
    for (const auto& p : n->parents) stack.push_back(p.get());
  }
  std::sort(order.begin(), order.end(),
            [](VarNode* a, VarNode* b) { return a->id > b->id; });

  root->ensure_grad().data[0] += 1.0;
  for (VarNode* n : order) {
    if (n->backfn && !n->grad.data.empty()) n->backfn(*n);
  }
}

// ---------------------------------------------------------------------------
// Elementwise and scalar ops
// ---------------------------------------------------------------------------

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw shape_mismatch(std::string(op) + ": " + shape_str(a.shape) + " vs " +
                         shape_str(b.shape));
}

inline Var add(const Var& a, const Var& b) {
  check_same_shape(a->val, b->val, "add");
  Tensor out = a->val;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b->val.data[i];
  return make_node(std::move(out), {a, b}, [](VarNode& self) {
    for (int pi = 0; pi < 2; ++pi) {
      auto& p = self.parents[pi];
      if (!p->requires_grad) continue;
      auto& g = p->ensure_grad();
      for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += self.grad.data[i];
    }
  });
}

inline Var sub(const Var& a, const Var& b) {
  check_same_shape(a->val, b->val, "sub");
  Tensor out = a->val;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b->val.data[i];
  return make_node(std::move(out), {a, b}, [](VarNode& self) {
    if (self.parents[0]->requires_grad) {
      auto& g = self.parents[0]->ensure_grad();
      for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += self.grad.data[i];
    }
    if (self.parents[1]->requires_grad) {
      auto& g = self.parents[1]->ensure_grad();
      for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] -= self.grad.data[i];
    }
  });
}

inline Var mul(const Var& a, const Var& b) {
  check_same_shape(a->val, b->val, "mul");
  Tensor out = a->val;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b->val.data[i];
  return make_node(std::move(out), {a, b}, [](VarNode& self) {
    const auto& av = self.parents[0]->val;
    const auto& bv = self.parents[1]->val;
    if (self.parents[0]->requires_grad) {
      auto& g = self.parents[0]->ensure_grad();
      for (std::size_t i = 0; i < g.data.size(); ++i)
        g.data[i] += self.grad.data[i] * bv.data[i];
    }
    if (self.parents[1]->requires_grad) {
      auto& g = self.parents[1]->ensure_grad();
      for (std::size_t i = 0; i < g.data.size(); ++i)
        g.data[i] += self.grad.data[i] * av.data[i];
    }
  });
}

inline Var div(const Var& a, const Var& b) {
  check_same_shape(a->val, b->val, "div");
  Tensor out = a->val;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] /= b->val.data[i];
  return make_node(std::move(out), {a, b}, [](VarNode& self) {
    const auto& av = self.parents[0]->val;
    const auto& bv = self.parents[1]->val;
    if (self.parents[0]->requires_grad) {
      auto& g = self.parents[0]->ensure_grad();
      for (std::size_t i = 0; i < g.data.size(); ++i)
        g.data[i] += self.grad.data[i] / bv.data[i];
    }
    if (self.parents[1]->requires_grad) {
      auto& g = self.parents[1]->ensure_grad();
      for (std::size_t i = 0; i < g.data.size(); ++i)
        g.data[i] -= self.grad.data[i] * av.data[i] / (bv.data[i] * bv.data[i]);
    }
  });
}

inline Var mul_scalar(const Var& a, double c) {
  Tensor out = a->val;
  for (auto& v : out.data) v *= c;
  return make_node(std::move(out), {a}, [c](VarNode& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += c * self.grad.data[i];
  });
}

inline Var add_scalar(const Var& a, double c) {
  Tensor out = a->val;
  for (auto& v : out.data) v += c;
  return make_node(std::move(out), {a}, [](VarNode& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += self.grad.data[i];
  });
}

inline Var neg(const Var& a) { return mul_scalar(a, -1.0); }

template <typename F, typename DF>
inline Var unary_elementwise(const Var& a, F f, DF df) {
  Tensor out = a->val;
  for (auto& v : out.data) v = f(v);
  return make_node(std::move(out), {a}, [df](VarNode& self) {
    const auto& x = self.parents[0]->val;
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.data.size(); ++i)
      g.data[i] += self.grad.data[i] * df(x.data[i]);
  });
}

inline Var sigmoid(const Var& a) {
  return unary_elementwise(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double x) {
        double s = 1.0 / (1.0 + std::exp(-x));
        return s * (1.0 - s);
      });
}

inline Var vtanh(const Var& a) {
  return unary_elementwise(a, [](double x) { return std::tanh(x); },
                           [](double x) {
                             double t = std::tanh(x);
                             return 1.0 - t * t;
                           });
}

inline Var vexp(const Var& a) {
  return unary_elementwise(a, [](double x) { return std::exp(x); },
                           [](double x) { return std::exp(x); });
}

inline Var vlog(const Var& a) {
  return unary_elementwise(a, [](double x) { return std::log(x); },
                           [](double x) { return 1.0 / x; });
}

inline Var vabs(const Var& a) {
  return unary_elementwise(a, [](double x) { return std::abs(x); },
                           [](double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

inline Var square(const Var& a) {
  return unary_elementwise(a, [](double x) { return x * x; },
                           [](double x) { return 2.0 * x; });
}

inline Var gelu(const Var& a) {
  constexpr double inv_sqrt2 = 0.7071067811865475244;
  constexpr double inv_sqrt2pi = 0.3989422804014326779;
  return unary_elementwise(
      a,
      [=](double x) { return 0.5 * x * (1.0 + std::erf(x * inv_sqrt2)); },
      [=](double x) {
        double phi = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
        double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
        return phi + x * pdf;
      });
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

inline Var sum_all(const Var& a) {
  Tensor out = Tensor::scalar(a->val.sum());
  return make_node(std::move(out), {a}, [](VarNode& self) {
    double g = self.grad.data[0];
    auto& pg = self.parents[0]->ensure_grad();
    for (auto& v : pg.data) v += g;
  });
}

inline Var mean_all(const Var& a) {
  double n = double(a->val.numel());
  Tensor out = Tensor::scalar(a->val.sum() / n);
  return make_node(std::move(out), {a}, [n](VarNode& self) {
    double g = self.grad.data[0] / n;
    auto& pg = self.parents[0]->ensure_grad();
    for (auto& v : pg.data) v += g;
  });
}

/// Mean over axis 0 of a 2-D tensor: (N,D) -> (D).
inline Var mean_rows(const Var& a) {
  const auto& x = a->val;
  std::size_t n = x.dim(0), d = x.dim(1);
  Tensor out({d});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out.data[j] += x.at(i, j);
  for (auto& v : out.data) v /= double(n);
  return make_node(std::move(out), {a}, [n, d](VarNode& self) {
    auto& pg = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j)
        pg.data[i * d + j] += self.grad.data[j] / double(n);
  });
}

/// Mean over the middle axis of a 3-D tensor: (A,B,C) -> (A,C).
inline Var mean_axis1(const Var& a) {
  const auto& x = a->val;
  std::size_t A = x.dim(0), B = x.dim(1), C = x.dim(2);
  Tensor out({A, C});
  for (std::size_t i = 0; i < A; ++i)
    for (std::size_t j = 0; j < B; ++j)
      for (std::size_t k = 0; k < C; ++k) out.at(i, k) += x.at(i, j, k);
  for (auto& v : out.data) v /= double(B);
  return make_node(std::move(out), {a}, [A, B, C](VarNode& self) {
    auto& pg = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < A; ++i)
      for (std::size_t j = 0; j < B; ++j)
        for (std::size_t k = 0; k < C; ++k)
          pg.data[(i * B + j) * C + k] += self.grad.at(i, k) / double(B);
  });
}

// ---------------------------------------------------------------------------
// Linear algebra and layout
// ---------------------------------------------------------------------------

inline Var matmul(const Var& a, const Var& b) {
  const auto& A = a->val;
  const auto& B = b->val;
  if (A.ndim() != 2 || B.ndim() != 2 || A.dim(1) != B.dim(0))
    throw shape_mismatch("matmul " + shape_str(A.shape) + " x " + shape_str(B.shape));
  std::size_t m = A.dim(0), k = A.dim(1), n = B.dim(1);
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      double av = A.at(i, p);
      if (av == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) out.at(i, j) += av * B.at(p, j);
    }
  return make_node(std::move(out), {a, b}, [m, k, n](VarNode& self) {
    const auto& A = self.parents[0]->val;
    const auto& B = self.parents[1]->val;
    if (self.parents[0]->requires_grad) {
      auto& ga = self.parents[0]->ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          double g = self.grad.at(i, j);
          if (g == 0.0) continue;
          for (std::size_t p = 0; p < k; ++p) ga.data[i * k + p] += g * B.at(p, j);
        }
    }
    if (self.parents[1]->requires_grad) {
      auto& gb = self.parents[1]->ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double av = A.at(i, p);
          if (av == 0.0) continue;
          for (std::size_t j = 0; j < n; ++j)
            gb.data[p * n + j] += av * self.grad.at(i, j);
        }
    }
  });
}

inline Var transpose2d(const Var& a) {
  const auto& x = a->val;
  std::size_t n = x.dim(0), d = x.dim(1);
  Tensor out({d, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out.at(j, i) = x.at(i, j);
  return make_node(std::move(out), {a}, [n, d](VarNode& self) {
    auto& pg = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) pg.data[i * d + j] += self.grad.at(j, i);
  });
}

inline Var reshape(const Var& a, Shape s) {
  Tensor out = a->val.reshaped(std::move(s));
  return make_node(std::move(out), {a}, [](VarNode& self) {
    auto& pg = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < pg.data.size(); ++i) pg.data[i] += self.grad.data[i];
  });
}

inline Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw invalid_input("concat_rows: empty input");
  std::size_t d = parts[0]->val.dim(1), total = 0;
  for (const auto& p : parts) {
    if (p->val.ndim() != 2 || p->val.dim(1) != d)
      throw shape_mismatch("concat_rows: inconsistent widths");
    total += p->val.dim(0);
  }
  Tensor out({total, d});
  std::size_t r = 0;
  for (const auto& p : parts) {
    std::copy(p->val.data.begin(), p->val.data.end(), out.data.begin() + r * d);
    r += p->val.dim(0);
  }
  std::vector<Var> parents(parts.begin(), parts.end());
  return make_node(std::move(out), std::move(parents), [d](VarNode& self) {
    std::size_t r = 0;
    for (auto& p : self.parents) {
      std::size_t rows = p->val.dim(0);
      if (p->requires_grad) {
        auto& pg = p->ensure_grad();
        for (std::size_t i = 0; i < rows * d; ++i)
          pg.data[i] += self.grad.data[r * d + i];
      }
      r += rows;
    }
  });
}

inline Var slice_rows(const Var& a, std::size_t r0, std::size_t r1) {
  const auto& x = a->val;
  if (r1 > x.dim(0) || r0 > r1) throw invalid_input("slice_rows: bad range");
  std::size_t d = x.dim(1);
  Tensor out({r1 - r0, d});
  std::copy(x.data.begin() + r0 * d, x.data.begin() + r1 * d, out.data.begin());
  return make_node(std::move(out), {a}, [r0, d](VarNode& self) {
    auto& pg = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < self.grad.data.size(); ++i)
      pg.data[r0 * d + i] += self.grad.data[i];
  });
}

inline Var slice_cols(const Var& a, std::size_t c0, std::size_t c1) {
  const auto& x = a->val;
  std::size_t n = x.dim(0), d = x.dim(1);
  if (c1 > d || c0 > c1) throw invalid_input("slice_cols: bad range");
  Tensor out({n, c1 - c0});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = c0; j < c1; ++j) out.at(i, j - c0) = x.at(i, j);
  return make_node(std::move(out), {a}, [c0, d](VarNode& self) {
    auto& pg = self.parents[0]->ensure_grad();
    std::size_t n = self.grad.dim(0), w = self.grad.dim(1);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < w; ++j)
        pg.data[i * d + c0 + j] += self.grad.at(i, j);
  });
}

inline Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw invalid_input("concat_cols: empty input");
  std::size_t n = parts[0]->val.dim(0), total = 0;
  for (const auto& p : parts) {
    if (p->val.ndim() != 2 || p->val.dim(0) != n)
      throw shape_mismatch("concat_cols: inconsistent heights");
    total += p->val.dim(1);
  }
  Tensor out({n, total});
  std::size_t c = 0;
  for (const auto& p : parts) {
    std::size_t w = p->val.dim(1);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < w; ++j) out.at(i, c + j) = p->val.at(i, j);
    c += w;
  }
  std::vector<Var> parents(parts.begin(), parts.end());
  return make_node(std::move(out), std::move(parents), [n, total](VarNode& self) {
    std::size_t c = 0;
    for (auto& p : self.parents) {
      std::size_t w = p->val.dim(1);
      if (p->requires_grad) {
        auto& pg = p->ensure_grad();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < w; ++j)
            pg.data[i * w + j] += self.grad.data[i * total + c + j];
      }
      c += w;
    }
  });
}

/// Gather rows by index; duplicates allowed (nearest-neighbor upsampling).
inline Var gather_rows(const Var& a, std::vector<std::size_t> idx) {
  const auto& x = a->val;
  std::size_t d = x.dim(1);
  Tensor out({idx.size(), d});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= x.dim(0)) throw invalid_input("gather_rows: index out of range");
    std::copy(x.data.begin() + idx[i] * d, x.data.begin() + (idx[i] + 1) * d,
              out.data.begin() + i * d);
  }
  return make_node(std::move(out), {a}, [idx = std::move(idx), d](VarNode& self) {
    auto& pg = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < d; ++j)
        pg.data[idx[i] * d + j] += self.grad.data[i * d + j];
  });
}

/// Zero-pad rows at the bottom: (N,D) -> (N+extra,D).
inline Var pad_rows(const Var& a, std::size_t extra) {
  const auto& x = a->val;
  std::size_t n = x.dim(0), d = x.dim(1);
  Tensor out({n + extra, d});
  std::copy(x.data.begin(), x.data.end(), out.data.begin());
  return make_node(std::move(out), {a}, [n, d](VarNode& self) {
    auto& pg = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < n * d; ++i) pg.data[i] += self.grad.data[i];
  });
}

/// Broadcast-add a row vector to every row of a 2-D tensor.
inline Var add_rowvec(const Var& a, const Var& v) {
  const auto& x = a->val;
  std::size_t n = x.dim(0), d = x.dim(1);
  if (v->val.numel() != d) throw shape_mismatch("add_rowvec width mismatch");
  Tensor out = x;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out.data[i * d + j] += v->val.data[j];
  return make_node(std::move(out), {a, v}, [n, d](VarNode& self) {
    if (self.parents[0]->requires_grad) {
      auto& pg = self.parents[0]->ensure_grad();
      for (std::size_t i = 0; i < pg.data.size(); ++i) pg.data[i] += self.grad.data[i];
    }
    if (self.parents[1]->requires_grad) {
      auto& vg = self.parents[1]->ensure_grad();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) vg.data[j] += self.grad.data[i * d + j];
    }
  });
}

/// Scale row i of a 2-D tensor by v[i]; gradient flows into both inputs.
inline Var mul_colvec(const Var& a, const Var& v) {
  const auto& x = a->val;
  std::size_t n = x.dim(0), d = x.dim(1);
  if (v->val.numel() != n) throw shape_mismatch("mul_colvec length mismatch");
  Tensor out = x;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out.data[i * d + j] *= v->val.data[i];
  return make_node(std::move(out), {a, v}, [n, d](VarNode& self) {
    const auto& x = self.parents[0]->val;
    const auto& v = self.parents[1]->val;
    if (self.parents[0]->requires_grad) {
      auto& pg = self.parents[0]->ensure_grad();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j)
          pg.data[i * d + j] += self.grad.data[i * d + j] * v.data[i];
    }
    if (self.parents[1]->requires_grad) {
      auto& vg = self.parents[1]->ensure_grad();
      for (std::size_t i = 0; i < n; ++i) {
        double s = 0;
        for (std::size_t j = 0; j < d; ++j)
          s += self.grad.data[i * d + j] * x.data[i * d + j];
        vg.data[i] += s;
      }
    }
  });
}

/// grid - e broadcast: out[i] = grid[i] - e, where e is a scalar Var.
inline Var sub_from_grid(const Tensor& grid, const Var& e) {
  if (e->val.numel() != 1) throw invalid_input("sub_from_grid expects scalar");
  Tensor out = grid;
  for (auto& v : out.data) v -= e->val.data[0];
  return make_node(std::move(out), {e}, [](VarNode& self) {
    auto& eg = self.parents[0]->ensure_grad();
    double s = 0;
    for (double g : self.grad.data) s += g;
    eg.data[0] -= s;
  });
}

/// Extract element (i) of a 1-D tensor as a scalar Var.
inline Var at_index(const Var& a, std::size_t i) {
  if (i >= a->val.numel()) throw invalid_input("at_index out of range");
  Tensor out = Tensor::scalar(a->val.data[i]);
  return make_node(std::move(out), {a}, [i](VarNode& self) {
    self.parents[0]->ensure_grad().data[i] += self.grad.data[0];
  });
}

/// Concatenate scalar Vars into a 1-D vector.
inline Var stack_scalars(const std::vector<Var>& xs) {
  Tensor out({xs.size()});
  for (std::size_t i = 0; i < xs.size(); ++i) out.data[i] = xs[i]->val.data[0];
  std::vector<Var> parents(xs.begin(), xs.end());
  return make_node(std::move(out), std::move(parents), [](VarNode& self) {
    for (std::size_t i = 0; i < self.parents.size(); ++i)
      if (self.parents[i]->requires_grad)
        self.parents[i]->ensure_grad().data[0] += self.grad.data[i];
  });
}

// ---------------------------------------------------------------------------
// Softmax, layer norm, losses
// ---------------------------------------------------------------------------

/// Row-wise softmax of a 2-D tensor. If mask is given (same shape, 0/1),
/// masked-out entries get probability exactly zero and normalization runs
/// over the allowed set only.
inline Var softmax_rows(const Var& a, const Tensor* mask = nullptr) {
  const auto& x = a->val;
  std::size_t n = x.dim(0), d = x.dim(1);
  if (mask && !mask->same_shape(x)) throw shape_mismatch("softmax mask shape");
  Tensor out({n, d});
  for (std::size_t i = 0; i < n; ++i) {
    double mx = -1e308;
    bool any = false;
    for (std::size_t j = 0; j < d; ++j) {
      if (mask && mask->at(i, j) == 0.0) continue;
      mx = std::max(mx, x.at(i, j));
      any = true;
    }
    if (!any) throw invalid_input("softmax_rows: fully masked row");
    double z = 0;
    for (std::size_t j = 0; j < d; ++j) {
      if (mask && mask->at(i, j) == 0.0) continue;
      z += std::exp(x.at(i, j) - mx);
    }
    for (std::size_t j = 0; j < d; ++j) {
      if (mask && mask->at(i, j) == 0.0) continue;
      out.at(i, j) = std::exp(x.at(i, j) - mx) / z;
    }
  }
  Tensor maskcopy = mask ? *mask : Tensor();
  Var node = make_node(out, {a}, [n, d, maskcopy](VarNode& self) {
    auto& pg = self.parents[0]->ensure_grad();
    const Tensor& p = self.val;
    for (std::size_t i = 0; i < n; ++i) {
      double dotgp = 0;
      for (std::size_t j = 0; j < d; ++j) dotgp += self.grad.at(i, j) * p.at(i, j);
      for (std::size_t j = 0; j < d; ++j) {
        if (maskcopy.numel() && maskcopy.at(i, j) == 0.0) continue;
        pg.data[i * d + j] += p.at(i, j) * (self.grad.at(i, j) - dotgp);
      }
    }
  });
  return node;
}

/// Per-row layer normalization over the feature axis with learnable
/// gain and bias.
inline Var layer_norm_rows(const Var& a, const Var& gain, const Var& bias,
                           double eps = 1e-5) {
  const auto& x = a->val;
  std::size_t n = x.dim(0), d = x.dim(1);
  if (gain->val.numel() != d || bias->val.numel() != d)
    throw shape_mismatch("layer_norm gain/bias width");
  Tensor out({n, d});
  Tensor mu({n}), inv_sigma({n});
  for (std::size_t i = 0; i < n; ++i) {
    double m = 0;
    for (std::size_t j = 0; j < d; ++j) m += x.at(i, j);
    m /= double(d);
    double v = 0;
    for (std::size_t j = 0; j < d; ++j) {
      double c = x.at(i, j) - m;
      v += c * c;
    }
    v /= double(d);
    double is = 1.0 / std::sqrt(v + eps);
    mu.data[i] = m;
    inv_sigma.data[i] = is;
    for (std::size_t j = 0; j < d; ++j)
      out.at(i, j) = (x.at(i, j) - m) * is * gain->val.data[j] + bias->val.data[j];
  }
  return make_node(std::move(out), {a, gain, bias},
                   [n, d, mu, inv_sigma](VarNode& self) {
    const auto& x = self.parents[0]->val;
    const auto& gain = self.parents[1]->val;
    for (std::size_t i = 0; i < n; ++i) {
      double is = inv_sigma.data[i], m = mu.data[i];
      if (self.parents[0]->requires_grad) {
        auto& pg = self.parents[0]->ensure_grad();
        // dL/dx for y = (x-mu)*is*g + b with mu, is per row
        double sum_gh = 0, sum_ghx = 0;
        for (std::size_t j = 0; j < d; ++j) {
          double gh = self.grad.at(i, j) * gain.data[j];
          sum_gh += gh;
          sum_ghx += gh * (x.at(i, j) - m) * is;
        }
        for (std::size_t j = 0; j < d; ++j) {
          double gh = self.grad.at(i, j) * gain.data[j];
          double xh = (x.at(i, j) - m) * is;
          pg.data[i * d + j] +=
              is * (gh - sum_gh / double(d) - xh * sum_ghx / double(d));
        }
      }
      if (self.parents[1]->requires_grad) {
        auto& gg = self.parents[1]->ensure_grad();
        for (std::size_t j = 0; j < d; ++j)
          gg.data[j] += self.grad.at(i, j) * (x.at(i, j) - m) * is;
      }
      if (self.parents[2]->requires_grad) {
        auto& bg = self.parents[2]->ensure_grad();
        for (std::size_t j = 0; j < d; ++j) bg.data[j] += self.grad.at(i, j);
      }
    }
  });
}

/// Mean SmoothL1 (Huber with transition point 1) between equal-shape tensors.
inline Var smooth_l1_mean(const Var& a, const Var& b) {
  check_same_shape(a->val, b->val, "smooth_l1");
  double n = double(a->val.numel());
  double acc = 0;
  for (std::size_t i = 0; i < a->val.data.size(); ++i) {
    double r = a->val.data[i] - b->val.data[i];
    double ar = std::abs(r);
    acc += ar < 1.0 ? 0.5 * r * r : ar - 0.5;
  }
  Tensor out = Tensor::scalar(acc / n);
  return make_node(std::move(out), {a, b}, [n](VarNode& self) {
    const auto& av = self.parents[0]->val;
    const auto& bv = self.parents[1]->val;
    double g = self.grad.data[0] / n;
    for (int pi = 0; pi < 2; ++pi) {
      if (!self.parents[pi]->requires_grad) continue;
      auto& pg = self.parents[pi]->ensure_grad();
      double sign = pi == 0 ? 1.0 : -1.0;
      for (std::size_t i = 0; i < pg.data.size(); ++i) {
        double r = av.data[i] - bv.data[i];
        double d = std::abs(r) < 1.0 ? r : (r > 0 ? 1.0 : -1.0);
        pg.data[i] += sign * g * d;
      }
    }
  });
}

/// Cosine similarity between every row of h (N,D) and every row of p (M,D).
/// Rows with near-zero norm yield similarity 0 with zero gradient.
inline Var cosine_rows(const Var& h, const Var& p, double eps = 1e-12) {
  const auto& H = h->val;
  const auto& P = p->val;
  if (H.dim(1) != P.dim(1)) throw shape_mismatch("cosine_rows feature dims");
  std::size_t n = H.dim(0), m = P.dim(0), d = H.dim(1);
  Tensor out({n, m});
  std::vector<double> hn(n), pn(m);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0;
    for (std::size_t k = 0; k < d; ++k) s += H.at(i, k) * H.at(i, k);
    hn[i] = std::sqrt(s);
  }
  for (std::size_t j = 0; j < m; ++j) {
    double s = 0;
    for (std::size_t k = 0; k < d; ++k) s += P.at(j, k) * P.at(j, k);
    pn[j] = std::sqrt(s);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      if (hn[i] < eps || pn[j] < eps) continue;
      double s = 0;
      for (std::size_t k = 0; k < d; ++k) s += H.at(i, k) * P.at(j, k);
      out.at(i, j) = s / (hn[i] * pn[j]);
    }
  return make_node(out, {h, p}, [n, m, d, hn, pn, eps, out](VarNode& self) {
    const auto& H = self.parents[0]->val;
    const auto& P = self.parents[1]->val;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        if (hn[i] < eps || pn[j] < eps) continue;
        double g = self.grad.at(i, j);
        if (g == 0.0) continue;
        double c = out.at(i, j);
        if (self.parents[0]->requires_grad) {
          auto& hg = self.parents[0]->ensure_grad();
          for (std::size_t k = 0; k < d; ++k)
            hg.data[i * d + k] += g * (P.at(j, k) / (hn[i] * pn[j]) -
                                       c * H.at(i, k) / (hn[i] * hn[i]));
        }
        if (self.parents[1]->requires_grad) {
          auto& pg = self.parents[1]->ensure_grad();
          for (std::size_t k = 0; k < d; ++k)
            pg.data[j * d + k] += g * (H.at(i, k) / (hn[i] * pn[j]) -
                                       c * P.at(j, k) / (pn[j] * pn[j]));
        }
      }
  });
}

}  // namespace left::ag
