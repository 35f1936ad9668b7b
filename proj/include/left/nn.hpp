#pragma once

#include <random>
#include <string>
#include <vector>

#include "left/autograd.hpp"
#include "left/tensor.hpp"

// Small layer library on top of the autograd tape: named parameter store,
// linear / convolutional layers, layer norm, multi-head attention.

namespace left::nn {

using ag::Var;

struct ParamStore {
  std::vector<std::pair<std::string, Var>> items;

  Var add(const std::string& name, Tensor init) {
    for (auto& [n, v] : items)
      if (n == name) throw invalid_input("duplicate parameter name: " + name);
    Var v = ag::param(std::move(init));
    items.emplace_back(name, v);
    return v;
  }

  Var find(const std::string& name) const {
    for (auto& [n, v] : items)
      if (n == name) return v;
    throw invalid_input("unknown parameter: " + name);
  }

  std::size_t total_params() const {
    std::size_t n = 0;
    for (auto& [_, v] : items) n += v->val.numel();
    return n;
  }

  void zero_grads() {
    for (auto& [_, v] : items) v->zero_grad();
  }

  bool all_grads_finite() const {
    for (auto& [_, v] : items)
      if (!v->grad.data.empty() && !v->grad.all_finite()) return false;
    return true;
  }
};

inline Tensor glorot(const Shape& s, std::size_t fan_in, std::size_t fan_out,
                     std::mt19937_64& rng) {
  return randn(s, rng, std::sqrt(2.0 / double(fan_in + fan_out)));
}

struct Linear {
  Var w;  // (in, out)
  Var b;  // (out)

  static Linear create(ParamStore& ps, const std::string& name, std::size_t in,
                       std::size_t out, std::mt19937_64& rng) {
    Linear l;
    l.w = ps.add(name + ".w", glorot({in, out}, in, out, rng));
    l.b = ps.add(name + ".b", Tensor({out}));
    return l;
  }

  Var operator()(const Var& x) const { return ag::add_rowvec(ag::matmul(x, w), b); }
};

/// 1-D convolution with same padding over (T, Cin) -> (T, Cout).
struct Conv1d {
  Var w;  // (Cout, Cin, ks)
  Var b;  // (Cout)
  std::size_t ks = 1;

  static Conv1d create(ParamStore& ps, const std::string& name, std::size_t cin,
                       std::size_t cout, std::size_t ks, std::mt19937_64& rng) {
    if (ks % 2 == 0) throw invalid_input("conv1d: kernel size must be odd");
    Conv1d c;
    c.ks = ks;
    c.w = ps.add(name + ".w", glorot({cout, cin, ks}, cin * ks, cout, rng));
    c.b = ps.add(name + ".b", Tensor({cout}));
    return c;
  }

  Var operator()(const Var& x) const {
    const Tensor& X = x->val;
    const Tensor& W = w->val;
    std::size_t t = X.dim(0), cin = X.dim(1), cout = W.dim(0);
    if (W.dim(1) != cin) throw shape_mismatch("conv1d channel mismatch");
    std::size_t k = ks, off = (k - 1) / 2;
    Tensor out({t, cout});
    for (std::size_t i = 0; i < t; ++i)
      for (std::size_t o = 0; o < cout; ++o) {
        double acc = b->val.data[o];
        for (std::size_t j = 0; j < k; ++j) {
          std::ptrdiff_t src = std::ptrdiff_t(i + j) - std::ptrdiff_t(off);
          if (src < 0 || src >= std::ptrdiff_t(t)) continue;
          for (std::size_t ci = 0; ci < cin; ++ci)
            acc += W.at(o, ci, j) * X.at(std::size_t(src), ci);
        }
        out.at(i, o) = acc;
      }
    return ag::make_node(std::move(out), {x, w, b},
                         [t, cin, cout, k, off](ag::VarNode& self) {
      const Tensor& X = self.parents[0]->val;
      const Tensor& W = self.parents[1]->val;
      bool need_x = self.parents[0]->requires_grad;
      bool need_w = self.parents[1]->requires_grad;
      bool need_b = self.parents[2]->requires_grad;
      Tensor* gx = need_x ? &self.parents[0]->ensure_grad() : nullptr;
      Tensor* gw = need_w ? &self.parents[1]->ensure_grad() : nullptr;
      Tensor* gb = need_b ? &self.parents[2]->ensure_grad() : nullptr;
      for (std::size_t i = 0; i < t; ++i)
        for (std::size_t o = 0; o < cout; ++o) {
          double g = self.grad.at(i, o);
          if (g == 0.0) continue;
          if (gb) gb->data[o] += g;
          for (std::size_t j = 0; j < k; ++j) {
            std::ptrdiff_t src = std::ptrdiff_t(i + j) - std::ptrdiff_t(off);
            if (src < 0 || src >= std::ptrdiff_t(t)) continue;
            for (std::size_t ci = 0; ci < cin; ++ci) {
              if (gx) gx->at(std::size_t(src), ci) += g * W.at(o, ci, j);
              if (gw) gw->at(o, ci, j) += g * X.at(std::size_t(src), ci);
            }
          }
        }
    });
  }
};

/// 2-D convolution with same padding over (Cin, H, W) -> (Cout, H, W).
struct Conv2d {
  Var w;  // (Cout, Cin, kh, kw)
  Var b;  // (Cout)
  std::size_t kh = 3, kw = 3;

  static Conv2d create(ParamStore& ps, const std::string& name, std::size_t cin,
                       std::size_t cout, std::size_t kh, std::size_t kw,
                       std::mt19937_64& rng) {
    if (kh % 2 == 0 || kw % 2 == 0) throw invalid_input("conv2d: kernels must be odd");
    Conv2d c;
    c.kh = kh;
    c.kw = kw;
    c.w = ps.add(name + ".w", glorot({cout, cin, kh, kw}, cin * kh * kw, cout, rng));
    c.b = ps.add(name + ".b", Tensor({cout}));
    return c;
  }

  Var operator()(const Var& x) const {
    const Tensor& X = x->val;
    const Tensor& W = w->val;
    std::size_t cin = X.dim(0), h = X.dim(1), wd = X.dim(2), cout = W.dim(0);
    if (W.dim(1) != cin) throw shape_mismatch("conv2d channel mismatch");
    std::size_t oh = (kh - 1) / 2, ow = (kw - 1) / 2;
    std::size_t KH = kh, KW = kw;
    Tensor out({cout, h, wd});
    for (std::size_t o = 0; o < cout; ++o)
      for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < wd; ++j) {
          double acc = b->val.data[o];
          for (std::size_t a = 0; a < KH; ++a) {
            std::ptrdiff_t si = std::ptrdiff_t(i + a) - std::ptrdiff_t(oh);
            if (si < 0 || si >= std::ptrdiff_t(h)) continue;
            for (std::size_t bb = 0; bb < KW; ++bb) {
              std::ptrdiff_t sj = std::ptrdiff_t(j + bb) - std::ptrdiff_t(ow);
              if (sj < 0 || sj >= std::ptrdiff_t(wd)) continue;
              for (std::size_t ci = 0; ci < cin; ++ci)
                acc += W.at(o, ci, a, bb) * X.at(ci, std::size_t(si), std::size_t(sj));
            }
          }
          out.at(o, i, j) = acc;
        }
    return ag::make_node(std::move(out), {x, w, b},
                         [cin, h, wd, cout, KH, KW, oh, ow](ag::VarNode& self) {
      const Tensor& X = self.parents[0]->val;
      const Tensor& W = self.parents[1]->val;
      bool need_x = self.parents[0]->requires_grad;
      bool need_w = self.parents[1]->requires_grad;
      bool need_b = self.parents[2]->requires_grad;
      Tensor* gx = need_x ? &self.parents[0]->ensure_grad() : nullptr;
      Tensor* gw = need_w ? &self.parents[1]->ensure_grad() : nullptr;
      Tensor* gb = need_b ? &self.parents[2]->ensure_grad() : nullptr;
      for (std::size_t o = 0; o < cout; ++o)
        for (std::size_t i = 0; i < h; ++i)
          for (std::size_t j = 0; j < wd; ++j) {
            double g = self.grad.at(o, i, j);
            if (g == 0.0) continue;
            if (gb) gb->data[o] += g;
            for (std::size_t a = 0; a < KH; ++a) {
              std::ptrdiff_t si = std::ptrdiff_t(i + a) - std::ptrdiff_t(oh);
              if (si < 0 || si >= std::ptrdiff_t(h)) continue;
              for (std::size_t bb = 0; bb < KW; ++bb) {
                std::ptrdiff_t sj = std::ptrdiff_t(j + bb) - std::ptrdiff_t(ow);
                if (sj < 0 || sj >= std::ptrdiff_t(wd)) continue;
                for (std::size_t ci = 0; ci < cin; ++ci) {
                  if (gx) gx->at(ci, std::size_t(si), std::size_t(sj)) += g * W.at(o, ci, a, bb);
                  if (gw) gw->at(o, ci, a, bb) += g * X.at(ci, std::size_t(si), std::size_t(sj));
                }
              }
            }
          }
    });
  }
};

struct LayerNorm {
  Var gain, bias;

  static LayerNorm create(ParamStore& ps, const std::string& name, std::size_t d) {
    LayerNorm ln;
    ln.gain = ps.add(name + ".gain", Tensor({d}, 1.0));
    ln.bias = ps.add(name + ".bias", Tensor({d}));
    return ln;
  }

  Var operator()(const Var& x) const { return ag::layer_norm_rows(x, gain, bias); }
};

/// Multi-head attention; keys and values come from the same stream. An
/// optional 0/1 mask restricts which keys each query may attend to.
struct MultiheadAttention {
  Linear wq, wk, wv, wo;
  std::size_t heads = 4;
  std::size_t d_model = 0;

  static MultiheadAttention create(ParamStore& ps, const std::string& name,
                                   std::size_t d, std::size_t heads,
                                   std::mt19937_64& rng) {
    if (d % heads != 0) throw invalid_input("attention: heads must divide d_model");
    MultiheadAttention m;
    m.heads = heads;
    m.d_model = d;
    m.wq = Linear::create(ps, name + ".q", d, d, rng);
    m.wk = Linear::create(ps, name + ".k", d, d, rng);
    m.wv = Linear::create(ps, name + ".v", d, d, rng);
    m.wo = Linear::create(ps, name + ".o", d, d, rng);
    return m;
  }

  Var operator()(const Var& queries, const Var& keys, const Tensor* mask = nullptr) const {
    std::size_t dh = d_model / heads;
    Var Q = wq(queries), K = wk(keys), V = wv(keys);
    std::vector<Var> heads_out;
    for (std::size_t h = 0; h < heads; ++h) {
      Var qh = ag::slice_cols(Q, h * dh, (h + 1) * dh);
      Var kh = ag::slice_cols(K, h * dh, (h + 1) * dh);
      Var vh = ag::slice_cols(V, h * dh, (h + 1) * dh);
      Var scores = ag::mul_scalar(ag::matmul(qh, ag::transpose2d(kh)),
                                  1.0 / std::sqrt(double(dh)));
      Var probs = ag::softmax_rows(scores, mask);
      heads_out.push_back(ag::matmul(probs, vh));
    }
    return wo(ag::concat_cols(heads_out));
  }
};

/// Two-layer MLP with GELU in between.
struct Mlp2 {
  Linear l1, l2;

  static Mlp2 create(ParamStore& ps, const std::string& name, std::size_t in,
                     std::size_t hidden, std::size_t out, std::mt19937_64& rng) {
    Mlp2 m;
    m.l1 = Linear::create(ps, name + ".l1", in, hidden, rng);
    m.l2 = Linear::create(ps, name + ".l2", hidden, out, rng);
    return m;
  }

  Var operator()(const Var& x) const { return l2(ag::gelu(l1(x))); }
};

}  // namespace left::nn
