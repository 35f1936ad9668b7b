#pragma once

#include <cmath>

#include "left/nn.hpp"

// Prototype banks with soft cosine assignments. Assignments feed three
// places: Jensen-Shannon cross-view evidence, an entropy-based uncertainty
// gate, and the curriculum memory read that stabilizes decoding.

namespace left {

struct PrototypeBank {
  ag::Var vectors;  // (M, D)
  double gamma = 10.0;

  static PrototypeBank create(nn::ParamStore& ps, const std::string& name,
                              std::size_t m, std::size_t d, double gamma,
                              std::mt19937_64& rng) {
    if (m < 2) throw invalid_input("prototype bank needs at least 2 rows");
    Tensor init = randn({m, d}, rng);
    for (std::size_t i = 0; i < m; ++i) {
      double n = 0;
      for (std::size_t j = 0; j < d; ++j) n += init.at(i, j) * init.at(i, j);
      n = std::sqrt(n) + 1e-12;
      for (std::size_t j = 0; j < d; ++j) init.at(i, j) /= n;
    }
    PrototypeBank b;
    b.gamma = gamma;
    b.vectors = ps.add(name, std::move(init));
    return b;
  }

  std::size_t size() const { return vectors->val.dim(0); }
};

/// Row-stochastic soft assignments: softmax over gamma-scaled cosine
/// similarities. Zero-norm tokens contribute cosine 0 against every
/// prototype and therefore a uniform row.
inline ag::Var proto_assign(const ag::Var& h, const PrototypeBank& bank) {
  if (h->val.dim(1) != bank.vectors->val.dim(1))
    throw shape_mismatch("proto_assign: feature width mismatch");
  return ag::softmax_rows(ag::mul_scalar(ag::cosine_rows(h, bank.vectors), bank.gamma));
}

/// Linear interpolation of assignment rows to a new length, then row
/// renormalization. Inference-side utility, plain tensors.
inline Tensor align_assignments(const Tensor& p, std::size_t target_len) {
  if (target_len < 1) throw invalid_input("align_assignments: target must be >= 1");
  std::size_t n = p.dim(0), m = p.dim(1);
  if (n == target_len) return p;
  Tensor out({target_len, m});
  for (std::size_t i = 0; i < target_len; ++i) {
    double pos = target_len == 1 ? 0.0
                                 : double(i) * double(n - 1) / double(target_len - 1);
    std::size_t lo = std::min(std::size_t(pos), n - 1);
    std::size_t hi = std::min(lo + 1, n - 1);
    double w = pos - double(lo);
    double rowsum = 0;
    for (std::size_t j = 0; j < m; ++j) {
      double v = (1.0 - w) * p.at(lo, j) + w * p.at(hi, j);
      out.at(i, j) = v;
      rowsum += v;
    }
    if (rowsum > 0)
      for (std::size_t j = 0; j < m; ++j) out.at(i, j) /= rowsum;
  }
  return out;
}

namespace detail {
inline double kl_to_mid(const Tensor& p, const Tensor& q, std::size_t row) {
  std::size_t m = p.dim(1);
  double acc = 0;
  for (std::size_t j = 0; j < m; ++j) {
    double pj = p.at(row, j);
    if (pj <= 0) continue;
    double mid = 0.5 * (pj + q.at(row, j));
    acc += pj * std::log(pj / mid);
  }
  return acc;
}
}  // namespace detail

/// Jensen-Shannon divergence per row, natural log units, bounded by ln 2.
inline Tensor js_evidence(const Tensor& p_t, const Tensor& p_f) {
  if (!p_t.same_shape(p_f)) throw shape_mismatch("js_evidence: shape mismatch");
  std::size_t n = p_t.dim(0);
  Tensor d({n});
  for (std::size_t i = 0; i < n; ++i)
    d.data[i] = 0.5 * detail::kl_to_mid(p_t, p_f, i) +
                0.5 * detail::kl_to_mid(p_f, p_t, i);
  return d;
}

/// Normalized mean assignment entropy in [0,1]; 0 for one-hot rows, 1 for
/// uniform rows. Higher means less certain.
inline Tensor uncertainty_gate(const Tensor& p_t, const Tensor& p_f) {
  if (!p_t.same_shape(p_f)) throw shape_mismatch("uncertainty_gate: shape mismatch");
  std::size_t n = p_t.dim(0), m = p_t.dim(1);
  auto entropy = [m](const Tensor& p, std::size_t i) {
    double h = 0;
    for (std::size_t j = 0; j < m; ++j) {
      double v = p.at(i, j);
      if (v > 0) h -= v * std::log(v);
    }
    return h;
  };
  Tensor g({n});
  double norm = std::log(double(m));
  for (std::size_t i = 0; i < n; ++i)
    g.data[i] = 0.5 * (entropy(p_t, i) + entropy(p_f, i)) / norm;
  return g;
}

/// Memory read: time-averaged assignments against the bank, z = mean(p) P.
inline ag::Var memory_read(const ag::Var& p, const PrototypeBank& bank) {
  ag::Var mean = ag::mean_rows(p);  // (M)
  ag::Var row = ag::reshape(mean, {1, bank.size()});
  return ag::reshape(ag::matmul(row, bank.vectors), {bank.vectors->val.dim(1)});
}

/// Curriculum mixing (1-lambda) z + lambda z_mem.
inline ag::Var memory_mix(const ag::Var& z, const ag::Var& z_mem, double lambda) {
  if (lambda < 0.0 || lambda > 1.0)
    throw invalid_input("memory_mix: lambda must be in [0,1]");
  return ag::add(ag::mul_scalar(z, 1.0 - lambda), ag::mul_scalar(z_mem, lambda));
}

inline Tensor memory_mix(const Tensor& z, const Tensor& z_mem, double lambda) {
  if (lambda < 0.0 || lambda > 1.0)
    throw invalid_input("memory_mix: lambda must be in [0,1]");
  if (!z.same_shape(z_mem)) throw shape_mismatch("memory_mix: shape mismatch");
  Tensor out = z;
  for (std::size_t i = 0; i < out.numel(); ++i)
    out.data[i] = (1.0 - lambda) * z.data[i] + lambda * z_mem.data[i];
  return out;
}

}  // namespace left
