#pragma once

#include <vector>

#include "left/autograd.hpp"
#include "left/fft.hpp"
#include "left/stft.hpp"
#include "left/tensor.hpp"

// Nyquist-constrained learnable filterbank. Band edges are produced by a
// monotone recursion that keeps every edge at or below its band's Nyquist
// cutoff, soft masks partition the covered band, and each band-limited
// component is synthesized back to the time domain and decimated.

namespace left {

struct FilterbankState {
  Tensor u;                      // unconstrained edge parameters, length K
  std::vector<std::size_t> r;    // downsampling factors, coarse to fine
  double tau = 0.01;
  double eps = 1e-8;

  std::size_t bands() const { return r.size(); }

  void validate() const {
    if (r.empty()) throw invalid_input("filterbank: empty factor list");
    if (u.numel() != r.size())
      throw invalid_input("filterbank: u length must equal band count");
    for (std::size_t k = 0; k < r.size(); ++k) {
      if (r[k] < 1) throw invalid_input("filterbank: factors must be >= 1");
      if (k > 0 && r[k] > r[k - 1])
        throw invalid_input("filterbank: factors must be ordered coarse to fine");
    }
    if (tau <= 0) throw invalid_input("filterbank: tau must be positive");
  }
};

/// c_k = 1/(2 r_k); nondecreasing when r is ordered coarse to fine.
inline Tensor nyquist_cutoffs(const std::vector<std::size_t>& r) {
  if (r.empty()) throw invalid_input("nyquist_cutoffs: empty factor list");
  Tensor c({r.size()});
  for (std::size_t k = 0; k < r.size(); ++k) {
    if (r[k] < 1) throw invalid_input("nyquist_cutoffs: factors must be >= 1");
    if (k > 0 && r[k] > r[k - 1])
      throw invalid_input("nyquist_cutoffs: factors must be ordered coarse to fine");
    c.data[k] = 0.5 / double(r[k]);
  }
  return c;
}

/// Normalized one-sided frequency grid of a length-n transform: bin i sits
/// at i/n, up to and including the Nyquist bin.
inline Tensor freq_grid(std::size_t n) {
  std::size_t f = fft::onesided_bins(n);
  Tensor g({f});
  for (std::size_t i = 0; i < f; ++i) g.data[i] = double(i) / double(n);
  return g;
}

/// Edge recursion e_k = e_{k-1} + (c_k - e_{k-1}) * sigmoid(u_k), e_0 = 0.
/// Returns the K+1 edges as a vector Var.
inline ag::Var learned_edges_var(const ag::Var& u, const Tensor& cutoffs) {
  using namespace ag;
  std::size_t K = cutoffs.numel();
  std::vector<Var> edges;
  edges.push_back(constant(Tensor::scalar(0.0)));
  for (std::size_t k = 0; k < K; ++k) {
    Var s = sigmoid(at_index(u, k));
    Var gap = add_scalar(neg(edges.back()), cutoffs.data[k]);  // c_k - e_{k-1}
    edges.push_back(add(edges.back(), mul(gap, s)));
  }
  return stack_scalars(edges);
}

inline Tensor learned_edges(const FilterbankState& st) {
  st.validate();
  return learned_edges_var(ag::constant(st.u), nyquist_cutoffs(st.r))->val;
}

struct BandMasks {
  Tensor values;  // (K, F) normalized masks on the grid
  Tensor edges;   // length K+1
};

/// Soft masks from edges: m_k(f) = s_tau(f - e_{k-1}) - s_tau(f - e_k),
/// normalized by the mask sum plus eps.
inline std::vector<ag::Var> band_masks_var(const ag::Var& edges, double tau,
                                           double eps, const Tensor& grid) {
  using namespace ag;
  std::size_t K = edges->val.numel() - 1;
  double inv = 1.0 / (tau + eps);
  std::vector<Var> raw;
  for (std::size_t k = 0; k < K; ++k) {
    Var lo = sigmoid(mul_scalar(sub_from_grid(grid, at_index(edges, k)), inv));
    Var hi = sigmoid(mul_scalar(sub_from_grid(grid, at_index(edges, k + 1)), inv));
    raw.push_back(sub(lo, hi));
  }
  Var total = raw[0];
  for (std::size_t k = 1; k < K; ++k) total = add(total, raw[k]);
  total = add_scalar(total, eps);
  std::vector<Var> norm;
  for (std::size_t k = 0; k < K; ++k) norm.push_back(div(raw[k], total));
  return norm;
}

inline BandMasks band_masks(const Tensor& edges, double tau, double eps,
                            const Tensor& grid) {
  if (tau <= 0) throw invalid_input("band_masks: tau must be positive");
  for (std::size_t k = 1; k < edges.numel(); ++k)
    if (edges.data[k] < edges.data[k - 1])
      throw invalid_input("band_masks: edges must be nondecreasing");
  auto vars = band_masks_var(ag::constant(edges), tau, eps, grid);
  std::size_t K = vars.size(), F = grid.numel();
  BandMasks out;
  out.edges = edges;
  out.values = Tensor({K, F});
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t f = 0; f < F; ++f) out.values.at(k, f) = vars[k]->val.data[f];
  return out;
}

/// Out-of-cutoff mass of band k: sum of the normalized mask over grid bins
/// strictly above c_k.
inline double aliasing_leakage(const BandMasks& masks, const Tensor& cutoffs,
                               std::size_t k, std::size_t grid_n) {
  if (k >= masks.values.dim(0)) throw invalid_input("aliasing_leakage: band index");
  double eps_k = 0;
  for (std::size_t i = 0; i < masks.values.dim(1); ++i) {
    double f = double(i) / double(grid_n);
    if (f > cutoffs.data[k]) eps_k += masks.values.at(k, i);
  }
  return eps_k;
}

namespace ag {

/// One band of the decomposition: reflect-extend, mask the one-sided
/// spectrum, synthesize, crop, decimate by r. Differentiable in both the
/// window and the mask.
inline Var band_component_node(const Var& x, const Var& mask, std::size_t r,
                               std::size_t pad) {
  const Tensor& X = x->val;
  std::size_t t = X.dim(0), c = X.dim(1);
  if (t < r) throw invalid_input("band decompose: window shorter than factor");
  std::size_t n = t + 2 * pad;
  std::size_t nb = fft::onesided_bins(n);
  if (mask->val.numel() != nb)
    throw shape_mismatch("band decompose: mask does not match grid");
  std::size_t tk = (t + r - 1) / r;

  // Forward; keep the per-channel spectra for the mask gradient.
  Tensor spectra_re({nb, c}), spectra_im({nb, c});
  Tensor out({tk, c});
  {
    std::vector<double> col(t), y;
    std::vector<fft::cd> spec;
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t i = 0; i < t; ++i) col[i] = X.at(i, ch);
      std::vector<double> ext = detail::reflect_pad(col, pad);
      fft::rfft(ext, spec);
      for (std::size_t f = 0; f < nb; ++f) {
        spectra_re.at(f, ch) = spec[f].real();
        spectra_im.at(f, ch) = spec[f].imag();
        spec[f] *= mask->val.data[f];
      }
      fft::irfft(spec, n, y);
      for (std::size_t m = 0; m < tk; ++m) out.at(m, ch) = y[pad + r * m];
    }
  }

  return make_node(std::move(out), {x, mask},
                   [t, c, n, nb, tk, r, pad, spectra_re, spectra_im](VarNode& self) {
    std::vector<double> gy(n), gcol;
    std::vector<fft::cd> ghat;
    const Tensor& maskv = self.parents[1]->val;
    for (std::size_t ch = 0; ch < c; ++ch) {
      std::fill(gy.begin(), gy.end(), 0.0);
      for (std::size_t m = 0; m < tk; ++m)
        gy[pad + r * m] = self.grad.at(m, ch);
      fft::irfft_adjoint(gy, n, ghat);
      if (self.parents[1]->requires_grad) {
        auto& gm = self.parents[1]->ensure_grad();
        for (std::size_t f = 0; f < nb; ++f)
          gm.data[f] += ghat[f].real() * spectra_re.at(f, ch) +
                        ghat[f].imag() * spectra_im.at(f, ch);
      }
      if (self.parents[0]->requires_grad) {
        for (std::size_t f = 0; f < nb; ++f) ghat[f] *= maskv.data[f];
        std::vector<double> gext;
        fft::rfft_adjoint(ghat, n, gext);
        auto& gx = self.parents[0]->ensure_grad();
        if (pad > 0) {
          detail::reflect_pad_adjoint(gext, t, pad, gcol);
          for (std::size_t i = 0; i < t; ++i) gx.at(i, ch) += gcol[i];
        } else {
          for (std::size_t i = 0; i < t; ++i) gx.at(i, ch) += gext[i];
        }
      }
    }
  });
}

}  // namespace ag

struct ScaleComponents {
  std::vector<Tensor> components;  // component k has shape (T_k, C)
  Tensor leakages;                 // per-band out-of-cutoff mass
};

/// Full decomposition into K downsampled band components.
inline ScaleComponents band_decompose_downsample(const Tensor& x,
                                                 const FilterbankState& st,
                                                 std::size_t pad) {
  st.validate();
  if (x.ndim() != 2) throw invalid_input("band decompose: expected (T,C)");
  std::size_t t = x.dim(0);
  for (auto rk : st.r)
    if (t < rk) throw invalid_input("band decompose: window shorter than max factor");
  std::size_t n = t + 2 * pad;
  Tensor grid = freq_grid(n);
  Tensor cut = nyquist_cutoffs(st.r);
  Tensor edges = learned_edges(st);
  BandMasks masks = band_masks(edges, st.tau, st.eps, grid);

  ScaleComponents out;
  out.leakages = Tensor({st.bands()});
  ag::Var xv = ag::constant(x);
  for (std::size_t k = 0; k < st.bands(); ++k) {
    Tensor mk({grid.numel()});
    for (std::size_t f = 0; f < grid.numel(); ++f) mk.data[f] = masks.values.at(k, f);
    out.components.push_back(
        ag::band_component_node(xv, ag::constant(mk), st.r[k], pad)->val);
    out.leakages.data[k] = aliasing_leakage(masks, cut, k, n);
  }
  return out;
}

/// Band component without the decimation step; used by spectral-identity
/// checks and the aliasing oracle.
inline Tensor band_component_fullrate(const Tensor& x, const FilterbankState& st,
                                      std::size_t k, std::size_t pad) {
  st.validate();
  std::size_t t = x.dim(0), c = x.dim(1);
  std::size_t n = t + 2 * pad;
  Tensor grid = freq_grid(n);
  BandMasks masks = band_masks(learned_edges(st), st.tau, st.eps, grid);
  Tensor out({t, c});
  std::vector<double> col(t), y;
  std::vector<fft::cd> spec;
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < t; ++i) col[i] = x.at(i, ch);
    std::vector<double> ext = detail::reflect_pad(col, pad);
    fft::rfft(ext, spec);
    for (std::size_t f = 0; f < spec.size(); ++f) spec[f] *= masks.values.at(k, f);
    fft::irfft(spec, n, y);
    for (std::size_t i = 0; i < t; ++i) out.at(i, ch) = y[pad + i];
  }
  return out;
}

/// Exact aliasing energy of a band signal under decimation by r, computed by
/// explicit spectral folding: output bin j of the decimated spectrum is the
/// sum of the r source copies congruent to j; the copy whose original
/// frequency magnitude lies at or below the new Nyquist is signal, the rest
/// fold in as aliasing. The returned value is the time-domain L2 norm of the
/// alias component.
inline double alias_energy_of_band(const Tensor& band, std::size_t r) {
  std::size_t t = band.dim(0), c = band.dim(1);
  if (t < r) throw invalid_input("alias energy: signal shorter than factor");
  std::size_t tk = (t + r - 1) / r;
  std::size_t nd = r * tk;  // zero-padded length divisible by r
  double energy = 0;
  std::vector<fft::cd> yin(nd), yspec;
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < nd; ++i)
      yin[i] = fft::cd(i < t ? band.at(i, ch) : 0.0, 0.0);
    fft::fft_forward(yin, yspec);
    for (std::size_t j = 0; j < tk; ++j) {
      fft::cd alias(0, 0);
      for (std::size_t p = 0; p < r; ++p) {
        std::size_t m = j + p * tk;
        std::size_t fmag = std::min(m, nd - m);  // |frequency| in source bins
        if (2 * fmag <= tk) continue;            // at or below the new Nyquist
        alias += yspec[m];
      }
      alias /= double(r);
      energy += std::norm(alias);
    }
  }
  return std::sqrt(energy / double(tk));
}

/// Aliasing energy of filterbank band k on window x. The folding runs on the
/// boundary-extended component before cropping: its spectrum is exactly the
/// masked one, so the alias ties directly to the out-of-cutoff mask mass.
/// The extended length must be divisible by r_k so that the spectral copies
/// align bin-for-bin.
inline double aliasing_energy_oracle(const Tensor& x, const FilterbankState& st,
                                     std::size_t k, std::size_t pad) {
  if (k >= st.bands()) throw invalid_input("aliasing oracle: band index");
  st.validate();
  std::size_t t = x.dim(0), c = x.dim(1);
  std::size_t n = t + 2 * pad;
  if (n % st.r[k] != 0)
    throw invalid_input("aliasing oracle: extended length must be divisible by r_k");
  Tensor grid = freq_grid(n);
  BandMasks masks = band_masks(learned_edges(st), st.tau, st.eps, grid);
  Tensor band({n, c});
  std::vector<double> col(t), y;
  std::vector<fft::cd> spec;
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < t; ++i) col[i] = x.at(i, ch);
    std::vector<double> ext = detail::reflect_pad(col, pad);
    fft::rfft(ext, spec);
    for (std::size_t f = 0; f < spec.size(); ++f) spec[f] *= masks.values.at(k, f);
    fft::irfft(spec, n, y);
    for (std::size_t i = 0; i < n; ++i) band.at(i, ch) = y[i];
  }
  return alias_energy_of_band(band, st.r[k]);
}

}  // namespace left
