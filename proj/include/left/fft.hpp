#pragma once

#include <complex>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "left/tensor.hpp"

// Thin FFT helpers over Eigen's header-only FFT. One-sided real transforms
// follow the usual conventions: forward is unnormalized, inverse carries the
// 1/N factor, and the imaginary parts of the DC and Nyquist bins are ignored
// by synthesis (their adjoint gradients are zero).

namespace left::fft {

using cd = std::complex<double>;

inline std::size_t onesided_bins(std::size_t n) { return n / 2 + 1; }

inline void fft_forward(const std::vector<cd>& in, std::vector<cd>& out) {
  Eigen::FFT<double> f;
  f.fwd(out, in);
}

inline void fft_inverse(const std::vector<cd>& in, std::vector<cd>& out) {
  Eigen::FFT<double> f;
  f.inv(out, in);
}

/// One-sided real FFT of a length-n real vector: bins 0..n/2.
inline void rfft(const std::vector<double>& x, std::vector<cd>& y) {
  std::size_t n = x.size();
  std::vector<cd> cin(n), cout;
  for (std::size_t i = 0; i < n; ++i) cin[i] = cd(x[i], 0.0);
  fft_forward(cin, cout);
  y.assign(cout.begin(), cout.begin() + onesided_bins(n));
}

/// Inverse of the one-sided real FFT back to length n. The spectrum values
/// are taken as free coefficients; conjugate symmetry is imposed here.
inline void irfft(const std::vector<cd>& y, std::size_t n, std::vector<double>& x) {
  std::size_t f = onesided_bins(n);
  if (y.size() != f) throw shape_mismatch("irfft: bin count mismatch");
  std::vector<cd> full(n);
  full[0] = cd(y[0].real(), 0.0);
  for (std::size_t k = 1; k < f; ++k) {
    bool nyq = (n % 2 == 0) && (k == n / 2);
    cd v = nyq ? cd(y[k].real(), 0.0) : y[k];
    full[k] = v;
    if (!nyq) full[n - k] = std::conj(v);
  }
  std::vector<cd> out;
  fft_inverse(full, out);
  x.resize(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = out[i].real();
}

/// Adjoint of rfft as a real-linear map R^n -> R^{2f}:
/// xbar[t] = sum_k ( gre[k] cos(2*pi*k*t/n) - gim[k] sin(2*pi*k*t/n) ).
inline void rfft_adjoint(const std::vector<cd>& g, std::size_t n,
                         std::vector<double>& xbar) {
  std::size_t f = onesided_bins(n);
  if (g.size() != f) throw shape_mismatch("rfft_adjoint: bin count mismatch");
  std::vector<cd> padded(n, cd(0, 0));
  for (std::size_t k = 0; k < f; ++k) padded[k] = g[k];
  std::vector<cd> out;
  fft_inverse(padded, out);  // (1/n) sum e^{+i...}
  xbar.resize(n);
  for (std::size_t i = 0; i < n; ++i) xbar[i] = double(n) * out[i].real();
}

/// Adjoint of irfft as a real-linear map R^n -> R^{2f}. Weight 2 on interior
/// bins accounts for the implied conjugate pair; DC/Nyquist imag parts get 0.
inline void irfft_adjoint(const std::vector<double>& g, std::size_t n,
                          std::vector<cd>& gbar) {
  std::size_t f = onesided_bins(n);
  std::vector<cd> cin(n), D;
  for (std::size_t i = 0; i < n; ++i) cin[i] = cd(g[i], 0.0);
  fft_forward(cin, D);
  gbar.assign(f, cd(0, 0));
  for (std::size_t k = 0; k < f; ++k) {
    bool edge = (k == 0) || ((n % 2 == 0) && k == n / 2);
    double w = edge ? 1.0 : 2.0;
    double re = w / double(n) * D[k].real();
    double im = edge ? 0.0 : w / double(n) * D[k].imag();
    gbar[k] = cd(re, im);
  }
}

/// Naive O(n^2) DFT used as an independent oracle in tests.
inline void naive_dft(const std::vector<double>& x, std::vector<cd>& y) {
  std::size_t n = x.size();
  y.assign(n, cd(0, 0));
  for (std::size_t k = 0; k < n; ++k) {
    cd s(0, 0);
    for (std::size_t t = 0; t < n; ++t) {
      double a = -2.0 * M_PI * double(k) * double(t) / double(n);
      s += x[t] * cd(std::cos(a), std::sin(a));
    }
    y[k] = s;
  }
}

}  // namespace left::fft
