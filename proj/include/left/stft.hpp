#pragma once

#include <string>
#include <vector>

#include "left/autograd.hpp"
#include "left/fft.hpp"
#include "left/tensor.hpp"

// Differentiable short-time Fourier analysis and synthesis. Synthesis is the
// normalized overlap-add inverse: it reproduces the input exactly wherever
// the squared-window coverage is positive, which the config validation
// guarantees for the whole signal.

namespace left {

enum class WindowKind { hann, rect };

struct StftConfig {
  std::size_t window_length = 64;
  std::size_t hop = 16;
  std::size_t fft_size = 64;
  WindowKind window_kind = WindowKind::hann;
  bool center_pad = true;
  // Spectra are scaled by 1/sqrt(fft_size) so analysis roughly preserves
  // magnitude; synthesis undoes the factor, leaving the round trip exact.
  double spectrum_scale() const { return 1.0 / std::sqrt(double(fft_size)); }

  void validate() const {
    if (hop == 0 || hop > window_length)
      throw invalid_input("stft: hop must be in [1, window_length]");
    if (fft_size < window_length)
      throw invalid_input("stft: fft_size must be >= window_length");
    // Hann tapers vanish at the edges, so without centering the first and
    // last samples are never covered; centered analysis with hop <= half the
    // window keeps the overlap-add coverage strictly positive.
    if (window_kind == WindowKind::hann) {
      if (!center_pad || hop > window_length / 2)
        throw invalid_input("stft: hann window requires center_pad and hop <= window/2");
    }
  }

  std::size_t bins() const { return fft_size / 2 + 1; }
  std::size_t pad() const { return center_pad ? window_length / 2 : 0; }
  std::size_t padded_length(std::size_t t) const { return t + 2 * pad(); }
  std::size_t frames(std::size_t t) const {
    std::size_t lp = padded_length(t);
    if (lp < window_length) throw invalid_input("stft: window longer than input");
    return (lp - window_length) / hop + 1;
  }
};

inline Tensor make_window(const StftConfig& cfg) {
  Tensor w({cfg.window_length});
  switch (cfg.window_kind) {
    case WindowKind::hann:
      for (std::size_t n = 0; n < cfg.window_length; ++n)
        w.data[n] = 0.5 * (1.0 - std::cos(2.0 * M_PI * double(n) /
                                          double(cfg.window_length)));
      break;
    case WindowKind::rect:
      std::fill(w.data.begin(), w.data.end(), 1.0);
      break;
  }
  return w;
}

/// Complex STFT output stored as real/imaginary planes, shape (C,2,F,T_F).
struct Spectrogram {
  Tensor planes;
  StftConfig config;
  std::size_t origin_length = 0;

  std::size_t channels() const { return planes.dim(0); }
  std::size_t bins() const { return planes.dim(2); }
  std::size_t frames() const { return planes.dim(3); }
};

namespace detail {

inline std::vector<double> reflect_pad(const std::vector<double>& x, std::size_t p) {
  if (p == 0) return x;
  std::size_t t = x.size();
  if (p >= t) throw invalid_input("reflect padding longer than signal");
  std::vector<double> out(t + 2 * p);
  for (std::size_t i = 0; i < p; ++i) out[i] = x[p - i];
  for (std::size_t i = 0; i < t; ++i) out[p + i] = x[i];
  for (std::size_t i = 0; i < p; ++i) out[p + t + i] = x[t - 2 - i];
  return out;
}

inline void reflect_pad_adjoint(const std::vector<double>& g, std::size_t t,
                                std::size_t p, std::vector<double>& gx) {
  gx.assign(t, 0.0);
  for (std::size_t i = 0; i < p; ++i) gx[p - i] += g[i];
  for (std::size_t i = 0; i < t; ++i) gx[i] += g[p + i];
  for (std::size_t i = 0; i < p; ++i) gx[t - 2 - i] += g[p + t + i];
}

inline std::vector<double> ola_coverage(const StftConfig& cfg, std::size_t padded_len,
                                        const Tensor& w) {
  std::size_t n_frames = (padded_len - cfg.window_length) / cfg.hop + 1;
  std::vector<double> cov(padded_len, 0.0);
  for (std::size_t f = 0; f < n_frames; ++f)
    for (std::size_t n = 0; n < cfg.window_length; ++n)
      cov[f * cfg.hop + n] += w.data[n] * w.data[n];
  return cov;
}

}  // namespace detail

/// Analysis transform: window (T,C) -> spectrogram planes.
inline Spectrogram stft_forward(const Tensor& x, const StftConfig& cfg) {
  cfg.validate();
  if (x.ndim() != 2) throw invalid_input("stft: expected (T,C) input");
  std::size_t t = x.dim(0), c = x.dim(1);
  if (t < cfg.window_length)
    throw invalid_input("stft: input shorter than window_length");
  Tensor w = make_window(cfg);
  std::size_t nf = cfg.frames(t), nb = cfg.bins(), p = cfg.pad();

  Spectrogram s;
  s.config = cfg;
  s.origin_length = t;
  s.planes = Tensor({c, 2, nb, nf});
  double scale = cfg.spectrum_scale();
  std::vector<double> col(t), seg(cfg.fft_size);
  std::vector<fft::cd> spec;
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < t; ++i) col[i] = x.at(i, ch);
    std::vector<double> padded = detail::reflect_pad(col, p);
    for (std::size_t f = 0; f < nf; ++f) {
      std::fill(seg.begin(), seg.end(), 0.0);
      for (std::size_t n = 0; n < cfg.window_length; ++n)
        seg[n] = padded[f * cfg.hop + n] * w.data[n];
      fft::rfft(seg, spec);
      for (std::size_t k = 0; k < nb; ++k) {
        s.planes.at(ch, 0, k, f) = scale * spec[k].real();
        s.planes.at(ch, 1, k, f) = scale * spec[k].imag();
      }
    }
  }
  return s;
}

/// Synthesis transform back to (origin_length, C).
inline Tensor stft_inverse(const Spectrogram& s) {
  const StftConfig& cfg = s.config;
  cfg.validate();
  if (s.planes.ndim() != 4 || s.planes.dim(1) != 2 || s.planes.dim(2) != cfg.bins())
    throw invalid_input("istft: inconsistent plane shapes");
  std::size_t c = s.channels(), nb = s.bins(), nf = s.frames();
  std::size_t t = s.origin_length, p = cfg.pad();
  std::size_t lp = cfg.padded_length(t);
  if ((lp - cfg.window_length) / cfg.hop + 1 != nf)
    throw invalid_input("istft: frame count does not match origin length");
  Tensor w = make_window(cfg);
  std::vector<double> cov = detail::ola_coverage(cfg, lp, w);
  double unscale = 1.0 / cfg.spectrum_scale();

  Tensor out({t, c});
  std::vector<fft::cd> spec(nb);
  std::vector<double> seg;
  for (std::size_t ch = 0; ch < c; ++ch) {
    std::vector<double> acc(lp, 0.0);
    for (std::size_t f = 0; f < nf; ++f) {
      for (std::size_t k = 0; k < nb; ++k)
        spec[k] = fft::cd(s.planes.at(ch, 0, k, f), s.planes.at(ch, 1, k, f)) * unscale;
      fft::irfft(spec, cfg.fft_size, seg);
      for (std::size_t n = 0; n < cfg.window_length; ++n)
        acc[f * cfg.hop + n] += seg[n] * w.data[n];
    }
    for (std::size_t i = 0; i < t; ++i) {
      double cv = cov[p + i];
      out.at(i, ch) = cv > 1e-12 ? acc[p + i] / cv : 0.0;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Autograd nodes. Spectrogram Vars use the flat layout (2C, F, T_F), which is
// bitwise identical to the (C,2,F,T_F) plane tensor, so conversions between
// the two are reshapes.
// ---------------------------------------------------------------------------

namespace ag {

/// Differentiable analysis: x (T,C) -> (2C, F, T_F).
inline Var stft_node(const Var& x, const StftConfig& cfg) {
  Spectrogram s = stft_forward(x->val, cfg);
  std::size_t c = s.channels(), nb = s.bins(), nf = s.frames();
  Tensor out = s.planes.reshaped({2 * c, nb, nf});
  std::size_t t = x->val.dim(0);
  return make_node(std::move(out), {x}, [cfg, t, c, nb, nf](VarNode& self) {
    Tensor w = make_window(cfg);
    std::size_t p = cfg.pad();
    std::size_t lp = cfg.padded_length(t);
    auto& gx = self.parents[0]->ensure_grad();
    std::vector<fft::cd> gspec(nb);
    std::vector<double> gseg, gpad(lp), gcol;
    for (std::size_t ch = 0; ch < c; ++ch) {
      std::fill(gpad.begin(), gpad.end(), 0.0);
      for (std::size_t f = 0; f < nf; ++f) {
        for (std::size_t k = 0; k < nb; ++k)
          gspec[k] = fft::cd(self.grad.at(2 * ch, k, f),
                             self.grad.at(2 * ch + 1, k, f)) *
                     cfg.spectrum_scale();
        fft::rfft_adjoint(gspec, cfg.fft_size, gseg);
        for (std::size_t n = 0; n < cfg.window_length; ++n)
          gpad[f * cfg.hop + n] += gseg[n] * w.data[n];
      }
      if (p > 0) {
        detail::reflect_pad_adjoint(gpad, t, p, gcol);
        for (std::size_t i = 0; i < t; ++i) gx.at(i, ch) += gcol[i];
      } else {
        for (std::size_t i = 0; i < t; ++i) gx.at(i, ch) += gpad[i];
      }
    }
  });
}

/// Differentiable synthesis: planes (2C, F, T_F) -> x (T, C).
inline Var istft_node(const Var& planes, const StftConfig& cfg, std::size_t t) {
  std::size_t c2 = planes->val.dim(0), nb = planes->val.dim(1), nf = planes->val.dim(2);
  std::size_t c = c2 / 2;
  Spectrogram s;
  s.config = cfg;
  s.origin_length = t;
  s.planes = planes->val.reshaped({c, 2, nb, nf});
  Tensor out = stft_inverse(s);
  return make_node(std::move(out), {planes}, [cfg, t, c, nb, nf](VarNode& self) {
    Tensor w = make_window(cfg);
    std::size_t p = cfg.pad();
    std::size_t lp = cfg.padded_length(t);
    std::vector<double> cov = detail::ola_coverage(cfg, lp, w);
    auto& gp = self.parents[0]->ensure_grad();
    std::vector<double> gacc(lp), gseg(cfg.fft_size);
    std::vector<fft::cd> gspec;
    for (std::size_t ch = 0; ch < c; ++ch) {
      std::fill(gacc.begin(), gacc.end(), 0.0);
      for (std::size_t i = 0; i < t; ++i) {
        double cv = cov[p + i];
        if (cv > 1e-12) gacc[p + i] = self.grad.at(i, ch) / cv;
      }
      for (std::size_t f = 0; f < nf; ++f) {
        std::fill(gseg.begin(), gseg.end(), 0.0);
        for (std::size_t n = 0; n < cfg.window_length; ++n)
          gseg[n] = gacc[f * cfg.hop + n] * w.data[n];
        fft::irfft_adjoint(gseg, cfg.fft_size, gspec);
        double unscale = 1.0 / cfg.spectrum_scale();
        for (std::size_t k = 0; k < nb; ++k) {
          gp.data[((2 * ch) * nb + k) * nf + f] += unscale * gspec[k].real();
          gp.data[((2 * ch + 1) * nb + k) * nf + f] += unscale * gspec[k].imag();
        }
      }
    }
  });
}

}  // namespace ag

}  // namespace left
