#pragma once

#include <vector>

#include "left/nn.hpp"
#include "left/stft.hpp"

// The three token streams: per-timestamp time tokens from a small 1-D conv
// stack, per-frame frequency tokens from a 2-D conv stack pooled over bins,
// and multi-scale tokens from patch embedding plus a block-masked encoder
// that never mixes scales.

namespace left {

enum class View { time, frequency, multiscale };

struct TokenStream {
  Tensor tokens;  // (length, D)
  View view = View::time;
  std::vector<std::size_t> scale_lengths;  // multiscale only

  std::size_t length() const { return tokens.dim(0); }
  std::size_t width() const { return tokens.dim(1); }
};

struct EncoderConfig {
  std::size_t d_model = 64;
  std::size_t time_kernels[3] = {5, 3, 1};
  std::size_t freq_kernel = 3;
  std::size_t freq_hidden = 16;
  std::size_t patch_len = 8;
  std::size_t ms_depth = 2;
  std::size_t heads = 4;

  void validate() const {
    if (d_model == 0 || d_model % heads != 0)
      throw invalid_input("encoder: heads must divide d_model");
    if (patch_len == 0) throw invalid_input("encoder: patch length must be >= 1");
  }
};

inline std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

struct TimeEncoder {
  nn::Conv1d c1, c2, c3;

  static TimeEncoder create(nn::ParamStore& ps, const std::string& name,
                            std::size_t channels, const EncoderConfig& cfg,
                            std::mt19937_64& rng) {
    TimeEncoder e;
    e.c1 = nn::Conv1d::create(ps, name + ".c1", channels, cfg.d_model,
                              cfg.time_kernels[0], rng);
    e.c2 = nn::Conv1d::create(ps, name + ".c2", cfg.d_model, cfg.d_model,
                              cfg.time_kernels[1], rng);
    e.c3 = nn::Conv1d::create(ps, name + ".c3", cfg.d_model, cfg.d_model,
                              cfg.time_kernels[2], rng);
    return e;
  }

  // (T,C) -> (T,D); same padding keeps temporal length.
  ag::Var operator()(const ag::Var& x) const {
    return c3(ag::gelu(c2(ag::gelu(c1(x)))));
  }
};

struct FreqEncoder {
  nn::Conv2d c1, c2;
  nn::Linear proj;

  static FreqEncoder create(nn::ParamStore& ps, const std::string& name,
                            std::size_t channels, const EncoderConfig& cfg,
                            std::mt19937_64& rng) {
    FreqEncoder e;
    e.c1 = nn::Conv2d::create(ps, name + ".c1", 2 * channels, cfg.freq_hidden,
                              cfg.freq_kernel, cfg.freq_kernel, rng);
    e.c2 = nn::Conv2d::create(ps, name + ".c2", cfg.freq_hidden, cfg.freq_hidden,
                              cfg.freq_kernel, cfg.freq_kernel, rng);
    e.proj = nn::Linear::create(ps, name + ".proj", cfg.freq_hidden, cfg.d_model, rng);
    return e;
  }

  // planes (2C,F,T_F) -> (T_F,D): conv over (F, frame), mean-pool over F,
  // project each frame.
  ag::Var operator()(const ag::Var& planes) const {
    ag::Var h = ag::gelu(c2(ag::gelu(c1(planes))));  // (hidden, F, T_F)
    ag::Var pooled = ag::mean_axis1(h);              // (hidden, T_F)
    return proj(ag::transpose2d(pooled));            // (T_F, D)
  }
};

/// Patch embedding of one scale component: (T_k, C) -> (L_k, D) with the
/// final patch right-padded by zeros.
struct PatchEmbed {
  nn::Linear proj;  // (patch*C) -> D
  std::size_t patch = 8;
  std::size_t channels = 1;

  static PatchEmbed create(nn::ParamStore& ps, const std::string& name,
                           std::size_t channels, std::size_t patch,
                           std::size_t d_model, std::mt19937_64& rng) {
    PatchEmbed p;
    p.patch = patch;
    p.channels = channels;
    p.proj = nn::Linear::create(ps, name, patch * channels, d_model, rng);
    return p;
  }

  ag::Var operator()(const ag::Var& component) const {
    std::size_t tk = component->val.dim(0);
    std::size_t lk = ceil_div(tk, patch);
    ag::Var padded = ag::pad_rows(component, lk * patch - tk);
    ag::Var flat = ag::reshape(padded, {lk, patch * channels});
    return proj(flat);
  }
};

/// token count per scale: L_k = ceil(T_k / patch).
inline std::vector<std::size_t> patch_counts(const std::vector<std::size_t>& t_k,
                                             std::size_t patch) {
  std::vector<std::size_t> l;
  for (auto t : t_k) l.push_back(ceil_div(t, patch));
  return l;
}

/// Block-diagonal attention mask: (i,j) allowed iff the tokens share a scale.
inline Tensor build_block_mask(const std::vector<std::size_t>& scale_lengths) {
  std::size_t total = 0;
  for (auto l : scale_lengths) {
    if (l == 0) throw invalid_input("block mask: zero-length scale");
    total += l;
  }
  Tensor mask({total, total});
  std::size_t off = 0;
  for (auto l : scale_lengths) {
    for (std::size_t i = 0; i < l; ++i)
      for (std::size_t j = 0; j < l; ++j) mask.at(off + i, off + j) = 1.0;
    off += l;
  }
  return mask;
}

/// Masked self-attention encoder over concatenated scale tokens. The block
/// mask is shared across layers, and the feed-forward acts per token, so no
/// layer can move information across scales.
struct MultiscaleEncoder {
  struct Layer {
    nn::MultiheadAttention attn;
    nn::LayerNorm ln1, ln2;
    nn::Mlp2 ff;
  };
  std::vector<Layer> layers;

  static MultiscaleEncoder create(nn::ParamStore& ps, const std::string& name,
                                  const EncoderConfig& cfg, std::mt19937_64& rng) {
    MultiscaleEncoder e;
    for (std::size_t i = 0; i < cfg.ms_depth; ++i) {
      std::string ln = name + ".layer" + std::to_string(i);
      Layer l;
      l.attn = nn::MultiheadAttention::create(ps, ln + ".attn", cfg.d_model,
                                              cfg.heads, rng);
      l.ln1 = nn::LayerNorm::create(ps, ln + ".ln1", cfg.d_model);
      l.ln2 = nn::LayerNorm::create(ps, ln + ".ln2", cfg.d_model);
      l.ff = nn::Mlp2::create(ps, ln + ".ff", cfg.d_model, 2 * cfg.d_model,
                              cfg.d_model, rng);
      e.layers.push_back(std::move(l));
    }
    return e;
  }

  ag::Var operator()(const ag::Var& tokens, const Tensor& mask) const {
    if (mask.dim(0) != tokens->val.dim(0))
      throw invalid_input("multiscale encoder: mask size mismatch");
    ag::Var h = tokens;
    for (const auto& l : layers) {
      h = l.ln1(ag::add(h, l.attn(h, h, &mask)));
      h = l.ln2(ag::add(h, l.ff(h)));
    }
    return h;
  }
};

}  // namespace left
