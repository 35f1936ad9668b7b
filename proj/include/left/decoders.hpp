#pragma once

#include <vector>

#include "left/nn.hpp"
#include "left/stft.hpp"
#include "left/tokenizers.hpp"

// Decoding heads. The cycle pathway decodes a single shared latent into a
// full time window and a full spectrogram through position-conditioned
// two-layer MLPs. The multi-scale head splits tokens by scale, upsamples in
// token space and decodes patches, producing per-scale reconstructions for
// k >= 2 plus the full-rate reconstruction.

namespace left {

namespace ag {

/// Permute (T_F, P*F) frame-major rows into (P, F, T_F) planes.
inline Var planes_from_frames(const Var& x, std::size_t planes, std::size_t bins) {
  std::size_t nf = x->val.dim(0);
  if (x->val.dim(1) != planes * bins)
    throw shape_mismatch("planes_from_frames: width mismatch");
  Tensor out({planes, bins, nf});
  for (std::size_t j = 0; j < nf; ++j)
    for (std::size_t p = 0; p < planes; ++p)
      for (std::size_t f = 0; f < bins; ++f)
        out.at(p, f, j) = x->val.at(j, p * bins + f);
  return make_node(std::move(out), {x}, [planes, bins, nf](VarNode& self) {
    auto& g = self.parents[0]->ensure_grad();
    for (std::size_t j = 0; j < nf; ++j)
      for (std::size_t p = 0; p < planes; ++p)
        for (std::size_t f = 0; f < bins; ++f)
          g.at(j, p * bins + f) += self.grad.at(p, f, j);
  });
}

}  // namespace ag

/// Shared latent from the two pooled view latents, z = MLP([z_t; z_f]).
struct LatentFuser {
  nn::Mlp2 mlp;
  std::size_t d = 0;

  static LatentFuser create(nn::ParamStore& ps, const std::string& name,
                            std::size_t d, std::mt19937_64& rng) {
    LatentFuser f;
    f.d = d;
    f.mlp = nn::Mlp2::create(ps, name, 2 * d, d, d, rng);
    return f;
  }

  ag::Var operator()(const ag::Var& z_t, const ag::Var& z_f) const {
    ag::Var row_t = ag::reshape(z_t, {1, z_t->val.numel()});
    ag::Var row_f = ag::reshape(z_f, {1, z_f->val.numel()});
    ag::Var cat = ag::concat_cols({row_t, row_f});
    return ag::reshape(mlp(cat), {d});
  }
};

/// Two-layer MLP head conditioned on learned per-position embeddings: the
/// latent is broadcast over positions, each position decodes its own output
/// row.
struct PositionalDecoder {
  ag::Var pos;       // (len, P)
  nn::Linear from_z;    // D -> H
  nn::Linear from_pos;  // P -> H
  nn::Linear out;       // H -> width

  /// Sinusoidal features at geometrically spaced frequencies; gives every
  /// position a distinct coordinate from the first step (embeddings stay
  /// learnable on top of this).
  static Tensor sinusoid_init(std::size_t len, std::size_t pos_dim) {
    Tensor e({len, pos_dim});
    for (std::size_t t = 0; t < len; ++t)
      for (std::size_t i = 0; i < pos_dim / 2; ++i) {
        double freq = std::pow(10000.0, -2.0 * double(i) / double(pos_dim));
        e.at(t, 2 * i) = std::sin(double(t) * freq);
        e.at(t, 2 * i + 1) = std::cos(double(t) * freq);
      }
    return e;
  }

  static PositionalDecoder create(nn::ParamStore& ps, const std::string& name,
                                  std::size_t len, std::size_t pos_dim,
                                  std::size_t d, std::size_t hidden,
                                  std::size_t width, std::mt19937_64& rng) {
    PositionalDecoder p;
    p.pos = ps.add(name + ".pos", sinusoid_init(len, pos_dim));
    p.from_z = nn::Linear::create(ps, name + ".from_z", d, hidden, rng);
    p.from_pos = nn::Linear::create(ps, name + ".from_pos", pos_dim, hidden, rng);
    p.out = nn::Linear::create(ps, name + ".out", hidden, width, rng);
    return p;
  }

  ag::Var operator()(const ag::Var& z) const {
    ag::Var zrow = ag::reshape(z, {1, z->val.numel()});
    ag::Var zh = ag::reshape(from_z(zrow), {from_z.b->val.numel()});
    ag::Var h = ag::gelu(ag::add_rowvec(from_pos(pos), zh));
    return out(h);
  }
};

/// beta_res * H_ms + beta_int * H_ms_plus.
inline ag::Var ms_fuse_tokens(const ag::Var& h_ms, const ag::Var& h_ms_plus,
                              double beta_res, double beta_int) {
  if (!h_ms->val.same_shape(h_ms_plus->val))
    throw shape_mismatch("ms_fuse_tokens: shape mismatch");
  return ag::add(ag::mul_scalar(h_ms, beta_res), ag::mul_scalar(h_ms_plus, beta_int));
}

/// Nearest-neighbor token index map from a source grid of length src to a
/// target grid of length dst.
inline std::vector<std::size_t> nn_index_map(std::size_t src, std::size_t dst) {
  std::vector<std::size_t> idx(dst);
  for (std::size_t i = 0; i < dst; ++i) idx[i] = std::min(i * src / dst, src - 1);
  return idx;
}

struct MsOutputsVar {
  ag::Var full_rate;                 // (T, C)
  std::vector<ag::Var> per_scale;    // k = 2..K, (T_k, C)
};

/// Coarse-to-fine reconstruction head. Scale k >= 2 tokens decode their own
/// patches; the full-rate output averages all scales upsampled to the
/// full-rate token grid (the coarsest scale enters only as context here and
/// is not supervised at its own resolution).
struct MsDecoder {
  nn::Mlp2 scale_head;  // shared patch decoder for the supervised scales
  nn::Mlp2 full_head;
  std::size_t patch = 8;
  std::size_t channels = 1;

  static MsDecoder create(nn::ParamStore& ps, const std::string& name,
                          std::size_t d, std::size_t hidden, std::size_t patch,
                          std::size_t channels, std::mt19937_64& rng) {
    MsDecoder m;
    m.patch = patch;
    m.channels = channels;
    m.scale_head = nn::Mlp2::create(ps, name + ".scale", d, hidden,
                                    patch * channels, rng);
    m.full_head = nn::Mlp2::create(ps, name + ".full", d, hidden,
                                   patch * channels, rng);
    return m;
  }

  MsOutputsVar operator()(const ag::Var& tokens,
                          const std::vector<std::size_t>& scale_lengths,
                          const std::vector<std::size_t>& target_lengths,
                          std::size_t full_length) const {
    if (scale_lengths.empty())
      throw invalid_input("ms_decode: missing scale metadata");
    if (scale_lengths.size() != target_lengths.size())
      throw invalid_input("ms_decode: scale metadata mismatch");
    std::size_t total = 0;
    for (auto l : scale_lengths) total += l;
    if (tokens->val.dim(0) != total)
      throw shape_mismatch("ms_decode: token count mismatch");

    std::size_t K = scale_lengths.size();
    std::vector<ag::Var> split;
    std::size_t off = 0;
    for (std::size_t k = 0; k < K; ++k) {
      split.push_back(ag::slice_rows(tokens, off, off + scale_lengths[k]));
      off += scale_lengths[k];
    }

    MsOutputsVar out;
    for (std::size_t k = 1; k < K; ++k) {
      ag::Var dec = scale_head(split[k]);  // (L_k, patch*C)
      ag::Var series = ag::reshape(dec, {scale_lengths[k] * patch, channels});
      out.per_scale.push_back(ag::slice_rows(series, 0, target_lengths[k]));
    }

    std::size_t l_full = ceil_div(full_length, patch);
    ag::Var acc;
    for (std::size_t k = 0; k < K; ++k) {
      ag::Var up = ag::gather_rows(split[k], nn_index_map(scale_lengths[k], l_full));
      acc = acc ? ag::add(acc, up) : up;
    }
    acc = ag::mul_scalar(acc, 1.0 / double(K));
    ag::Var dec = full_head(acc);  // (l_full, patch*C)
    ag::Var series = ag::reshape(dec, {l_full * patch, channels});
    out.full_rate = ag::slice_rows(series, 0, full_length);
    return out;
  }
};

}  // namespace left
