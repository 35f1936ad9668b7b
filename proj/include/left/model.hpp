#pragma once

#include <random>
#include <vector>

#include "left/decoders.hpp"
#include "left/filterbank.hpp"
#include "left/fusion.hpp"
#include "left/losses.hpp"
#include "left/prototypes.hpp"
#include "left/stft.hpp"
#include "left/tokenizers.hpp"

// The assembled detector: tri-view tokenization, interaction, prototype
// calibration, cycle decoding and the multi-scale reconstruction head.

namespace left {

struct ModelConfig {
  std::size_t window = 192;
  std::size_t channels = 3;
  EncoderConfig enc;
  StftConfig stft;
  std::vector<std::size_t> factors = {16, 8, 4};
  double tau = 0.01;
  double eps = 1e-8;
  std::size_t prototypes = 16;
  double gamma = 10.0;
  FusionConfig fusion;
  double beta_res = 0.5;
  double beta_int = 0.5;
  std::size_t pos_dim = 32;
  std::size_t decoder_hidden = 64;
  bool learnable_filterbank = true;
  bool enable_interaction = true;
  std::uint64_t seed = 1;

  void validate() const {
    enc.validate();
    stft.validate();
    fusion.validate();
    if (fusion.d_model != enc.d_model)
      throw invalid_input("model: fusion and encoder d_model disagree");
    if (window < stft.window_length)
      throw invalid_input("model: window shorter than stft window");
    if (factors.empty() || factors.size() < 2)
      throw invalid_input("model: need at least two scales");
    for (std::size_t k = 0; k < factors.size(); ++k) {
      if (factors[k] < 1 || (k && factors[k] > factors[k - 1]))
        throw invalid_input("model: factors must be ordered coarse to fine");
      if (window < factors[k]) throw invalid_input("model: window shorter than factor");
    }
    if (prototypes < 2) throw invalid_input("model: need at least 2 prototypes");
  }

  // Boundary extension for the filterbank path reflects by the analysis
  // window length on each side.
  std::size_t band_pad() const { return stft.window_length; }
  std::size_t extended_length() const { return window + 2 * band_pad(); }

  std::vector<std::size_t> component_lengths() const {
    std::vector<std::size_t> t_k;
    for (auto r : factors) t_k.push_back(ceil_div(window, r));
    return t_k;
  }
  std::vector<std::size_t> scale_lengths() const {
    return patch_counts(component_lengths(), enc.patch_len);
  }
};

struct ForwardResult {
  // fused token streams
  ag::Var h_time, h_freq, h_ms;
  // pre-interaction multi-scale tokens (kept for the reconstruction head)
  ag::Var h_ms_raw;
  // analysis of the input window; constant with respect to parameters
  ag::Var planes_x;
  // cycle pathway
  ag::Var x_hat, s_hat, x_from_freq, s_from_time;
  // multi-scale pathway
  MsOutputsVar ms;
  std::vector<ag::Var> ms_targets;  // band components for k >= 2
  // prototype evidence
  ag::Var p_t, p_f;
  Tensor p_f_aligned;  // (T, M)
  Tensor gate;         // (T)
  Tensor js;           // (T)
};

struct LossRecord {
  double ms = 0, cyc = 0, cons = 0, total = 0;
};

class LeftModel {
 public:
  ModelConfig cfg;
  nn::ParamStore params;

  explicit LeftModel(ModelConfig config) : cfg(std::move(config)) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    std::size_t d = cfg.enc.d_model;
    std::size_t c = cfg.channels;

    time_enc_ = TimeEncoder::create(params, "time_enc", c, cfg.enc, rng);
    freq_enc_ = FreqEncoder::create(params, "freq_enc", c, cfg.enc, rng);
    patch_ = PatchEmbed::create(params, "ms_patch", c, cfg.enc.patch_len, d, rng);

    auto lk = cfg.scale_lengths();
    std::size_t total_tokens = 0;
    for (auto l : lk) total_tokens += l;
    ms_pos_ = params.add("ms_pos", randn({total_tokens, d}, rng, 0.1));
    block_mask_ = build_block_mask(lk);
    ms_enc_ = MultiscaleEncoder::create(params, "ms_enc", cfg.enc, rng);

    fusion_ = TriViewFusion::create(params, "fusion", cfg.fusion, rng);

    bank_t_ = PrototypeBank::create(params, "proto_t", cfg.prototypes, d,
                                    cfg.gamma, rng);
    bank_f_ = PrototypeBank::create(params, "proto_f", cfg.prototypes, d,
                                    cfg.gamma, rng);

    latent_ = LatentFuser::create(params, "latent", d, rng);
    std::size_t frames = cfg.stft.frames(cfg.window);
    std::size_t bins = cfg.stft.bins();
    dec_time_ = PositionalDecoder::create(params, "dec_time", cfg.window,
                                          cfg.pos_dim, d, cfg.decoder_hidden, c, rng);
    dec_freq_ = PositionalDecoder::create(params, "dec_freq", frames, cfg.pos_dim,
                                          d, cfg.decoder_hidden, 2 * c * bins, rng);
    ms_dec_ = MsDecoder::create(params, "ms_dec", d, cfg.decoder_hidden,
                                cfg.enc.patch_len, c, rng);

    u_ = params.add("filterbank.u", Tensor({cfg.factors.size()}));
    u_->requires_grad = cfg.learnable_filterbank;

    cutoffs_ = nyquist_cutoffs(cfg.factors);
    grid_ = freq_grid(cfg.extended_length());
  }

  FilterbankState filterbank_state() const {
    FilterbankState st;
    st.u = u_->val;
    st.r = cfg.factors;
    st.tau = cfg.tau;
    st.eps = cfg.eps;
    return st;
  }

  ForwardResult forward(const Tensor& x, double lambda) const {
    if (x.ndim() != 2 || x.dim(0) != cfg.window || x.dim(1) != cfg.channels)
      throw shape_mismatch("model: window shape " + shape_str(x.shape) +
                           " does not match config");
    ForwardResult r;
    ag::Var xv = ag::constant(x);

    ag::Var h_time_raw = time_enc_(xv);
    r.planes_x = ag::stft_node(xv, cfg.stft);
    ag::Var h_freq_raw = freq_enc_(r.planes_x);

    ag::Var edges = learned_edges_var(u_, cutoffs_);
    auto masks = band_masks_var(edges, cfg.tau, cfg.eps, grid_);
    std::vector<ag::Var> comps;
    for (std::size_t k = 0; k < cfg.factors.size(); ++k)
      comps.push_back(ag::band_component_node(xv, masks[k], cfg.factors[k],
                                              cfg.band_pad()));

    auto lk = cfg.scale_lengths();
    std::vector<ag::Var> frags;
    for (auto& comp : comps) frags.push_back(patch_(comp));
    ag::Var tokens = ag::add(ag::concat_rows(frags), ms_pos_);
    r.h_ms_raw = ms_enc_(tokens, block_mask_);

    if (cfg.enable_interaction) {
      auto streams = fusion_(h_time_raw, h_freq_raw, r.h_ms_raw);
      r.h_time = streams.time;
      r.h_freq = streams.freq;
      r.h_ms = streams.ms;
    } else {
      r.h_time = h_time_raw;
      r.h_freq = h_freq_raw;
      r.h_ms = r.h_ms_raw;
    }

    r.p_t = proto_assign(r.h_time, bank_t_);
    r.p_f = proto_assign(r.h_freq, bank_f_);
    ag::Var z_t = ag::mean_rows(r.h_time);
    ag::Var z_f = ag::mean_rows(r.h_freq);
    ag::Var z_t_plus = memory_mix(z_t, memory_read(r.p_t, bank_t_), lambda);
    ag::Var z_f_plus = memory_mix(z_f, memory_read(r.p_f, bank_f_), lambda);
    ag::Var z = latent_(z_t_plus, z_f_plus);

    r.x_hat = ag::reshape(dec_time_(z), {cfg.window, cfg.channels});
    std::size_t bins = cfg.stft.bins();
    r.s_hat = ag::planes_from_frames(dec_freq_(z), 2 * cfg.channels, bins);
    r.x_from_freq = ag::istft_node(r.s_hat, cfg.stft, cfg.window);
    r.s_from_time = ag::stft_node(r.x_hat, cfg.stft);

    ag::Var h_ms_tilde = ms_fuse_tokens(r.h_ms_raw, r.h_ms, cfg.beta_res,
                                        cfg.beta_int);
    r.ms = ms_dec_(h_ms_tilde, lk, cfg.component_lengths(), cfg.window);
    for (std::size_t k = 1; k < comps.size(); ++k) r.ms_targets.push_back(comps[k]);

    r.p_f_aligned = align_assignments(r.p_f->val, cfg.window);
    r.gate = uncertainty_gate(r.p_t->val, r.p_f_aligned);
    r.js = js_evidence(r.p_t->val, r.p_f_aligned);
    return r;
  }

  struct Losses {
    ag::Var ms, cyc, cons, total;
    LossRecord record(const LossWeights& w) const {
      LossRecord rec;
      rec.ms = ms->val.data[0];
      rec.cyc = cyc->val.data[0];
      rec.cons = cons->val.data[0];
      rec.total = total_loss(rec.ms, rec.cyc, rec.cons, w);
      return rec;
    }
  };

  Losses losses(const ForwardResult& r, const Tensor& x, const LossWeights& w) const {
    Losses l;
    ag::Var xv = ag::constant(x);
    l.ms = loss_ms(r.ms, r.ms_targets, xv, w);
    l.cyc = loss_cyc(r.s_from_time, r.planes_x, r.x_from_freq, xv);
    l.cons = loss_cons(r.ms.full_rate, r.x_from_freq);
    l.total = total_loss_var(l.ms, l.cyc, l.cons, w);
    return l;
  }

 private:
  TimeEncoder time_enc_;
  FreqEncoder freq_enc_;
  PatchEmbed patch_;
  ag::Var ms_pos_;
  MultiscaleEncoder ms_enc_;
  TriViewFusion fusion_;
  PrototypeBank bank_t_, bank_f_;
  LatentFuser latent_;
  PositionalDecoder dec_time_, dec_freq_;
  MsDecoder ms_dec_;
  ag::Var u_;
  Tensor block_mask_, cutoffs_, grid_;
};

}  // namespace left
