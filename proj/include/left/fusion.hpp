#pragma once

#include <string>
#include <vector>

#include "left/nn.hpp"

// Tri-view interaction via directed cross-attention. The default wiring
// follows the Fourier link: time attends to frequency, frequency attends
// back to time, and the multi-scale stream attends to time. Two-view
// strategies leave the third stream untouched (the same Var, bit for bit).

namespace left {

enum class FusionStrategy { def, all_pairs, mf, mt, tf };

inline FusionStrategy fusion_strategy_from_string(const std::string& s) {
  if (s == "default") return FusionStrategy::def;
  if (s == "all_pairs") return FusionStrategy::all_pairs;
  if (s == "mf") return FusionStrategy::mf;
  if (s == "mt") return FusionStrategy::mt;
  if (s == "tf") return FusionStrategy::tf;
  throw invalid_input("unknown fusion strategy: " + s);
}

inline std::string to_string(FusionStrategy s) {
  switch (s) {
    case FusionStrategy::def: return "default";
    case FusionStrategy::all_pairs: return "all_pairs";
    case FusionStrategy::mf: return "mf";
    case FusionStrategy::mt: return "mt";
    case FusionStrategy::tf: return "tf";
  }
  return "?";
}

struct FusionConfig {
  std::size_t depth = 1;
  FusionStrategy strategy = FusionStrategy::def;
  std::size_t heads = 4;
  std::size_t d_model = 64;
  // Updates are computed from the layer-input snapshots by default; the
  // sequential variant feeds each update the streams already updated within
  // the layer.
  bool sequential = false;

  void validate() const {
    if (depth < 1) throw invalid_input("fusion: depth must be >= 1");
    if (d_model % heads != 0) throw invalid_input("fusion: heads must divide d");
  }
};

struct TriViewFusion {
  struct Layer {
    // Directed links; only those the strategy uses are created.
    struct Link {
      nn::MultiheadAttention attn;
      bool active = false;
    };
    Link t_from_f, t_from_m, f_from_t, f_from_m, m_from_t, m_from_f;
    nn::LayerNorm ln_t, ln_f, ln_m;
    bool update_t = false, update_f = false, update_m = false;
  };
  std::vector<Layer> layers;
  FusionConfig cfg;

  static TriViewFusion create(nn::ParamStore& ps, const std::string& name,
                              const FusionConfig& cfg, std::mt19937_64& rng) {
    cfg.validate();
    TriViewFusion fu;
    fu.cfg = cfg;
    auto mk = [&](const std::string& n) {
      return nn::MultiheadAttention::create(ps, n, cfg.d_model, cfg.heads, rng);
    };
    for (std::size_t i = 0; i < cfg.depth; ++i) {
      std::string ln = name + ".layer" + std::to_string(i);
      Layer l;
      switch (cfg.strategy) {
        case FusionStrategy::def:
          l.t_from_f = {mk(ln + ".tf"), true};
          l.f_from_t = {mk(ln + ".ft"), true};
          l.m_from_t = {mk(ln + ".mt"), true};
          break;
        case FusionStrategy::all_pairs:
          l.t_from_f = {mk(ln + ".tf"), true};
          l.t_from_m = {mk(ln + ".tm"), true};
          l.f_from_t = {mk(ln + ".ft"), true};
          l.f_from_m = {mk(ln + ".fm"), true};
          l.m_from_t = {mk(ln + ".mt"), true};
          l.m_from_f = {mk(ln + ".mf"), true};
          break;
        case FusionStrategy::mf:
          l.m_from_f = {mk(ln + ".mf"), true};
          l.f_from_m = {mk(ln + ".fm"), true};
          break;
        case FusionStrategy::mt:
          l.m_from_t = {mk(ln + ".mt"), true};
          l.t_from_m = {mk(ln + ".tm"), true};
          break;
        case FusionStrategy::tf:
          l.t_from_f = {mk(ln + ".tf"), true};
          l.f_from_t = {mk(ln + ".ft"), true};
          break;
      }
      l.update_t = l.t_from_f.active || l.t_from_m.active;
      l.update_f = l.f_from_t.active || l.f_from_m.active;
      l.update_m = l.m_from_t.active || l.m_from_f.active;
      if (l.update_t) l.ln_t = nn::LayerNorm::create(ps, ln + ".ln_t", cfg.d_model);
      if (l.update_f) l.ln_f = nn::LayerNorm::create(ps, ln + ".ln_f", cfg.d_model);
      if (l.update_m) l.ln_m = nn::LayerNorm::create(ps, ln + ".ln_m", cfg.d_model);
      fu.layers.push_back(std::move(l));
    }
    return fu;
  }

  struct Streams {
    ag::Var time, freq, ms;
  };

  Streams operator()(const ag::Var& h_time, const ag::Var& h_freq,
                     const ag::Var& h_ms) const {
    std::size_t d = cfg.d_model;
    if (h_time->val.dim(1) != d || h_freq->val.dim(1) != d || h_ms->val.dim(1) != d)
      throw invalid_input("fusion: stream width does not match d_model");
    Streams s{h_time, h_freq, h_ms};
    for (const auto& l : layers) {
      ag::Var t0 = s.time, f0 = s.freq, m0 = s.ms;
      auto src_t = [&] { return cfg.sequential ? s.time : t0; };
      auto src_f = [&] { return cfg.sequential ? s.freq : f0; };
      auto src_m = [&] { return cfg.sequential ? s.ms : m0; };
      if (l.update_t) {
        ag::Var upd;
        if (l.t_from_f.active) upd = l.t_from_f.attn(t0, src_f());
        if (l.t_from_m.active) {
          ag::Var u2 = l.t_from_m.attn(t0, src_m());
          upd = upd ? ag::add(upd, u2) : u2;
        }
        s.time = l.ln_t(ag::add(t0, upd));
      }
      if (l.update_f) {
        ag::Var upd;
        if (l.f_from_t.active) upd = l.f_from_t.attn(f0, src_t());
        if (l.f_from_m.active) {
          ag::Var u2 = l.f_from_m.attn(f0, src_m());
          upd = upd ? ag::add(upd, u2) : u2;
        }
        s.freq = l.ln_f(ag::add(f0, upd));
      }
      if (l.update_m) {
        ag::Var upd;
        if (l.m_from_t.active) upd = l.m_from_t.attn(m0, src_t());
        if (l.m_from_f.active) {
          ag::Var u2 = l.m_from_f.attn(m0, src_f());
          upd = upd ? ag::add(upd, u2) : u2;
        }
        s.ms = l.ln_m(ag::add(m0, upd));
      }
    }
    return s;
  }
};

}  // namespace left
