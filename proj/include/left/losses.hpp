#pragma once

#include <vector>

#include "left/autograd.hpp"
#include "left/decoders.hpp"

// SmoothL1 primitive and the three training objectives: segment-aware
// multi-scale reconstruction, time-frequency cycle consistency, and the
// cross-path term tying the two reconstruction pathways together.

namespace left {

struct LossWeights {
  double lambda_ms = 1.0;
  double lambda_cyc = 1.0;
  double lambda_cons = 0.1;
  Tensor omega;  // (K-1 supervised scales, then the full-rate term)

  /// Uniform simplex weights for the given number of supervised scales.
  static LossWeights uniform(std::size_t supervised_scales) {
    LossWeights w;
    w.omega = Tensor({supervised_scales + 1}, 1.0 / double(supervised_scales + 1));
    return w;
  }

  void set_omega(Tensor raw) {
    double s = raw.sum();
    if (s <= 0) throw invalid_input("loss weights: omega must have positive mass");
    for (auto& v : raw.data) v /= s;
    omega = std::move(raw);
  }

  void check_simplex(std::size_t supervised_scales) const {
    if (omega.numel() != supervised_scales + 1)
      throw invalid_input("loss weights: omega size must be #scales + 1");
    double s = omega.sum();
    if (std::abs(s - 1.0) > 1e-9)
      throw invalid_input("loss weights: omega must sum to 1");
    for (double v : omega.data)
      if (v < 0) throw invalid_input("loss weights: omega must be nonnegative");
  }
};

/// Mean SmoothL1 with transition point 1 (plain tensors).
inline double smooth_l1(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw shape_mismatch("smooth_l1: shape mismatch");
  double acc = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    double r = a.data[i] - b.data[i];
    double ar = std::abs(r);
    acc += ar < 1.0 ? 0.5 * r * r : ar - 0.5;
  }
  return acc / double(a.numel());
}

/// Segment-aware multi-scale objective: per-scale SmoothL1 terms weighted on
/// the simplex, plus the full-rate term.
inline ag::Var loss_ms(const MsOutputsVar& ms, const std::vector<ag::Var>& targets,
                       const ag::Var& x, const LossWeights& w) {
  if (ms.per_scale.size() != targets.size())
    throw invalid_input("loss_ms: target count mismatch");
  w.check_simplex(ms.per_scale.size());
  ag::Var total;
  for (std::size_t i = 0; i < ms.per_scale.size(); ++i) {
    ag::Var term = ag::mul_scalar(ag::smooth_l1_mean(ms.per_scale[i], targets[i]),
                                  w.omega.data[i]);
    total = total ? ag::add(total, term) : term;
  }
  ag::Var full = ag::mul_scalar(ag::smooth_l1_mean(ms.full_rate, x),
                                w.omega.data[ms.per_scale.size()]);
  return total ? ag::add(total, full) : full;
}

/// Cycle consistency: l(S_to_f, S) + l(X_from_f, X).
inline ag::Var loss_cyc(const ag::Var& s_from_time, const ag::Var& s,
                        const ag::Var& x_from_freq, const ag::Var& x) {
  return ag::add(ag::smooth_l1_mean(s_from_time, s),
                 ag::smooth_l1_mean(x_from_freq, x));
}

/// Cross-path consistency: l(X_ms, X_from_f).
inline ag::Var loss_cons(const ag::Var& ms_full, const ag::Var& x_from_freq) {
  return ag::smooth_l1_mean(ms_full, x_from_freq);
}

inline double total_loss(double ms, double cyc, double cons, const LossWeights& w) {
  return w.lambda_ms * ms + w.lambda_cyc * cyc + w.lambda_cons * cons;
}

inline ag::Var total_loss_var(const ag::Var& ms, const ag::Var& cyc,
                              const ag::Var& cons, const LossWeights& w) {
  return ag::add(ag::add(ag::mul_scalar(ms, w.lambda_ms),
                         ag::mul_scalar(cyc, w.lambda_cyc)),
                 ag::mul_scalar(cons, w.lambda_cons));
}

}  // namespace left
