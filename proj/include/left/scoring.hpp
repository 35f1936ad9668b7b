#pragma once

#include <vector>

#include "left/data.hpp"
#include "left/model.hpp"

// Tri-consistency anomaly scoring. The cycle part smooths a weighted sum of
// reconstruction residuals, the gate and the cross-path discrepancy; the
// multi-scale part aggregates per-scale residuals upsampled to full
// resolution.

namespace left {

struct ScoreWeights {
  double alpha_cyc = 0.5;
  double alpha_ms = 0.5;
  double alpha_f = 1.0;
  double alpha_t = 1.0;
  double alpha_g = 0.1;
  double alpha_c = 0.5;
  std::size_t kappa = 5;

  void validate() const {
    if (kappa % 2 == 0) throw invalid_input("score: kappa must be odd");
    for (double a : {alpha_cyc, alpha_ms, alpha_f, alpha_t, alpha_g, alpha_c})
      if (a < 0) throw invalid_input("score: weights must be nonnegative");
  }
};

struct AnomalyMap {
  Tensor total;       // (T)
  Tensor cycle_part;  // (T)
  Tensor ms_part;     // (T)
  Tensor cross_path;  // (T)
};

/// Centered moving average with edge truncation: the window is clipped at
/// the boundaries and renormalized, so each output is a convex combination
/// of inputs (nonnegative weights summing to one).
inline Tensor moving_average(const Tensor& u, std::size_t kappa) {
  if (u.ndim() != 1) throw invalid_input("moving_average: expected a vector");
  std::size_t t = u.numel();
  if (kappa % 2 == 0 || kappa > t)
    throw invalid_input("moving_average: kappa must be odd and <= length");
  std::size_t h = (kappa - 1) / 2;
  Tensor out({t});
  for (std::size_t i = 0; i < t; ++i) {
    std::size_t lo = i >= h ? i - h : 0;
    std::size_t hi = std::min(t - 1, i + h);
    double s = 0;
    for (std::size_t j = lo; j <= hi; ++j) s += u.data[j];
    out.data[i] = s / double(hi - lo + 1);
  }
  return out;
}

/// Mean absolute difference over channels at each timestamp: (T,C) -> (T).
inline Tensor mean_abs_channels(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw shape_mismatch("mean_abs_channels: shape mismatch");
  std::size_t t = a.dim(0), c = a.dim(1);
  Tensor out({t});
  for (std::size_t i = 0; i < t; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < c; ++j) s += std::abs(a.at(i, j) - b.at(i, j));
    out.data[i] = s / double(c);
  }
  return out;
}

/// c(t): per-timestamp mean over channels of |X_ms - X_from_f|.
inline Tensor cross_path_discrepancy(const Tensor& ms_full,
                                     const Tensor& x_from_freq) {
  return mean_abs_channels(ms_full, x_from_freq);
}

/// Cycle score: MA_kappa(alpha_f |X_from_f - X| + alpha_t |X_hat - X| +
/// alpha_g g + alpha_c c), channels reduced by mean before weighting.
inline Tensor score_cycle(const Tensor& x, const Tensor& x_hat,
                          const Tensor& x_from_freq, const Tensor& gate,
                          const Tensor& cross, const ScoreWeights& w) {
  w.validate();
  std::size_t t = x.dim(0);
  if (gate.numel() != t || cross.numel() != t)
    throw shape_mismatch("score_cycle: vector length mismatch");
  Tensor rt = mean_abs_channels(x_hat, x);
  Tensor rf = mean_abs_channels(x_from_freq, x);
  Tensor raw({t});
  for (std::size_t i = 0; i < t; ++i)
    raw.data[i] = w.alpha_f * rf.data[i] + w.alpha_t * rt.data[i] +
                  w.alpha_g * gate.data[i] + w.alpha_c * cross.data[i];
  return moving_average(raw, w.kappa);
}

/// Nearest-neighbor upsampling by repetition with right-cropping to len.
inline Tensor upsample_repeat(const Tensor& u, std::size_t factor, std::size_t len) {
  Tensor out({len});
  for (std::size_t i = 0; i < len; ++i)
    out.data[i] = u.data[std::min(i / factor, u.numel() - 1)];
  return out;
}

/// Multi-scale score: full-rate residual plus per-scale residuals aligned to
/// full resolution.
inline Tensor score_ms(const Tensor& ms_full, const std::vector<Tensor>& per_scale,
                       const std::vector<Tensor>& targets, const Tensor& x,
                       const std::vector<std::size_t>& factors) {
  if (per_scale.size() != targets.size() || per_scale.size() + 1 != factors.size())
    throw invalid_input("score_ms: scale bookkeeping mismatch");
  std::size_t t = x.dim(0);
  Tensor score = mean_abs_channels(ms_full, x);
  for (std::size_t i = 0; i < per_scale.size(); ++i) {
    Tensor res = mean_abs_channels(per_scale[i], targets[i]);
    Tensor up = upsample_repeat(res, factors[i + 1], t);
    for (std::size_t j = 0; j < t; ++j) score.data[j] += up.data[j];
  }
  return score;
}

/// A(t) = alpha_cyc A_cyc(t) + alpha_ms A_ms(t).
inline AnomalyMap score_total(const Tensor& cycle, const Tensor& ms,
                              const Tensor& cross, const ScoreWeights& w) {
  if (cycle.numel() != ms.numel())
    throw shape_mismatch("score_total: length mismatch");
  AnomalyMap map;
  map.cycle_part = cycle;
  map.ms_part = ms;
  map.cross_path = cross;
  map.total = Tensor({cycle.numel()});
  for (std::size_t i = 0; i < cycle.numel(); ++i)
    map.total.data[i] = w.alpha_cyc * cycle.data[i] + w.alpha_ms * ms.data[i];
  return map;
}

/// Score one window through the model.
inline AnomalyMap score_window(const LeftModel& model, const Tensor& x,
                               const ScoreWeights& w, double lambda) {
  auto fr = model.forward(x, lambda);
  Tensor ms_full = fr.ms.full_rate->val;
  Tensor x_from_freq = fr.x_from_freq->val;
  Tensor cross = cross_path_discrepancy(ms_full, x_from_freq);
  Tensor cyc = score_cycle(x, fr.x_hat->val, x_from_freq, fr.gate, cross, w);
  std::vector<Tensor> per_scale, targets;
  for (auto& v : fr.ms.per_scale) per_scale.push_back(v->val);
  for (auto& v : fr.ms_targets) targets.push_back(v->val);
  Tensor ms = score_ms(ms_full, per_scale, targets, x, model.cfg.factors);
  return score_total(cyc, ms, cross, w);
}

/// Score a whole series with the non-overlapping window protocol plus a
/// right-aligned tail window; overlapping timestamps resolve to the last
/// writer.
inline std::vector<double> score_series(const LeftModel& model, const Tensor& series,
                                        const ScoreWeights& w, double lambda) {
  std::size_t t = model.cfg.window;
  std::vector<double> scores(series.dim(0), 0.0);
  for (auto off : window_offsets(series.dim(0), t, t, true)) {
    AnomalyMap map = score_window(model, window_at(series, off, t), w, lambda);
    for (std::size_t i = 0; i < t; ++i) scores[off + i] = map.total.data[i];
  }
  return scores;
}

}  // namespace left
