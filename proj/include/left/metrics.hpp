#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "left/tensor.hpp"

// Evaluation: threshold-free AUC family with range-aware label softening and
// its volume-under-surface aggregation, SPOT threshold selection, and the
// plain point-wise F1/accuracy (no point adjustment).

namespace left {

struct LabeledScores {
  std::vector<double> scores;
  std::vector<int> labels;  // 0/1

  void validate() const {
    if (scores.size() != labels.size())
      throw invalid_input("labeled scores: length mismatch");
    for (int l : labels)
      if (l != 0 && l != 1) throw invalid_input("labeled scores: labels must be 0/1");
  }
  bool both_classes() const {
    bool pos = false, neg = false;
    for (int l : labels) (l ? pos : neg) = true;
    return pos && neg;
  }
};

struct VusConfig {
  std::size_t max_buffer = 0;  // largest label-tolerance buffer integrated over
  std::size_t buffer_steps = 16;
};

namespace detail {

/// Soft labels under a tolerance buffer: 1 inside an anomalous range, a
/// square-root taper within distance <= buffer outside it, 0 beyond.
/// Overlapping contributions take the maximum.
inline std::vector<double> soften_labels(const std::vector<int>& labels,
                                         std::size_t buffer) {
  std::size_t n = labels.size();
  std::vector<double> soft(n, 0.0);
  // distance to the nearest anomalous point, two sweeps
  std::vector<std::size_t> dist(n, n + 1);
  std::size_t run = n + 1;
  for (std::size_t i = 0; i < n; ++i) {
    run = labels[i] ? 0 : (run == n + 1 ? run : run + 1);
    dist[i] = run;
  }
  run = n + 1;
  for (std::size_t i = n; i-- > 0;) {
    run = labels[i] ? 0 : (run == n + 1 ? run : run + 1);
    dist[i] = std::min(dist[i], run);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (dist[i] == 0)
      soft[i] = 1.0;
    else if (buffer > 0 && dist[i] <= buffer)
      soft[i] = std::sqrt(1.0 - double(dist[i]) / double(buffer + 1));
  }
  return soft;
}

struct CurvePoints {
  // per threshold group, cumulative positive mass and prediction count
  std::vector<double> tp_mass;
  std::vector<double> fp_mass;
  std::vector<double> count;
  double total_pos = 0, total_neg = 0;
};

/// Sweep thresholds over descending scores with tie grouping, accumulating
/// soft-label masses.
inline CurvePoints sweep(const std::vector<double>& scores,
                         const std::vector<double>& soft) {
  std::size_t n = scores.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  CurvePoints cp;
  for (double s : soft) {
    cp.total_pos += s;
    cp.total_neg += 1.0 - s;
  }
  double tp = 0, fp = 0, cnt = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[idx[j]] == scores[idx[i]]) {
      tp += soft[idx[j]];
      fp += 1.0 - soft[idx[j]];
      cnt += 1.0;
      ++j;
    }
    cp.tp_mass.push_back(tp);
    cp.fp_mass.push_back(fp);
    cp.count.push_back(cnt);
    i = j;
  }
  return cp;
}

inline double roc_area(const CurvePoints& cp) {
  double area = 0, prev_fpr = 0, prev_tpr = 0;
  for (std::size_t i = 0; i < cp.tp_mass.size(); ++i) {
    double tpr = cp.tp_mass[i] / cp.total_pos;
    double fpr = cp.fp_mass[i] / cp.total_neg;
    area += (fpr - prev_fpr) * 0.5 * (tpr + prev_tpr);
    prev_fpr = fpr;
    prev_tpr = tpr;
  }
  return area;
}

/// Average precision with the interpolated (envelope) convention: each
/// recall increment earns the best precision achievable at or beyond it.
inline double pr_area(const CurvePoints& cp) {
  std::size_t n = cp.tp_mass.size();
  std::vector<double> prec(n);
  for (std::size_t i = 0; i < n; ++i) prec[i] = cp.tp_mass[i] / cp.count[i];
  for (std::size_t i = n - 1; i-- > 0;) prec[i] = std::max(prec[i], prec[i + 1]);
  double area = 0, prev_recall = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double recall = cp.tp_mass[i] / cp.total_pos;
    area += (recall - prev_recall) * prec[i];
    prev_recall = recall;
  }
  return area;
}

}  // namespace detail

inline double auc_roc(const LabeledScores& ls) {
  ls.validate();
  if (!ls.both_classes())
    throw invalid_input("auc: both classes must be present");
  std::vector<double> soft(ls.labels.begin(), ls.labels.end());
  return detail::roc_area(detail::sweep(ls.scores, soft));
}

inline double auc_pr(const LabeledScores& ls) {
  ls.validate();
  if (!ls.both_classes())
    throw invalid_input("auc: both classes must be present");
  std::vector<double> soft(ls.labels.begin(), ls.labels.end());
  return detail::pr_area(detail::sweep(ls.scores, soft));
}

/// Range-aware AUC pair at a fixed buffer width: labels soften within the
/// buffer around each anomalous range, then ROC/PR areas run on the adjusted
/// labels.
inline std::pair<double, double> range_auc(const LabeledScores& ls,
                                           std::size_t buffer) {
  ls.validate();
  if (!ls.both_classes())
    throw invalid_input("range_auc: both classes must be present");
  auto soft = detail::soften_labels(ls.labels, buffer);
  auto cp = detail::sweep(ls.scores, soft);
  return {detail::roc_area(cp), detail::pr_area(cp)};
}

/// Volume under the ROC/PR surfaces: trapezoidal integration of range_auc
/// over buffer widths 0..max_buffer, normalized by max_buffer.
inline std::pair<double, double> vus(const LabeledScores& ls, const VusConfig& cfg) {
  ls.validate();
  if (cfg.max_buffer == 0) {
    auto p = range_auc(ls, 0);
    return p;
  }
  std::size_t steps = std::max<std::size_t>(2, std::min(cfg.buffer_steps,
                                                        cfg.max_buffer + 1));
  std::vector<std::size_t> buffers;
  for (std::size_t i = 0; i < steps; ++i) {
    std::size_t b = std::size_t(std::llround(double(i) * double(cfg.max_buffer) /
                                             double(steps - 1)));
    if (buffers.empty() || buffers.back() != b) buffers.push_back(b);
  }
  double vol_roc = 0, vol_pr = 0;
  double prev_roc = 0, prev_pr = 0;
  std::size_t prev_b = 0;
  for (std::size_t i = 0; i < buffers.size(); ++i) {
    auto [r, p] = range_auc(ls, buffers[i]);
    if (i > 0) {
      double db = double(buffers[i] - prev_b);
      vol_roc += db * 0.5 * (r + prev_roc);
      vol_pr += db * 0.5 * (p + prev_pr);
    }
    prev_roc = r;
    prev_pr = p;
    prev_b = buffers[i];
  }
  return {vol_roc / double(cfg.max_buffer), vol_pr / double(cfg.max_buffer)};
}

struct SpotResult {
  double threshold = 0;
  bool fallback = false;  // degenerate tail, empirical quantile used
  double xi = 0;
  double sigma = 0;
  double init_threshold = 0;
};

namespace detail {

inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw invalid_input("quantile of empty set");
  double pos = q * double(sorted.size() - 1);
  std::size_t lo = std::size_t(pos);
  std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  double w = pos - double(lo);
  return (1.0 - w) * sorted[lo] + w * sorted[hi];
}

inline double gpd_loglik(const std::vector<double>& y, double xi, double sigma) {
  if (sigma <= 0) return -1e300;
  double n = double(y.size());
  double ll = -n * std::log(sigma);
  for (double v : y) {
    if (std::abs(xi) < 1e-12) {
      ll -= v / sigma;
    } else {
      double a = 1.0 + xi * v / sigma;
      if (a <= 0) return -1e300;
      ll -= (1.0 + 1.0 / xi) * std::log(a);
    }
  }
  return ll;
}

}  // namespace detail

/// Peaks-over-threshold: fit a generalized Pareto tail to excesses over an
/// initial high quantile (Grimshaw root search plus a method-of-moments
/// candidate, best likelihood wins) and return the level with exceedance
/// probability q. A degenerate tail falls back to the empirical quantile and
/// is flagged.
inline SpotResult spot_threshold(std::vector<double> calibration, double risk,
                                 double init_quantile = 0.98) {
  if (calibration.size() < 100)
    throw invalid_input("spot: calibration set must have at least 100 points");
  if (risk <= 0 || risk >= 1) throw invalid_input("spot: risk must be in (0,1)");
  std::sort(calibration.begin(), calibration.end());
  double t0 = detail::quantile_sorted(calibration, init_quantile);

  std::vector<double> y;
  for (double v : calibration)
    if (v > t0) y.push_back(v - t0);

  SpotResult res;
  res.init_threshold = t0;
  if (y.size() < 3 || *std::max_element(y.begin(), y.end()) <= 1e-12) {
    res.fallback = true;
    res.threshold = detail::quantile_sorted(calibration, 1.0 - risk);
    return res;
  }

  double n = double(calibration.size());
  double nt = double(y.size());
  double ymin = *std::min_element(y.begin(), y.end());
  double ymax = *std::max_element(y.begin(), y.end());
  double ymean = std::accumulate(y.begin(), y.end(), 0.0) / nt;

  // candidate (xi, sigma) pairs
  std::vector<std::pair<double, double>> cands;
  {
    // method of moments
    double s2 = 0;
    for (double v : y) s2 += (v - ymean) * (v - ymean);
    s2 /= nt;
    if (s2 > 0) {
      double xi = 0.5 * (1.0 - ymean * ymean / s2);
      double sigma = 0.5 * ymean * (ymean * ymean / s2 + 1.0);
      cands.emplace_back(xi, sigma);
    }
    cands.emplace_back(0.0, ymean);  // exponential tail
  }
  {
    // Grimshaw: roots of w(th) = u(s) v(s) - 1 with s_i = 1 + th * y_i
    auto w_of = [&](double th) {
      double u = 0, v = 0;
      for (double yi : y) {
        double s = 1.0 + th * yi;
        if (s <= 0) return std::numeric_limits<double>::quiet_NaN();
        u += std::log(s);
        v += 1.0 / s;
      }
      u = 1.0 + u / nt;
      v = v / nt;
      return u * v - 1.0;
    };
    auto add_root_candidates = [&](double lo, double hi) {
      const int grid = 60;
      double prev_th = lo, prev_w = w_of(lo);
      for (int i = 1; i <= grid; ++i) {
        double th = lo + (hi - lo) * double(i) / grid;
        double w = w_of(th);
        if (std::isfinite(prev_w) && std::isfinite(w) && prev_w * w < 0) {
          double a = prev_th, b = th;
          for (int it = 0; it < 60; ++it) {
            double mid = 0.5 * (a + b);
            double wm = w_of(mid);
            if (!std::isfinite(wm)) break;
            if (wm * w_of(a) <= 0)
              b = mid;
            else
              a = mid;
          }
          double th_star = 0.5 * (a + b);
          double xi = 0;
          for (double yi : y) xi += std::log(1.0 + th_star * yi);
          xi /= nt;
          if (std::abs(th_star) > 1e-300) cands.emplace_back(xi, xi / th_star);
        }
        prev_th = th;
        prev_w = w;
      }
    };
    double eps = 1e-8;
    add_root_candidates(-1.0 / ymax + eps, -eps);
    add_root_candidates(eps, 2.0 * (ymean - ymin) / (ymin * ymin + 1e-12));
  }

  double best_ll = -1e300;
  for (auto [xi, sigma] : cands) {
    double ll = detail::gpd_loglik(y, xi, sigma);
    if (ll > best_ll) {
      best_ll = ll;
      res.xi = xi;
      res.sigma = sigma;
    }
  }
  if (best_ll <= -1e300) {
    res.fallback = true;
    res.threshold = detail::quantile_sorted(calibration, 1.0 - risk);
    return res;
  }

  double ratio = risk * n / nt;
  if (std::abs(res.xi) < 1e-9)
    res.threshold = t0 - res.sigma * std::log(ratio);
  else
    res.threshold = t0 + res.sigma / res.xi * (std::pow(ratio, -res.xi) - 1.0);
  return res;
}

/// Point-wise F1 and accuracy at a fixed threshold (score >= threshold is a
/// positive prediction); no point adjustment.
inline std::pair<double, double> f1_accuracy(const LabeledScores& ls,
                                             double threshold) {
  ls.validate();
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < ls.scores.size(); ++i) {
    bool pred = ls.scores[i] >= threshold;
    bool truth = ls.labels[i] == 1;
    if (pred && truth) ++tp;
    else if (pred && !truth) ++fp;
    else if (!pred && truth) ++fn;
    else ++tn;
  }
  double f1 = (2 * tp + fp + fn) == 0 ? 0.0
                                      : 2.0 * double(tp) / double(2 * tp + fp + fn);
  double acc = double(tp + tn) / double(ls.scores.size());
  return {f1, acc};
}

}  // namespace left
