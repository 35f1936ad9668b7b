#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "left/tensor.hpp"

// Static SVG plots for eval runs: anomaly score against labeled ranges, and
// per-channel series views.

namespace left {

namespace detail {

inline void svg_polyline(std::ofstream& os, const std::vector<double>& ys,
                         double x0, double y0, double w, double h,
                         const std::string& color) {
  if (ys.empty()) return;
  double lo = ys[0], hi = ys[0];
  for (double v : ys) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi - lo < 1e-12) hi = lo + 1;
  os << "<polyline fill=\"none\" stroke=\"" << color
     << "\" stroke-width=\"1\" points=\"";
  std::size_t n = ys.size();
  std::size_t step = std::max<std::size_t>(1, n / 4000);
  for (std::size_t i = 0; i < n; i += step) {
    double px = x0 + w * double(i) / double(n - 1);
    double py = y0 + h - h * (ys[i] - lo) / (hi - lo);
    os << px << "," << py << " ";
  }
  os << "\"/>\n";
}

inline void svg_label_spans(std::ofstream& os, const std::vector<int>& labels,
                            double x0, double y0, double w, double h) {
  std::size_t n = labels.size();
  std::size_t i = 0;
  while (i < n) {
    if (!labels[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && labels[j]) ++j;
    double px = x0 + w * double(i) / double(n - 1);
    double pw = w * double(j - i) / double(n - 1);
    os << "<rect x=\"" << px << "\" y=\"" << y0 << "\" width=\""
       << std::max(pw, 1.0) << "\" height=\"" << h
       << "\" fill=\"#f28080\" fill-opacity=\"0.35\"/>\n";
    i = j;
  }
}

}  // namespace detail

/// Score curve over the labeled test span, anomalous ranges shaded, optional
/// threshold line.
inline void write_score_plot(const std::string& path,
                             const std::vector<double>& scores,
                             const std::vector<int>& labels, double threshold,
                             bool with_threshold) {
  std::ofstream os(path);
  if (!os) throw io_error("cannot write plot: " + path);
  double W = 960, H = 240, m = 30;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
     << "\" height=\"" << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  detail::svg_label_spans(os, labels, m, m, W - 2 * m, H - 2 * m);
  detail::svg_polyline(os, scores, m, m, W - 2 * m, H - 2 * m, "#1f5fbf");
  if (with_threshold) {
    double lo = scores[0], hi = scores[0];
    for (double v : scores) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi - lo < 1e-12) hi = lo + 1;
    if (threshold >= lo && threshold <= hi) {
      double py = m + (H - 2 * m) - (H - 2 * m) * (threshold - lo) / (hi - lo);
      os << "<line x1=\"" << m << "\" y1=\"" << py << "\" x2=\"" << W - m
         << "\" y2=\"" << py
         << "\" stroke=\"#44aa44\" stroke-dasharray=\"6,4\"/>\n";
    }
  }
  os << "<text x=\"" << m << "\" y=\"18\" font-size=\"12\">anomaly score"
     << (with_threshold ? " (dashed: threshold)" : "") << "</text>\n";
  os << "</svg>\n";
}

/// One channel of the test series with labeled ranges shaded.
inline void write_channel_plot(const std::string& path, const Tensor& series,
                               std::size_t channel, const std::vector<int>& labels) {
  std::ofstream os(path);
  if (!os) throw io_error("cannot write plot: " + path);
  double W = 960, H = 200, m = 30;
  std::vector<double> ys(series.dim(0));
  for (std::size_t i = 0; i < ys.size(); ++i) ys[i] = series.at(i, channel);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
     << "\" height=\"" << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  detail::svg_label_spans(os, labels, m, m, W - 2 * m, H - 2 * m);
  detail::svg_polyline(os, ys, m, m, W - 2 * m, H - 2 * m, "#333333");
  os << "<text x=\"" << m << "\" y=\"16\" font-size=\"12\">channel "
     << channel << "</text>\n";
  os << "</svg>\n";
}

}  // namespace left
