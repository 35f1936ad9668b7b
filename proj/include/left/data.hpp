#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "left/tensor.hpp"

// Dataset ingestion and the synthetic labeled-series generator. On-disk
// layout: <root>/<name>/{train.bin,val.bin,test.bin,labels.bin,manifest.json}
// with raw little-endian float64 matrices; the manifest records names,
// shapes and the window/stride defaults.

namespace left {

struct SeriesDataset {
  Tensor train;       // (N_train, C)
  Tensor validation;  // (N_val, C)
  Tensor test;        // (N_test, C)
  std::vector<int> test_labels;
  std::string name;
  std::size_t window = 192;
  std::size_t stride = 96;
  std::size_t nan_filled = 0;
};

namespace detail {

inline Tensor read_matrix_f64le(const std::string& path, std::size_t rows,
                                std::size_t cols) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw io_error("dataset-not-found: " + path);
  Tensor t({rows, cols});
  is.read(reinterpret_cast<char*>(t.data.data()),
          std::streamsize(t.numel() * sizeof(double)));
  if (!is) throw io_error("dataset file truncated: " + path);
  return t;
}

inline void write_matrix_f64le(const std::string& path, const Tensor& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw io_error("cannot write: " + path);
  os.write(reinterpret_cast<const char*>(t.data.data()),
           std::streamsize(t.numel() * sizeof(double)));
}

/// Previous-value fill for NaN cells (first rows fall back to 0).
inline std::size_t impute_nan(Tensor& m) {
  std::size_t filled = 0;
  std::size_t rows = m.dim(0), cols = m.dim(1);
  for (std::size_t c = 0; c < cols; ++c) {
    double last = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      double& v = m.at(r, c);
      if (std::isnan(v)) {
        v = last;
        ++filled;
      } else {
        last = v;
      }
    }
  }
  return filled;
}

inline Tensor keep_first_channel(const Tensor& m) {
  Tensor out({m.dim(0), 1});
  for (std::size_t r = 0; r < m.dim(0); ++r) out.at(r, 0) = m.at(r, 0);
  return out;
}

}  // namespace detail

/// Per-dataset defaults for the known benchmarks; anything else gets the
/// manifest's values (or 192/96 when the manifest is silent).
inline std::size_t default_window_for(const std::string& name) {
  if (name == "msl") return 96;
  if (name == "gecco") return 128;
  return 192;
}

inline bool keep_first_channel_only(const std::string& name) {
  return name == "msl" || name == "smap";
}

/// Per-channel standardization using train statistics only.
inline void standardize_with_train_stats(SeriesDataset& ds) {
  std::size_t c = ds.train.dim(1), n = ds.train.dim(0);
  for (std::size_t ch = 0; ch < c; ++ch) {
    double mean = 0;
    for (std::size_t r = 0; r < n; ++r) mean += ds.train.at(r, ch);
    mean /= double(n);
    double var = 0;
    for (std::size_t r = 0; r < n; ++r) {
      double d = ds.train.at(r, ch) - mean;
      var += d * d;
    }
    var /= double(n);
    double sd = std::sqrt(var);
    if (sd < 1e-8) sd = 1e-8;
    auto apply = [&](Tensor& m) {
      for (std::size_t r = 0; r < m.dim(0); ++r)
        m.at(r, ch) = (m.at(r, ch) - mean) / sd;
    };
    apply(ds.train);
    apply(ds.validation);
    apply(ds.test);
  }
}

inline SeriesDataset load_dataset(const std::string& root, const std::string& name) {
  namespace fs = std::filesystem;
  fs::path dir = fs::path(root) / name;
  fs::path manifest_path = dir / "manifest.json";
  std::ifstream mis(manifest_path);
  if (!mis) throw io_error("dataset-not-found: " + manifest_path.string());
  nlohmann::json manifest;
  mis >> manifest;

  auto load_part = [&](const std::string& part) {
    const auto& f = manifest.at("files").at(part);
    return detail::read_matrix_f64le((dir / f.at("path").get<std::string>()).string(),
                                     f.at("rows"), f.at("cols"));
  };

  SeriesDataset ds;
  ds.name = name;
  ds.train = load_part("train");
  ds.validation = load_part("val");
  ds.test = load_part("test");
  Tensor labels = load_part("labels");
  if (labels.dim(0) != ds.test.dim(0))
    throw invalid_input("dataset: label length does not match test length");
  ds.test_labels.resize(labels.dim(0));
  for (std::size_t i = 0; i < labels.dim(0); ++i)
    ds.test_labels[i] = labels.at(i, 0) > 0.5 ? 1 : 0;

  if (keep_first_channel_only(name)) {
    ds.train = detail::keep_first_channel(ds.train);
    ds.validation = detail::keep_first_channel(ds.validation);
    ds.test = detail::keep_first_channel(ds.test);
  }

  ds.nan_filled = detail::impute_nan(ds.train) + detail::impute_nan(ds.validation) +
                  detail::impute_nan(ds.test);
  if (ds.nan_filled)
    std::cerr << "[data] " << name << ": filled " << ds.nan_filled
              << " NaN cells by previous value\n";

  ds.window = manifest.value("window", default_window_for(name));
  ds.stride = manifest.value("stride", ds.window / 2);
  standardize_with_train_stats(ds);
  return ds;
}

inline void save_dataset(const SeriesDataset& ds, const std::string& root) {
  namespace fs = std::filesystem;
  fs::path dir = fs::path(root) / ds.name;
  fs::create_directories(dir);
  detail::write_matrix_f64le((dir / "train.bin").string(), ds.train);
  detail::write_matrix_f64le((dir / "val.bin").string(), ds.validation);
  detail::write_matrix_f64le((dir / "test.bin").string(), ds.test);
  Tensor labels({ds.test_labels.size(), 1});
  for (std::size_t i = 0; i < ds.test_labels.size(); ++i)
    labels.at(i, 0) = double(ds.test_labels[i]);
  detail::write_matrix_f64le((dir / "labels.bin").string(), labels);

  nlohmann::json manifest{
      {"name", ds.name},
      {"dtype", "f64le"},
      {"window", ds.window},
      {"stride", ds.stride},
      {"files",
       {{"train", {{"path", "train.bin"}, {"rows", ds.train.dim(0)}, {"cols", ds.train.dim(1)}}},
        {"val", {{"path", "val.bin"}, {"rows", ds.validation.dim(0)}, {"cols", ds.validation.dim(1)}}},
        {"test", {{"path", "test.bin"}, {"rows", ds.test.dim(0)}, {"cols", ds.test.dim(1)}}},
        {"labels", {{"path", "labels.bin"}, {"rows", labels.dim(0)}, {"cols", 1}}}}}};
  std::ofstream os(dir / "manifest.json");
  os << manifest.dump(2) << "\n";
  if (!os) throw io_error("cannot write manifest under " + dir.string());
}

/// Deterministic window enumeration; keep_tail appends a final right-aligned
/// window so every timestamp is covered.
inline std::vector<std::size_t> window_offsets(std::size_t length, std::size_t t,
                                               std::size_t stride, bool keep_tail) {
  if (t > length) throw invalid_input("make_windows: window longer than series");
  if (stride == 0) throw invalid_input("make_windows: zero stride");
  std::vector<std::size_t> offs;
  for (std::size_t o = 0; o + t <= length; o += stride) offs.push_back(o);
  if (keep_tail) {
    std::size_t tail = length - t;
    if (offs.empty() || offs.back() != tail) offs.push_back(tail);
  }
  return offs;
}

inline Tensor window_at(const Tensor& series, std::size_t off, std::size_t t) {
  std::size_t c = series.dim(1);
  Tensor w({t, c});
  std::copy(series.data.begin() + off * c, series.data.begin() + (off + t) * c,
            w.data.begin());
  return w;
}

inline std::vector<Tensor> make_windows(const Tensor& series, std::size_t t,
                                        std::size_t stride, bool keep_tail) {
  std::vector<Tensor> out;
  for (auto off : window_offsets(series.dim(0), t, stride, keep_tail))
    out.push_back(window_at(series, off, t));
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic corpus
// ---------------------------------------------------------------------------

struct AnomalySpec {
  std::string type;       // spike | drift | period-shift | band-energy-shift
  std::size_t start = 0;  // offset into the test segment
  std::size_t duration = 1;
  double magnitude = 1.0;
};

struct SynthConfig {
  std::size_t length = 20000;
  std::size_t channels = 3;
  std::vector<double> periods;  // base period per channel
  double noise = 0.1;
  std::vector<AnomalySpec> anomalies;
  std::uint64_t seed = 1234;
  double train_frac = 0.6;
  double val_frac = 0.2;
  std::size_t window = 192;
  std::size_t stride = 96;

  void validate() const {
    if (channels == 0 || length < 10) throw invalid_input("synth: degenerate size");
    if (!periods.empty() && periods.size() != channels)
      throw invalid_input("synth: need one period per channel");
    if (train_frac + val_frac >= 1.0)
      throw invalid_input("synth: splits leave no test data");
  }
};

/// Sum of per-channel sinusoids (plus a weaker harmonic) with Gaussian
/// noise; anomalies are injected into the test segment only, with exact
/// ground-truth labels.
inline SeriesDataset synth_generate(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> nd(0.0, cfg.noise);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);

  std::vector<double> periods = cfg.periods;
  if (periods.empty())
    for (std::size_t c = 0; c < cfg.channels; ++c)
      periods.push_back(16.0 * double(c + 1));

  std::vector<double> ph1(cfg.channels), ph2(cfg.channels);
  for (std::size_t c = 0; c < cfg.channels; ++c) {
    ph1[c] = phase(rng);
    ph2[c] = phase(rng);
  }

  std::size_t n_train = std::size_t(cfg.train_frac * double(cfg.length));
  std::size_t n_val = std::size_t(cfg.val_frac * double(cfg.length));
  std::size_t n_test = cfg.length - n_train - n_val;

  Tensor full({cfg.length, cfg.channels});
  for (std::size_t t = 0; t < cfg.length; ++t)
    for (std::size_t c = 0; c < cfg.channels; ++c)
      full.at(t, c) = std::sin(2.0 * M_PI * double(t) / periods[c] + ph1[c]) +
                      0.4 * std::sin(4.0 * M_PI * double(t) / periods[c] + ph2[c]) +
                      nd(rng);

  std::vector<int> labels(n_test, 0);
  std::size_t test_base = n_train + n_val;
  for (std::size_t ai = 0; ai < cfg.anomalies.size(); ++ai) {
    const auto& a = cfg.anomalies[ai];
    if (a.start + a.duration > n_test)
      throw invalid_input("synth: anomaly outside the test segment");
    std::size_t ch = ai % cfg.channels;
    for (std::size_t i = 0; i < a.duration; ++i) {
      std::size_t t = test_base + a.start + i;
      double frac = a.duration > 1 ? double(i) / double(a.duration - 1) : 1.0;
      if (a.type == "spike") {
        full.at(t, ch) += a.magnitude * (i % 2 == 0 ? 1.0 : -1.0);
      } else if (a.type == "drift") {
        full.at(t, ch) += a.magnitude * frac;
      } else if (a.type == "period-shift") {
        full.at(t, ch) = std::sin(2.0 * M_PI * double(t) /
                                  (periods[ch] / (1.0 + a.magnitude)) + ph1[ch]) +
                         nd(rng);
      } else if (a.type == "band-energy-shift") {
        full.at(t, ch) += a.magnitude * std::sin(2.0 * M_PI * double(t) / 4.0);
      } else {
        throw invalid_input("synth: unknown anomaly type " + a.type);
      }
      labels[a.start + i] = 1;
    }
  }

  SeriesDataset ds;
  ds.name = "synth";
  ds.window = cfg.window;
  ds.stride = cfg.stride;
  auto slice = [&](std::size_t off, std::size_t n) {
    Tensor m({n, cfg.channels});
    std::copy(full.data.begin() + off * cfg.channels,
              full.data.begin() + (off + n) * cfg.channels, m.data.begin());
    return m;
  };
  ds.train = slice(0, n_train);
  ds.validation = slice(n_train, n_val);
  ds.test = slice(test_base, n_test);
  ds.test_labels = std::move(labels);
  return ds;
}

/// The seeded corpus used by the end-to-end checks: spikes, drifts, a period
/// shift and a band-energy shift on three channels. Anomaly placement scales
/// with the test-segment length.
inline SynthConfig default_synth_corpus(std::size_t length = 20000) {
  SynthConfig cfg;
  cfg.length = length;
  cfg.channels = 3;
  cfg.periods = {16.0, 32.0, 64.0};
  cfg.noise = 0.1;
  cfg.seed = 20240817;
  cfg.window = 192;
  cfg.stride = 96;
  std::size_t n_test = cfg.length - std::size_t(cfg.train_frac * double(cfg.length)) -
                       std::size_t(cfg.val_frac * double(cfg.length));
  if (n_test < 800) throw invalid_input("synth corpus: test segment too short");
  std::size_t seg = std::min<std::size_t>(200, n_test / 20);
  auto at = [&](double frac) { return std::size_t(frac * double(n_test)); };
  std::mt19937_64 place(99);
  for (int i = 0; i < 10; ++i) {
    AnomalySpec a;
    a.type = "spike";
    a.duration = 4 + (place() % 5);
    a.start = 60 + (place() % (n_test - 60 - a.duration - 1));
    a.magnitude = 6.0;
    cfg.anomalies.push_back(a);
  }
  cfg.anomalies.push_back({"drift", at(0.15), seg, 5.0});
  cfg.anomalies.push_back({"period-shift", at(0.375), seg, 1.5});
  cfg.anomalies.push_back({"band-energy-shift", at(0.65), std::size_t(0.75 * seg), 2.0});
  cfg.anomalies.push_back({"drift", at(0.825), seg, -4.0});
  return cfg;
}

}  // namespace left
