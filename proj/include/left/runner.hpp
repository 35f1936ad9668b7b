#pragma once

#include <filesystem>
#include <fstream>
#include <map>

#include "left/fit.hpp"
#include "left/metrics.hpp"
#include "left/plot.hpp"
#include "left/scoring.hpp"

// End-to-end glue shared by the CLI, the integration tests and the
// acceptance suite: dataset-driven model configuration, training-window
// preparation, scoring and the metric report.

namespace left {

inline ModelConfig model_config_for(const SeriesDataset& ds,
                                    std::uint64_t seed = 1) {
  ModelConfig cfg;
  cfg.window = ds.window;
  cfg.channels = ds.train.dim(1);
  cfg.fusion.d_model = cfg.enc.d_model;
  cfg.fusion.heads = cfg.enc.heads;
  cfg.seed = seed;
  return cfg;
}

/// Train-time windows use the dataset's stride (default half-window
/// overlap); validation windows use the same enumeration.
inline std::vector<Tensor> train_windows(const SeriesDataset& ds) {
  return make_windows(ds.train, ds.window, ds.stride, false);
}
inline std::vector<Tensor> val_windows(const SeriesDataset& ds) {
  if (ds.validation.dim(0) < ds.window) return {};
  return make_windows(ds.validation, ds.window, ds.stride, false);
}

struct EvalReport {
  std::map<std::string, double> values;
  std::vector<double> test_scores;
  double threshold = 0;
  bool spot_fallback = false;
};

/// Score the test split, pick a SPOT threshold on validation scores, and
/// compute the metric table.
inline EvalReport evaluate_model(const LeftModel& model, const SeriesDataset& ds,
                                 const ScoreWeights& sw, double lambda) {
  EvalReport rep;
  rep.test_scores = score_series(model, ds.test, sw, lambda);

  LabeledScores ls{rep.test_scores, ds.test_labels};
  VusConfig vc;
  vc.max_buffer = std::max<std::size_t>(1, ds.window / 4);
  vc.buffer_steps = 16;
  auto [vroc, vpr] = vus(ls, vc);
  auto [rroc, rpr] = range_auc(ls, vc.max_buffer / 2);

  std::vector<double> calib = score_series(model, ds.validation, sw, lambda);
  SpotResult spot = spot_threshold(calib, 1e-3, 0.98);
  rep.threshold = spot.threshold;
  rep.spot_fallback = spot.fallback;
  auto [f1, acc] = f1_accuracy(ls, spot.threshold);

  rep.values["vus_roc"] = vroc;
  rep.values["vus_pr"] = vpr;
  rep.values["auc_roc"] = auc_roc(ls);
  rep.values["auc_pr"] = auc_pr(ls);
  rep.values["range_auc_roc"] = rroc;
  rep.values["range_auc_pr"] = rpr;
  rep.values["f1"] = f1;
  rep.values["accuracy"] = acc;
  rep.values["threshold"] = spot.threshold;
  return rep;
}

inline void write_metrics_text(const std::string& path, const EvalReport& rep) {
  std::ofstream os(path);
  if (!os) throw io_error("cannot write metrics: " + path);
  os.precision(10);
  for (const auto& [k, v] : rep.values) os << k << " = " << v << "\n";
}

inline void write_metrics_json(const std::string& path, const EvalReport& rep) {
  nlohmann::json j;
  for (const auto& [k, v] : rep.values) j[k] = v;
  j["spot_fallback"] = rep.spot_fallback;
  std::ofstream os(path);
  if (!os) throw io_error("cannot write metrics: " + path);
  os << j.dump(2) << "\n";
}

inline void write_scores_tsv(const std::string& path,
                             const std::vector<double>& scores) {
  std::ofstream os(path);
  if (!os) throw io_error("cannot write scores: " + path);
  os.precision(12);
  for (std::size_t i = 0; i < scores.size(); ++i) os << i << '\t' << scores[i] << '\n';
}

inline void write_scores_binary(const std::string& path,
                                const std::vector<double>& scores) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw io_error("cannot write scores: " + path);
  os.write(reinterpret_cast<const char*>(scores.data()),
           std::streamsize(scores.size() * sizeof(double)));
}

}  // namespace left
