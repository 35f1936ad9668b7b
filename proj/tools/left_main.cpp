// Command-line entry points: train, eval, ablate, sweep, synth.
// Exit codes: 0 ok, 2 input error, 3 shape/checkpoint mismatch,
// 4 numeric failure.

#include <cstdlib>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "left/left.hpp"

namespace fs = std::filesystem;
using namespace left;

namespace {

struct CommonOpts {
  std::string data_root;
  std::string dataset = "synth";
  std::string out_dir = "run";
};

struct ModelOpts {
  std::size_t d_model = 64;
  std::size_t heads = 4;
  std::vector<std::size_t> factors = {16, 8, 4};
  std::size_t patch = 8;
  std::size_t ms_depth = 2;
  double tau = 0.01;
  std::size_t prototypes = 16;
  double gamma = 10.0;
  std::string fusion = "default";
  std::size_t fusion_depth = 1;
  std::size_t stft_window = 64;
  std::size_t stft_hop = 16;
  bool no_interaction = false;
  bool fixed_filterbank = false;
};

struct TrainOpts {
  double lr = 1e-4;
  std::size_t batch = 128;
  std::size_t epochs = 20;
  std::uint64_t seed = 7;
  double lambda_ms = 1.0;
  double lambda_cyc = 1.0;
  double lambda_cons = 0.1;
  double lambda_end = 0.5;
  std::string resume;
};

struct ScoreOpts {
  double alpha_cyc = 0.5, alpha_ms = 0.5;
  double alpha_f = 1.0, alpha_t = 1.0, alpha_g = 0.1, alpha_c = 0.5;
  std::size_t kappa = 5;
  bool emit_binary_scores = false;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  const char* env_root = std::getenv("LEFT_DATA_ROOT");
  if (env_root) o.data_root = env_root;
  cmd->add_option("--data-root", o.data_root, "dataset root directory");
  cmd->add_option("--dataset", o.dataset, "dataset name under the root");
  cmd->add_option("--out", o.out_dir, "output directory for this run");
}

void add_model(CLI::App* cmd, ModelOpts& o) {
  cmd->add_option("--d-model", o.d_model);
  cmd->add_option("--heads", o.heads);
  cmd->add_option("--factors", o.factors, "downsampling factors, coarse to fine")
      ->delimiter(',');
  cmd->add_option("--patch", o.patch);
  cmd->add_option("--ms-depth", o.ms_depth);
  cmd->add_option("--tau", o.tau);
  cmd->add_option("--prototypes", o.prototypes);
  cmd->add_option("--gamma", o.gamma);
  cmd->add_option("--fusion", o.fusion)
      ->check(CLI::IsMember({"default", "all_pairs", "mf", "mt", "tf"}));
  cmd->add_option("--fusion-depth", o.fusion_depth);
  cmd->add_option("--stft-window", o.stft_window);
  cmd->add_option("--stft-hop", o.stft_hop);
  cmd->add_flag("--no-interaction", o.no_interaction,
                "disable tri-view interaction");
  cmd->add_flag("--fixed-filterbank", o.fixed_filterbank,
                "freeze filterbank edges at their defaults");
}

void add_train(CLI::App* cmd, TrainOpts& o) {
  cmd->add_option("--lr", o.lr);
  cmd->add_option("--batch", o.batch);
  cmd->add_option("--epochs", o.epochs);
  cmd->add_option("--seed", o.seed);
  cmd->add_option("--lambda-ms", o.lambda_ms);
  cmd->add_option("--lambda-cyc", o.lambda_cyc);
  cmd->add_option("--lambda-cons", o.lambda_cons);
  cmd->add_option("--lambda-end", o.lambda_end, "memory mixing target");
  cmd->add_option("--resume", o.resume, "checkpoint to resume from");
}

void add_score(CLI::App* cmd, ScoreOpts& o) {
  cmd->add_option("--alpha-cyc", o.alpha_cyc);
  cmd->add_option("--alpha-ms", o.alpha_ms);
  cmd->add_option("--alpha-f", o.alpha_f);
  cmd->add_option("--alpha-t", o.alpha_t);
  cmd->add_option("--alpha-g", o.alpha_g);
  cmd->add_option("--alpha-c", o.alpha_c);
  cmd->add_option("--kappa", o.kappa);
  cmd->add_flag("--emit-binary-scores", o.emit_binary_scores);
}

SeriesDataset load_or_synth(const CommonOpts& c) {
  if (!c.data_root.empty() &&
      fs::exists(fs::path(c.data_root) / c.dataset / "manifest.json"))
    return load_dataset(c.data_root, c.dataset);
  if (c.dataset == "synth") {
    SeriesDataset ds = synth_generate(default_synth_corpus());
    standardize_with_train_stats(ds);
    return ds;
  }
  throw io_error("dataset-not-found: " +
                 (fs::path(c.data_root.empty() ? "." : c.data_root) / c.dataset)
                     .string());
}

ModelConfig build_model_cfg(const SeriesDataset& ds, const ModelOpts& m,
                            std::uint64_t seed) {
  ModelConfig cfg = model_config_for(ds, seed);
  cfg.enc.d_model = m.d_model;
  cfg.enc.heads = m.heads;
  cfg.enc.patch_len = m.patch;
  cfg.enc.ms_depth = m.ms_depth;
  cfg.factors = m.factors;
  cfg.tau = m.tau;
  cfg.prototypes = m.prototypes;
  cfg.gamma = m.gamma;
  cfg.fusion.d_model = m.d_model;
  cfg.fusion.heads = m.heads;
  cfg.fusion.depth = m.fusion_depth;
  cfg.fusion.strategy = fusion_strategy_from_string(m.fusion);
  cfg.stft.window_length = m.stft_window;
  cfg.stft.hop = m.stft_hop;
  cfg.stft.fft_size = m.stft_window;
  cfg.enable_interaction = !m.no_interaction;
  cfg.learnable_filterbank = !m.fixed_filterbank;
  return cfg;
}

TrainConfig build_train_cfg(const TrainOpts& t, const ModelConfig& mc,
                            const std::string& ckpt_dir) {
  TrainConfig tc;
  tc.learning_rate = t.lr;
  tc.batch_size = t.batch;
  tc.epochs = t.epochs;
  tc.seed = t.seed;
  tc.lambda_end = t.lambda_end;
  tc.loss_weights = LossWeights::uniform(mc.factors.size() - 1);
  tc.loss_weights.lambda_ms = t.lambda_ms;
  tc.loss_weights.lambda_cyc = t.lambda_cyc;
  tc.loss_weights.lambda_cons = t.lambda_cons;
  tc.checkpoint_dir = ckpt_dir;
  return tc;
}

ScoreWeights build_score_weights(const ScoreOpts& s) {
  ScoreWeights w;
  w.alpha_cyc = s.alpha_cyc;
  w.alpha_ms = s.alpha_ms;
  w.alpha_f = s.alpha_f;
  w.alpha_t = s.alpha_t;
  w.alpha_g = s.alpha_g;
  w.alpha_c = s.alpha_c;
  w.kappa = s.kappa;
  w.validate();
  return w;
}

void write_resolved_config(const std::string& dir, const ModelConfig& mc,
                           const TrainConfig& tc, const ScoreWeights* sw) {
  json j{{"model", to_json(mc)}, {"train", to_json(tc)}};
  if (sw) {
    j["score"] = {{"alpha_cyc", sw->alpha_cyc}, {"alpha_ms", sw->alpha_ms},
                  {"alpha_f", sw->alpha_f},     {"alpha_t", sw->alpha_t},
                  {"alpha_g", sw->alpha_g},     {"alpha_c", sw->alpha_c},
                  {"kappa", sw->kappa}};
  }
  std::ofstream os(fs::path(dir) / "resolved_config.json");
  os << j.dump(2) << "\n";
}

struct TrainedRun {
  EvalReport report;
};

/// Train one variant and evaluate it; used by ablate and sweep cells.
TrainedRun train_and_eval(const SeriesDataset& ds, ModelConfig mc, TrainConfig tc,
                          const ScoreWeights& sw) {
  LeftModel model(mc);
  fit(train_windows(ds), val_windows(ds), model, tc);
  TrainedRun run;
  run.report = evaluate_model(model, ds, sw, tc.lambda_end);
  return run;
}

int cmd_train(const CommonOpts& c, const ModelOpts& m, const TrainOpts& t) {
  SeriesDataset ds = load_or_synth(c);
  fs::create_directories(c.out_dir);
  ModelConfig mc = build_model_cfg(ds, m, t.seed);
  TrainConfig tc = build_train_cfg(t, mc, (fs::path(c.out_dir) / "checkpoints").string());
  write_resolved_config(c.out_dir, mc, tc, nullptr);

  LeftModel model = t.resume.empty() ? LeftModel(mc)
                                     : restore_model(load_checkpoint(t.resume));
  FitResult res = fit(train_windows(ds), val_windows(ds), model, tc, t.resume);
  write_training_log((fs::path(c.out_dir) / "training_log.tsv").string(), res.log);
  std::cout << "trained " << res.log.size() << " epochs; best val "
            << res.best_val << " at epoch " << res.best_epoch << "\n";
  std::cout << "checkpoint: " << res.best_checkpoint << "\n";
  return 0;
}

int cmd_eval(const CommonOpts& c, const ScoreOpts& s, const std::string& ckpt) {
  Checkpoint ck = load_checkpoint(ckpt);
  LeftModel model = restore_model(ck);
  SeriesDataset ds = load_or_synth(c);
  if (ds.window != model.cfg.window ||
      ds.test.dim(1) != model.cfg.channels)
    throw shape_mismatch("checkpoint/dataset mismatch: model expects (" +
                         std::to_string(model.cfg.window) + "," +
                         std::to_string(model.cfg.channels) + ")");
  fs::create_directories(c.out_dir);
  ScoreWeights sw = build_score_weights(s);
  EvalReport rep = evaluate_model(model, ds, sw, ck.train_cfg.lambda_end);

  write_metrics_text((fs::path(c.out_dir) / "metrics.txt").string(), rep);
  write_metrics_json((fs::path(c.out_dir) / "metrics.json").string(), rep);
  write_scores_tsv((fs::path(c.out_dir) / "scores.tsv").string(), rep.test_scores);
  if (s.emit_binary_scores)
    write_scores_binary((fs::path(c.out_dir) / "scores.bin").string(),
                        rep.test_scores);
  write_score_plot((fs::path(c.out_dir) / "score_plot.svg").string(),
                   rep.test_scores, ds.test_labels, rep.threshold, true);
  for (std::size_t ch = 0; ch < ds.test.dim(1); ++ch)
    write_channel_plot(
        (fs::path(c.out_dir) / ("series_c" + std::to_string(ch) + ".svg")).string(),
        ds.test, ch, ds.test_labels);
  write_resolved_config(c.out_dir, model.cfg, ck.train_cfg, &sw);
  for (const auto& [k, v] : rep.values) std::cout << k << " = " << v << "\n";
  return 0;
}

int cmd_ablate(const CommonOpts& c, const ModelOpts& m, const TrainOpts& t,
               const ScoreOpts& s) {
  SeriesDataset ds = load_or_synth(c);
  fs::create_directories(c.out_dir);
  ScoreWeights sw = build_score_weights(s);
  std::ofstream table(fs::path(c.out_dir) / "ablation.tsv");
  table << "row\tinteraction\tlearnable_fb\tcycle\tcross_path\tfusion\t"
           "vus_roc\tvus_pr\n";
  int row = 0;
  // component grid: every on/off combination of the four switches
  for (int interaction = 0; interaction < 2; ++interaction)
    for (int learnable = 0; learnable < 2; ++learnable)
      for (int cycle = 0; cycle < 2; ++cycle)
        for (int cross = 0; cross < 2; ++cross) {
          ModelOpts mv = m;
          mv.no_interaction = interaction == 0;
          mv.fixed_filterbank = learnable == 0;
          TrainOpts tv = t;
          tv.lambda_cyc = cycle ? t.lambda_cyc : 0.0;
          tv.lambda_cons = cross ? t.lambda_cons : 0.0;
          ModelConfig mc = build_model_cfg(ds, mv, tv.seed);
          TrainConfig tc = build_train_cfg(tv, mc, "");
          auto run = train_and_eval(ds, mc, tc, sw);
          table << row++ << '\t' << interaction << '\t' << learnable << '\t'
                << cycle << '\t' << cross << '\t' << "default" << '\t'
                << run.report.values.at("vus_roc") << '\t'
                << run.report.values.at("vus_pr") << "\n"
                << std::flush;
        }
  // fusion strategies with all components on
  for (const std::string& strat : {"default", "all_pairs", "mf", "mt", "tf"}) {
    ModelOpts mv = m;
    mv.fusion = strat;
    ModelConfig mc = build_model_cfg(ds, mv, t.seed);
    TrainConfig tc = build_train_cfg(t, mc, "");
    auto run = train_and_eval(ds, mc, tc, sw);
    table << row++ << "\t1\t1\t1\t1\t" << strat << '\t'
          << run.report.values.at("vus_roc") << '\t'
          << run.report.values.at("vus_pr") << "\n"
          << std::flush;
  }
  std::cout << "ablation table: " << (fs::path(c.out_dir) / "ablation.tsv").string()
            << "\n";
  return 0;
}

int cmd_sweep(const CommonOpts& c, const ModelOpts& m, const TrainOpts& t,
              const ScoreOpts& s, const std::string& grid,
              const std::string& ckpt) {
  SeriesDataset ds = load_or_synth(c);
  fs::create_directories(c.out_dir);
  ScoreWeights sw = build_score_weights(s);
  std::string path = (fs::path(c.out_dir) / ("sweep_" + grid + ".tsv")).string();
  std::ofstream table(path);

  if (grid == "lambda") {
    table << "lambda_cyc\tlambda_cons\tvus_roc\tvus_pr\n";
    for (double lc : {0.1, 1.0, 3.0})
      for (double ln : {0.01, 0.1, 1.0}) {
        TrainOpts tv = t;
        tv.lambda_cyc = lc;
        tv.lambda_cons = ln;
        ModelConfig mc = build_model_cfg(ds, m, tv.seed);
        TrainConfig tc = build_train_cfg(tv, mc, "");
        auto run = train_and_eval(ds, mc, tc, sw);
        table << lc << '\t' << ln << '\t' << run.report.values.at("vus_roc")
              << '\t' << run.report.values.at("vus_pr") << "\n" << std::flush;
      }
  } else if (grid == "fusion") {
    table << "depth\theads\tvus_roc\tvus_pr\n";
    for (std::size_t depth : {1u, 2u, 3u})
      for (std::size_t heads : {2u, 4u, 8u}) {
        ModelOpts mv = m;
        mv.fusion_depth = depth;
        mv.heads = heads;
        ModelConfig mc = build_model_cfg(ds, mv, t.seed);
        TrainConfig tc = build_train_cfg(t, mc, "");
        auto run = train_and_eval(ds, mc, tc, sw);
        table << depth << '\t' << heads << '\t'
              << run.report.values.at("vus_roc") << '\t'
              << run.report.values.at("vus_pr") << "\n" << std::flush;
      }
  } else if (grid == "alpha") {
    // scoring-only sweep over one trained checkpoint
    if (ckpt.empty())
      throw invalid_input("alpha sweep requires --checkpoint");
    Checkpoint ck = load_checkpoint(ckpt);
    LeftModel model = restore_model(ck);
    table << "alpha_cyc\talpha_ms\tvus_roc\tvus_pr\n";
    for (double ac : {0.0, 0.25, 0.5, 0.75, 1.0})
      for (double am : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        if (ac == 0.0 && am == 0.0) {
          table << ac << '\t' << am << "\tnan\tnan\n";
          continue;
        }
        ScoreWeights wv = sw;
        wv.alpha_cyc = ac;
        wv.alpha_ms = am;
        EvalReport rep = evaluate_model(model, ds, wv, ck.train_cfg.lambda_end);
        table << ac << '\t' << am << '\t' << rep.values.at("vus_roc") << '\t'
              << rep.values.at("vus_pr") << "\n" << std::flush;
      }
  } else {
    throw invalid_input("unknown sweep grid: " + grid);
  }
  std::cout << "sweep table: " << path << "\n";
  return 0;
}

int cmd_synth(const std::string& out_root, SynthConfig sc) {
  SeriesDataset ds = synth_generate(sc);
  save_dataset(ds, out_root);
  std::cout << "wrote synth dataset under " << out_root << "/synth\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LEFT: tri-view time-series anomaly detection"};
  app.require_subcommand(1);
  app.set_config("--config");

  CommonOpts c_train, c_eval, c_ablate, c_sweep;
  ModelOpts m_train, m_ablate, m_sweep;
  TrainOpts t_train, t_ablate, t_sweep;
  ScoreOpts s_eval, s_ablate, s_sweep;
  std::string eval_ckpt, sweep_ckpt, sweep_grid = "lambda";

  auto* train = app.add_subcommand("train", "train a model");
  add_common(train, c_train);
  add_model(train, m_train);
  add_train(train, t_train);

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval, c_eval);
  add_score(eval, s_eval);
  eval->add_option("--checkpoint", eval_ckpt, "trained checkpoint")->required();

  auto* ablate = app.add_subcommand("ablate", "component and fusion ablations");
  add_common(ablate, c_ablate);
  add_model(ablate, m_ablate);
  add_train(ablate, t_ablate);
  add_score(ablate, s_ablate);

  auto* sweep = app.add_subcommand("sweep", "sensitivity grids");
  add_common(sweep, c_sweep);
  add_model(sweep, m_sweep);
  add_train(sweep, t_sweep);
  add_score(sweep, s_sweep);
  sweep->add_option("--grid", sweep_grid)
      ->check(CLI::IsMember({"lambda", "fusion", "alpha"}));
  sweep->add_option("--checkpoint", sweep_ckpt, "checkpoint for the alpha grid");

  auto* synth = app.add_subcommand("synth", "generate the synthetic dataset");
  std::string synth_out = "data";
  std::size_t synth_length = 20000;
  std::uint64_t synth_seed = 0;
  double synth_noise = -1.0;
  std::size_t synth_window = 0, synth_stride = 0;
  synth->add_option("--out", synth_out, "dataset root to write under");
  synth->add_option("--length", synth_length);
  synth->add_option("--noise", synth_noise);
  synth->add_option("--seed", synth_seed);
  synth->add_option("--window", synth_window);
  synth->add_option("--stride", synth_stride);

  try {
    app.parse(argc, argv);
    if (train->parsed()) return cmd_train(c_train, m_train, t_train);
    if (eval->parsed()) return cmd_eval(c_eval, s_eval, eval_ckpt);
    if (ablate->parsed()) return cmd_ablate(c_ablate, m_ablate, t_ablate, s_ablate);
    if (sweep->parsed())
      return cmd_sweep(c_sweep, m_sweep, t_sweep, s_sweep, sweep_grid, sweep_ckpt);
    if (synth->parsed()) {
      SynthConfig sc = default_synth_corpus(synth_length);
      if (synth_seed) sc.seed = synth_seed;
      if (synth_noise >= 0) sc.noise = synth_noise;
      if (synth_window) sc.window = synth_window;
      if (synth_stride) sc.stride = synth_stride;
      return cmd_synth(synth_out, sc);
    }
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const shape_mismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const numeric_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
