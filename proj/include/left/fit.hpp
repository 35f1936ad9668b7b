#pragma once

#include <filesystem>
#include <sstream>

#include "left/checkpoint.hpp"
#include "left/data.hpp"

// Epoch loop: shuffled batches, the lambda curriculum, per-epoch validation,
// early stopping and checkpoint emission. Single-threaded math plus a
// serialized shuffle RNG make resumed runs reproduce upcoming losses bit for
// bit.

namespace left {

namespace detail {

inline std::string rng_to_string(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

inline std::mt19937_64 rng_from_string(const std::string& s) {
  std::mt19937_64 rng;
  std::istringstream is(s);
  is >> rng;
  return rng;
}

}  // namespace detail

struct FitResult {
  std::vector<EpochLog> log;
  std::uint64_t final_step = 0;
  std::size_t best_epoch = 0;
  double best_val = 1e300;
  std::string best_checkpoint;
  std::string last_checkpoint;
};

/// Train on the given windows. When resume_from is nonempty, optimizer
/// state, step counter and shuffle order continue from the checkpoint.
inline FitResult fit(const std::vector<Tensor>& train_windows,
                     const std::vector<Tensor>& val_windows, LeftModel& model,
                     const TrainConfig& cfg, const std::string& resume_from = "") {
  cfg.validate();
  if (train_windows.empty()) throw invalid_input("fit: no training windows");

  namespace fs = std::filesystem;
  bool checkpointing = !cfg.checkpoint_dir.empty();
  if (checkpointing) fs::create_directories(cfg.checkpoint_dir);

  Adam opt;
  std::mt19937_64 shuffle_rng(cfg.seed);
  std::uint64_t step = 0;
  if (!resume_from.empty()) {
    Checkpoint ck = load_checkpoint(resume_from);
    opt = restore_adam(ck, model);
    shuffle_rng = detail::rng_from_string(ck.shuffle_rng_state);
    step = ck.step;
  } else {
    opt.init(model.params);
  }

  std::size_t steps_per_epoch =
      (train_windows.size() + cfg.batch_size - 1) / cfg.batch_size;
  std::uint64_t total_steps = std::uint64_t(steps_per_epoch) * cfg.epochs;

  FitResult res;
  std::size_t start_epoch = std::size_t(step / steps_per_epoch);
  std::size_t since_best = 0;

  std::vector<std::size_t> order(train_windows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    LossRecord train_mean;
    std::size_t batches = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
      std::vector<Tensor> batch;
      for (std::size_t i = b0; i < std::min(order.size(), b0 + cfg.batch_size); ++i)
        batch.push_back(train_windows[order[i]]);
      double lambda = lambda_schedule(step, total_steps, cfg);
      LossRecord rec = train_step(batch, model, opt, cfg, lambda);
      train_mean.ms += rec.ms;
      train_mean.cyc += rec.cyc;
      train_mean.cons += rec.cons;
      ++batches;
      ++step;
    }
    train_mean.ms /= double(batches);
    train_mean.cyc /= double(batches);
    train_mean.cons /= double(batches);
    train_mean.total =
        total_loss(train_mean.ms, train_mean.cyc, train_mean.cons, cfg.loss_weights);

    double lambda_now = lambda_schedule(step, total_steps, cfg);
    LossRecord val = evaluate_losses(val_windows, model, cfg, lambda_now);

    EpochLog row;
    row.epoch = epoch;
    row.train = train_mean;
    row.val = val;
    row.lambda = lambda_now;
    row.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    res.log.push_back(row);

    if (checkpointing) {
      std::string path =
          (fs::path(cfg.checkpoint_dir) / ("ckpt_epoch_" + std::to_string(epoch) + ".left"))
              .string();
      save_checkpoint(path, model, opt, cfg, step,
                      detail::rng_to_string(shuffle_rng));
      res.last_checkpoint = path;
    }

    double val_metric = val_windows.empty() ? train_mean.total : val.total;
    if (val_metric < res.best_val) {
      res.best_val = val_metric;
      res.best_epoch = epoch;
      since_best = 0;
      if (checkpointing) {
        std::string best =
            (fs::path(cfg.checkpoint_dir) / "ckpt_best.left").string();
        save_checkpoint(best, model, opt, cfg, step,
                        detail::rng_to_string(shuffle_rng));
        res.best_checkpoint = best;
      }
    } else if (++since_best > cfg.early_stop_patience) {
      break;
    }
  }
  res.final_step = step;
  return res;
}

inline void write_training_log(const std::string& path,
                               const std::vector<EpochLog>& log) {
  std::ofstream os(path);
  if (!os) throw io_error("cannot write training log: " + path);
  os << "epoch\ttrain_ms\ttrain_cyc\ttrain_cons\ttrain_total\t"
        "val_ms\tval_cyc\tval_cons\tval_total\tlambda\twall_ms\n";
  for (const auto& r : log) {
    os << r.epoch << '\t' << r.train.ms << '\t' << r.train.cyc << '\t'
       << r.train.cons << '\t' << r.train.total << '\t' << r.val.ms << '\t'
       << r.val.cyc << '\t' << r.val.cons << '\t' << r.val.total << '\t'
       << r.lambda << '\t' << r.wall_ms << '\n';
  }
}

}  // namespace left
