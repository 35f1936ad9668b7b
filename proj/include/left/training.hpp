#pragma once

#include <chrono>
#include <random>
#include <string>
#include <vector>

#include "left/model.hpp"

// Training: Adam over the parameter store, the memory-mixing curriculum, and
// the epoch loop with validation, early stopping and checkpointing.

namespace left {

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t batch_size = 128;
  std::size_t epochs = 20;
  std::uint64_t seed = 7;
  double lambda_start = 0.0;
  double lambda_end = 0.5;
  double ramp_fraction = 0.5;
  LossWeights loss_weights;
  std::string checkpoint_dir;
  std::size_t early_stop_patience = 5;
  bool check_finite = true;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const {
    if (learning_rate <= 0) throw invalid_input("train: learning rate must be > 0");
    if (batch_size < 1) throw invalid_input("train: batch size must be >= 1");
    if (ramp_fraction < 0 || ramp_fraction > 1)
      throw invalid_input("train: ramp fraction must be in [0,1]");
  }
};

/// Linear ramp from lambda_start to lambda_end over the first
/// ramp_fraction * total steps, constant afterwards.
inline double lambda_schedule(std::size_t step, std::size_t total,
                              const TrainConfig& cfg) {
  if (step > total) throw invalid_input("lambda_schedule: step beyond total");
  double ramp_steps = cfg.ramp_fraction * double(total);
  if (ramp_steps <= 0 || double(step) >= ramp_steps) return cfg.lambda_end;
  double f = double(step) / ramp_steps;
  return cfg.lambda_start + f * (cfg.lambda_end - cfg.lambda_start);
}

class Adam {
 public:
  std::vector<Tensor> m, v;
  std::uint64_t t = 0;

  void init(const nn::ParamStore& ps) {
    m.clear();
    v.clear();
    for (auto& [_, p] : ps.items) {
      m.emplace_back(p->val.shape);
      v.emplace_back(p->val.shape);
    }
    t = 0;
  }

  void step(nn::ParamStore& ps, const TrainConfig& cfg) {
    if (m.size() != ps.items.size()) throw invalid_input("adam: not initialized");
    ++t;
    double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
    double bc1 = 1.0 - std::pow(b1, double(t));
    double bc2 = 1.0 - std::pow(b2, double(t));
    for (std::size_t i = 0; i < ps.items.size(); ++i) {
      auto& p = ps.items[i].second;
      if (!p->requires_grad || p->grad.data.empty()) continue;
      for (std::size_t j = 0; j < p->val.numel(); ++j) {
        double g = p->grad.data[j];
        m[i].data[j] = b1 * m[i].data[j] + (1 - b1) * g;
        v[i].data[j] = b2 * v[i].data[j] + (1 - b2) * g * g;
        double mh = m[i].data[j] / bc1;
        double vh = v[i].data[j] / bc2;
        p->val.data[j] -= cfg.learning_rate * mh / (std::sqrt(vh) + cfg.adam_eps);
      }
    }
  }
};

/// One optimizer step on a batch of windows: gradients average over the
/// batch, loss values are reported as batch means. Throws numeric_error
/// naming the first non-finite term when the NaN guard is on.
inline LossRecord train_step(const std::vector<Tensor>& batch, LeftModel& model,
                             Adam& opt, const TrainConfig& cfg, double lambda) {
  if (batch.empty()) throw invalid_input("train_step: empty batch");
  model.params.zero_grads();
  LossRecord mean;
  double inv = 1.0 / double(batch.size());
  for (const auto& x : batch) {
    auto fr = model.forward(x, lambda);
    auto losses = model.losses(fr, x, cfg.loss_weights);
    LossRecord rec = losses.record(cfg.loss_weights);
    if (cfg.check_finite) {
      if (!std::isfinite(rec.ms)) throw numeric_error("non-finite loss term: L_ms");
      if (!std::isfinite(rec.cyc)) throw numeric_error("non-finite loss term: L_cyc");
      if (!std::isfinite(rec.cons))
        throw numeric_error("non-finite loss term: L_cons");
    }
    mean.ms += rec.ms * inv;
    mean.cyc += rec.cyc * inv;
    mean.cons += rec.cons * inv;
    ag::backward(ag::mul_scalar(losses.total, inv));
  }
  if (cfg.check_finite && !model.params.all_grads_finite())
    throw numeric_error("non-finite gradient");
  opt.step(model.params, cfg);
  mean.total = total_loss(mean.ms, mean.cyc, mean.cons, cfg.loss_weights);
  return mean;
}

/// Loss means without a gradient step; used for validation.
inline LossRecord evaluate_losses(const std::vector<Tensor>& windows,
                                  const LeftModel& model, const TrainConfig& cfg,
                                  double lambda) {
  LossRecord mean;
  if (windows.empty()) return mean;
  double inv = 1.0 / double(windows.size());
  for (const auto& x : windows) {
    auto fr = model.forward(x, lambda);
    auto losses = model.losses(fr, x, cfg.loss_weights);
    LossRecord rec = losses.record(cfg.loss_weights);
    mean.ms += rec.ms * inv;
    mean.cyc += rec.cyc * inv;
    mean.cons += rec.cons * inv;
  }
  mean.total = total_loss(mean.ms, mean.cyc, mean.cons, cfg.loss_weights);
  return mean;
}

struct EpochLog {
  std::size_t epoch = 0;
  LossRecord train, val;
  double lambda = 0;
  double wall_ms = 0;
};

struct FitState {
  std::vector<EpochLog> log;
  std::uint64_t step = 0;
  double best_val = 1e300;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
};

}  // namespace left
