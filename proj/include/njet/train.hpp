#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "njet/data.hpp"
#include "njet/nn/network.hpp"

namespace njet {

struct TrainConfig {
  double learning_rate = 0.05;
  double momentum = 0.9;
  int epochs = 10;
  Index batch_size = 32;
  double alpha_l2 = 0.0;        // L2 weight decay applied to alpha only
  double sigma_lr_scale = 1.0;  // learning-rate multiplier for log_sigma
  int sigma_warmup_epochs = 0;  // freeze log_sigma while batch norm and alpha
                                // settle; early-epoch gradients through an
                                // uncalibrated norm can fling sigma off scale
  std::uint64_t seed = 0;
  double subsample_r = 0.0;     // forwarded into ArchSpec by the CLI
  std::string arch = "toy";

  void validate() const;
};

struct SigmaTraceRow {
  int epoch;   // 1-based
  int layer;   // conv-layer index in depth order
  double sigma;  // 0 for fixed-size standard conv layers
  int filter_size;
  double train_loss;      // epoch mean
  double eval_accuracy;   // after the epoch
};

/// Per-epoch, per-conv-layer training log; the CSV is the plotting interface.
struct SigmaTrace {
  std::vector<SigmaTraceRow> rows;
  void write_csv(std::ostream& out) const;
};

/// One momentum-SGD update: v <- mu*v - eta*g, p <- p + v. Alpha blocks get an
/// extra -eta*lambda*alpha decay; log_sigma blocks scale eta by sigma_lr_scale.
/// Velocities are lazily sized to match `params` on first use. With
/// `freeze_sigma` the log_sigma blocks are skipped entirely (value and
/// velocity untouched).
void sgd_step(std::vector<ParamRef>& params, std::vector<VectorXd>& velocity,
              const TrainConfig& config, bool freeze_sigma = false);

/// Shuffled mini-batch training with per-epoch evaluation. Deterministic for a
/// fixed seed and thread count; `rng` drives the shuffles.
SigmaTrace train(Network& net, const LabeledDataset& train_set,
                 const LabeledDataset& eval_set, const TrainConfig& config,
                 Rng& rng);

/// Fraction of argmax-correct predictions, eval-mode batch norm.
double evaluate(Network& net, const LabeledDataset& dataset, Index batch_size = 64);

}  // namespace njet
