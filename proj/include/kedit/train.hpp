#pragma once

#include <vector>

#include "kedit/model.hpp"

namespace kedit {

struct TrainOptions {
  int steps = 1200;
  double learning_rate = 0.15;
  int batch_size = 16;
  double grad_clip = 1.0;  // global-norm clip, 0 disables
};

struct TrainResult {
  ModelBundle model;
  std::vector<double> losses;  // mean per-token loss of each step's batch
};

// Next-token cross-entropy with plain minibatch gradient descent. Sequences are
// visited in epochs, each a Fisher–Yates shuffle drawn from `rng`.
// Throws NonFiniteLoss naming the offending step.
TrainResult train_toy(const ModelConfig& config, const std::vector<std::vector<int>>& corpus,
                      const TrainOptions& options, RngStream& rng);

// Mean per-token next-token loss over a corpus.
double corpus_loss(const ModelBundle& model, const std::vector<std::vector<int>>& corpus);

}  // namespace kedit
