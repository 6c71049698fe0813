#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "pawflow/common.hpp"
#include "pawflow/tasks.hpp"

namespace pawflow {

// Classifier two-sample test settings. The classifier is fixed project-wide:
// a width-128 dense net (one residual block, i.e. two hidden layers) trained
// with Adam and early stopping on a held-back slice of each fold's training
// data.
struct C2STConfig {
  int hidden = 128;
  int folds = 5;
  int max_epochs = 24;
  int patience = 6;
  double lr = 1e-3;
  int batch_size = 512;
  double val_fraction = 0.1;
  uint64_t seed = 0;

  void validate() const {
    if (folds < 2) throw config_error("C2STConfig: folds must be >= 2");
    if (max_epochs < 1 || patience < 1 || batch_size < 1)
      throw config_error("C2STConfig: epochs, patience, batch_size must be >= 1");
    if (lr <= 0.0) throw config_error("C2STConfig: lr must be > 0");
  }
};

struct C2STReport {
  double score = 0.0;  // mean held-out accuracy
  std::vector<double> per_fold;
  int n_ref = 0;
  int n_gen = 0;
  uint64_t seed = 0;
};

// Stratified k-fold classifier two-sample test. Columns of ref/gen are
// samples; the larger side is subsampled by seeded shuffle to equalize
// counts. Refuses fewer than 100 samples per side. Deterministic given the
// config seed.
C2STReport c2st(const Mat& ref, const Mat& gen, const C2STConfig& config);

// Generated-sample source: observation, sample count, seed -> D x n samples.
using Sampler = std::function<Mat(const Vec& x, int n, uint64_t seed)>;

struct EvalRunResult {
  std::vector<C2STReport> per_observation;
  double mean_score = 0.0;
  double sd_score = 0.0;
};

// For each observation column: draw reference samples from the task oracle,
// draw generated samples from the sampler, and compare by C2ST. Categorical
// tasks require every generated block to be exactly one-hot.
EvalRunResult evaluate_run(const Task& task, const Sampler& sampler,
                           const Mat& observations, int n_posterior_samples,
                           const C2STConfig& config, uint64_t seed);

}  // namespace pawflow
