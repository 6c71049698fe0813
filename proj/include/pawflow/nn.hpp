#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "pawflow/common.hpp"
#include "pawflow/rng.hpp"

namespace pawflow {

enum class Activation : uint8_t { gelu = 0, relu = 1 };

// Residual MLP: input projection, num_blocks blocks of
// h <- h + W2 * act(W1 * h + b1) + b2, then an output projection.
struct NetSpec {
  int input_dim = 1;
  int hidden_dim = 1;
  int num_blocks = 1;
  int output_dim = 1;
  Activation activation = Activation::gelu;

  void validate() const {
    if (input_dim < 1 || hidden_dim < 1 || num_blocks < 1 || output_dim < 1)
      throw config_error("NetSpec: all dimensions and num_blocks must be >= 1");
  }
  int param_count() const {
    const int h = hidden_dim;
    return h * input_dim + h + num_blocks * (2 * h * h + 2 * h) +
           output_dim * h + output_dim;
  }
};

// Flat parameter vector. Tensor layout, in order:
//   W_in [h x in], b_in [h],
//   per block: W1 [h x h], b1 [h], W2 [h x h], b2 [h],
//   W_out [out x h], b_out [out].
struct NetParams {
  Vec values;
};

// Initialize: uniform fan-in scaling for every linear layer, final output
// layer zeroed so a fresh network emits exactly zero.
NetParams init_params(const NetSpec& spec, RngStream& rng);

// Per-layer activations recorded by the batched forward pass; reused across
// steps to avoid reallocation. Columns are samples.
struct Workspace {
  Mat input;                   // in x B
  std::vector<Mat> block_in;   // num_blocks+1 entries, h x B (last = final hidden)
  std::vector<Mat> pre_act;    // num_blocks entries, h x B
  std::vector<Mat> post_act;   // num_blocks entries, h x B
  Mat output;                  // out x B
};

// Forward pass for a whole batch (columns are samples). Pure in params.
// Throws numeric_error naming the layer if a non-finite value appears.
void forward_batch(const NetSpec& spec, const NetParams& params, const Mat& input,
                   Workspace& ws);

// Gradient of <output, output_grad> (summed over the batch) w.r.t. params.
// Requires the workspace of the matching forward_batch call.
void backward_batch(const NetSpec& spec, const NetParams& params, const Workspace& ws,
                    const Mat& output_grad, Vec& param_grad);

// Single-sample convenience wrappers.
Vec forward(const NetSpec& spec, const NetParams& params, const Vec& input);
Vec backward(const NetSpec& spec, const NetParams& params, const Vec& input,
             const Vec& output_grad);

struct OptimizerState {
  Vec first_moment;
  Vec second_moment;
  long step_count = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

OptimizerState make_adam(int n_params, double lr);

// Bias-corrected Adam update, eps added outside the square root. Rejects
// non-finite gradients without touching the state.
void adam_step(OptimizerState& state, NetParams& params, const Vec& grads);

// Scales grads in place to max_norm when the L2 norm exceeds it; returns the
// pre-clip norm. Empty vectors pass through.
double clip_grad_norm(Vec& grads, double max_norm);

struct PlateauScheduler {
  double factor = 0.5;
  int patience = 50;
  double best_loss = std::numeric_limits<double>::infinity();
  int epochs_since_improve = 0;
  double min_delta = 1e-8;
};

// Improvement resets the counter; once the counter exceeds patience the lr is
// multiplied by factor and the counter resets. Returns true when lr changed.
bool plateau_step(PlateauScheduler& sched, double val_loss, double& lr);

}  // namespace pawflow
