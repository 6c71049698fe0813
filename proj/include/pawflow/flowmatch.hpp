#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pawflow/common.hpp"
#include "pawflow/geometry.hpp"
#include "pawflow/nn.hpp"
#include "pawflow/tasks.hpp"

namespace pawflow {

enum class Method : uint8_t { pawsterior = 0, fmpe = 1 };

const char* method_name(Method m);
Method method_from_name(const std::string& name);

// Power-law time prior p_alpha(t) proportional to t^alpha on [0, 1];
// alpha = 0 recovers the uniform prior.
struct TimePrior {
  double alpha = 0.0;
};

// Inverse-CDF draw t = u^(1 / (1 + alpha)).
double sample_time(const TimePrior& prior, double u);

// Sinusoidal embedding of t on [0, 1]; kTimeEmbedDim dims at frequencies
// pi * (k + 1) so that t = 0 and t = 1 embed distinctly.
inline constexpr int kTimeEmbedDim = 16;
Vec time_embedding(double t);

// A trained (or fresh) estimator. For pawsterior the backbone emits both
// endpoint heads (2 * D outputs: mu0 raw, head1 raw); for fmpe it is the
// plain conditional velocity network (D outputs). The observation is
// standardized per coordinate before entering the network.
struct Model {
  Method method = Method::pawsterior;
  NetSpec spec;
  NetParams params;
  EndpointHeads heads;
  Support support = Support::Unbounded(1);
  Schedule schedule;
  int theta_dim = 0;
  int x_dim = 0;
  Vec x_mean, x_std;

  // Network input layout: concat(theta_t, time_embedding(t), standardized x).
  int input_dim() const { return theta_dim + kTimeEmbedDim + x_dim; }
};

Model make_model(Method method, int theta_dim, int x_dim, const Support& support,
                 int hidden_dim, int num_blocks, Activation activation, uint64_t seed);

// Conditional endpoint means (mu0, mu1) from a single backbone pass;
// mu1 lands in the support by construction.
struct EndpointMeans {
  Vec mu0;
  Vec mu1;
};
EndpointMeans endpoint_means(const Model& model, const Vec& theta_t, double t,
                             const Vec& x);

// Two-sided induced velocity dalpha * mu0 + dbeta * mu1; division-free and
// defined on all of [0, 1].
Vec pawsterior_velocity(const Model& model, const Vec& theta_t, double t, const Vec& x);

// Velocity of either method (fmpe reads the network output directly).
Vec model_velocity(const Model& model, const Vec& theta_t, double t, const Vec& x);

struct TrainConfig {
  int batch_size = 1024;
  double lr = 1e-3;
  int epochs = 200;
  double val_fraction = 0.05;
  TimePrior time_prior;
  double grad_clip = 1.0;
  uint64_t seed = 0;

  void validate() const {
    if (batch_size < 1) throw config_error("TrainConfig: batch_size must be >= 1");
    if (!(val_fraction > 0.0 && val_fraction < 1.0))
      throw config_error("TrainConfig: val_fraction must lie in (0, 1)");
    if (epochs < 0) throw config_error("TrainConfig: epochs must be >= 0");
    if (lr <= 0.0) throw config_error("TrainConfig: lr must be > 0");
    if (grad_clip <= 0.0) throw config_error("TrainConfig: grad_clip must be > 0");
    if (prior_alpha_invalid()) throw config_error("TrainConfig: time prior alpha must be > -1");
  }
  bool prior_alpha_invalid() const { return !(time_prior.alpha > -1.0); }
};

struct LossGrad {
  double loss = 0.0;
  Vec grad;
};

// Joint endpoint likelihood objective: 1/2 ||mu0 - theta0||^2 plus the head1
// term (1/2 MSE for continuous heads, block-wise cross-entropy on logits for
// categorical heads), averaged over the batch. theta_t is formed internally
// as t theta1 + (1 - t) theta0. Columns are samples.
LossGrad pawsterior_loss(const Model& model, const Mat& theta0, const Mat& theta1,
                         const Mat& x, const Vec& t);

// Velocity regression ||v - (theta1 - theta0)||^2 averaged over the batch.
LossGrad fmpe_loss(const Model& model, const Mat& theta0, const Mat& theta1,
                   const Mat& x, const Vec& t);

// Loss of whichever method the model carries.
LossGrad model_loss(const Model& model, const Mat& theta0, const Mat& theta1,
                    const Mat& x, const Vec& t);

struct CurveRow {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  Model model;  // best-validation parameters
  std::vector<CurveRow> curve;
  double best_val_loss = 0.0;
};

// Minibatch Adam with gradient clipping and plateau lr scheduling on the
// validation loss. theta0 and t are redrawn fresh every training step; the
// validation set keeps one fixed draw so the plateau signal is comparable
// across epochs. Fully deterministic given config.seed.
TrainResult train(const Model& init, const Dataset& data, const TrainConfig& config);

// Membership audit filled during pawsterior sampling.
struct EulerAudit {
  long mu1_evaluations = 0;
  long mu1_in_support = 0;
};

// Euler integration from theta0 ~ N(0, I) over n_steps left-endpoint steps.
// Categorical supports are projected to hard one-hot blocks by argmax after
// the final step; box supports are clamped onto the box. Returns D x n.
Mat euler_sample(const Model& model, const Vec& x, int n_samples, int n_steps,
                 uint64_t seed, EulerAudit* audit = nullptr);

}  // namespace pawflow
