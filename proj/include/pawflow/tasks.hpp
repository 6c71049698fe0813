#pragma once

#include <cstdint>
#include <vector>

#include "pawflow/common.hpp"
#include "pawflow/geometry.hpp"
#include "pawflow/rng.hpp"

namespace pawflow {

// One (parameter, observation) draw from a task; the unit of training data.
struct SimPair {
  Vec theta;
  Vec x;
};

// ---------------------------------------------------------------------------
// Switching Gaussian mixture: K discrete regimes driving a linear-Gaussian
// state in R^{d_x}. The inference target is the regime path, one-hot encoded;
// the observation is the flattened trajectory.
// ---------------------------------------------------------------------------

struct SGMConfig {
  int regimes = 10;      // K
  int transitions = 10;  // T
  int state_dim = 5;     // d_x
  uint64_t seed = 0;     // parameter construction seed

  void validate() const {
    if (regimes < 2) throw config_error("SGMConfig: K must be >= 2");
    if (transitions < 1) throw config_error("SGMConfig: T must be >= 1");
    if (state_dim < 1) throw config_error("SGMConfig: d_x must be >= 1");
  }
};

// Frozen generative parameters. Pi is the sticky transition matrix
// 0.3/K * ones + 0.7 * I, A_k = 0.8 R_k with R_k in SO(d_x), sigma_k linearly
// spaced on [0.25, 0.6], b_k ~ N(0, 4 I), s0 linearly spaced on [0.3, 2.0].
struct SGMParams {
  int K = 0, T = 0, d_x = 0;
  Mat Pi;
  Vec pi0;
  std::vector<Mat> A;
  std::vector<Vec> b;
  Vec sigma;
  Vec s0;

  int theta_dim() const { return T * K; }
  int x_dim() const { return (T + 1) * d_x; }
};

SGMParams sgm_build(const SGMConfig& config);

// Regime path over T steps, states in {0..K-1}.
struct RegimePath {
  std::vector<int> z;
};

Vec path_to_onehot(const RegimePath& path, int K);
// Strict decode: throws shape_error unless every block is exactly one-hot.
RegimePath onehot_to_path(const Vec& theta, int K, int T);

RegimePath sgm_sample_prior(const SGMParams& params, RngStream& rng);

// x0 ~ N(0, diag(s0^2)); x_{t+1} = A_{z_t} x_t + b_{z_t} + sigma_{z_t} eps.
// Returns the trajectory flattened to (T+1) * d_x.
Vec sgm_simulate(const SGMParams& params, const RegimePath& path, RngStream& rng);

// Per-time regime log-likelihoods, T x K:
//   l_t(k) = -1/2 (||x_{t+1} - (A_k x_t + b_k)||^2 / sigma_k^2
//                  + d_x log(2 pi sigma_k^2)).
Mat sgm_loglik_terms(const SGMParams& params, const Vec& traj);

// Forward filtering in log space; every row is normalized (logsumexp = 0).
Mat ffbs_forward(const SGMParams& params, const Mat& loglik);

// Exact posterior path draw by backward sampling from precomputed messages.
RegimePath ffbs_sample(const SGMParams& params, const Mat& logalpha, RngStream& rng);
RegimePath ffbs_sample(const SGMParams& params, const Vec& traj, RngStream& rng);

// Exact posterior over all K^T paths by direct log-space summation. Path
// index encodes z_0 as the most significant base-K digit. Oracle only;
// refuses instances above 1e6 paths.
Vec sgm_enumerate_posterior(const SGMParams& params, const Vec& traj);
long sgm_path_index(const RegimePath& path, int K);

// log p(z, x) = log pi0(z0) + sum log Pi + log N(x0; 0, diag(s0^2)) + sum l_t.
double sgm_log_joint(const SGMParams& params, const RegimePath& path, const Vec& traj);

// ---------------------------------------------------------------------------
// Bounded box task: theta ~ U(box), x = theta + N(0, sigma_obs^2 I). The
// posterior is an axis-aligned truncated Gaussian with an exact rejection
// sampler as reference oracle.
// ---------------------------------------------------------------------------

struct BoxTaskConfig {
  int dim = 2;
  double noise_sigma = 0.25;
  double low = -1.0;
  double high = 1.0;

  void validate() const {
    if (dim < 1) throw config_error("BoxTaskConfig: dim must be >= 1");
    if (noise_sigma <= 0.0) throw config_error("BoxTaskConfig: noise sigma must be > 0");
    if (!(low < high)) throw config_error("BoxTaskConfig: low must be < high");
  }
  Support support() const { return Support::BoxUniform(dim, low, high); }
};

SimPair box_task_simulate(const BoxTaskConfig& config, RngStream& rng);

// n exact posterior draws (columns) by rejection from N(x, sigma^2 I).
// Aborts with diagnostics when the acceptance rate falls below 1e-4.
Mat box_task_reference(const BoxTaskConfig& config, const Vec& x, int n, RngStream& rng);

// ---------------------------------------------------------------------------
// Uniform task handle used by the training/eval pipeline.
// ---------------------------------------------------------------------------

struct Task {
  enum class Kind : uint8_t { box = 0, sgm = 1 };
  Kind kind = Kind::box;
  BoxTaskConfig box;
  SGMConfig sgm_config;
  SGMParams sgm;  // built once

  static Task Box(const BoxTaskConfig& cfg);
  static Task SGM(const SGMConfig& cfg);

  int theta_dim() const;
  int x_dim() const;
  Support support() const;
  SimPair simulate(RngStream& rng) const;
  // Exact posterior samples (columns) for one observation.
  Mat reference(const Vec& x, int n, RngStream& rng) const;
  const char* name() const { return kind == Kind::box ? "box" : "sgm"; }
};

struct Dataset {
  Mat theta;  // theta_dim x N
  Mat x;      // x_dim x N
  std::string task;
  uint64_t seed = 0;

  Eigen::Index count() const { return theta.cols(); }
};

Dataset simulate_dataset(const Task& task, int n, uint64_t seed);

}  // namespace pawflow
