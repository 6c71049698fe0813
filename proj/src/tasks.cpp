#include "pawflow/tasks.hpp"

#include <cmath>
#include <string>

namespace pawflow {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

double logsumexp(const Vec& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

// Random rotation: orthonormalize a Gaussian matrix via Householder QR with
// the R-diagonal sign fix, then flip the last column if the determinant is -1.
Mat random_rotation(int d, RngStream& rng) {
  if (d == 1) return Mat::Ones(1, 1);
  Mat G(d, d);
  rng.fill_normal(G);
  Eigen::HouseholderQR<Mat> qr(G);
  Mat Q = qr.householderQ();
  Mat R = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < d; ++j)
    if (R(j, j) < 0.0) Q.col(j) = -Q.col(j);
  if (Q.determinant() < 0.0) Q.col(d - 1) = -Q.col(d - 1);
  return Q;
}

Vec linspace(double lo, double hi, int n) {
  Vec v(n);
  if (n == 1) {
    v[0] = lo;
    return v;
  }
  for (int i = 0; i < n; ++i)
    v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return v;
}

}  // namespace

SGMParams sgm_build(const SGMConfig& config) {
  config.validate();
  const int K = config.regimes, T = config.transitions, d = config.state_dim;
  RngStream rng(split_seed(config.seed, "sgm_build"));

  SGMParams p;
  p.K = K;
  p.T = T;
  p.d_x = d;
  p.Pi = Mat::Constant(K, K, 0.3 / K) + 0.7 * Mat::Identity(K, K);
  p.pi0 = Vec::Constant(K, 1.0 / K);
  p.sigma = linspace(0.25, 0.6, K);
  p.s0 = linspace(0.3, 2.0, d);
  p.A.reserve(K);
  p.b.reserve(K);
  for (int k = 0; k < K; ++k) {
    p.A.push_back(0.8 * random_rotation(d, rng));
    Vec bk(d);
    for (int i = 0; i < d; ++i) bk[i] = 2.0 * rng.normal();
    p.b.push_back(bk);
  }
  return p;
}

Vec path_to_onehot(const RegimePath& path, int K) {
  Vec theta = Vec::Zero(static_cast<Eigen::Index>(path.z.size()) * K);
  for (size_t t = 0; t < path.z.size(); ++t) {
    const int z = path.z[t];
    require_shape(z >= 0 && z < K, "path_to_onehot: regime index out of range");
    theta[static_cast<Eigen::Index>(t) * K + z] = 1.0;
  }
  return theta;
}

RegimePath onehot_to_path(const Vec& theta, int K, int T) {
  require_shape(theta.size() == static_cast<Eigen::Index>(K) * T,
                "onehot_to_path: length mismatch");
  RegimePath path;
  path.z.resize(T);
  for (int t = 0; t < T; ++t) {
    int hot = -1;
    for (int k = 0; k < K; ++k) {
      const double v = theta[static_cast<Eigen::Index>(t) * K + k];
      if (v == 1.0) {
        if (hot >= 0) throw shape_error("onehot_to_path: multiple ones in block");
        hot = k;
      } else if (v != 0.0) {
        throw shape_error("onehot_to_path: entry not in {0,1}");
      }
    }
    if (hot < 0) throw shape_error("onehot_to_path: empty block");
    path.z[t] = hot;
  }
  return path;
}

RegimePath sgm_sample_prior(const SGMParams& params, RngStream& rng) {
  RegimePath path;
  path.z.resize(params.T);
  path.z[0] = rng.categorical(params.pi0);
  for (int t = 1; t < params.T; ++t)
    path.z[t] = rng.categorical(params.Pi.row(path.z[t - 1]).transpose());
  return path;
}

Vec sgm_simulate(const SGMParams& params, const RegimePath& path, RngStream& rng) {
  require_shape(static_cast<int>(path.z.size()) == params.T,
                "sgm_simulate: path length mismatch");
  const int d = params.d_x;
  Vec traj(params.x_dim());
  Vec x(d);
  for (int i = 0; i < d; ++i) x[i] = params.s0[i] * rng.normal();
  traj.segment(0, d) = x;
  for (int t = 0; t < params.T; ++t) {
    const int k = path.z[t];
    Vec eps(d);
    for (int i = 0; i < d; ++i) eps[i] = rng.normal();
    x = params.A[k] * x + params.b[k] + params.sigma[k] * eps;
    traj.segment(static_cast<Eigen::Index>(t + 1) * d, d) = x;
  }
  return traj;
}

Mat sgm_loglik_terms(const SGMParams& params, const Vec& traj) {
  require_shape(traj.size() == params.x_dim(), "sgm_loglik_terms: trajectory length");
  const int d = params.d_x;
  Mat ell(params.T, params.K);
  for (int t = 0; t < params.T; ++t) {
    const Vec xt = traj.segment(static_cast<Eigen::Index>(t) * d, d);
    const Vec xn = traj.segment(static_cast<Eigen::Index>(t + 1) * d, d);
    for (int k = 0; k < params.K; ++k) {
      const double s2 = params.sigma[k] * params.sigma[k];
      const double r2 = (xn - (params.A[k] * xt + params.b[k])).squaredNorm();
      ell(t, k) = -0.5 * (r2 / s2 + d * std::log(2.0 * M_PI * s2));
    }
  }
  return ell;
}

Mat ffbs_forward(const SGMParams& params, const Mat& loglik) {
  require_shape(loglik.rows() == params.T && loglik.cols() == params.K,
                "ffbs_forward: loglik shape mismatch");
  if (!loglik.allFinite()) throw numeric_error("ffbs_forward: non-finite loglik");
  const int K = params.K;
  const Mat logPi = params.Pi.array().log();
  Mat logalpha(params.T, K);

  Vec row = params.pi0.array().log() + loglik.row(0).transpose().array();
  row.array() -= logsumexp(row);
  logalpha.row(0) = row.transpose();

  for (int t = 1; t < params.T; ++t) {
    Vec next(K);
    for (int k = 0; k < K; ++k)
      next[k] = loglik(t, k) +
                logsumexp(logalpha.row(t - 1).transpose() + logPi.col(k));
    next.array() -= logsumexp(next);
    logalpha.row(t) = next.transpose();
  }
  return logalpha;
}

RegimePath ffbs_sample(const SGMParams& params, const Mat& logalpha, RngStream& rng) {
  const int T = params.T, K = params.K;
  RegimePath path;
  path.z.resize(T);
  Vec prob = logalpha.row(T - 1).transpose().array().exp();
  prob /= prob.sum();
  path.z[T - 1] = rng.categorical(prob);
  for (int t = T - 2; t >= 0; --t) {
    Vec w(K);
    for (int j = 0; j < K; ++j)
      w[j] = std::exp(logalpha(t, j)) * params.Pi(j, path.z[t + 1]);
    w /= w.sum();
    path.z[t] = rng.categorical(w);
  }
  return path;
}

RegimePath ffbs_sample(const SGMParams& params, const Vec& traj, RngStream& rng) {
  return ffbs_sample(params, ffbs_forward(params, sgm_loglik_terms(params, traj)), rng);
}

long sgm_path_index(const RegimePath& path, int K) {
  long idx = 0;
  for (int z : path.z) idx = idx * K + z;
  return idx;
}

Vec sgm_enumerate_posterior(const SGMParams& params, const Vec& traj) {
  double n_paths_d = std::pow(static_cast<double>(params.K), params.T);
  if (n_paths_d > 1e6)
    throw config_error("sgm_enumerate_posterior: instance too large (K^T > 1e6)");
  const long n_paths = static_cast<long>(std::llround(n_paths_d));
  const Mat ell = sgm_loglik_terms(params, traj);
  const Mat logPi = params.Pi.array().log();
  const Vec logpi0 = params.pi0.array().log();

  Vec logp(n_paths);
  std::vector<int> z(params.T, 0);
  for (long idx = 0; idx < n_paths; ++idx) {
    long rem = idx;
    for (int t = params.T - 1; t >= 0; --t) {
      z[t] = static_cast<int>(rem % params.K);
      rem /= params.K;
    }
    double lp = logpi0[z[0]];
    for (int t = 1; t < params.T; ++t) lp += logPi(z[t - 1], z[t]);
    for (int t = 0; t < params.T; ++t) lp += ell(t, z[t]);
    logp[idx] = lp;
  }
  logp.array() -= logsumexp(logp);
  return logp.array().exp();
}

double sgm_log_joint(const SGMParams& params, const RegimePath& path, const Vec& traj) {
  const Mat ell = sgm_loglik_terms(params, traj);
  double lp = std::log(params.pi0[path.z[0]]);
  for (int t = 1; t < params.T; ++t) lp += std::log(params.Pi(path.z[t - 1], path.z[t]));
  const Vec x0 = traj.segment(0, params.d_x);
  for (int i = 0; i < params.d_x; ++i) {
    const double s2 = params.s0[i] * params.s0[i];
    lp += -0.5 * (x0[i] * x0[i] / s2 + std::log(s2) + kLog2Pi);
  }
  for (int t = 0; t < params.T; ++t) lp += ell(t, path.z[t]);
  return lp;
}

SimPair box_task_simulate(const BoxTaskConfig& config, RngStream& rng) {
  config.validate();
  SimPair pair;
  pair.theta.resize(config.dim);
  pair.x.resize(config.dim);
  for (int d = 0; d < config.dim; ++d)
    pair.theta[d] = config.low + (config.high - config.low) * rng.uniform();
  for (int d = 0; d < config.dim; ++d)
    pair.x[d] = pair.theta[d] + config.noise_sigma * rng.normal();
  return pair;
}

Mat box_task_reference(const BoxTaskConfig& config, const Vec& x, int n,
                       RngStream& rng) {
  config.validate();
  require_shape(x.size() == config.dim, "box_task_reference: observation dim");
  Mat samples(config.dim, n);
  long proposals = 0, accepted = 0;
  while (accepted < n) {
    ++proposals;
    Vec cand(config.dim);
    bool inside = true;
    for (int d = 0; d < config.dim; ++d) {
      cand[d] = x[d] + config.noise_sigma * rng.normal();
      if (cand[d] < config.low || cand[d] > config.high) inside = false;
    }
    if (inside) samples.col(accepted++) = cand;
    if (proposals >= 1000000 && proposals >= 10000L * n &&
        static_cast<double>(accepted) / static_cast<double>(proposals) < 1e-4)
      throw numeric_error(
          "box_task_reference: acceptance rate below 1e-4 after " +
          std::to_string(proposals) + " proposals (" + std::to_string(accepted) +
          " accepted)");
  }
  return samples;
}

Task Task::Box(const BoxTaskConfig& cfg) {
  cfg.validate();
  Task t;
  t.kind = Kind::box;
  t.box = cfg;
  return t;
}

Task Task::SGM(const SGMConfig& cfg) {
  cfg.validate();
  Task t;
  t.kind = Kind::sgm;
  t.sgm_config = cfg;
  t.sgm = sgm_build(cfg);
  return t;
}

int Task::theta_dim() const {
  return kind == Kind::box ? box.dim : sgm.theta_dim();
}

int Task::x_dim() const {
  return kind == Kind::box ? box.dim : sgm.x_dim();
}

Support Task::support() const {
  if (kind == Kind::box) return box.support();
  return Support::SimplexProduct(std::vector<int>(sgm.T, sgm.K));
}

SimPair Task::simulate(RngStream& rng) const {
  if (kind == Kind::box) return box_task_simulate(box, rng);
  const RegimePath path = sgm_sample_prior(sgm, rng);
  SimPair pair;
  pair.theta = path_to_onehot(path, sgm.K);
  pair.x = sgm_simulate(sgm, path, rng);
  return pair;
}

Mat Task::reference(const Vec& x, int n, RngStream& rng) const {
  if (kind == Kind::box) return box_task_reference(box, x, n, rng);
  const Mat logalpha = ffbs_forward(sgm, sgm_loglik_terms(sgm, x));
  Mat samples(sgm.theta_dim(), n);
  for (int i = 0; i < n; ++i)
    samples.col(i) = path_to_onehot(ffbs_sample(sgm, logalpha, rng), sgm.K);
  return samples;
}

Dataset simulate_dataset(const Task& task, int n, uint64_t seed) {
  if (n < 0) throw config_error("simulate_dataset: n must be >= 0");
  Dataset ds;
  ds.task = task.name();
  ds.seed = seed;
  ds.theta.resize(task.theta_dim(), n);
  ds.x.resize(task.x_dim(), n);
  RngStream rng(split_seed(seed, "simulate"));
  for (int i = 0; i < n; ++i) {
    const SimPair pair = task.simulate(rng);
    ds.theta.col(i) = pair.theta;
    ds.x.col(i) = pair.x;
  }
  return ds;
}

}  // namespace pawflow
