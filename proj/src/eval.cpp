#include "pawflow/eval.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <thread>

#include "pawflow/nn.hpp"
#include "pawflow/rng.hpp"

namespace pawflow {

namespace {

// Binary logistic classifier on the shared residual-MLP core. Features are
// standardized with statistics from the fit portion. Returns held-out
// accuracy on (test_X, test_y).
double train_fold_classifier(const Mat& train_X, const std::vector<int>& train_y,
                             const Mat& test_X, const std::vector<int>& test_y,
                             const C2STConfig& cfg, uint64_t seed) {
  const int dim = static_cast<int>(train_X.rows());
  const Eigen::Index n = train_X.cols();

  // Inner fit/monitor split, stratified per class.
  RngStream rng(split_seed(seed, "c2st_fold"));
  std::vector<int> idx0, idx1;
  for (Eigen::Index i = 0; i < n; ++i)
    (train_y[static_cast<size_t>(i)] == 0 ? idx0 : idx1).push_back(static_cast<int>(i));
  rng.shuffle(idx0);
  rng.shuffle(idx1);
  auto take = [&](const std::vector<int>& v, bool head, double frac) {
    const size_t cut = static_cast<size_t>(std::llround(frac * static_cast<double>(v.size())));
    return head ? std::vector<int>(v.begin(), v.begin() + cut)
                : std::vector<int>(v.begin() + cut, v.end());
  };
  std::vector<int> mon = take(idx0, true, cfg.val_fraction);
  std::vector<int> mon1 = take(idx1, true, cfg.val_fraction);
  mon.insert(mon.end(), mon1.begin(), mon1.end());
  std::vector<int> fit = take(idx0, false, cfg.val_fraction);
  std::vector<int> fit1 = take(idx1, false, cfg.val_fraction);
  fit.insert(fit.end(), fit1.begin(), fit1.end());
  if (fit.empty() || mon.empty())
    throw config_error("c2st: fold too small for the monitor split");

  // Standardize on the fit portion.
  Vec mean = Vec::Zero(dim), var = Vec::Zero(dim);
  for (int i : fit) mean += train_X.col(i);
  mean /= static_cast<double>(fit.size());
  for (int i : fit) var += (train_X.col(i) - mean).cwiseAbs2();
  var /= static_cast<double>(std::max<size_t>(1, fit.size() - 1));
  const Vec stdv = var.cwiseSqrt().cwiseMax(1e-8);
  auto standardized = [&](const Mat& X, const std::vector<int>& sel) {
    Mat out(dim, static_cast<Eigen::Index>(sel.size()));
    for (size_t i = 0; i < sel.size(); ++i)
      out.col(static_cast<Eigen::Index>(i)) =
          (X.col(sel[i]) - mean).cwiseQuotient(stdv);
    return out;
  };

  NetSpec spec;
  spec.input_dim = dim;
  spec.hidden_dim = cfg.hidden;
  spec.num_blocks = 1;
  spec.output_dim = 1;
  NetParams params = init_params(spec, rng);
  OptimizerState opt = make_adam(spec.param_count(), cfg.lr);

  const Mat mon_X = standardized(train_X, mon);
  Vec mon_y(static_cast<Eigen::Index>(mon.size()));
  for (size_t i = 0; i < mon.size(); ++i)
    mon_y[static_cast<Eigen::Index>(i)] = train_y[static_cast<size_t>(mon[i])];

  Workspace ws;
  auto accuracy = [&](const Mat& X, const Vec& y) {
    forward_batch(spec, params, X, ws);
    long correct = 0;
    for (Eigen::Index i = 0; i < X.cols(); ++i) {
      const int pred = ws.output(0, i) > 0.0 ? 1 : 0;
      if (pred == static_cast<int>(y[i])) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(X.cols());
  };

  NetParams best_params = params;
  double best_acc = -1.0;
  int since_improve = 0;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    rng.shuffle(fit);
    for (size_t start = 0; start < fit.size(); start += static_cast<size_t>(cfg.batch_size)) {
      const size_t b = std::min<size_t>(cfg.batch_size, fit.size() - start);
      std::vector<int> sel(fit.begin() + start, fit.begin() + start + b);
      const Mat Xb = standardized(train_X, sel);
      forward_batch(spec, params, Xb, ws);
      Mat dY(1, static_cast<Eigen::Index>(b));
      for (size_t i = 0; i < b; ++i) {
        const double logit = ws.output(0, static_cast<Eigen::Index>(i));
        const double p = 1.0 / (1.0 + std::exp(-logit));
        dY(0, static_cast<Eigen::Index>(i)) =
            (p - static_cast<double>(train_y[static_cast<size_t>(sel[i])])) /
            static_cast<double>(b);
      }
      Vec grad;
      backward_batch(spec, params, ws, dY, grad);
      clip_grad_norm(grad, 1.0);
      adam_step(opt, params, grad);
    }
    const double acc = accuracy(mon_X, mon_y);
    if (acc > best_acc + 1e-12) {
      best_acc = acc;
      best_params = params;
      since_improve = 0;
    } else if (++since_improve >= cfg.patience) {
      break;
    }
  }
  params = best_params;

  Mat test_std(dim, test_X.cols());
  for (Eigen::Index i = 0; i < test_X.cols(); ++i)
    test_std.col(i) = (test_X.col(i) - mean).cwiseQuotient(stdv);
  Vec ty(test_X.cols());
  for (Eigen::Index i = 0; i < test_X.cols(); ++i)
    ty[i] = test_y[static_cast<size_t>(i)];
  return accuracy(test_std, ty);
}

}  // namespace

C2STReport c2st(const Mat& ref, const Mat& gen, const C2STConfig& config) {
  config.validate();
  require_shape(ref.rows() == gen.rows(), "c2st: sample dims differ");
  const int n = static_cast<int>(std::min(ref.cols(), gen.cols()));
  if (n < 100)
    throw config_error("c2st: need at least 100 samples per side, got " +
                       std::to_string(n));

  // Equalize counts by seeded subsampling of the larger side.
  auto subsample = [&](const Mat& X, uint64_t salt) {
    if (X.cols() == n) return X;
    std::vector<int> idx(static_cast<size_t>(X.cols()));
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    RngStream r(split_seed(config.seed, "c2st_subsample", salt));
    r.shuffle(idx);
    Mat out(X.rows(), n);
    for (int i = 0; i < n; ++i) out.col(i) = X.col(idx[static_cast<size_t>(i)]);
    return out;
  };
  const Mat R = subsample(ref, 0);
  const Mat G = subsample(gen, 1);

  // Stratified fold assignment: shuffle each class, deal round-robin.
  std::vector<int> fold_of(static_cast<size_t>(2 * n));
  {
    std::vector<int> ord(static_cast<size_t>(n));
    RngStream r(split_seed(config.seed, "c2st_folds"));
    for (int cls = 0; cls < 2; ++cls) {
      for (int i = 0; i < n; ++i) ord[static_cast<size_t>(i)] = i;
      r.shuffle(ord);
      for (int i = 0; i < n; ++i)
        fold_of[static_cast<size_t>(cls * n + ord[static_cast<size_t>(i)])] =
            i % config.folds;
    }
  }

  const int dim = static_cast<int>(R.rows());
  Mat all(dim, 2 * n);
  all.leftCols(n) = R;
  all.rightCols(n) = G;
  std::vector<int> label(static_cast<size_t>(2 * n), 0);
  for (int i = 0; i < n; ++i) label[static_cast<size_t>(n + i)] = 1;

  C2STReport report;
  report.n_ref = n;
  report.n_gen = n;
  report.seed = config.seed;
  report.per_fold.assign(config.folds, 0.0);

  // Folds are independent; evaluate a couple at a time.
  std::vector<std::thread> pool;
  const unsigned workers = std::max(1u, std::min(std::thread::hardware_concurrency(),
                                                 static_cast<unsigned>(config.folds)));
  std::exception_ptr failure;
  std::mutex failure_mu;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      try {
        for (int f = static_cast<int>(w); f < config.folds;
             f += static_cast<int>(workers)) {
          std::vector<int> tr, te;
          for (int i = 0; i < 2 * n; ++i)
            (fold_of[static_cast<size_t>(i)] == f ? te : tr).push_back(i);
          Mat train_X(dim, static_cast<Eigen::Index>(tr.size()));
          Mat test_X(dim, static_cast<Eigen::Index>(te.size()));
          std::vector<int> train_y(tr.size()), test_y(te.size());
          for (size_t i = 0; i < tr.size(); ++i) {
            train_X.col(static_cast<Eigen::Index>(i)) = all.col(tr[i]);
            train_y[i] = label[static_cast<size_t>(tr[i])];
          }
          for (size_t i = 0; i < te.size(); ++i) {
            test_X.col(static_cast<Eigen::Index>(i)) = all.col(te[i]);
            test_y[i] = label[static_cast<size_t>(te[i])];
          }
          report.per_fold[static_cast<size_t>(f)] = train_fold_classifier(
              train_X, train_y, test_X, test_y, config,
              split_seed(config.seed, "c2st_train", static_cast<uint64_t>(f)));
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);

  double sum = 0.0;
  for (double a : report.per_fold) sum += a;
  report.score = sum / static_cast<double>(config.folds);
  return report;
}

EvalRunResult evaluate_run(const Task& task, const Sampler& sampler,
                           const Mat& observations, int n_posterior_samples,
                           const C2STConfig& config, uint64_t seed) {
  require_shape(observations.rows() == task.x_dim(),
                "evaluate_run: observation dim mismatch");
  if (!sampler) throw config_error("evaluate_run: sampler is required");
  const Support support = task.support();

  EvalRunResult result;
  for (Eigen::Index o = 0; o < observations.cols(); ++o) {
    const Vec x = observations.col(o);
    RngStream ref_rng(split_seed(seed, "eval_reference", static_cast<uint64_t>(o)));
    const Mat ref = task.reference(x, n_posterior_samples, ref_rng);
    const Mat gen =
        sampler(x, n_posterior_samples, split_seed(seed, "eval_sample", static_cast<uint64_t>(o)));
    require_shape(gen.rows() == ref.rows(), "evaluate_run: sample dim mismatch");
    if (support.kind == Support::Kind::simplex_product) {
      for (Eigen::Index i = 0; i < gen.cols(); ++i) {
        int off = 0;
        for (int k : support.blocks) {
          int ones = 0;
          for (int j = 0; j < k; ++j) {
            const double v = gen(off + j, i);
            if (v == 1.0) ++ones;
            else if (v != 0.0) ones = -1000;
          }
          if (ones != 1)
            throw shape_error(
                "evaluate_run: categorical generated samples must be one-hot");
          off += k;
        }
      }
    }
    C2STConfig cfg = config;
    cfg.seed = split_seed(seed, "eval_c2st", static_cast<uint64_t>(o));
    result.per_observation.push_back(c2st(ref, gen, cfg));
  }

  const size_t m = result.per_observation.size();
  double mean = 0.0;
  for (const auto& r : result.per_observation) mean += r.score;
  mean /= static_cast<double>(std::max<size_t>(1, m));
  double var = 0.0;
  for (const auto& r : result.per_observation) var += (r.score - mean) * (r.score - mean);
  result.mean_score = mean;
  result.sd_score = m > 1 ? std::sqrt(var / static_cast<double>(m - 1)) : 0.0;
  return result;
}

}  // namespace pawflow
