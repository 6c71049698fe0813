#include "pawflow/flowmatch.hpp"

#include <cmath>

namespace pawflow {

namespace {

// Assembles network inputs for a batch: theta_t, time embedding, standardized x.
Mat assemble_inputs(const Model& model, const Mat& theta_t, const Vec& t, const Mat& x) {
  const Eigen::Index B = theta_t.cols();
  require_shape(theta_t.rows() == model.theta_dim, "inputs: theta dim mismatch");
  require_shape(x.rows() == model.x_dim, "inputs: observation dim mismatch");
  require_shape(x.cols() == B && t.size() == B, "inputs: batch size mismatch");
  Mat in(model.input_dim(), B);
  in.topRows(model.theta_dim) = theta_t;
  for (Eigen::Index i = 0; i < B; ++i)
    in.col(i).segment(model.theta_dim, kTimeEmbedDim) = time_embedding(t[i]);
  Mat xs = x;
  if (model.x_mean.size() == model.x_dim) {
    xs.colwise() -= model.x_mean;
    xs.array().colwise() /= model.x_std.array();
  }
  in.bottomRows(model.x_dim) = xs;
  return in;
}

struct BatchEval {
  Workspace ws;
  Mat dY;
};

double head1_loss_and_grad(const Model& model, const Mat& raw1, const Mat& theta1,
                           Mat& draw1) {
  const Eigen::Index B = raw1.cols();
  const double invB = 1.0 / static_cast<double>(B);
  double loss = 0.0;
  switch (model.heads.head1) {
    case Head1Kind::unconstrained: {
      const Mat diff = raw1 - theta1;
      loss = 0.5 * diff.squaredNorm() * invB;
      draw1 = diff * invB;
      break;
    }
    case Head1Kind::tanh_box: {
      const Mat mu1 = apply_head1_batch(model.heads, model.support, raw1);
      const Mat diff = mu1 - theta1;
      loss = 0.5 * diff.squaredNorm() * invB;
      draw1 = diff.cwiseProduct(tanh_box_jacobian_batch(model.support, raw1)) * invB;
      break;
    }
    case Head1Kind::categorical: {
      const Mat sm = blockwise_softmax(model.support, raw1);
      // Cross-entropy per block; targets are one-hot (or any point of the
      // simplex), so -sum target * log softmax.
      loss = -(theta1.array() * sm.array().max(1e-300).log()).sum() * invB;
      draw1 = (sm - theta1) * invB;
      break;
    }
  }
  return loss;
}

}  // namespace

const char* method_name(Method m) {
  return m == Method::pawsterior ? "pawsterior" : "fmpe";
}

Method method_from_name(const std::string& name) {
  if (name == "pawsterior") return Method::pawsterior;
  if (name == "fmpe") return Method::fmpe;
  throw config_error("unknown method: " + name);
}

double sample_time(const TimePrior& prior, double u) {
  if (!(prior.alpha > -1.0))
    throw config_error("sample_time: time prior alpha must be > -1");
  if (!(u >= 0.0 && u <= 1.0))
    throw config_error("sample_time: u must lie in [0, 1]");
  return std::pow(u, 1.0 / (1.0 + prior.alpha));
}

Vec time_embedding(double t) {
  Vec emb(kTimeEmbedDim);
  for (int k = 0; k < kTimeEmbedDim / 2; ++k) {
    const double w = M_PI * static_cast<double>(k + 1) * t;
    emb[2 * k] = std::sin(w);
    emb[2 * k + 1] = std::cos(w);
  }
  return emb;
}

Model make_model(Method method, int theta_dim, int x_dim, const Support& support,
                 int hidden_dim, int num_blocks, Activation activation, uint64_t seed) {
  require_shape(support.dim == theta_dim, "make_model: support dim != theta dim");
  Model m;
  m.method = method;
  m.theta_dim = theta_dim;
  m.x_dim = x_dim;
  m.support = support;
  m.heads = method == Method::pawsterior ? heads_for_support(support)
                                         : EndpointHeads{Head1Kind::unconstrained};
  m.spec.input_dim = m.input_dim();
  m.spec.hidden_dim = hidden_dim;
  m.spec.num_blocks = num_blocks;
  m.spec.output_dim = method == Method::pawsterior ? 2 * theta_dim : theta_dim;
  m.spec.activation = activation;
  m.spec.validate();
  RngStream rng(split_seed(seed, "init"));
  m.params = init_params(m.spec, rng);
  m.x_mean = Vec::Zero(x_dim);
  m.x_std = Vec::Ones(x_dim);
  return m;
}

EndpointMeans endpoint_means(const Model& model, const Vec& theta_t, double t,
                             const Vec& x) {
  require_shape(model.method == Method::pawsterior,
                "endpoint_means: model is not an endpoint estimator");
  const Mat in = assemble_inputs(model, theta_t, Vec::Constant(1, t), x);
  Workspace ws;
  forward_batch(model.spec, model.params, in, ws);
  const int D = model.theta_dim;
  EndpointMeans out;
  out.mu0 = ws.output.col(0).head(D);
  out.mu1 = apply_head1(model.heads, model.support, ws.output.col(0).tail(D));
  return out;
}

Vec pawsterior_velocity(const Model& model, const Vec& theta_t, double t, const Vec& x) {
  const EndpointMeans m = endpoint_means(model, theta_t, t, x);
  return model.schedule.dalpha(t) * m.mu0 + model.schedule.dbeta(t) * m.mu1;
}

Vec model_velocity(const Model& model, const Vec& theta_t, double t, const Vec& x) {
  if (model.method == Method::pawsterior)
    return pawsterior_velocity(model, theta_t, t, x);
  const Mat in = assemble_inputs(model, theta_t, Vec::Constant(1, t), x);
  Workspace ws;
  forward_batch(model.spec, model.params, in, ws);
  return ws.output.col(0);
}

LossGrad pawsterior_loss(const Model& model, const Mat& theta0, const Mat& theta1,
                         const Mat& x, const Vec& t) {
  require_shape(model.method == Method::pawsterior, "pawsterior_loss: wrong method");
  const Eigen::Index B = theta0.cols();
  require_shape(theta1.cols() == B && theta0.rows() == theta1.rows(),
                "pawsterior_loss: endpoint batch mismatch");
  const int D = model.theta_dim;
  const double invB = 1.0 / static_cast<double>(B);

  Mat theta_t(D, B);
  for (Eigen::Index i = 0; i < B; ++i)
    theta_t.col(i) = t[i] * theta1.col(i) + (1.0 - t[i]) * theta0.col(i);

  const Mat in = assemble_inputs(model, theta_t, t, x);
  Workspace ws;
  forward_batch(model.spec, model.params, in, ws);

  const Mat mu0 = ws.output.topRows(D);
  const Mat raw1 = ws.output.bottomRows(D);

  const Mat diff0 = mu0 - theta0;
  double loss = 0.5 * diff0.squaredNorm() * invB;
  Mat dY(2 * D, B);
  dY.topRows(D) = diff0 * invB;
  Mat draw1;
  loss += head1_loss_and_grad(model, raw1, theta1, draw1);
  dY.bottomRows(D) = draw1;

  if (!std::isfinite(loss)) {
    Eigen::Index bad = 0;
    for (Eigen::Index i = 0; i < B; ++i)
      if (!ws.output.col(i).allFinite() || !theta_t.col(i).allFinite()) {
        bad = i;
        break;
      }
    throw numeric_error("pawsterior_loss: non-finite loss at batch index " +
                        std::to_string(bad));
  }

  LossGrad out;
  out.loss = loss;
  backward_batch(model.spec, model.params, ws, dY, out.grad);
  return out;
}

LossGrad fmpe_loss(const Model& model, const Mat& theta0, const Mat& theta1,
                   const Mat& x, const Vec& t) {
  require_shape(model.method == Method::fmpe, "fmpe_loss: wrong method");
  const Eigen::Index B = theta0.cols();
  const int D = model.theta_dim;
  const double invB = 1.0 / static_cast<double>(B);

  Mat theta_t(D, B);
  for (Eigen::Index i = 0; i < B; ++i)
    theta_t.col(i) = t[i] * theta1.col(i) + (1.0 - t[i]) * theta0.col(i);

  const Mat in = assemble_inputs(model, theta_t, t, x);
  Workspace ws;
  forward_batch(model.spec, model.params, in, ws);

  const Mat diff = ws.output - (theta1 - theta0);
  const double loss = diff.squaredNorm() * invB;
  if (!std::isfinite(loss)) {
    Eigen::Index bad = 0;
    for (Eigen::Index i = 0; i < B; ++i)
      if (!diff.col(i).allFinite()) {
        bad = i;
        break;
      }
    throw numeric_error("fmpe_loss: non-finite loss at batch index " +
                        std::to_string(bad));
  }
  LossGrad out;
  out.loss = loss;
  const Mat dY = 2.0 * diff * invB;
  backward_batch(model.spec, model.params, ws, dY, out.grad);
  return out;
}

LossGrad model_loss(const Model& model, const Mat& theta0, const Mat& theta1,
                    const Mat& x, const Vec& t) {
  return model.method == Method::pawsterior
             ? pawsterior_loss(model, theta0, theta1, x, t)
             : fmpe_loss(model, theta0, theta1, x, t);
}

TrainResult train(const Model& init, const Dataset& data, const TrainConfig& config) {
  config.validate();
  const Eigen::Index N = data.count();
  if (N < 1) throw config_error("train: empty dataset");
  require_shape(data.theta.rows() == init.theta_dim && data.x.rows() == init.x_dim,
                "train: dataset dims do not match model");

  const int D = init.theta_dim;

  // Validation split, fixed by seed.
  std::vector<int> order(static_cast<size_t>(N));
  for (Eigen::Index i = 0; i < N; ++i) order[static_cast<size_t>(i)] = static_cast<int>(i);
  RngStream split_rng(split_seed(config.seed, "train_split"));
  split_rng.shuffle(order);
  Eigen::Index n_val = std::max<Eigen::Index>(
      1, static_cast<Eigen::Index>(std::llround(config.val_fraction * static_cast<double>(N))));
  if (n_val >= N) n_val = N - 1;
  if (n_val < 1 && N > 1) n_val = 1;
  const Eigen::Index n_train = N - n_val;
  if (n_train < 1) throw config_error("train: dataset too small for validation split");
  std::vector<int> train_idx(order.begin(), order.begin() + n_train);
  std::vector<int> val_idx(order.begin() + n_train, order.end());

  TrainResult result;
  result.model = init;
  Model& model = result.model;

  // Standardization statistics from the training split.
  Vec mean = Vec::Zero(model.x_dim), var = Vec::Zero(model.x_dim);
  for (int idx : train_idx) mean += data.x.col(idx);
  mean /= static_cast<double>(n_train);
  for (int idx : train_idx) var += (data.x.col(idx) - mean).cwiseAbs2();
  var /= static_cast<double>(std::max<Eigen::Index>(1, n_train - 1));
  model.x_mean = mean;
  model.x_std = var.cwiseSqrt().cwiseMax(1e-8);

  // Fixed validation noise/time draws keep the plateau signal comparable.
  RngStream val_rng(split_seed(config.seed, "train_val"));
  Mat val_theta0(D, n_val), val_theta1(D, n_val), val_x(model.x_dim, n_val);
  Vec val_t(n_val);
  for (Eigen::Index i = 0; i < n_val; ++i) {
    const int idx = val_idx[static_cast<size_t>(i)];
    val_theta1.col(i) = data.theta.col(idx);
    val_x.col(i) = data.x.col(idx);
    for (int d = 0; d < D; ++d) val_theta0(d, i) = val_rng.normal();
    val_t[i] = sample_time(config.time_prior, val_rng.uniform());
  }

  OptimizerState opt = make_adam(model.spec.param_count(), config.lr);
  PlateauScheduler sched;

  NetParams best_params = model.params;
  double best_val = std::numeric_limits<double>::infinity();
  Vec best_mean = model.x_mean, best_std = model.x_std;

  RngStream epoch_rng(split_seed(config.seed, "train_epochs"));
  const int B = config.batch_size;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    epoch_rng.shuffle(train_idx);
    double train_loss_sum = 0.0;
    int n_steps = 0;
    for (Eigen::Index start = 0; start < n_train; start += B) {
      const Eigen::Index b = std::min<Eigen::Index>(B, n_train - start);
      Mat theta0(D, b), theta1(D, b), xb(model.x_dim, b);
      Vec t(b);
      for (Eigen::Index i = 0; i < b; ++i) {
        const int idx = train_idx[static_cast<size_t>(start + i)];
        theta1.col(i) = data.theta.col(idx);
        xb.col(i) = data.x.col(idx);
        for (int d = 0; d < D; ++d) theta0(d, i) = epoch_rng.normal();
        t[i] = sample_time(config.time_prior, epoch_rng.uniform());
      }
      LossGrad lg;
      try {
        lg = model_loss(model, theta0, theta1, xb, t);
      } catch (const numeric_error& e) {
        throw numeric_error("train: diverged at epoch " + std::to_string(epoch) +
                            ", step " + std::to_string(n_steps) + ": " + e.what());
      }
      clip_grad_norm(lg.grad, config.grad_clip);
      adam_step(opt, model.params, lg.grad);
      train_loss_sum += lg.loss;
      ++n_steps;
    }

    const double val_loss =
        model_loss(model, val_theta0, val_theta1, val_x, val_t).loss;
    if (!std::isfinite(val_loss))
      throw numeric_error("train: non-finite validation loss at epoch " +
                          std::to_string(epoch));
    if (val_loss < best_val) {
      best_val = val_loss;
      best_params = model.params;
      best_mean = model.x_mean;
      best_std = model.x_std;
    }
    plateau_step(sched, val_loss, opt.lr);
    result.curve.push_back(
        {epoch, train_loss_sum / std::max(1, n_steps), val_loss, opt.lr});
  }

  if (config.epochs > 0) {
    model.params = best_params;
    model.x_mean = best_mean;
    model.x_std = best_std;
    result.best_val_loss = best_val;
  }
  return result;
}

Mat euler_sample(const Model& model, const Vec& x, int n_samples, int n_steps,
                 uint64_t seed, EulerAudit* audit) {
  if (n_steps < 1) throw config_error("euler_sample: n_steps must be >= 1");
  if (n_samples < 0) throw config_error("euler_sample: n_samples must be >= 0");
  require_shape(x.size() == model.x_dim, "euler_sample: observation dim mismatch");
  const int D = model.theta_dim;
  Mat theta(D, n_samples);
  if (n_samples == 0) return theta;

  RngStream rng(split_seed(seed, "euler"));
  rng.fill_normal(theta);

  const Mat x_batch = x.replicate(1, n_samples);
  const double dt = 1.0 / static_cast<double>(n_steps);
  Workspace ws;

  for (int k = 0; k < n_steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    const Mat in = assemble_inputs(model, theta, Vec::Constant(n_samples, t), x_batch);
    forward_batch(model.spec, model.params, in, ws);
    Mat v;
    if (model.method == Method::pawsterior) {
      const Mat mu0 = ws.output.topRows(D);
      const Mat mu1 = apply_head1_batch(model.heads, model.support, ws.output.bottomRows(D));
      if (audit) {
        audit->mu1_evaluations += n_samples;
        for (int i = 0; i < n_samples; ++i)
          if (membership(model.support, mu1.col(i), 1e-9)) ++audit->mu1_in_support;
      }
      v = model.schedule.dalpha(t) * mu0 + model.schedule.dbeta(t) * mu1;
    } else {
      v = ws.output;
    }
    theta += dt * v;
    if (!theta.allFinite())
      throw numeric_error("euler_sample: non-finite state at step " + std::to_string(k));
  }

  // Project the final state onto the support: hard one-hot per block by
  // argmax for simplices, clamp for boxes.
  if (model.support.kind == Support::Kind::simplex_product) {
    for (int i = 0; i < n_samples; ++i) {
      int off = 0;
      for (int kblk : model.support.blocks) {
        int arg = 0;
        double best = theta(off, i);
        for (int j = 1; j < kblk; ++j)
          if (theta(off + j, i) > best) {
            best = theta(off + j, i);
            arg = j;
          }
        theta.col(i).segment(off, kblk).setZero();
        theta(off + arg, i) = 1.0;
        off += kblk;
      }
    }
  } else if (model.support.kind == Support::Kind::box) {
    for (int i = 0; i < n_samples; ++i)
      theta.col(i) =
          theta.col(i).cwiseMax(model.support.low).cwiseMin(model.support.high);
  }
  return theta;
}

}  // namespace pawflow
