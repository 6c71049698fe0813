#include "pawflow/nn.hpp"

#include <cmath>

namespace pawflow {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865476;
constexpr double kInvSqrt2Pi = 0.3989422804014327;

double gelu(double u) { return 0.5 * u * (1.0 + std::erf(u * kInvSqrt2)); }
double gelu_grad(double u) {
  const double cdf = 0.5 * (1.0 + std::erf(u * kInvSqrt2));
  const double pdf = kInvSqrt2Pi * std::exp(-0.5 * u * u);
  return cdf + u * pdf;
}

void apply_act(Activation act, const Mat& pre, Mat& post) {
  if (act == Activation::gelu) {
    post = pre.unaryExpr([](double u) { return gelu(u); });
  } else {
    post = pre.cwiseMax(0.0);
  }
}

void act_grad_inplace(Activation act, const Mat& pre, Mat& grad) {
  if (act == Activation::gelu) {
    grad.array() *= pre.unaryExpr([](double u) { return gelu_grad(u); }).array();
  } else {
    grad.array() *= (pre.array() > 0.0).cast<double>();
  }
}

void check_finite(const Mat& m, const std::string& layer) {
  if (!m.allFinite())
    throw numeric_error("non-finite value at layer: " + layer);
}

// Byte offsets of each tensor in the flat layout.
struct Layout {
  ptrdiff_t W_in, b_in, W_out, b_out;
  std::vector<ptrdiff_t> W1, b1, W2, b2;
};

Layout make_layout(const NetSpec& spec) {
  const int in = spec.input_dim, h = spec.hidden_dim, out = spec.output_dim;
  Layout L;
  ptrdiff_t q = 0;
  L.W_in = q; q += static_cast<ptrdiff_t>(h) * in;
  L.b_in = q; q += h;
  for (int b = 0; b < spec.num_blocks; ++b) {
    L.W1.push_back(q); q += static_cast<ptrdiff_t>(h) * h;
    L.b1.push_back(q); q += h;
    L.W2.push_back(q); q += static_cast<ptrdiff_t>(h) * h;
    L.b2.push_back(q); q += h;
  }
  L.W_out = q; q += static_cast<ptrdiff_t>(out) * h;
  L.b_out = q;
  return L;
}

using CMap = Eigen::Map<const Mat>;
using CVMap = Eigen::Map<const Vec>;
using MMap = Eigen::Map<Mat>;
using VMap = Eigen::Map<Vec>;

}  // namespace

NetParams init_params(const NetSpec& spec, RngStream& rng) {
  spec.validate();
  NetParams p;
  p.values = Vec::Zero(spec.param_count());
  auto fill = [&](double* ptr, int rows, int cols, int fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (int i = 0; i < rows * cols; ++i)
      ptr[i] = bound * (2.0 * rng.uniform() - 1.0);
  };
  const int in = spec.input_dim, h = spec.hidden_dim;
  double* q = p.values.data();
  fill(q, h, in, in); q += h * in;          // W_in
  fill(q, h, 1, in); q += h;                // b_in
  for (int b = 0; b < spec.num_blocks; ++b) {
    fill(q, h, h, h); q += h * h;           // W1
    fill(q, h, 1, h); q += h;               // b1
    fill(q, h, h, h); q += h * h;           // W2
    fill(q, h, 1, h); q += h;               // b2
  }
  // W_out, b_out stay zero.
  return p;
}

void forward_batch(const NetSpec& spec, const NetParams& params, const Mat& input,
                   Workspace& ws) {
  spec.validate();
  require_shape(params.values.size() == spec.param_count(),
                "forward: parameter count does not match spec layout");
  require_shape(input.rows() == spec.input_dim,
                "forward: input dim " + std::to_string(input.rows()) + " != spec " +
                    std::to_string(spec.input_dim));
  const Layout L = make_layout(spec);
  const double* p = params.values.data();
  const int in = spec.input_dim, h = spec.hidden_dim, out = spec.output_dim;

  ws.input = input;
  ws.block_in.resize(static_cast<size_t>(spec.num_blocks) + 1);
  ws.pre_act.resize(spec.num_blocks);
  ws.post_act.resize(spec.num_blocks);

  ws.block_in[0].noalias() = CMap(p + L.W_in, h, in) * input;
  ws.block_in[0].colwise() += CVMap(p + L.b_in, h);
  check_finite(ws.block_in[0], "input projection");

  for (int b = 0; b < spec.num_blocks; ++b) {
    ws.pre_act[b].noalias() = CMap(p + L.W1[b], h, h) * ws.block_in[b];
    ws.pre_act[b].colwise() += CVMap(p + L.b1[b], h);
    apply_act(spec.activation, ws.pre_act[b], ws.post_act[b]);
    ws.block_in[b + 1].noalias() = CMap(p + L.W2[b], h, h) * ws.post_act[b];
    ws.block_in[b + 1].colwise() += CVMap(p + L.b2[b], h);
    ws.block_in[b + 1] += ws.block_in[b];
    check_finite(ws.block_in[b + 1], "block " + std::to_string(b));
  }

  ws.output.noalias() = CMap(p + L.W_out, out, h) * ws.block_in[spec.num_blocks];
  ws.output.colwise() += CVMap(p + L.b_out, out);
  check_finite(ws.output, "output projection");
}

void backward_batch(const NetSpec& spec, const NetParams& params, const Workspace& ws,
                    const Mat& output_grad, Vec& param_grad) {
  require_shape(output_grad.rows() == spec.output_dim &&
                    output_grad.cols() == ws.output.cols(),
                "backward: output_grad shape mismatch");
  const Layout L = make_layout(spec);
  const double* p = params.values.data();
  const int in = spec.input_dim, h = spec.hidden_dim, out = spec.output_dim;
  param_grad.setZero(spec.param_count());
  double* gp = param_grad.data();

  const Mat& H = ws.block_in[spec.num_blocks];
  MMap(gp + L.W_out, out, h).noalias() = output_grad * H.transpose();
  VMap(gp + L.b_out, out) = output_grad.rowwise().sum();

  Mat dH = CMap(p + L.W_out, out, h).transpose() * output_grad;
  for (int b = spec.num_blocks - 1; b >= 0; --b) {
    VMap(gp + L.b2[b], h) = dH.rowwise().sum();
    MMap(gp + L.W2[b], h, h).noalias() = dH * ws.post_act[b].transpose();
    Mat dU = CMap(p + L.W2[b], h, h).transpose() * dH;
    act_grad_inplace(spec.activation, ws.pre_act[b], dU);
    check_finite(dU, "backward block " + std::to_string(b));
    MMap(gp + L.W1[b], h, h).noalias() = dU * ws.block_in[b].transpose();
    VMap(gp + L.b1[b], h) = dU.rowwise().sum();
    dH.noalias() += CMap(p + L.W1[b], h, h).transpose() * dU;
  }

  MMap(gp + L.W_in, h, in).noalias() = dH * ws.input.transpose();
  VMap(gp + L.b_in, h) = dH.rowwise().sum();
  check_finite(param_grad, "backward input projection");
}

Vec forward(const NetSpec& spec, const NetParams& params, const Vec& input) {
  Workspace ws;
  forward_batch(spec, params, input, ws);
  return ws.output.col(0);
}

Vec backward(const NetSpec& spec, const NetParams& params, const Vec& input,
             const Vec& output_grad) {
  Workspace ws;
  forward_batch(spec, params, input, ws);
  Vec grad;
  backward_batch(spec, params, ws, output_grad, grad);
  return grad;
}

OptimizerState make_adam(int n_params, double lr) {
  if (lr <= 0.0) throw config_error("adam: lr must be positive");
  OptimizerState st;
  st.first_moment = Vec::Zero(n_params);
  st.second_moment = Vec::Zero(n_params);
  st.lr = lr;
  return st;
}

void adam_step(OptimizerState& state, NetParams& params, const Vec& grads) {
  require_shape(grads.size() == params.values.size() &&
                    grads.size() == state.first_moment.size(),
                "adam_step: gradient length mismatch");
  if (!grads.allFinite())
    throw numeric_error("adam_step: non-finite gradient rejected");
  state.step_count += 1;
  state.first_moment = state.beta1 * state.first_moment + (1.0 - state.beta1) * grads;
  state.second_moment =
      state.beta2 * state.second_moment + (1.0 - state.beta2) * grads.cwiseProduct(grads);
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  params.values.array() -=
      state.lr * (state.first_moment.array() / bc1) /
      ((state.second_moment.array() / bc2).sqrt() + state.eps);
}

double clip_grad_norm(Vec& grads, double max_norm) {
  if (max_norm <= 0.0) throw config_error("clip_grad_norm: max_norm must be positive");
  if (grads.size() == 0) return 0.0;
  const double norm = grads.norm();
  if (norm > max_norm) grads *= max_norm / norm;
  return norm;
}

bool plateau_step(PlateauScheduler& sched, double val_loss, double& lr) {
  if (!std::isfinite(val_loss))
    throw numeric_error("plateau_step: non-finite validation loss");
  if (val_loss < sched.best_loss - sched.min_delta) {
    sched.best_loss = val_loss;
    sched.epochs_since_improve = 0;
    return false;
  }
  sched.epochs_since_improve += 1;
  if (sched.epochs_since_improve > sched.patience) {
    lr *= sched.factor;
    sched.epochs_since_improve = 0;
    return true;
  }
  return false;
}

}  // namespace pawflow
