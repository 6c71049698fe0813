#pragma once

#include <cstdint>
#include <vector>

#include "pawflow/common.hpp"

namespace pawflow {

// Affine interpolation schedule x_t = alpha(t) x0 + beta(t) x1. Only the
// straight line ships; the enum is the extension point.
struct Schedule {
  enum class Kind : uint8_t { straight_line = 0 };
  Kind kind = Kind::straight_line;

  double alpha(double t) const { return 1.0 - t; }
  double beta(double t) const { return t; }
  double dalpha(double /*t*/) const { return -1.0; }
  double dbeta(double /*t*/) const { return 1.0; }
};

struct ConfinementCoeffs {
  double a;
  double c;
  double t;
};

// Feasible set of the data endpoint: everything, an axis-aligned box, or a
// product of probability simplices (one-hot blocks).
struct Support {
  enum class Kind : uint8_t { unbounded = 0, box = 1, simplex_product = 2 };
  Kind kind = Kind::unbounded;
  int dim = 0;
  Vec low, high;            // box bounds, size dim
  std::vector<int> blocks;  // simplex block sizes, summing to dim

  static Support Unbounded(int dim);
  static Support Box(const Vec& low, const Vec& high);
  static Support BoxUniform(int dim, double low, double high);
  static Support SimplexProduct(const std::vector<int>& block_sizes);

  void validate() const;
};

enum class Head1Kind : uint8_t { unconstrained = 0, tanh_box = 1, categorical = 2 };

// head0 (noise endpoint, Gaussian) is always the raw network output; head1
// maps raw outputs into the feasible set.
struct EndpointHeads {
  Head1Kind head1 = Head1Kind::unconstrained;
};

EndpointHeads heads_for_support(const Support& support);

Vec interpolate(const Schedule& sched, const Vec& x0, const Vec& x1, double t);
Vec instantaneous_velocity(const Schedule& sched, const Vec& x0, const Vec& x1, double t);

// (a_t, c_t) of the one-sided affine decomposition; undefined where alpha(t)
// vanishes, so t must stay in [0, 1).
ConfinementCoeffs confinement_coeffs(const Schedule& sched, double t);

// Maps raw head1 outputs to a point of the support: tanh squashing into the
// box, per-block softmax onto the simplices, identity otherwise.
Vec apply_head1(const EndpointHeads& heads, const Support& support, const Vec& raw);

// Column-wise batch version (raw is dim x B).
Mat apply_head1_batch(const EndpointHeads& heads, const Support& support, const Mat& raw);

// d mu1 / d raw for the tanh-box head (diagonal Jacobian, element-wise).
Mat tanh_box_jacobian_batch(const Support& support, const Mat& raw);

// Per-block softmax over columns of a logits matrix.
Mat blockwise_softmax(const Support& support, const Mat& logits);

// tol loosens the box bounds and the simplex nonnegativity check; the simplex
// block-sum tolerance is fixed at 1e-9.
bool membership(const Support& support, const Vec& point, double tol = 0.0);

}  // namespace pawflow
