#include "pawflow/geometry.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace pawflow {

Support Support::Unbounded(int dim) {
  Support s;
  s.kind = Kind::unbounded;
  s.dim = dim;
  s.validate();
  return s;
}

Support Support::Box(const Vec& low, const Vec& high) {
  Support s;
  s.kind = Kind::box;
  s.dim = static_cast<int>(low.size());
  s.low = low;
  s.high = high;
  s.validate();
  return s;
}

Support Support::BoxUniform(int dim, double low, double high) {
  return Box(Vec::Constant(dim, low), Vec::Constant(dim, high));
}

Support Support::SimplexProduct(const std::vector<int>& block_sizes) {
  Support s;
  s.kind = Kind::simplex_product;
  s.blocks = block_sizes;
  s.dim = std::accumulate(block_sizes.begin(), block_sizes.end(), 0);
  s.validate();
  return s;
}

void Support::validate() const {
  if (dim < 1) throw config_error("Support: dim must be >= 1");
  if (kind == Kind::box) {
    if (low.size() != dim || high.size() != dim)
      throw config_error("Support: box bounds must match dim");
    for (int d = 0; d < dim; ++d)
      if (!(low[d] < high[d]))
        throw config_error("Support: box requires low < high in every dim");
  } else if (kind == Kind::simplex_product) {
    if (blocks.empty()) throw config_error("Support: simplex product needs blocks");
    int total = 0;
    for (int k : blocks) {
      if (k < 2) throw config_error("Support: simplex blocks need size >= 2");
      total += k;
    }
    if (total != dim)
      throw config_error("Support: simplex blocks must partition the vector exactly");
  }
}

EndpointHeads heads_for_support(const Support& support) {
  EndpointHeads h;
  switch (support.kind) {
    case Support::Kind::unbounded: h.head1 = Head1Kind::unconstrained; break;
    case Support::Kind::box: h.head1 = Head1Kind::tanh_box; break;
    case Support::Kind::simplex_product: h.head1 = Head1Kind::categorical; break;
  }
  return h;
}

Vec interpolate(const Schedule& sched, const Vec& x0, const Vec& x1, double t) {
  require_shape(x0.size() == x1.size(), "interpolate: endpoint length mismatch");
  return sched.alpha(t) * x0 + sched.beta(t) * x1;
}

Vec instantaneous_velocity(const Schedule& sched, const Vec& x0, const Vec& x1,
                           double t) {
  require_shape(x0.size() == x1.size(), "instantaneous_velocity: length mismatch");
  return sched.dalpha(t) * x0 + sched.dbeta(t) * x1;
}

ConfinementCoeffs confinement_coeffs(const Schedule& sched, double t) {
  if (!(t >= 0.0 && t < 1.0))
    throw std::domain_error("confinement_coeffs: t must lie in [0, 1)");
  const double alpha = sched.alpha(t);
  if (alpha == 0.0)
    throw std::domain_error("confinement_coeffs: alpha(t) = 0, coefficients undefined");
  const double a = sched.dalpha(t) / alpha;
  const double c = sched.dbeta(t) - a * sched.beta(t);
  return ConfinementCoeffs{a, c, t};
}

Mat blockwise_softmax(const Support& support, const Mat& logits) {
  require_shape(logits.rows() == support.dim, "blockwise_softmax: dim mismatch");
  Mat out(logits.rows(), logits.cols());
  for (Eigen::Index col = 0; col < logits.cols(); ++col) {
    int off = 0;
    for (int k : support.blocks) {
      const auto block = logits.col(col).segment(off, k);
      const double m = block.maxCoeff();
      Vec e = (block.array() - m).exp();
      out.col(col).segment(off, k) = e / e.sum();
      off += k;
    }
  }
  return out;
}

Mat apply_head1_batch(const EndpointHeads& heads, const Support& support,
                      const Mat& raw) {
  require_shape(raw.rows() == support.dim,
                "apply_head1: raw dim " + std::to_string(raw.rows()) +
                    " != support dim " + std::to_string(support.dim));
  switch (heads.head1) {
    case Head1Kind::unconstrained:
      return raw;
    case Head1Kind::tanh_box: {
      // double tanh saturates to exactly +-1 near |raw| ~ 19; pin the squash
      // factor a hair inside (0, 1) so outputs stay strictly interior.
      constexpr double kMargin = 1e-9;
      Mat out = raw.array().tanh();
      for (Eigen::Index col = 0; col < out.cols(); ++col)
        out.col(col) =
            support.low.array() +
            (support.high - support.low).array() *
                ((out.col(col).array() + 1.0) * 0.5).max(kMargin).min(1.0 - kMargin);
      return out;
    }
    case Head1Kind::categorical:
      return blockwise_softmax(support, raw);
  }
  throw config_error("apply_head1: unknown head kind");
}

Vec apply_head1(const EndpointHeads& heads, const Support& support, const Vec& raw) {
  return apply_head1_batch(heads, support, raw).col(0);
}

Mat tanh_box_jacobian_batch(const Support& support, const Mat& raw) {
  Mat th = raw.array().tanh();
  Mat jac(raw.rows(), raw.cols());
  for (Eigen::Index col = 0; col < raw.cols(); ++col)
    jac.col(col) = (support.high - support.low).array() * 0.5 *
                   (1.0 - th.col(col).array().square());
  return jac;
}

bool membership(const Support& support, const Vec& point, double tol) {
  require_shape(point.size() == support.dim, "membership: point dim mismatch");
  if (!point.allFinite()) return false;
  switch (support.kind) {
    case Support::Kind::unbounded:
      return true;
    case Support::Kind::box:
      for (int d = 0; d < support.dim; ++d)
        if (point[d] < support.low[d] - tol || point[d] > support.high[d] + tol)
          return false;
      return true;
    case Support::Kind::simplex_product: {
      constexpr double kSumTol = 1e-9;
      int off = 0;
      for (int k : support.blocks) {
        double sum = 0.0;
        for (int i = 0; i < k; ++i) {
          if (point[off + i] < -tol) return false;
          sum += point[off + i];
        }
        if (std::abs(sum - 1.0) > kSumTol) return false;
        off += k;
      }
      return true;
    }
  }
  return false;
}

}  // namespace pawflow
