#pragma once

#include "bpsfp/core.hpp"
#include "bpsfp/linesearch.hpp"
#include "bpsfp/linops.hpp"
#include "bpsfp/objectives.hpp"
#include "bpsfp/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <variant>

namespace bpsfp {

// ---------------------------------------------------------------------------
// Range sets

struct Point {
  Vector b;
};

/// {y : ||y - center||_p <= radius}.
struct NormBall {
  NormType p = NormType::L2;
  Vector center;
  double radius = 0.0;
};

/// lower <= y <= upper on coordinates [first, first + lower.size()), others free.
struct Box {
  Vector lower;
  Vector upper;
  Index first = 0;
};

/// y >= 0 on coordinates [first, first + count); count < 0 means "to the end".
struct NonnegCone {
  Index first = 0;
  Index count = -1;
};

/// {y : <a, y> = beta}.
struct Hyperplane {
  Vector a;
  double beta = 0.0;
};

/// {y : <a, y> <= beta}.
struct Halfspace {
  Vector a;
  double beta = 0.0;
};

/// {y : A y = b}, A with full row rank.
struct AffineSubspace {
  LinearOperatorPtr A;
  Vector b;
};

using RangeSet = std::variant<Point, NormBall, Box, NonnegCone, Hyperplane, Halfspace, AffineSubspace>;

namespace detail {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

inline Index cone_end(const NonnegCone& c, Index n) {
  const Index end = c.count < 0 ? n : c.first + c.count;
  if (c.first < 0 || end > n || c.first > end) throw Error(ErrorKind::DimensionMismatch, "NonnegCone: range exceeds vector");
  return end;
}

inline void check_box(const Box& box, Index n) {
  require_same_size(box.lower.size(), box.upper.size(), "Box");
  if (box.first < 0 || box.first + box.lower.size() > n) throw Error(ErrorKind::DimensionMismatch, "Box: range exceeds vector");
  if ((box.lower.array() > box.upper.array()).any()) throw Error(ErrorKind::InvalidArgument, "Box: lower > upper");
}

inline void check_normal(const Vector& a) {
  if (a.size() == 0 || a.lpNorm<Eigen::Infinity>() == 0.0) throw Error(ErrorKind::ZeroNormal, "zero normal vector");
}

// Solves (A A^T) v = r by conjugate gradients.
inline Vector solve_normal_equations(const LinearOperator& A, const Vector& r, double rel_tol = 1e-13) {
  Vector v = Vector::Zero(r.size());
  Vector res = r;
  Vector dir = res;
  double rs = res.squaredNorm();
  const double stop = rel_tol * rel_tol * std::max(rs, std::numeric_limits<double>::min());
  const Index cap = std::max<Index>(100, 10 * r.size());
  for (Index it = 0; it < cap && rs > stop; ++it) {
    const Vector q = A.apply(A.apply_adjoint(dir));
    const double curvature = dir.dot(q);
    if (curvature <= 0.0) break;
    const double step = rs / curvature;
    v += step * dir;
    res -= step * q;
    const double rs_new = res.squaredNorm();
    dir = res + (rs_new / rs) * dir;
    rs = rs_new;
  }
  return v;
}

}  // namespace detail

/// Euclidean projection onto a range set.
inline Vector project_orthogonal(const RangeSet& q, const Vector& y) {
  return std::visit(
      detail::overloaded{
          [&](const Point& s) -> Vector {
            require_same_size(s.b.size(), y.size(), "project_orthogonal(Point)");
            return s.b;
          },
          [&](const NormBall& s) -> Vector {
            require_same_size(s.center.size(), y.size(), "project_orthogonal(NormBall)");
            if (s.radius < 0.0) throw Error(ErrorKind::InvalidArgument, "NormBall: negative radius");
            const Vector d = y - s.center;
            switch (s.p) {
              case NormType::L2: {
                const double nrm = d.norm();
                return nrm <= s.radius ? y : Vector(s.center + (s.radius / nrm) * d);
              }
              case NormType::Inf:
                return s.center + d.cwiseMax(-s.radius).cwiseMin(s.radius);
              case NormType::L1:
                return s.center + project_l1_ball(d, s.radius);
            }
            throw Error(ErrorKind::UnsupportedNorm, "NormBall: unsupported norm");
          },
          [&](const Box& s) -> Vector {
            detail::check_box(s, y.size());
            Vector z = y;
            z.segment(s.first, s.lower.size()) = y.segment(s.first, s.lower.size()).cwiseMax(s.lower).cwiseMin(s.upper);
            return z;
          },
          [&](const NonnegCone& s) -> Vector {
            const Index end = detail::cone_end(s, y.size());
            Vector z = y;
            z.segment(s.first, end - s.first) = z.segment(s.first, end - s.first).cwiseMax(0.0);
            return z;
          },
          [&](const Hyperplane& s) -> Vector {
            require_same_size(s.a.size(), y.size(), "project_orthogonal(Hyperplane)");
            detail::check_normal(s.a);
            return y - ((s.a.dot(y) - s.beta) / s.a.squaredNorm()) * s.a;
          },
          [&](const Halfspace& s) -> Vector {
            require_same_size(s.a.size(), y.size(), "project_orthogonal(Halfspace)");
            detail::check_normal(s.a);
            const double excess = s.a.dot(y) - s.beta;
            return excess <= 0.0 ? y : Vector(y - (excess / s.a.squaredNorm()) * s.a);
          },
          [&](const AffineSubspace& s) -> Vector {
            if (!s.A) throw Error(ErrorKind::InvalidArgument, "AffineSubspace: null operator");
            require_same_size(s.A->cols(), y.size(), "project_orthogonal(AffineSubspace)");
            require_same_size(s.A->rows(), s.b.size(), "project_orthogonal(AffineSubspace)");
            const Vector r = s.A->apply(y) - s.b;
            return y - s.A->apply_adjoint(detail::solve_normal_equations(*s.A, r));
          },
      },
      q);
}

/// Euclidean distance from y to the set.
inline double distance_to(const RangeSet& q, const Vector& y) {
  if (const auto* h = std::get_if<Hyperplane>(&q)) {
    require_same_size(h->a.size(), y.size(), "distance_to(Hyperplane)");
    detail::check_normal(h->a);
    return std::abs(h->a.dot(y) - h->beta) / h->a.norm();
  }
  if (const auto* h = std::get_if<Halfspace>(&q)) {
    require_same_size(h->a.size(), y.size(), "distance_to(Halfspace)");
    detail::check_normal(h->a);
    return std::max(h->a.dot(y) - h->beta, 0.0) / h->a.norm();
  }
  if (const auto* c = std::get_if<NonnegCone>(&q)) {
    const Index end = detail::cone_end(*c, y.size());
    return y.segment(c->first, end - c->first).cwiseMin(0.0).norm();
  }
  if (const auto* p = std::get_if<Point>(&q)) {
    require_same_size(p->b.size(), y.size(), "distance_to(Point)");
    return (y - p->b).norm();
  }
  return (y - project_orthogonal(q, y)).norm();
}

// ---------------------------------------------------------------------------
// Separating halfspace for a difficult constraint A x in Q

struct SeparatingHalfspace {
  Vector normal;   // A^T w
  double offset;   // beta
  Vector w;        // A x~ - P_Q(A x~)
  double w_norm_sq;
};

/// Feasibility tolerance on ||w|| below which a difficult constraint is skipped.
inline double feasibility_threshold(const Vector& image) { return 1e-12 * (1.0 + image.norm()); }

/// Halfspace {x : <A^T w, x> <= beta} containing {x : A x in Q} but not x~,
/// given the precomputed image A x~.
inline SeparatingHalfspace separating_halfspace_from_image(const LinearOperator& A, const RangeSet& q,
                                                           const Vector& x_tilde, const Vector& image) {
  Vector w = image - project_orthogonal(q, image);
  const double wn = w.norm();
  if (wn <= feasibility_threshold(image)) {
    throw Error(ErrorKind::FeasiblePoint, "separating_halfspace: A x already lies in Q");
  }
  Vector normal = A.apply_adjoint(w);
  const double w_sq = wn * wn;
  const double offset = normal.dot(x_tilde) - w_sq;
  return {std::move(normal), offset, std::move(w), w_sq};
}

inline SeparatingHalfspace separating_halfspace(const LinearOperator& A, const RangeSet& q, const Vector& x_tilde) {
  require_same_size(x_tilde.size(), A.cols(), "separating_halfspace");
  return separating_halfspace_from_image(A, q, x_tilde, A.apply(x_tilde));
}

// ---------------------------------------------------------------------------
// Bregman projections

/// Scalar by-products of a Bregman projection: the dual step (0 when the
/// projection has no scalar step) and the Euclidean distance from the input x
/// to the set (NaN when not computed).
struct ProjectionInfo {
  double step = 0.0;
  double distance = std::numeric_limits<double>::quiet_NaN();
};

/// Projected pair together with its ProjectionInfo fields.
struct BregmanStep {
  PrimalDualPair pair;
  double step = 0.0;
  double distance = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

inline BregmanStep with_pair(PrimalDualPair pair, const ProjectionInfo& info) {
  return {std::move(pair), info.step, info.distance};
}

}  // namespace detail

/// In-place Bregman projection onto H(a, beta): z* = x* - t a with t
/// minimizing f*(x* - t a) + t beta over the domain. With
/// LineDomain::NonNegative and x outside H_<=(a, beta) this is also the
/// projection onto the halfspace.
inline ProjectionInfo bregman_project_hyperplane_inplace(const Objective& f, PrimalDualPair& pair, const Vector& a,
                                                         double beta, LineDomain domain = LineDomain::Real) {
  require_same_size(a.size(), f.dimension(), "bregman_project_hyperplane");
  const auto span = detail::nonzero_span(a);
  if (!span) throw Error(ErrorKind::ZeroNormal, "bregman_project_hyperplane: a = 0");
  if (const auto w = detail::span_weights(f, *span)) {
    // Separable coordinates: only the span of a moves, with x_j = S_{w_j}(x*_j).
    const auto a_s = a.segment(span->first, span->count);
    auto zs = pair.x_star.segment(span->first, span->count);
    auto z = pair.x.segment(span->first, span->count);
    const double residual = (a_s.dot(z) - beta) / a_s.norm();
    ProjectionInfo info;
    info.distance = domain == LineDomain::Real ? std::abs(residual) : std::max(residual, 0.0);
    info.step = exact_linesearch_weighted(zs, a_s, beta, *w, domain);
    if (info.step == 0.0) return info;
    zs -= info.step * a_s;
    z = (zs - *w).cwiseMax(0.0) + (zs + *w).cwiseMin(0.0);
    return info;
  }
  ProjectionInfo info;
  info.step = exact_linesearch(f, pair.x_star, a, beta, domain);
  if (info.step != 0.0) pair = PrimalDualPair::from_dual(f, pair.x_star - info.step * a);
  return info;
}

inline BregmanStep bregman_project_hyperplane(const Objective& f, const PrimalDualPair& pair, const Vector& a,
                                              double beta, LineDomain domain = LineDomain::Real) {
  PrimalDualPair out = pair;
  const auto info = bregman_project_hyperplane_inplace(f, out, a, beta, domain);
  return detail::with_pair(std::move(out), info);
}

/// Bregman projection onto H_<=(a, beta); identity if x is already inside.
inline ProjectionInfo bregman_project_halfspace_inplace(const Objective& f, PrimalDualPair& pair, const Vector& a,
                                                        double beta) {
  require_same_size(a.size(), f.dimension(), "bregman_project_halfspace");
  if (a.lpNorm<Eigen::Infinity>() == 0.0) throw Error(ErrorKind::ZeroNormal, "bregman_project_halfspace: a = 0");
  if (a.dot(pair.x) <= beta) return {0.0, 0.0};
  return bregman_project_hyperplane_inplace(f, pair, a, beta, LineDomain::NonNegative);
}

inline BregmanStep bregman_project_halfspace(const Objective& f, const PrimalDualPair& pair, const Vector& a,
                                             double beta) {
  PrimalDualPair out = pair;
  const auto info = bregman_project_halfspace_inplace(f, out, a, beta);
  return detail::with_pair(std::move(out), info);
}

namespace detail {

// Box/cone kernel on coordinates first..first+count-1.
template <class Lower, class Upper>
inline ProjectionInfo box_inplace(const Objective& f, Index first, Index count, Lower lower, Upper upper,
                                  PrimalDualPair& pair) {
  std::vector<double> weights(static_cast<std::size_t>(count));
  if (count > 0 && !f.l1_weights(first, count, weights.data())) {
    throw Error(ErrorKind::UnsupportedProjection, "box projection: coordinate is not separable");
  }
  double dist_sq = 0.0;
  if (std::all_of(weights.begin(), weights.end(), [](double w) { return w == 0.0; })) {
    // Quadratic coordinates: z = z* = clamp(x*).
    for (Index i = 0; i < count; ++i) {
      const Index j = first + i;
      const double xj = pair.x[j];
      const double lo = lower(i), hi = upper(i);
      const double outside = std::max(lo - xj, 0.0) + std::max(xj - hi, 0.0);
      dist_sq += outside * outside;
      const double z = std::min(std::max(pair.x_star[j], lo), hi);
      pair.x[j] = z;
      pair.x_star[j] = z;
    }
    return {0.0, std::sqrt(dist_sq)};
  }
  for (Index i = 0; i < count; ++i) {
    const Index j = first + i;
    const double lambda = weights[static_cast<std::size_t>(i)];
    const double xs = pair.x_star[j];
    const double lo = lower(i), hi = upper(i);
    const double xj = pair.x[j];
    const double outside = xj < lo ? lo - xj : (xj > hi ? xj - hi : 0.0);
    dist_sq += outside * outside;
    const double shrunk = xs > lambda ? xs - lambda : (xs < -lambda ? xs + lambda : 0.0);
    double z = shrunk, zs = xs;
    if (shrunk > hi) {
      z = hi;
      zs = hi + lambda;
    } else if (shrunk < lo) {
      z = lo;
      zs = lo - lambda;
    }
    if (z == 0.0 && ((lo == 0.0 && xs < 0.0) || (hi == 0.0 && xs > 0.0))) zs = 0.0;
    pair.x[j] = z;
    pair.x_star[j] = zs;
  }
  return {0.0, std::sqrt(dist_sq)};
}

}  // namespace detail

/// In-place Bregman projection onto a box (0 inside) for objectives whose
/// constrained coordinates are separable elastic-net terms
/// lambda_j*|x_j| + 0.5*x_j^2.
///
/// z = clamp(S_lambda(x*), lower, upper); the admissible subgradient keeps x*
/// where the clamp is inactive, uses upper + lambda / lower - lambda where it
/// clips, and is set to 0 where z_j = 0 sits on a zero bound that x*_j pushes
/// against.
inline ProjectionInfo bregman_project_box_inplace(const Objective& f, const Box& box, PrimalDualPair& pair) {
  detail::check_box(box, f.dimension());
  if ((box.lower.array() > 0.0).any() || (box.upper.array() < 0.0).any()) {
    throw Error(ErrorKind::BoxWithoutZero, "Bregman box projection needs 0 in the box");
  }
  return detail::box_inplace(
      f, box.first, box.lower.size(), [&](Index i) { return box.lower[i]; }, [&](Index i) { return box.upper[i]; },
      pair);
}

inline PrimalDualPair bregman_project_box(const Objective& f, const Box& box, const PrimalDualPair& pair) {
  PrimalDualPair out = pair;
  bregman_project_box_inplace(f, box, out);
  return out;
}

inline PrimalDualPair bregman_project_box_elasticnet(double lambda, const Box& box, const PrimalDualPair& pair) {
  return bregman_project_box(ElasticNet(lambda, pair.x_star.size()), box, pair);
}

/// Bregman projection onto a (partial) nonnegative orthant: the box [0, inf).
inline ProjectionInfo bregman_project_nonneg_inplace(const Objective& f, const NonnegCone& cone, PrimalDualPair& pair) {
  const Index end = detail::cone_end(cone, f.dimension());
  constexpr double kInf = std::numeric_limits<double>::infinity();
  return detail::box_inplace(
      f, cone.first, end - cone.first, [](Index) { return 0.0; }, [](Index) { return kInf; }, pair);
}

inline PrimalDualPair bregman_project_nonneg(const Objective& f, const NonnegCone& cone, const PrimalDualPair& pair) {
  PrimalDualPair out = pair;
  bregman_project_nonneg_inplace(f, cone, out);
  return out;
}

/// z = S_lambda(max(x*, 0)) with admissible subgradient max(x*, 0).
inline PrimalDualPair bregman_project_nonneg_elasticnet(double lambda, const PrimalDualPair& pair) {
  return bregman_project_nonneg(ElasticNet(lambda, pair.x_star.size()), NonnegCone{}, pair);
}

/// Options for the inner solver of the affine-subspace projection.
struct AffineProjectionOptions {
  int max_iterations = 100000;
  double gradient_tolerance = 1e-13;
};

/// Bregman projection onto {x : A x = b}: z* = x* - A^T w, where w minimizes
/// the dual g(w) = f*(x* - A^T w) + <w, b>. The dual is solved by gradient
/// descent with step alpha/||A||^2; a single row is delegated to the exact
/// hyperplane search.
inline PrimalDualPair bregman_project_affine(const Objective& f, const PrimalDualPair& pair, const LinearOperator& A,
                                             const Vector& b, const AffineProjectionOptions& opts = {}) {
  require_same_size(A.cols(), f.dimension(), "bregman_project_affine");
  require_same_size(A.rows(), b.size(), "bregman_project_affine");
  if (A.rows() == 1 && A.has_rows()) return bregman_project_hyperplane(f, pair, A.row(0), b[0]).pair;

  const double norm = A.norm_estimate();
  if (norm == 0.0) throw Error(ErrorKind::ZeroNormal, "bregman_project_affine: A = 0");
  const double step = f.alpha() / (norm * norm);
  const double tol = opts.gradient_tolerance * (1.0 + b.norm());

  Vector w = Vector::Zero(A.rows());
  Vector z_star = pair.x_star;
  Vector z = pair.x;
  for (int it = 0; it <= opts.max_iterations; ++it) {
    const Vector grad = b - A.apply(z);
    if (grad.norm() <= tol) return {std::move(z), std::move(z_star)};
    w -= step * grad;
    z_star = pair.x_star - A.apply_adjoint(w);
    z = f.grad_conjugate(z_star);
  }
  throw Error(ErrorKind::NoConvergence, "bregman_project_affine: dual gradient did not reach tolerance");
}

/// In-place Bregman projection onto a simple set, dispatched on the set type.
inline ProjectionInfo bregman_project_inplace(const Objective& f, const RangeSet& set, PrimalDualPair& pair) {
  return std::visit(
      detail::overloaded{
          [&](const Hyperplane& s) { return bregman_project_hyperplane_inplace(f, pair, s.a, s.beta); },
          [&](const Halfspace& s) { return bregman_project_halfspace_inplace(f, pair, s.a, s.beta); },
          [&](const Box& s) { return bregman_project_box_inplace(f, s, pair); },
          [&](const NonnegCone& s) { return bregman_project_nonneg_inplace(f, s, pair); },
          [&](const AffineSubspace& s) {
            if (!s.A) throw Error(ErrorKind::InvalidArgument, "AffineSubspace: null operator");
            pair = bregman_project_affine(f, pair, *s.A, s.b);
            return ProjectionInfo{};
          },
          [&](const Point&) -> ProjectionInfo {
            throw Error(ErrorKind::UnsupportedProjection, "no Bregman projector for a point set");
          },
          [&](const NormBall&) -> ProjectionInfo {
            throw Error(ErrorKind::UnsupportedProjection, "no Bregman projector for a norm ball; use a difficult constraint");
          },
      },
      set);
}

inline BregmanStep bregman_project(const Objective& f, const RangeSet& set, const PrimalDualPair& pair) {
  PrimalDualPair out = pair;
  const auto info = bregman_project_inplace(f, set, out);
  return detail::with_pair(std::move(out), info);
}

}  // namespace bpsfp
