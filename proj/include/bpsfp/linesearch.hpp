#pragma once

#include "bpsfp/core.hpp"
#include "bpsfp/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace bpsfp {

/// Admissible step sizes: halfspace projections search t >= 0, hyperplane
/// (equality) projections search all of R.
enum class LineDomain { NonNegative, Real };

/// g(t) = f*(x* - t a) + t beta.
inline double line_value(const Objective& f, const Vector& x_star, const Vector& a, double beta, double t) {
  return f.conjugate(x_star - t * a) + t * beta;
}

/// g'(t) = beta - <a, grad f*(x* - t a)>; nondecreasing in t.
inline double line_slope(const Objective& f, const Vector& x_star, const Vector& a, double beta, double t) {
  return beta - a.dot(f.grad_conjugate(x_star - t * a));
}

namespace detail {

// One coordinate of g(t) = sum_j 0.5*S_{l_j}(x*_j - t a_j)^2 + t beta.
// Left of lo the coordinate is active with sign sign(a), right of hi with
// sign -sign(a), inactive in between.
struct KinkCoord {
  double xs;
  double a;
  double lambda;
  double lo;
  double hi;
};

enum class Region { Left, Inactive, Right };

inline void add_contribution(const KinkCoord& c, Region r, double weight, double& slope, double& intercept) {
  if (r == Region::Inactive) return;
  const double sigma = (r == Region::Left) == (c.a > 0.0) ? 1.0 : -1.0;
  slope += weight * c.a * c.a;
  intercept -= weight * c.a * (c.xs - sigma * c.lambda);
}

inline Region region_after(const KinkCoord& c, double t) {
  if (t < c.lo) return Region::Left;
  if (t < c.hi) return Region::Inactive;
  return Region::Right;
}

inline void affine_piece(const std::vector<KinkCoord>& coords, double beta, double t, double& slope, double& intercept) {
  slope = 0.0;
  intercept = beta;
  for (const auto& c : coords) add_contribution(c, region_after(c, t), 1.0, slope, intercept);
}

// Minimizer of g over [0, inf) by walking the kinks of the piecewise linear g'.
inline double walk_kinks_right(const std::vector<KinkCoord>& coords, double beta) {
  struct Event {
    double t;
    std::size_t coord;
    bool to_right;  // false: Left -> Inactive, true: Inactive -> Right
  };
  std::vector<Event> events;
  events.reserve(2 * coords.size());
  for (std::size_t j = 0; j < coords.size(); ++j) {
    if (coords[j].lo > 0.0) events.push_back({coords[j].lo, j, false});
    if (coords[j].hi > 0.0) events.push_back({coords[j].hi, j, true});
  }
  std::sort(events.begin(), events.end(), [](const Event& l, const Event& r) {
    return l.t < r.t || (l.t == r.t && !l.to_right && r.to_right);
  });

  double slope = 0.0, intercept = 0.0;
  affine_piece(coords, beta, 0.0, slope, intercept);

  double current = 0.0;
  std::size_t next_event = 0;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  for (;;) {
    const double next = next_event < events.size() ? events[next_event].t : kInf;
    if (slope * current + intercept >= 0.0) return current;
    if (slope > 0.0) {
      const double root = -intercept / slope;
      if (root <= next) {
        // Re-evaluate the active piece from scratch to shed accumulated rounding.
        const double probe = std::isfinite(next) ? 0.5 * (current + next) : current + 1.0;
        double s = 0.0, b = 0.0;
        affine_piece(coords, beta, probe, s, b);
        const double refined = s > 0.0 ? -b / s : root;
        return std::clamp(refined, current, std::isfinite(next) ? next : std::max(refined, current));
      }
    }
    if (!std::isfinite(next)) {
      throw Error(ErrorKind::NoConvergence, "exact line search: derivative stays negative");
    }
    // Ties closer than 1e-14 (relative) are merged into one kink.
    const double merge = next + 1e-14 * std::max(1.0, std::abs(next));
    while (next_event < events.size() && events[next_event].t <= merge) {
      const auto& e = events[next_event];
      const auto& c = coords[e.coord];
      if (e.to_right) {
        add_contribution(c, Region::Right, 1.0, slope, intercept);
      } else {
        add_contribution(c, Region::Left, -1.0, slope, intercept);
      }
      ++next_event;
    }
    current = next;
  }
}

inline std::vector<KinkCoord> kink_coords(ConstRef x_star, ConstRef a, ConstRef lambdas, double direction) {
  std::vector<KinkCoord> coords;
  for (Index j = 0; j < a.size(); ++j) {
    const double aj = direction * a[j];
    if (aj == 0.0) continue;
    const double k1 = (x_star[j] - lambdas[j]) / aj;
    const double k2 = (x_star[j] + lambdas[j]) / aj;
    coords.push_back({x_star[j], aj, lambdas[j], std::min(k1, k2), std::max(k1, k2)});
  }
  return coords;
}

}  // namespace detail

/// Exact minimizer of g(t) = 0.5*sum_j S_{lambda_j}(x*_j - t a_j)^2 + t beta.
///
/// g is piecewise quadratic; the kinks (x*_j +- lambda_j)/a_j are visited in
/// order until the affine piece of g' has its root inside the current
/// interval. A flat zero piece returns its left endpoint.
inline double exact_linesearch_weighted(ConstRef x_star, ConstRef a, double beta, ConstRef lambdas,
                                        LineDomain domain) {
  require_same_size(x_star.size(), a.size(), "exact_linesearch");
  require_same_size(lambdas.size(), a.size(), "exact_linesearch");
  double a_sq = 0.0, a_dot = 0.0;
  bool weighted = false;
  for (Index j = 0; j < a.size(); ++j) {
    a_sq += a[j] * a[j];
    a_dot += a[j] * x_star[j];
    weighted |= a[j] != 0.0 && lambdas[j] != 0.0;
  }
  if (a_sq == 0.0) {
    if (a.lpNorm<Eigen::Infinity>() == 0.0) throw Error(ErrorKind::ZeroDirection, "exact_linesearch: a = 0");
    weighted = true;  // a^2 underflowed; the kink walk does not divide by it
  }

  // No active l1 weight: g is quadratic.
  if (!weighted) {
    const double t = (a_dot - beta) / a_sq;
    return domain == LineDomain::NonNegative ? std::max(t, 0.0) : t;
  }

  if (domain == LineDomain::Real) {
    double s = 0.0, b = 0.0;
    detail::affine_piece(detail::kink_coords(x_star, a, lambdas, 1.0), beta, 0.0, s, b);
    // b is g'(0+); g'(0-) can differ only if 0 is a kink, which the walk handles.
    if (b < 0.0) return detail::walk_kinks_right(detail::kink_coords(x_star, a, lambdas, 1.0), beta);
    const double left = detail::walk_kinks_right(detail::kink_coords(x_star, a, lambdas, -1.0), -beta);
    return -left;
  }
  return detail::walk_kinks_right(detail::kink_coords(x_star, a, lambdas, 1.0), beta);
}

/// Exact line search for f = lambda*||x||_1 + 0.5*||x||^2.
inline double exact_linesearch_elasticnet(const Vector& x_star, const Vector& a, double beta, double lambda,
                                          LineDomain domain) {
  if (lambda < 0.0) throw Error(ErrorKind::InvalidArgument, "exact_linesearch: negative lambda");
  return exact_linesearch_weighted(x_star, a, beta, Vector::Constant(a.size(), lambda), domain);
}

namespace detail {

// Root of the nondecreasing g' on [0, inf) by bracketing and regula falsi.
inline double monotone_root_right(const Objective& f, const Vector& x_star, const Vector& a, double beta) {
  auto slope = [&](double t) { return line_slope(f, x_star, a, beta, t); };
  const double g0 = slope(0.0);
  if (g0 >= 0.0) return 0.0;
  const double lipschitz = a.squaredNorm() / f.alpha();

  // g'(t) <= g'(0) + t*L, so t = -g'(0)/L still has g' <= 0.
  double lo = -g0 / lipschitz;
  double g_lo = slope(lo);
  if (g_lo >= 0.0) return lo;
  double hi = 2.0 * lo;
  double g_hi = slope(hi);
  for (int k = 0; g_hi < 0.0; ++k) {
    if (k > 200) throw Error(ErrorKind::NoConvergence, "line search: failed to bracket the minimizer");
    lo = hi;
    g_lo = g_hi;
    hi *= 2.0;
    g_hi = slope(hi);
  }

  const double scale = std::abs(beta) + a.norm() * x_star.norm() + 1.0;
  int side = 0;
  for (int it = 0; it < 300; ++it) {
    if (hi - lo <= 1e-15 * std::max(1.0, hi)) break;
    double t = (lo * g_hi - hi * g_lo) / (g_hi - g_lo);
    if (!(t > lo && t < hi)) t = 0.5 * (lo + hi);
    const double gt = slope(t);
    if (std::abs(gt) <= 1e-15 * scale) return t;
    if (gt < 0.0) {
      lo = t;
      g_lo = gt;
      if (side == -1) g_hi *= 0.5;  // Illinois modification
      side = -1;
    } else {
      hi = t;
      g_hi = gt;
      if (side == 1) g_lo *= 0.5;
      side = 1;
    }
  }
  return lo;
}

}  // namespace detail

namespace detail {

/// Smallest index range holding every nonzero entry of a.
struct Span {
  Index first = 0;
  Index count = 0;
};

inline std::optional<Span> nonzero_span(const Vector& a) {
  constexpr Index kChunk = 64;
  const Index n = a.size();
  Index first = 0;
  while (first + kChunk <= n && a.segment(first, kChunk).cwiseAbs().maxCoeff() == 0.0) first += kChunk;
  while (first < n && a[first] == 0.0) ++first;
  if (first == n) return std::nullopt;
  Index end = n;
  while (end - kChunk > first && a.segment(end - kChunk, kChunk).cwiseAbs().maxCoeff() == 0.0) end -= kChunk;
  while (a[end - 1] == 0.0) --end;
  return Span{first, end - first};
}

/// l1 weights of f on the span, if every coordinate there is separable.
inline std::optional<Vector> span_weights(const Objective& f, const Span& span) {
  Vector w(span.count);
  if (!f.l1_weights(span.first, span.count, w.data())) return std::nullopt;
  return w;
}

}  // namespace detail

/// Minimizer of g(t) = f*(x* - t a) + t beta over the domain.
///
/// Uses the exact kink walk whenever every coordinate touched by a is a
/// separable elastic-net coordinate, otherwise a bracketing root search on g'.
inline double exact_linesearch(const Objective& f, const Vector& x_star, const Vector& a, double beta,
                               LineDomain domain) {
  require_same_size(x_star.size(), f.dimension(), "exact_linesearch");
  require_same_size(a.size(), f.dimension(), "exact_linesearch");
  const auto span = detail::nonzero_span(a);
  if (!span) throw Error(ErrorKind::ZeroDirection, "exact_linesearch: a = 0");
  if (const auto w = detail::span_weights(f, *span)) {
    return exact_linesearch_weighted(x_star.segment(span->first, span->count), a.segment(span->first, span->count),
                                     beta, *w, domain);
  }

  if (domain == LineDomain::NonNegative || line_slope(f, x_star, a, beta, 0.0) < 0.0) {
    return detail::monotone_root_right(f, x_star, a, beta);
  }
  const Vector neg = -a;
  return -detail::monotone_root_right(f, x_star, neg, -beta);
}

/// Geometric step increase: returns c^p * t_tilde for the largest
/// p in {0, ..., p_cap} with g'(c^p * t_tilde) <= 0. Since g' is monotone the
/// scan stops at the first failure.
inline double inexact_linesearch(const Objective& f, const Vector& x_star, const Vector& direction, double beta,
                                 double t_tilde, double c, int p_cap) {
  if (!(c > 1.0)) throw Error(ErrorKind::InvalidArgument, "inexact_linesearch: c must exceed 1");
  if (!(t_tilde > 0.0)) throw Error(ErrorKind::InvalidArgument, "inexact_linesearch: t_tilde must be positive");
  if (direction.lpNorm<Eigen::Infinity>() == 0.0) throw Error(ErrorKind::ZeroDirection, "inexact_linesearch: zero direction");
  double t = t_tilde;
  double candidate = t_tilde;
  for (int p = 1; p <= p_cap; ++p) {
    candidate *= c;
    if (line_slope(f, x_star, direction, beta, candidate) > 0.0) break;
    t = candidate;
  }
  return t;
}

}  // namespace bpsfp
