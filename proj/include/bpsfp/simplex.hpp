#pragma once

#include "bpsfp/core.hpp"

#include <algorithm>
#include <functional>
#include <vector>

namespace bpsfp {

/// Euclidean projection onto the scaled simplex {z >= 0, sum(z) = s}.
///
/// Sort-and-threshold: with u the entries of y in descending order, the
/// threshold is theta = (sum_{j<=rho} u_j - s) / rho for the largest rho with
/// u_rho > theta_rho. Runs in O(n log n).
inline Vector project_simplex(const Vector& y, double s) {
  if (!(s > 0.0)) throw Error(ErrorKind::InvalidArgument, "project_simplex: s must be positive");
  const Index n = y.size();
  if (n == 0) throw Error(ErrorKind::InvalidArgument, "project_simplex: empty input");

  std::vector<double> u(y.data(), y.data() + n);
  std::sort(u.begin(), u.end(), std::greater<>());

  double cumulative = 0.0;
  double theta = 0.0;
  for (Index j = 0; j < n; ++j) {
    cumulative += u[static_cast<std::size_t>(j)];
    const double candidate = (cumulative - s) / static_cast<double>(j + 1);
    if (u[static_cast<std::size_t>(j)] > candidate) theta = candidate;
  }
  return (y.array() - theta).cwiseMax(0.0).matrix();
}

/// Euclidean projection onto {z : ||z||_1 <= radius}; radius 0 gives the origin.
inline Vector project_l1_ball(const Vector& y, double radius) {
  if (radius < 0.0) throw Error(ErrorKind::InvalidArgument, "project_l1_ball: negative radius");
  if (y.lpNorm<1>() <= radius) return y;
  if (radius == 0.0) return Vector::Zero(y.size());
  const Vector magnitude = project_simplex(y.cwiseAbs(), radius);
  Vector z(y.size());
  for (Index j = 0; j < y.size(); ++j) z[j] = y[j] < 0.0 ? -magnitude[j] : magnitude[j];
  return z;
}

}  // namespace bpsfp
