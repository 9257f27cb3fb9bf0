#pragma once

#include "bpsfp/core.hpp"
#include "bpsfp/linops.hpp"
#include "bpsfp/objectives.hpp"
#include "bpsfp/projections.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <optional>
#include <ostream>
#include <vector>

namespace bpsfp {

/// prox of tau*(lambda*||.||_1 + 0.5*||.||^2).
inline Vector prox_F(const Vector& z, double tau, double lambda) {
  if (!(tau > 0.0)) throw Error(ErrorKind::InvalidArgument, "prox_F: tau must be positive");
  return soft_shrink(z, tau * lambda) / (1.0 + tau);
}

/// Dual prox for the constraint ||A x - b||_p <= delta, via Moreau:
/// y - sigma * P_ball(y / sigma).
inline Vector prox_G(const Vector& y, double sigma, const Vector& b_delta, double delta, NormType p) {
  if (!(sigma > 0.0)) throw Error(ErrorKind::InvalidArgument, "prox_G: sigma must be positive");
  require_same_size(y.size(), b_delta.size(), "prox_G");
  const Vector scaled = y / sigma;
  return y - sigma * project_orthogonal(NormBall{p, b_delta, delta}, scaled);
}

struct PDConfig {
  double lambda = 0.0;
  LinearOperatorPtr A;
  Vector b_delta;
  double delta = 0.0;
  NormType noise_norm = NormType::L2;
  std::optional<double> tau;    // default 0.99/||A||
  std::optional<double> sigma;  // default 0.99/||A||
  std::size_t max_iterations = 1000;
  bool record_history = true;
  std::optional<Vector> x0;
};

struct PDRecord {
  std::size_t k = 0;
  double objective_value = 0.0;  // F(x_k)
  double feasibility = 0.0;      // ||A x_k - b||_p - delta
  double elapsed_ms = 0.0;
};

struct PDResult {
  Vector x;
  Vector y;
  std::vector<PDRecord> history;
  double tau = 0.0;
  double sigma = 0.0;
};

inline double elasticnet_value(const Vector& x, double lambda) { return lambda * x.lpNorm<1>() + 0.5 * x.squaredNorm(); }

/// Chambolle-Pock iteration for min lambda||x||_1 + 0.5||x||^2 s.t. ||Ax - b||_p <= delta.
inline PDResult run_pd(const PDConfig& config) {
  if (!config.A) throw Error(ErrorKind::InvalidArgument, "run_pd: null operator");
  if (config.lambda < 0.0) throw Error(ErrorKind::InvalidArgument, "run_pd: negative lambda");
  if (config.delta < 0.0) throw Error(ErrorKind::InvalidArgument, "run_pd: negative delta");
  const LinearOperator& A = *config.A;
  require_same_size(A.rows(), config.b_delta.size(), "run_pd: b_delta");

  const double nrm = A.norm_estimate();
  const double default_step = nrm > 0.0 ? 0.99 / nrm : 1.0;
  PDResult result;
  result.tau = config.tau.value_or(default_step);
  result.sigma = config.sigma.value_or(default_step);
  if (!(result.tau > 0.0) || !(result.sigma > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "run_pd: step sizes must be positive");
  }
  if (result.tau * result.sigma * nrm * nrm >= 1.0) {
    throw Error(ErrorKind::StepSizeViolation, "run_pd: tau*sigma >= 1/||A||^2");
  }

  const auto start = std::chrono::steady_clock::now();
  Vector x = config.x0.value_or(Vector::Zero(A.cols()));
  require_same_size(x.size(), A.cols(), "run_pd: x0");
  Vector y = Vector::Zero(A.rows());
  Vector Ax = A.apply(x);

  for (std::size_t k = 1; k <= config.max_iterations; ++k) {
    Vector x_next = prox_F(x - result.tau * A.apply_adjoint(y), result.tau, config.lambda);
    Vector Ax_next = A.apply(x_next);
    y = prox_G(y + result.sigma * (2.0 * Ax_next - Ax), result.sigma, config.b_delta, config.delta, config.noise_norm);
    x = std::move(x_next);
    Ax = std::move(Ax_next);
    if (config.record_history) {
      PDRecord rec;
      rec.k = k;
      rec.objective_value = elasticnet_value(x, config.lambda);
      rec.feasibility = norm_of(Ax - config.b_delta, config.noise_norm) - config.delta;
      rec.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      result.history.push_back(rec);
    }
  }
  result.x = std::move(x);
  result.y = std::move(y);
  return result;
}

/// Solver history schema; the constraint index is always 0, step_size is
/// tau, and w_norm / max_violation hold the positive part of the signed
/// feasibility gap, which is appended as an extra column.
inline void write_pd_history_csv(std::ostream& os, const std::vector<PDRecord>& history, double tau,
                                 bool include_elapsed = true) {
  os << "k,constraint_index,step_size,w_norm,max_violation,objective_value";
  if (include_elapsed) os << ",elapsed_ms";
  os << ",feasibility\n" << std::setprecision(17);
  for (const auto& r : history) {
    const double v = std::max(r.feasibility, 0.0);
    os << r.k << ",0," << tau << ',' << v << ',' << v << ',' << r.objective_value;
    if (include_elapsed) os << ',' << r.elapsed_ms;
    os << ',' << r.feasibility << '\n';
  }
}

}  // namespace bpsfp
