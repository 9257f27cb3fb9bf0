#pragma once

#include "bpsfp/comparator.hpp"
#include "bpsfp/core.hpp"
#include "bpsfp/linops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <variant>
#include <vector>

namespace bpsfp {

enum class MatrixKind { Gaussian, Bernoulli, PartialDCT };
enum class AmplitudeModel { Gaussian, Bernoulli, LargeDynamicRange };

inline MatrixKind parse_matrix_kind(const std::string& s) {
  if (s == "gaussian") return MatrixKind::Gaussian;
  if (s == "bernoulli") return MatrixKind::Bernoulli;
  if (s == "partial_dct") return MatrixKind::PartialDCT;
  throw Error(ErrorKind::InvalidArgument, "unknown matrix kind '" + s + "'");
}

inline AmplitudeModel parse_amplitude_model(const std::string& s) {
  if (s == "gaussian") return AmplitudeModel::Gaussian;
  if (s == "bernoulli") return AmplitudeModel::Bernoulli;
  if (s == "large_dynamic_range") return AmplitudeModel::LargeDynamicRange;
  throw Error(ErrorKind::InvalidArgument, "unknown amplitude model '" + s + "'");
}

struct InstanceSpec {
  Index m = 100;
  Index n = 200;
  MatrixKind kind = MatrixKind::Gaussian;
  Index sparsity = 10;
  AmplitudeModel amplitudes = AmplitudeModel::Gaussian;
  std::uint64_t seed = 0;
};

struct Instance {
  LinearOperatorPtr A;
  Vector x_dagger;
  Vector b;
};

/// Random matrix, s-sparse x with uniformly random support, b = A x.
inline Instance generate_instance(const InstanceSpec& spec) {
  if (spec.m < 1 || spec.n < 1) throw Error(ErrorKind::InvalidArgument, "generate_instance: empty dimensions");
  if (spec.sparsity < 0 || spec.sparsity > spec.n) {
    throw Error(ErrorKind::InvalidArgument, "generate_instance: sparsity out of range");
  }
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);

  Instance inst;
  switch (spec.kind) {
    case MatrixKind::Gaussian: {
      DenseMatrix::Storage a(spec.m, spec.n);
      for (Index i = 0; i < spec.m; ++i)
        for (Index j = 0; j < spec.n; ++j) a(i, j) = normal(rng);
      inst.A = std::make_shared<DenseMatrix>(std::move(a));
      break;
    }
    case MatrixKind::Bernoulli: {
      DenseMatrix::Storage a(spec.m, spec.n);
      for (Index i = 0; i < spec.m; ++i)
        for (Index j = 0; j < spec.n; ++j) a(i, j) = coin(rng) ? 1.0 : -1.0;
      inst.A = std::make_shared<DenseMatrix>(std::move(a));
      break;
    }
    case MatrixKind::PartialDCT: {
      if (spec.m > spec.n) throw Error(ErrorKind::InvalidArgument, "partial_dct needs m <= n");
      std::vector<Index> rows(spec.n);
      std::iota(rows.begin(), rows.end(), Index{0});
      std::shuffle(rows.begin(), rows.end(), rng);
      rows.resize(spec.m);
      std::sort(rows.begin(), rows.end());
      inst.A = std::make_shared<PartialDCT>(spec.n, std::move(rows));
      break;
    }
  }

  std::vector<Index> support(spec.n);
  std::iota(support.begin(), support.end(), Index{0});
  std::shuffle(support.begin(), support.end(), rng);
  support.resize(spec.sparsity);

  std::uniform_real_distribution<double> exponent(0.0, 5.0);
  inst.x_dagger = Vector::Zero(spec.n);
  for (Index j : support) {
    double v = 0.0;
    switch (spec.amplitudes) {
      case AmplitudeModel::Gaussian:
        v = normal(rng);
        break;
      case AmplitudeModel::Bernoulli:
        v = coin(rng) ? 1.0 : -1.0;
        break;
      case AmplitudeModel::LargeDynamicRange: {
        const double magnitude = std::pow(10.0, exponent(rng));
        v = coin(rng) ? magnitude : -magnitude;
        break;
      }
    }
    inst.x_dagger[j] = v;
  }
  inst.b = inst.A->apply(inst.x_dagger);
  return inst;
}

// ---------------------------------------------------------------------------
// Noise

/// `count` entries replaced by max(b) or min(b); delta in the 1-norm.
struct ImpulsiveNoise {
  Index count = 0;
};
/// Additive i.i.d. uniform[-range, range]; delta in the sup-norm.
struct UniformNoise {
  double range = 0.0;
};
/// Additive Gaussian scaled to ||noise||_2 = level*||b||_2; delta in the 2-norm.
struct GaussianNoise {
  double level = 0.0;
};

using NoiseModel = std::variant<ImpulsiveNoise, UniformNoise, GaussianNoise>;

inline NormType noise_norm(const NoiseModel& model) {
  if (std::holds_alternative<ImpulsiveNoise>(model)) return NormType::L1;
  if (std::holds_alternative<UniformNoise>(model)) return NormType::Inf;
  return NormType::L2;
}

struct NoisyData {
  Vector b_delta;
  double delta = 0.0;
  NormType norm = NormType::L2;
};

inline NoisyData inject_noise(const Vector& b, const NoiseModel& model, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  NoisyData out;
  out.b_delta = b;
  out.norm = noise_norm(model);
  if (const auto* imp = std::get_if<ImpulsiveNoise>(&model)) {
    if (imp->count < 0 || imp->count > b.size()) throw Error(ErrorKind::InvalidArgument, "impulsive noise: bad count");
    if (imp->count > 0) {
      const double hi = b.maxCoeff(), lo = b.minCoeff();
      std::vector<Index> idx(b.size());
      std::iota(idx.begin(), idx.end(), Index{0});
      std::shuffle(idx.begin(), idx.end(), rng);
      std::bernoulli_distribution coin(0.5);
      for (Index i = 0; i < imp->count; ++i) out.b_delta[idx[i]] = coin(rng) ? hi : lo;
    }
  } else if (const auto* uni = std::get_if<UniformNoise>(&model)) {
    if (uni->range < 0.0) throw Error(ErrorKind::InvalidArgument, "uniform noise: negative range");
    if (uni->range > 0.0) {
      std::uniform_real_distribution<double> u(-uni->range, uni->range);
      for (Index i = 0; i < b.size(); ++i) out.b_delta[i] += u(rng);
    }
  } else {
    const double level = std::get<GaussianNoise>(model).level;
    if (level < 0.0) throw Error(ErrorKind::InvalidArgument, "gaussian noise: negative level");
    if (level > 0.0) {
      std::normal_distribution<double> normal(0.0, 1.0);
      Vector e(b.size());
      for (Index i = 0; i < b.size(); ++i) e[i] = normal(rng);
      const double en = e.norm();
      if (en > 0.0) out.b_delta += (level * b.norm() / en) * e;
    }
  }
  out.delta = norm_of(b - out.b_delta, out.norm);
  return out;
}

// ---------------------------------------------------------------------------
// Regularization parameter certification

struct CertificationOptions {
  std::size_t iterations = 50000;
  double relative_tolerance = 1e-5;
};

struct Certificate {
  double lambda = 0.0;
  double sup_error = 0.0;  // ||x_pd - x_dagger||_inf
  Vector x_pd;
};

/// Smallest candidate lambda for which the noise-free comparator solution
/// returns x_dagger to within tol*(1 + ||x_dagger||_inf) in the sup-norm.
inline Certificate certify_lambda(const LinearOperatorPtr& A, const Vector& x_dagger, const Vector& b,
                                  std::vector<double> candidates, const CertificationOptions& opts = {}) {
  if (candidates.empty()) throw Error(ErrorKind::InvalidArgument, "certify_lambda: no candidates");
  std::sort(candidates.begin(), candidates.end());
  const double tol = opts.relative_tolerance * (1.0 + x_dagger.lpNorm<Eigen::Infinity>());
  for (double lambda : candidates) {
    PDConfig pd;
    pd.lambda = lambda;
    pd.A = A;
    pd.b_delta = b;
    pd.delta = 0.0;
    pd.noise_norm = NormType::L2;
    pd.max_iterations = opts.iterations;
    pd.record_history = false;
    auto res = run_pd(pd);
    const double err = (res.x - x_dagger).lpNorm<Eigen::Infinity>();
    if (err <= tol) return {lambda, err, std::move(res.x)};
  }
  throw Error(ErrorKind::CertificationFailed, "certify_lambda: no candidate recovers x_dagger");
}

/// {1, 10, 100} * max|x_dagger| (or {1, 10, 100} when x_dagger = 0).
inline std::vector<double> default_lambda_candidates(const Vector& x_dagger) {
  const double scale = x_dagger.size() ? x_dagger.lpNorm<Eigen::Infinity>() : 0.0;
  const double s = scale > 0.0 ? scale : 1.0;
  return {s, 10.0 * s, 100.0 * s};
}

inline double relative_error(const Vector& x, const Vector& reference) {
  const double r = reference.norm();
  return r > 0.0 ? (x - reference).norm() / r : (x - reference).norm();
}

}  // namespace bpsfp
