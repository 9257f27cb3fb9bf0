#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace bpsfp {

using Vector = Eigen::VectorXd;
/// Read-only view of a vector or a contiguous segment of one.
using ConstRef = Eigen::Ref<const Vector>;
using Index = Eigen::Index;

enum class ErrorKind {
  DimensionMismatch,
  InvalidArgument,
  InvalidSubgradient,
  FeasiblePoint,
  ZeroNormal,
  ZeroDirection,
  BoxWithoutZero,
  NoConvergence,
  StepSizeViolation,
  MissingLambda,
  CertificationFailed,
  UnsupportedNorm,
  UnsupportedProjection,
  IndexOutOfRange,
  Io,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::InvalidSubgradient: return "InvalidSubgradient";
    case ErrorKind::FeasiblePoint: return "FeasiblePoint";
    case ErrorKind::ZeroNormal: return "ZeroNormal";
    case ErrorKind::ZeroDirection: return "ZeroDirection";
    case ErrorKind::BoxWithoutZero: return "BoxWithoutZero";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::StepSizeViolation: return "StepSizeViolation";
    case ErrorKind::MissingLambda: return "MissingLambda";
    case ErrorKind::CertificationFailed: return "CertificationFailed";
    case ErrorKind::UnsupportedNorm: return "UnsupportedNorm";
    case ErrorKind::UnsupportedProjection: return "UnsupportedProjection";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

/// Exception carrying a machine-checkable error category.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline void require_same_size(Index a, Index b, const char* where) {
  if (a != b) {
    throw Error(ErrorKind::DimensionMismatch,
                std::string(where) + ": " + std::to_string(a) + " vs " + std::to_string(b));
  }
}

/// Norm exponent for balls and feasibility measures. `Inf` is the max-norm.
enum class NormType { L1, L2, Inf };

inline double norm_of(const Vector& v, NormType p) {
  switch (p) {
    case NormType::L1: return v.lpNorm<1>();
    case NormType::L2: return v.norm();
    case NormType::Inf: return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>();
  }
  return 0.0;
}

inline NormType dual_norm(NormType p) {
  switch (p) {
    case NormType::L1: return NormType::Inf;
    case NormType::L2: return NormType::L2;
    case NormType::Inf: return NormType::L1;
  }
  return NormType::L2;
}

inline const char* to_string(NormType p) {
  switch (p) {
    case NormType::L1: return "1";
    case NormType::L2: return "2";
    case NormType::Inf: return "inf";
  }
  return "?";
}

inline NormType parse_norm(const std::string& s) {
  if (s == "1" || s == "l1") return NormType::L1;
  if (s == "2" || s == "l2") return NormType::L2;
  if (s == "inf" || s == "linf" || s == "infinity") return NormType::Inf;
  throw Error(ErrorKind::UnsupportedNorm, "unknown norm '" + s + "'");
}

}  // namespace bpsfp
