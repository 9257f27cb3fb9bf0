#pragma once

#include "bpsfp/core.hpp"
#include "bpsfp/linesearch.hpp"
#include "bpsfp/linops.hpp"
#include "bpsfp/objectives.hpp"
#include "bpsfp/projections.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace bpsfp {

// ---------------------------------------------------------------------------
// Constraints, control sequences and step rules

/// x in C, with C Bregman-projectable for the chosen objective.
struct SimpleConstraint {
  RangeSet set;
};

/// A x in Q, handled through separating halfspaces.
struct DifficultConstraint {
  LinearOperatorPtr op;
  RangeSet q;
};

using Constraint = std::variant<SimpleConstraint, DifficultConstraint>;

struct Cyclic {};
/// r(k) = hash(seed, k) mod N: stateless, so a step can be replayed from k alone.
struct RandomUniform {
  std::uint64_t seed = 0;
};
/// Repeats the given order.
struct CustomOrder {
  std::vector<std::size_t> order;
};

using ControlSequence = std::variant<Cyclic, RandomUniform, CustomOrder>;

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Constraint index treated at (0-based) step k.
inline std::size_t control_index(const ControlSequence& control, std::size_t k, std::size_t count) {
  if (count == 0) throw Error(ErrorKind::InvalidArgument, "control sequence over zero constraints");
  return std::visit(
      detail::overloaded{
          [&](const Cyclic&) { return k % count; },
          [&](const RandomUniform& r) {
            return static_cast<std::size_t>(detail::splitmix64(r.seed ^ detail::splitmix64(k)) % count);
          },
          [&](const CustomOrder& c) {
            if (c.order.empty()) throw Error(ErrorKind::InvalidArgument, "empty custom control order");
            const std::size_t idx = c.order[k % c.order.size()];
            if (idx >= count) throw Error(ErrorKind::IndexOutOfRange, "custom control index out of range");
            return idx;
          },
      },
      control);
}

/// t = alpha / ||A||^2.
struct ConstantStep {};
/// t = alpha * ||w||^2 / ||A^T w||^2.
struct DynamicStep {};
/// Exact Bregman projection onto the separating halfspace.
struct ExactStep {};
/// Dynamic step enlarged by c^p while g'(t) <= 0.
struct InexactStep {
  double c = 2.0;
  int p_cap = 60;
};

using StepRule = std::variant<ConstantStep, DynamicStep, ExactStep, InexactStep>;

inline std::string to_string(const StepRule& rule) {
  return std::visit(detail::overloaded{
                        [](const ConstantStep&) { return std::string("constant"); },
                        [](const DynamicStep&) { return std::string("dynamic"); },
                        [](const ExactStep&) { return std::string("exact"); },
                        [](const InexactStep&) { return std::string("inexact"); },
                    },
                    rule);
}

inline StepRule parse_step_rule(const std::string& name) {
  if (name == "constant") return ConstantStep{};
  if (name == "dynamic") return DynamicStep{};
  if (name == "exact") return ExactStep{};
  if (name == "inexact") return InexactStep{};
  throw Error(ErrorKind::InvalidArgument, "unknown step rule '" + name + "'");
}

// ---------------------------------------------------------------------------
// Configuration and results

struct SolverConfig {
  ObjectivePtr objective;
  std::vector<Constraint> constraints;
  ControlSequence control = Cyclic{};
  StepRule step = DynamicStep{};
  std::size_t max_iterations = 1000;
  double residual_tolerance = 1e-6;
  std::optional<Vector> x0_star;  // defaults to 0
  bool record_history = true;
};

struct IterationRecord {
  std::size_t k = 0;
  std::size_t constraint_index = 0;
  double step_size = 0.0;
  double w_norm = 0.0;           // ||w_k|| for difficult, distance to the set for simple constraints
  double direction_norm = 0.0;   // ||A^T w_k||, 0 for simple constraints
  std::vector<double> violations;  // as of the last completed pass
  double max_violation = 0.0;
  double objective_value = 0.0;
  double elapsed_ms = 0.0;
};

enum class Termination { Tolerance, MaxIter };

inline const char* to_string(Termination t) { return t == Termination::Tolerance ? "tolerance" : "max_iter"; }

struct SolverResult {
  PrimalDualPair final;
  std::vector<IterationRecord> history;
  Termination reason = Termination::MaxIter;
  std::size_t iterations = 0;
  std::vector<double> final_violations;
  double elapsed_ms = 0.0;
};

/// Called after every step with the record and the pair before/after.
using StepObserver = std::function<void(const IterationRecord&, const PrimalDualPair&, const PrimalDualPair&)>;

inline void validate(const SolverConfig& config) {
  if (!config.objective) throw Error(ErrorKind::InvalidArgument, "solver: no objective");
  if (config.constraints.empty()) throw Error(ErrorKind::InvalidArgument, "solver: no constraints");
  if (!(config.residual_tolerance > 0.0)) throw Error(ErrorKind::InvalidArgument, "solver: residual_tolerance must be positive");
  const Index n = config.objective->dimension();
  if (config.x0_star) require_same_size(config.x0_star->size(), n, "solver: x0_star");
  for (const auto& c : config.constraints) {
    if (const auto* d = std::get_if<DifficultConstraint>(&c)) {
      if (!d->op) throw Error(ErrorKind::InvalidArgument, "solver: difficult constraint without operator");
      require_same_size(d->op->cols(), n, "solver: constraint operator columns");
    }
  }
  if (const auto* inexact = std::get_if<InexactStep>(&config.step)) {
    if (!(inexact->c > 1.0)) throw Error(ErrorKind::InvalidArgument, "solver: inexact step needs c > 1");
    if (inexact->p_cap < 0) throw Error(ErrorKind::InvalidArgument, "solver: negative p_cap");
  }
}

/// Scalars produced by one BPSFP step.
struct StepInfo {
  double step_size = 0.0;
  double w_norm = 0.0;
  double direction_norm = 0.0;
  bool moved = false;  // the pair may have changed
};

/// Outcome of one BPSFP step.
struct StepOutcome {
  PrimalDualPair pair;
  double step_size = 0.0;
  double w_norm = 0.0;
  double direction_norm = 0.0;
  bool moved = false;
};

/// One step of the method on constraint `index`, updating `state` in place.
///
/// Simple constraints are replaced by their Bregman projection. For a
/// difficult constraint, w = A x - P_Q(A x) defines the separating halfspace
/// {<A^T w, .> <= <A^T w, x> - ||w||^2}; the dual iterate moves along -A^T w by
/// the rule's step and x = grad f*(x*). `image`, if given, must equal A x.
inline StepInfo constraint_step_inplace(const SolverConfig& config, PrimalDualPair& state, std::size_t index,
                                        const Vector* image = nullptr) {
  const Objective& f = *config.objective;
  const Constraint& constraint = config.constraints.at(index);
  StepInfo out;

  if (const auto* simple = std::get_if<SimpleConstraint>(&constraint)) {
    const bool need_distance = !std::holds_alternative<Hyperplane>(simple->set) &&
                               !std::holds_alternative<Halfspace>(simple->set) &&
                               !std::holds_alternative<Box>(simple->set) &&
                               !std::holds_alternative<NonnegCone>(simple->set);
    const double before = need_distance ? distance_to(simple->set, state.x) : 0.0;
    const auto info = bregman_project_inplace(f, simple->set, state);
    out.w_norm = std::isnan(info.distance) ? before : info.distance;
    out.step_size = info.step;
    out.moved = true;
    return out;
  }

  const auto& difficult = std::get<DifficultConstraint>(constraint);
  const LinearOperator& A = *difficult.op;
  const Vector computed = image ? Vector() : A.apply(state.x);
  const Vector& img = image ? *image : computed;

  const Vector w = img - project_orthogonal(difficult.q, img);
  out.w_norm = w.norm();
  if (out.w_norm <= feasibility_threshold(img)) return out;

  const Vector direction = A.apply_adjoint(w);
  const double dir_sq = direction.squaredNorm();
  out.direction_norm = std::sqrt(dir_sq);
  if (dir_sq == 0.0) return out;
  const double w_sq = out.w_norm * out.w_norm;
  const double beta = direction.dot(state.x) - w_sq;
  const double dynamic = f.alpha() * w_sq / dir_sq;

  const double t = std::visit(
      detail::overloaded{
          [&](const ConstantStep&) {
            const double nrm = A.norm_estimate();
            return f.alpha() / (nrm * nrm);
          },
          [&](const DynamicStep&) { return dynamic; },
          [&](const ExactStep&) { return exact_linesearch(f, state.x_star, direction, beta, LineDomain::NonNegative); },
          [&](const InexactStep& r) {
            return inexact_linesearch(f, state.x_star, direction, beta, dynamic, r.c, r.p_cap);
          },
      },
      config.step);

  out.step_size = t;
  if (t != 0.0) {
    state.x_star -= t * direction;
    state.x = f.grad_conjugate(state.x_star);
    out.moved = true;
  }
  return out;
}

/// Value form of constraint_step_inplace.
inline StepOutcome constraint_step(const SolverConfig& config, const PrimalDualPair& state, std::size_t index,
                                   const Vector* image = nullptr) {
  StepOutcome out;
  out.pair = state;
  const auto info = constraint_step_inplace(config, out.pair, index, image);
  out.step_size = info.step_size;
  out.w_norm = info.w_norm;
  out.direction_norm = info.direction_norm;
  out.moved = info.moved;
  return out;
}

/// Violation of every constraint at x: ||A x - P_Q(A x)|| for difficult and
/// the Euclidean distance to the set for simple constraints. Images A x of
/// difficult constraints are stored in `images` (empty for simple ones).
inline std::vector<double> constraint_violations(const SolverConfig& config, const Vector& x,
                                                 std::vector<Vector>* images = nullptr) {
  std::vector<double> v(config.constraints.size());
  if (images) images->assign(config.constraints.size(), Vector());
  for (std::size_t i = 0; i < config.constraints.size(); ++i) {
    const auto& c = config.constraints[i];
    if (const auto* s = std::get_if<SimpleConstraint>(&c)) {
      v[i] = distance_to(s->set, x);
    } else {
      const auto& d = std::get<DifficultConstraint>(c);
      Vector img = d.op->apply(x);
      v[i] = (img - project_orthogonal(d.q, img)).norm();
      if (images) (*images)[i] = std::move(img);
    }
  }
  return v;
}

/// Step k (0-based) of the method as a pure function of the configuration.
inline std::pair<PrimalDualPair, IterationRecord> bpsfp_step(const SolverConfig& config, const PrimalDualPair& state,
                                                             std::size_t k) {
  validate(config);
  const std::size_t index = control_index(config.control, k, config.constraints.size());
  auto outcome = constraint_step(config, state, index);
  IterationRecord rec;
  rec.k = k + 1;
  rec.constraint_index = index;
  rec.step_size = outcome.step_size;
  rec.w_norm = outcome.w_norm;
  rec.direction_norm = outcome.direction_norm;
  rec.violations = constraint_violations(config, outcome.pair.x);
  rec.max_violation = *std::max_element(rec.violations.begin(), rec.violations.end());
  rec.objective_value = config.objective->value(outcome.pair.x);
  return {std::move(outcome.pair), std::move(rec)};
}

/// Runs the method until every constraint violation is at most
/// residual_tolerance (checked initially and after every full pass over the
/// constraint list) or max_iterations steps were taken.
inline SolverResult run(const SolverConfig& config, const StepObserver& observer = {}) {
  validate(config);
  const auto start = std::chrono::steady_clock::now();
  auto elapsed_ms = [&] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  };

  const Objective& f = *config.objective;
  const std::size_t count = config.constraints.size();
  SolverResult result;
  result.final = PrimalDualPair::from_dual(f, config.x0_star.value_or(Vector::Zero(f.dimension())));

  std::vector<Vector> images;
  std::vector<double> violations = constraint_violations(config, result.final.x, &images);
  auto max_of = [](const std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); };
  if (max_of(violations) <= config.residual_tolerance) {
    result.reason = Termination::Tolerance;
    result.final_violations = std::move(violations);
    result.elapsed_ms = elapsed_ms();
    return result;
  }

  bool images_valid = true;
  for (std::size_t k = 0; k < config.max_iterations; ++k) {
    const std::size_t index = control_index(config.control, k, count);
    const Vector* cached = images_valid && images[index].size() > 0 ? &images[index] : nullptr;
    std::optional<PrimalDualPair> previous;
    if (observer) previous = result.final;
    const StepInfo outcome = constraint_step_inplace(config, result.final, index, cached);
    if (outcome.moved) images_valid = false;
    result.iterations = k + 1;

    const bool pass_end = (k + 1) % count == 0;
    if (pass_end) {
      violations = constraint_violations(config, result.final.x, &images);
      images_valid = true;
    }

    if (config.record_history || observer) {
      IterationRecord rec;
      rec.k = k + 1;
      rec.constraint_index = index;
      rec.step_size = outcome.step_size;
      rec.w_norm = outcome.w_norm;
      rec.direction_norm = outcome.direction_norm;
      rec.violations = violations;
      rec.max_violation = max_of(violations);
      rec.objective_value = f.value(result.final.x);
      rec.elapsed_ms = elapsed_ms();
      if (observer) observer(rec, *previous, result.final);
      if (config.record_history) result.history.push_back(std::move(rec));
    }

    if (pass_end && max_of(violations) <= config.residual_tolerance) {
      result.reason = Termination::Tolerance;
      break;
    }
  }
  result.final_violations = std::move(violations);
  result.elapsed_ms = elapsed_ms();
  return result;
}

// ---------------------------------------------------------------------------
// Presets

enum class Preset { Landweber, MinimalError, Kaczmarz, LinearizedBregman, SparseKaczmarz };

inline Preset parse_preset(const std::string& name) {
  if (name == "landweber") return Preset::Landweber;
  if (name == "minimal_error") return Preset::MinimalError;
  if (name == "kaczmarz") return Preset::Kaczmarz;
  if (name == "linearized_bregman") return Preset::LinearizedBregman;
  if (name == "sparse_kaczmarz") return Preset::SparseKaczmarz;
  throw Error(ErrorKind::InvalidArgument, "unknown preset '" + name + "'");
}

namespace detail {

inline std::vector<Constraint> row_hyperplanes(const LinearOperator& A, const Vector& b) {
  if (!A.has_rows()) throw Error(ErrorKind::InvalidArgument, "row-action preset needs row access");
  std::vector<Constraint> out;
  for (Index i = 0; i < A.rows(); ++i) {
    Vector a = A.row(i);
    if (a.lpNorm<Eigen::Infinity>() == 0.0) {
      if (b[i] != 0.0) throw Error(ErrorKind::InvalidArgument, "zero row with nonzero right-hand side");
      continue;
    }
    out.push_back(SimpleConstraint{Hyperplane{std::move(a), b[i]}});
  }
  return out;
}

}  // namespace detail

/// Classical methods as configurations of the Bregman projection scheme, all
/// started from x0* = 0.
///
/// landweber / minimal_error: 0.5||x||^2, A x = b as one difficult constraint,
/// constant / dynamic steps. kaczmarz: 0.5||x||^2 with row hyperplanes.
/// linearized_bregman: elastic net with one difficult constraint and the given
/// rule. sparse_kaczmarz: elastic net with row hyperplanes.
inline SolverConfig make_preset(Preset preset, const LinearOperatorPtr& A, const Vector& b,
                                std::optional<double> lambda = std::nullopt, StepRule rule = ExactStep{}) {
  if (!A) throw Error(ErrorKind::InvalidArgument, "preset: null operator");
  require_same_size(A->rows(), b.size(), "preset: right-hand side");
  const Index n = A->cols();
  SolverConfig config;
  config.x0_star = Vector::Zero(n);
  switch (preset) {
    case Preset::Landweber:
    case Preset::MinimalError:
      config.objective = std::make_shared<SquaredNorm>(n);
      config.constraints = {DifficultConstraint{A, Point{b}}};
      config.step = preset == Preset::Landweber ? StepRule{ConstantStep{}} : StepRule{DynamicStep{}};
      break;
    case Preset::Kaczmarz:
      config.objective = std::make_shared<SquaredNorm>(n);
      config.constraints = detail::row_hyperplanes(*A, b);
      config.step = ExactStep{};
      break;
    case Preset::LinearizedBregman:
      if (!lambda) throw Error(ErrorKind::MissingLambda, "linearized_bregman needs lambda");
      config.objective = std::make_shared<ElasticNet>(*lambda, n);
      config.constraints = {DifficultConstraint{A, Point{b}}};
      config.step = rule;
      break;
    case Preset::SparseKaczmarz:
      if (!lambda) throw Error(ErrorKind::MissingLambda, "sparse_kaczmarz needs lambda");
      config.objective = std::make_shared<ElasticNet>(*lambda, n);
      config.constraints = detail::row_hyperplanes(*A, b);
      config.step = ExactStep{};
      break;
  }
  return config;
}

// ---------------------------------------------------------------------------
// CSV

inline void write_history_csv(std::ostream& os, const std::vector<IterationRecord>& history,
                              bool include_elapsed = true, bool include_violations = false) {
  os << "k,constraint_index,step_size,w_norm,max_violation,objective_value";
  if (include_elapsed) os << ",elapsed_ms";
  const std::size_t nv = history.empty() ? 0 : history.front().violations.size();
  if (include_violations) {
    for (std::size_t i = 0; i < nv; ++i) os << ",violation_" << i;
  }
  os << '\n';
  os << std::setprecision(17);
  for (const auto& r : history) {
    os << r.k << ',' << r.constraint_index << ',' << r.step_size << ',' << r.w_norm << ',' << r.max_violation << ','
       << r.objective_value;
    if (include_elapsed) os << ',' << r.elapsed_ms;
    if (include_violations) {
      for (double v : r.violations) os << ',' << v;
    }
    os << '\n';
  }
}

}  // namespace bpsfp
