#pragma once

#include "bpsfp/core.hpp"
#include "bpsfp/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace bpsfp {

/// Componentwise soft shrinkage sign(x_j) * max(|x_j| - lambda, 0).
inline Vector soft_shrink(const Vector& x, double lambda) {
  if (lambda < 0.0) throw Error(ErrorKind::InvalidArgument, "soft_shrink: negative lambda");
  Vector out(x.size());
  for (Index j = 0; j < x.size(); ++j) {
    const double v = x[j];
    out[j] = v > lambda ? v - lambda : (v < -lambda ? v + lambda : 0.0);
  }
  return out;
}

/// Conjugate of lambda*||x||_1 + 0.5*||x||^2, i.e. 0.5*||S_lambda(x_star)||^2.
inline double eval_conjugate_elasticnet(const Vector& x_star, double lambda) {
  return 0.5 * soft_shrink(x_star, lambda).squaredNorm();
}

/// Strongly convex objective f with modulus alpha, exposing f, f* and grad f*.
///
/// Implementations are immutable after construction. grad_conjugate returns the
/// unique maximizer of <x_star, x> - f(x); the default conjugate evaluates the
/// supremum at that point.
class Objective {
 public:
  virtual ~Objective() = default;

  virtual Index dimension() const = 0;
  virtual double alpha() const = 0;
  virtual double value(const Vector& x) const = 0;
  virtual Vector grad_conjugate(const Vector& x_star) const = 0;
  virtual std::string name() const = 0;

  virtual double conjugate(const Vector& x_star) const {
    const Vector x = grad_conjugate(x_star);
    return x_star.dot(x) - value(x);
  }

  /// If coordinate j enters f only through the separable term
  /// lambda_j*|x_j| + 0.5*x_j^2, returns lambda_j. Exact line searches and the
  /// cone/box Bregman projections rely on this.
  virtual std::optional<double> coordinate_l1_weight(Index /*j*/) const { return std::nullopt; }

  /// Writes the weights of coordinates first..first+count-1 to out; false if
  /// any of them is not separable.
  virtual bool l1_weights(Index first, Index count, double* out) const {
    for (Index i = 0; i < count; ++i) {
      const auto w = coordinate_l1_weight(first + i);
      if (!w) return false;
      out[i] = *w;
    }
    return true;
  }

 protected:
  void check_dimension(const Vector& v, const char* where) const {
    require_same_size(v.size(), dimension(), where);
  }
};

using ObjectivePtr = std::shared_ptr<const Objective>;

/// f(x) = 0.5*||x||^2, so f = f* and grad f* is the identity.
class SquaredNorm final : public Objective {
 public:
  explicit SquaredNorm(Index dimension) : dimension_(dimension) {
    if (dimension <= 0) throw Error(ErrorKind::InvalidArgument, "SquaredNorm: dimension must be positive");
  }

  Index dimension() const override { return dimension_; }
  double alpha() const override { return 1.0; }
  std::string name() const override { return "squared_norm"; }

  double value(const Vector& x) const override {
    check_dimension(x, "SquaredNorm::value");
    return 0.5 * x.squaredNorm();
  }
  double conjugate(const Vector& x_star) const override {
    check_dimension(x_star, "SquaredNorm::conjugate");
    return 0.5 * x_star.squaredNorm();
  }
  Vector grad_conjugate(const Vector& x_star) const override {
    check_dimension(x_star, "SquaredNorm::grad_conjugate");
    return x_star;
  }
  std::optional<double> coordinate_l1_weight(Index) const override { return 0.0; }
  bool l1_weights(Index, Index count, double* out) const override {
    std::fill(out, out + count, 0.0);
    return true;
  }

 private:
  Index dimension_;
};

/// f(x) = lambda*||x||_1 + 0.5*||x||^2 with grad f* = S_lambda.
class ElasticNet final : public Objective {
 public:
  ElasticNet(double lambda, Index dimension) : lambda_(lambda), dimension_(dimension) {
    if (!(lambda >= 0.0)) throw Error(ErrorKind::InvalidArgument, "ElasticNet: lambda must be nonnegative");
    if (dimension <= 0) throw Error(ErrorKind::InvalidArgument, "ElasticNet: dimension must be positive");
  }

  double lambda() const { return lambda_; }
  Index dimension() const override { return dimension_; }
  double alpha() const override { return 1.0; }
  std::string name() const override { return "elastic_net"; }

  double value(const Vector& x) const override {
    check_dimension(x, "ElasticNet::value");
    return lambda_ * x.lpNorm<1>() + 0.5 * x.squaredNorm();
  }
  double conjugate(const Vector& x_star) const override {
    check_dimension(x_star, "ElasticNet::conjugate");
    return eval_conjugate_elasticnet(x_star, lambda_);
  }
  Vector grad_conjugate(const Vector& x_star) const override {
    check_dimension(x_star, "ElasticNet::grad_conjugate");
    return soft_shrink(x_star, lambda_);
  }
  std::optional<double> coordinate_l1_weight(Index) const override { return lambda_; }
  bool l1_weights(Index, Index count, double* out) const override {
    std::fill(out, out + count, lambda_);
    return true;
  }

 private:
  double lambda_;
  Index dimension_;
};

using Groups = std::vector<std::vector<Index>>;

namespace detail {

// Groups must cover 0..dimension-1 exactly once.
inline std::vector<Index> group_lookup(const Groups& groups, Index dimension, const char* who) {
  std::vector<Index> owner(static_cast<std::size_t>(dimension), -1);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].empty()) throw Error(ErrorKind::InvalidArgument, std::string(who) + ": empty group");
    for (Index j : groups[g]) {
      if (j < 0 || j >= dimension) throw Error(ErrorKind::IndexOutOfRange, std::string(who) + ": group index out of range");
      auto& slot = owner[static_cast<std::size_t>(j)];
      if (slot != -1) throw Error(ErrorKind::InvalidArgument, std::string(who) + ": overlapping groups");
      slot = static_cast<Index>(g);
    }
  }
  for (Index o : owner) {
    if (o == -1) throw Error(ErrorKind::InvalidArgument, std::string(who) + ": groups do not cover every index");
  }
  return owner;
}

// Groups in CSR form: members of group g are index[start[g] .. start[g+1]).
struct FlatGroups {
  std::vector<std::size_t> start;
  std::vector<Index> index;
  std::vector<Index> owner;

  std::size_t count() const { return start.size() - 1; }
  std::size_t size(std::size_t g) const { return start[g + 1] - start[g]; }
};

inline FlatGroups flatten_groups(const Groups& groups, Index dimension, const char* who) {
  FlatGroups f;
  f.owner = group_lookup(groups, dimension, who);
  f.start.reserve(groups.size() + 1);
  f.start.push_back(0);
  for (const auto& g : groups) {
    f.index.insert(f.index.end(), g.begin(), g.end());
    f.start.push_back(f.index.size());
  }
  return f;
}

}  // namespace detail

/// f(p) = lambda * sum_g ||p_g||_2 + 0.5*||p||^2 over a partition into groups.
/// With size-2 groups pairing the two gradient components this is the
/// isotropic total variation term.
class GroupElasticNet final : public Objective {
 public:
  GroupElasticNet(double lambda, Index dimension, Groups groups)
      : lambda_(lambda), dimension_(dimension), groups_(std::move(groups)) {
    if (!(lambda >= 0.0)) throw Error(ErrorKind::InvalidArgument, "GroupElasticNet: lambda must be nonnegative");
    flat_ = detail::flatten_groups(groups_, dimension_, "GroupElasticNet");
  }

  double lambda() const { return lambda_; }
  const Groups& groups() const { return groups_; }
  Index dimension() const override { return dimension_; }
  double alpha() const override { return 1.0; }
  std::string name() const override { return "group_elastic_net"; }

  double value(const Vector& p) const override {
    check_dimension(p, "GroupElasticNet::value");
    double sum = 0.0;
    for (std::size_t g = 0; g < flat_.count(); ++g) {
      double sq = 0.0;
      for (std::size_t k = flat_.start[g]; k < flat_.start[g + 1]; ++k) sq += p[flat_.index[k]] * p[flat_.index[k]];
      sum += std::sqrt(sq);
    }
    return lambda_ * sum + 0.5 * p.squaredNorm();
  }

  double conjugate(const Vector& z) const override {
    return 0.5 * grad_conjugate(z).squaredNorm();
  }

  Vector grad_conjugate(const Vector& z) const override {
    check_dimension(z, "GroupElasticNet::grad_conjugate");
    Vector out(z.size());
    for (std::size_t g = 0; g < flat_.count(); ++g) {
      const std::size_t b = flat_.start[g], e = flat_.start[g + 1];
      double sq = 0.0;
      for (std::size_t k = b; k < e; ++k) sq += z[flat_.index[k]] * z[flat_.index[k]];
      const double nrm = std::sqrt(sq);
      const double scale = nrm > lambda_ ? 1.0 - lambda_ / nrm : 0.0;
      for (std::size_t k = b; k < e; ++k) out[flat_.index[k]] = scale * z[flat_.index[k]];
    }
    return out;
  }

  std::optional<double> coordinate_l1_weight(Index j) const override {
    if (flat_.size(static_cast<std::size_t>(flat_.owner[static_cast<std::size_t>(j)])) == 1) return lambda_;
    return std::nullopt;
  }

 private:
  double lambda_;
  Index dimension_;
  Groups groups_;
  detail::FlatGroups flat_;
};

/// f(rho) = lambda * sum_l |G_l| * max_{j in G_l} |rho_j| + 0.5*||rho||^2.
///
/// grad f* is the groupwise prox of the weighted max-norm, computed through
/// the Moreau identity z - P_{l1-ball(lambda*|G_l|)}(z).
class GroupedMax final : public Objective {
 public:
  GroupedMax(double lambda, Index dimension, Groups groups)
      : lambda_(lambda), dimension_(dimension), groups_(std::move(groups)) {
    if (!(lambda >= 0.0)) throw Error(ErrorKind::InvalidArgument, "GroupedMax: lambda must be nonnegative");
    flat_ = detail::flatten_groups(groups_, dimension_, "GroupedMax");
  }

  double lambda() const { return lambda_; }
  const Groups& groups() const { return groups_; }
  Index dimension() const override { return dimension_; }
  double alpha() const override { return 1.0; }
  std::string name() const override { return "grouped_max"; }

  double group_weight(std::size_t g) const { return static_cast<double>(flat_.size(g)); }

  double value(const Vector& rho) const override {
    check_dimension(rho, "GroupedMax::value");
    double sum = 0.0;
    for (std::size_t g = 0; g < flat_.count(); ++g) {
      double mx = 0.0;
      for (std::size_t k = flat_.start[g]; k < flat_.start[g + 1]; ++k) mx = std::max(mx, std::abs(rho[flat_.index[k]]));
      sum += group_weight(g) * mx;
    }
    return lambda_ * sum + 0.5 * rho.squaredNorm();
  }

  Vector grad_conjugate(const Vector& z) const override {
    check_dimension(z, "GroupedMax::grad_conjugate");
    Vector out(z.size());
    Vector zg;
    for (std::size_t g = 0; g < flat_.count(); ++g) {
      const std::size_t b = flat_.start[g], len = flat_.size(g);
      zg.resize(static_cast<Index>(len));
      for (std::size_t i = 0; i < len; ++i) zg[static_cast<Index>(i)] = z[flat_.index[b + i]];
      const Vector pg = zg - project_l1_ball(zg, lambda_ * group_weight(g));
      for (std::size_t i = 0; i < len; ++i) out[flat_.index[b + i]] = pg[static_cast<Index>(i)];
    }
    return out;
  }

  std::optional<double> coordinate_l1_weight(Index j) const override {
    if (flat_.size(static_cast<std::size_t>(flat_.owner[static_cast<std::size_t>(j)])) == 1) return lambda_;
    return std::nullopt;
  }

 private:
  double lambda_;
  Index dimension_;
  Groups groups_;
  detail::FlatGroups flat_;
};

/// Separable sum of objectives acting on consecutive coordinate blocks.
class ProductObjective final : public Objective {
 public:
  explicit ProductObjective(std::vector<ObjectivePtr> blocks) : blocks_(std::move(blocks)) {
    if (blocks_.empty()) throw Error(ErrorKind::InvalidArgument, "ProductObjective: no blocks");
    Index offset = 0;
    alpha_ = blocks_.front()->alpha();
    for (const auto& b : blocks_) {
      if (!b) throw Error(ErrorKind::InvalidArgument, "ProductObjective: null block");
      offsets_.push_back(offset);
      offset += b->dimension();
      alpha_ = std::min(alpha_, b->alpha());
    }
    dimension_ = offset;
  }

  const std::vector<ObjectivePtr>& blocks() const { return blocks_; }
  Index block_offset(std::size_t b) const { return offsets_[b]; }

  Index dimension() const override { return dimension_; }
  double alpha() const override { return alpha_; }
  std::string name() const override { return "product"; }

  double value(const Vector& x) const override {
    check_dimension(x, "ProductObjective::value");
    double sum = 0.0;
    for (std::size_t b = 0; b < blocks_.size(); ++b) sum += blocks_[b]->value(segment(x, b));
    return sum;
  }
  double conjugate(const Vector& x_star) const override {
    check_dimension(x_star, "ProductObjective::conjugate");
    double sum = 0.0;
    for (std::size_t b = 0; b < blocks_.size(); ++b) sum += blocks_[b]->conjugate(segment(x_star, b));
    return sum;
  }
  Vector grad_conjugate(const Vector& x_star) const override {
    check_dimension(x_star, "ProductObjective::grad_conjugate");
    Vector out(dimension_);
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      out.segment(offsets_[b], blocks_[b]->dimension()) = blocks_[b]->grad_conjugate(segment(x_star, b));
    }
    return out;
  }
  std::optional<double> coordinate_l1_weight(Index j) const override {
    for (std::size_t b = blocks_.size(); b-- > 0;) {
      if (j >= offsets_[b]) return blocks_[b]->coordinate_l1_weight(j - offsets_[b]);
    }
    return std::nullopt;
  }
  bool l1_weights(Index first, Index count, double* out) const override {
    for (std::size_t b = 0; b < blocks_.size() && count > 0; ++b) {
      const Index lo = offsets_[b], hi = lo + blocks_[b]->dimension();
      if (first >= hi) continue;
      const Index take = std::min(count, hi - first);
      if (!blocks_[b]->l1_weights(first - lo, take, out)) return false;
      first += take;
      count -= take;
      out += take;
    }
    return true;
  }

 private:
  Vector segment(const Vector& v, std::size_t b) const {
    return v.segment(offsets_[b], blocks_[b]->dimension());
  }

  std::vector<ObjectivePtr> blocks_;
  std::vector<Index> offsets_;
  Index dimension_ = 0;
  double alpha_ = 1.0;
};

/// Delta(x*, x) = f*(x*) - <x*, x> + f(x); zero exactly when x = grad f*(x*).
inline double delta(const Objective& f, const Vector& x_star, const Vector& x) {
  require_same_size(x_star.size(), f.dimension(), "delta");
  require_same_size(x.size(), f.dimension(), "delta");
  return f.conjugate(x_star) - x_star.dot(x) + f.value(x);
}

/// Scale-aware acceptance of (x, x*) as a primal-dual pair.
inline bool is_subgradient(const Objective& f, const Vector& x, const Vector& x_star, double rel_tol = 1e-8) {
  return delta(f, x_star, x) <= rel_tol * (1.0 + std::abs(f.value(x)));
}

/// D^{x*}(x, y) = f(y) - f(x) - <x*, y - x> for x* in the subdifferential at x.
inline double bregman_distance(const Objective& f, const Vector& x, const Vector& x_star, const Vector& y) {
  require_same_size(y.size(), f.dimension(), "bregman_distance");
  if (!is_subgradient(f, x, x_star)) {
    throw Error(ErrorKind::InvalidSubgradient, "bregman_distance: x_star is not a subgradient at x");
  }
  const double fx = f.value(x);
  return f.value(y) - fx - x_star.dot(y - x);
}

/// Primal iterate together with a subgradient, kept in sync as x = grad f*(x*).
struct PrimalDualPair {
  Vector x;
  Vector x_star;

  static PrimalDualPair from_dual(const Objective& f, Vector x_star) {
    Vector x = f.grad_conjugate(x_star);
    return {std::move(x), std::move(x_star)};
  }
};

}  // namespace bpsfp
