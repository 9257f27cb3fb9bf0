#pragma once

#include "bpsfp/core.hpp"

#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <iomanip>
#include <memory>
#include <mutex>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace bpsfp {

class LinearOperator;

/// Result of power iteration on A^T A.
struct NormEstimate {
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Largest singular value via power iteration on A^T A.
///
/// Stops once the relative change of the estimate drops below rel_tol. If the
/// cap is hit the best estimate is returned with converged = false.
inline NormEstimate operator_norm(const LinearOperator& op, double rel_tol = 1e-6, int max_iterations = 1000);

/// Matrix-free linear map R^n -> R^m with adjoint.
class LinearOperator {
 public:
  LinearOperator() = default;
  LinearOperator(const LinearOperator&) = delete;
  LinearOperator& operator=(const LinearOperator&) = delete;
  virtual ~LinearOperator() = default;

  virtual Index rows() const = 0;
  virtual Index cols() const = 0;
  virtual Vector apply(const Vector& x) const = 0;
  virtual Vector apply_adjoint(const Vector& y) const = 0;

  virtual bool has_rows() const { return false; }
  virtual Vector row(Index /*i*/) const {
    throw Error(ErrorKind::InvalidArgument, "row access not supported by this operator");
  }

  /// Cached operator-norm estimate; computed on first use, thread-safe.
  double norm_estimate() const {
    std::call_once(norm_once_, [this] { norm_ = operator_norm(*this).value; });
    return norm_;
  }

 protected:
  void check_input(const Vector& x) const { require_same_size(x.size(), cols(), "LinearOperator::apply"); }
  void check_output(const Vector& y) const { require_same_size(y.size(), rows(), "LinearOperator::apply_adjoint"); }
  void check_row(Index i) const {
    if (i < 0 || i >= rows()) throw Error(ErrorKind::IndexOutOfRange, "row index out of range");
  }

 private:
  mutable std::once_flag norm_once_;
  mutable double norm_ = 0.0;
};

using LinearOperatorPtr = std::shared_ptr<const LinearOperator>;

inline NormEstimate operator_norm(const LinearOperator& op, double rel_tol, int max_iterations) {
  NormEstimate est;
  if (op.cols() == 0 || op.rows() == 0) {
    est.converged = true;
    return est;
  }
  // Fixed seed: the estimate is reproducible run to run.
  std::mt19937_64 rng(0x5eed);
  std::normal_distribution<double> normal;
  Vector v(op.cols());
  for (Index j = 0; j < v.size(); ++j) v[j] = normal(rng);
  v.normalize();

  double previous = 0.0;
  for (int it = 1; it <= max_iterations; ++it) {
    Vector w = op.apply_adjoint(op.apply(v));
    const double rayleigh = v.dot(w);
    const double wn = w.norm();
    est.iterations = it;
    est.value = std::sqrt(std::max(rayleigh, 0.0));
    if (wn == 0.0) {
      est.converged = true;
      return est;
    }
    v = w / wn;
    if (it > 1 && std::abs(rayleigh - previous) <= rel_tol * std::abs(rayleigh)) {
      est.converged = true;
      return est;
    }
    previous = rayleigh;
  }
  return est;
}

/// Dense row-major matrix.
class DenseMatrix final : public LinearOperator {
 public:
  using Storage = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  explicit DenseMatrix(Storage m) : m_(std::move(m)) {}
  explicit DenseMatrix(const Eigen::MatrixXd& m) : m_(m) {}

  const Storage& matrix() const { return m_; }

  Index rows() const override { return m_.rows(); }
  Index cols() const override { return m_.cols(); }
  Vector apply(const Vector& x) const override {
    check_input(x);
    return m_ * x;
  }
  Vector apply_adjoint(const Vector& y) const override {
    check_output(y);
    return m_.transpose() * y;
  }
  bool has_rows() const override { return true; }
  Vector row(Index i) const override {
    check_row(i);
    return m_.row(i).transpose();
  }

 private:
  Storage m_;
};

using SparseStorage = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Compressed row-major sparse matrix.
class SparseMatrix final : public LinearOperator {
 public:
  explicit SparseMatrix(SparseStorage m) : m_(std::move(m)) { m_.makeCompressed(); }

  const SparseStorage& matrix() const { return m_; }

  Index rows() const override { return m_.rows(); }
  Index cols() const override { return m_.cols(); }
  Vector apply(const Vector& x) const override {
    check_input(x);
    return m_ * x;
  }
  Vector apply_adjoint(const Vector& y) const override {
    check_output(y);
    return m_.transpose() * y;
  }
  bool has_rows() const override { return true; }
  Vector row(Index i) const override {
    check_row(i);
    Vector r = Vector::Zero(m_.cols());
    for (SparseStorage::InnerIterator it(m_, i); it; ++it) r[it.col()] = it.value();
    return r;
  }

 private:
  SparseStorage m_;
};

/// scale * I_n.
class ScaledIdentity final : public LinearOperator {
 public:
  ScaledIdentity(Index n, double scale = 1.0) : n_(n), scale_(scale) {}

  Index rows() const override { return n_; }
  Index cols() const override { return n_; }
  Vector apply(const Vector& x) const override {
    check_input(x);
    return scale_ * x;
  }
  Vector apply_adjoint(const Vector& y) const override {
    check_output(y);
    return scale_ * y;
  }
  bool has_rows() const override { return true; }
  Vector row(Index i) const override {
    check_row(i);
    Vector r = Vector::Zero(n_);
    r[i] = scale_;
    return r;
  }

 private:
  Index n_;
  double scale_;
};

class ZeroOperator final : public LinearOperator {
 public:
  ZeroOperator(Index rows, Index cols) : rows_(rows), cols_(cols) {}

  Index rows() const override { return rows_; }
  Index cols() const override { return cols_; }
  Vector apply(const Vector& x) const override {
    check_input(x);
    return Vector::Zero(rows_);
  }
  Vector apply_adjoint(const Vector& y) const override {
    check_output(y);
    return Vector::Zero(cols_);
  }
  bool has_rows() const override { return true; }
  Vector row(Index i) const override {
    check_row(i);
    return Vector::Zero(cols_);
  }

 private:
  Index rows_;
  Index cols_;
};

/// Forward-difference gradient of an H x W image stored row-major (index r*W + c).
///
/// Output is the x-direction block (differences along columns) followed by the
/// y-direction block (differences along rows); the last column/row difference
/// is zero. The adjoint is the negative divergence.
class Grad2D final : public LinearOperator {
 public:
  Grad2D(Index height, Index width) : h_(height), w_(width) {
    if (height < 1 || width < 1) throw Error(ErrorKind::InvalidArgument, "Grad2D: empty image");
  }

  Index height() const { return h_; }
  Index width() const { return w_; }
  Index rows() const override { return 2 * h_ * w_; }
  Index cols() const override { return h_ * w_; }

  Vector apply(const Vector& u) const override {
    check_input(u);
    const Index n = h_ * w_;
    Vector p = Vector::Zero(2 * n);
    for (Index r = 0; r < h_; ++r) {
      for (Index c = 0; c < w_; ++c) {
        const Index i = r * w_ + c;
        if (c + 1 < w_) p[i] = u[i + 1] - u[i];
        if (r + 1 < h_) p[n + i] = u[i + w_] - u[i];
      }
    }
    return p;
  }

  Vector apply_adjoint(const Vector& p) const override {
    check_output(p);
    const Index n = h_ * w_;
    Vector u = Vector::Zero(n);
    for (Index r = 0; r < h_; ++r) {
      for (Index c = 0; c < w_; ++c) {
        const Index i = r * w_ + c;
        if (c + 1 < w_) {
          u[i] -= p[i];
          u[i + 1] += p[i];
        }
        if (r + 1 < h_) {
          u[i] -= p[n + i];
          u[i + w_] += p[n + i];
        }
      }
    }
    return u;
  }

 private:
  Index h_;
  Index w_;
};

/// Operators applied to consecutive blocks of the input.
///
/// Sum: all blocks share the row count and outputs are added, e.g. [grad, -I]
/// acting on (u, p) gives grad(u) - p. Stack: outputs are concatenated
/// (block-diagonal operator).
class BlockRow final : public LinearOperator {
 public:
  enum class Mode { Sum, Stack };

  explicit BlockRow(std::vector<LinearOperatorPtr> blocks, Mode mode = Mode::Sum)
      : blocks_(std::move(blocks)), mode_(mode) {
    if (blocks_.empty()) throw Error(ErrorKind::InvalidArgument, "BlockRow: no blocks");
    for (const auto& b : blocks_) {
      if (!b) throw Error(ErrorKind::InvalidArgument, "BlockRow: null block");
      in_offsets_.push_back(cols_);
      out_offsets_.push_back(mode_ == Mode::Sum ? 0 : rows_);
      cols_ += b->cols();
      if (mode_ == Mode::Sum) {
        if (b != blocks_.front() && b->rows() != blocks_.front()->rows()) {
          throw Error(ErrorKind::DimensionMismatch, "BlockRow: summed blocks must share the row count");
        }
        rows_ = b->rows();
      } else {
        rows_ += b->rows();
      }
    }
  }

  Index rows() const override { return rows_; }
  Index cols() const override { return cols_; }

  Vector apply(const Vector& x) const override {
    check_input(x);
    Vector y = Vector::Zero(rows_);
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      const Vector part = blocks_[b]->apply(x.segment(in_offsets_[b], blocks_[b]->cols()));
      y.segment(out_offsets_[b], blocks_[b]->rows()) += part;
    }
    return y;
  }

  Vector apply_adjoint(const Vector& y) const override {
    check_output(y);
    Vector x(cols_);
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      x.segment(in_offsets_[b], blocks_[b]->cols()) =
          blocks_[b]->apply_adjoint(y.segment(out_offsets_[b], blocks_[b]->rows()));
    }
    return x;
  }

 private:
  std::vector<LinearOperatorPtr> blocks_;
  Mode mode_;
  std::vector<Index> in_offsets_;
  std::vector<Index> out_offsets_;
  Index rows_ = 0;
  Index cols_ = 0;
};

/// Row j of the orthonormal DCT-II of length n:
/// c_j * cos(pi * (2l + 1) * j / (2n)), c_0 = sqrt(1/n), c_j = sqrt(2/n).
inline Vector dct_row(Index n, Index j) {
  if (n <= 0 || j < 0 || j >= n) throw Error(ErrorKind::IndexOutOfRange, "dct_row: index out of range");
  const double c = j == 0 ? std::sqrt(1.0 / static_cast<double>(n)) : std::sqrt(2.0 / static_cast<double>(n));
  Vector r(n);
  for (Index l = 0; l < n; ++l) {
    r[l] = c * std::cos(std::numbers::pi * static_cast<double>((2 * l + 1) * j) / (2.0 * static_cast<double>(n)));
  }
  return r;
}

/// Selected rows of the orthonormal DCT-II, stored densely.
class PartialDCT final : public LinearOperator {
 public:
  PartialDCT(Index n, std::vector<Index> selected) : n_(n), selected_(std::move(selected)), m_(selected_.size(), n) {
    for (std::size_t i = 0; i < selected_.size(); ++i) m_.row(static_cast<Index>(i)) = dct_row(n_, selected_[i]).transpose();
  }

  const std::vector<Index>& selected_rows() const { return selected_; }

  Index rows() const override { return m_.rows(); }
  Index cols() const override { return n_; }
  Vector apply(const Vector& x) const override {
    check_input(x);
    return m_ * x;
  }
  Vector apply_adjoint(const Vector& y) const override {
    check_output(y);
    return m_.transpose() * y;
  }
  bool has_rows() const override { return true; }
  Vector row(Index i) const override {
    check_row(i);
    return m_.row(i).transpose();
  }

 private:
  Index n_;
  std::vector<Index> selected_;
  DenseMatrix::Storage m_;
};

/// Explicit matrix of any operator, column by column. Test and debugging aid.
inline Eigen::MatrixXd materialize(const LinearOperator& op) {
  Eigen::MatrixXd m(op.rows(), op.cols());
  Vector e = Vector::Zero(op.cols());
  for (Index j = 0; j < op.cols(); ++j) {
    e[j] = 1.0;
    m.col(j) = op.apply(e);
    e[j] = 0.0;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Parallel-beam projector

/// One pixel hit by a ray, with the intersection length.
struct RayHit {
  Index pixel;
  double length;
};

/// Exact intersection lengths of the line {s*n + t*d} with an H x W grid of
/// unit pixels centred at the origin.
///
/// d = (cos theta, sin theta), n = (-sin theta, cos theta). Pixel (r, c)
/// covers x in [c - W/2, c + 1 - W/2], y in [H/2 - r - 1, H/2 - r]; its
/// column index is r*W + c.
inline std::vector<RayHit> trace_ray(Index height, Index width, double offset, double theta_deg) {
  const double theta = theta_deg * std::numbers::pi / 180.0;
  const double dx = std::cos(theta), dy = std::sin(theta);
  const double px = -std::sin(theta) * offset, py = std::cos(theta) * offset;
  const double half_w = 0.5 * static_cast<double>(width), half_h = 0.5 * static_cast<double>(height);
  constexpr double kParallel = 1e-14;

  double t_lo = -std::numeric_limits<double>::infinity();
  double t_hi = std::numeric_limits<double>::infinity();
  auto clip = [&](double p, double d, double lo, double hi) {
    if (std::abs(d) < kParallel) {
      if (p < lo || p > hi) t_lo = std::numeric_limits<double>::infinity();
      return;
    }
    double a = (lo - p) / d, b = (hi - p) / d;
    if (a > b) std::swap(a, b);
    t_lo = std::max(t_lo, a);
    t_hi = std::min(t_hi, b);
  };
  clip(px, dx, -half_w, half_w);
  clip(py, dy, -half_h, half_h);
  if (!(t_lo < t_hi)) return {};

  std::vector<double> ts{t_lo, t_hi};
  if (std::abs(dx) >= kParallel) {
    for (Index c = 0; c <= width; ++c) {
      const double t = (static_cast<double>(c) - half_w - px) / dx;
      if (t > t_lo && t < t_hi) ts.push_back(t);
    }
  }
  if (std::abs(dy) >= kParallel) {
    for (Index r = 0; r <= height; ++r) {
      const double t = (static_cast<double>(r) - half_h - py) / dy;
      if (t > t_lo && t < t_hi) ts.push_back(t);
    }
  }
  std::sort(ts.begin(), ts.end());

  std::vector<RayHit> hits;
  for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
    const double len = ts[k + 1] - ts[k];
    if (len <= 1e-12) continue;
    const double tm = 0.5 * (ts[k] + ts[k + 1]);
    const double x = px + tm * dx, y = py + tm * dy;
    const auto c = static_cast<Index>(std::floor(x + half_w));
    const auto r = static_cast<Index>(std::floor(half_h - y));
    if (c < 0 || c >= width || r < 0 || r >= height) continue;
    const Index pixel = r * width + c;
    if (!hits.empty() && hits.back().pixel == pixel) {
      hits.back().length += len;
    } else {
      hits.push_back({pixel, len});
    }
  }
  return hits;
}

/// Parallel-beam system matrix plus the geometry needed downstream.
struct ParallelProjector {
  std::shared_ptr<const SparseMatrix> matrix;
  std::vector<std::size_t> row_angle;  // angle index of every kept row
  std::size_t angle_count = 0;
  double ray_spacing = 1.0;
};

/// Rays per angle are spread uniformly over a detector of width
/// detector_width (default: the image diagonal). Rays missing the grid are
/// dropped.
inline ParallelProjector build_parallel_projector(Index height, Index width, const std::vector<double>& angles_deg,
                                                  Index rays_per_angle, double detector_width = -1.0) {
  if (height < 2 || width < 2) throw Error(ErrorKind::InvalidArgument, "build_parallel_projector: image too small");
  if (angles_deg.empty()) throw Error(ErrorKind::InvalidArgument, "build_parallel_projector: no angles");
  if (rays_per_angle < 1) throw Error(ErrorKind::InvalidArgument, "build_parallel_projector: no rays");
  if (detector_width <= 0.0) {
    detector_width = std::hypot(static_cast<double>(height), static_cast<double>(width));
  }

  ParallelProjector out;
  out.angle_count = angles_deg.size();
  out.ray_spacing = rays_per_angle > 1 ? detector_width / static_cast<double>(rays_per_angle - 1) : detector_width;

  std::vector<Eigen::Triplet<double>> triplets;
  Index row = 0;
  for (std::size_t a = 0; a < angles_deg.size(); ++a) {
    for (Index i = 0; i < rays_per_angle; ++i) {
      const double s = rays_per_angle > 1 ? -0.5 * detector_width + static_cast<double>(i) * out.ray_spacing : 0.0;
      const auto hits = trace_ray(height, width, s, angles_deg[a]);
      if (hits.empty()) continue;
      for (const auto& h : hits) triplets.emplace_back(row, h.pixel, h.length);
      out.row_angle.push_back(a);
      ++row;
    }
  }
  SparseStorage m(row, height * width);
  m.setFromTriplets(triplets.begin(), triplets.end());
  out.matrix = std::make_shared<const SparseMatrix>(std::move(m));
  return out;
}

// ---------------------------------------------------------------------------
// Matrix Market (coordinate, real, general)

inline void write_matrix_market(std::ostream& os, const SparseStorage& m) {
  os << "%%MatrixMarket matrix coordinate real general\n";
  os << m.rows() << ' ' << m.cols() << ' ' << m.nonZeros() << '\n';
  os << std::setprecision(17);
  for (Index r = 0; r < m.outerSize(); ++r) {
    for (SparseStorage::InnerIterator it(m, r); it; ++it) {
      os << it.row() + 1 << ' ' << it.col() + 1 << ' ' << it.value() << '\n';
    }
  }
}

inline SparseStorage read_matrix_market(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw Error(ErrorKind::Io, "matrix market: empty input");
  std::istringstream banner(line);
  std::string tag, object, format, field, symmetry;
  banner >> tag >> object >> format >> field >> symmetry;
  auto lower = [](std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    return s;
  };
  if (tag != "%%MatrixMarket" || lower(object) != "matrix" || lower(format) != "coordinate" ||
      lower(field) != "real" || lower(symmetry) != "general") {
    throw Error(ErrorKind::Io, "matrix market: only 'matrix coordinate real general' is supported");
  }
  do {
    if (!std::getline(is, line)) throw Error(ErrorKind::Io, "matrix market: missing size line");
  } while (line.empty() || line[0] == '%');

  std::istringstream size_line(line);
  long long m = 0, n = 0, nnz = 0;
  if (!(size_line >> m >> n >> nnz) || m < 0 || n < 0 || nnz < 0) {
    throw Error(ErrorKind::Io, "matrix market: malformed size line");
  }
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(nnz));
  for (long long k = 0; k < nnz; ++k) {
    long long i = 0, j = 0;
    double v = 0.0;
    if (!(is >> i >> j >> v)) throw Error(ErrorKind::Io, "matrix market: truncated entries");
    if (i < 1 || i > m || j < 1 || j > n) throw Error(ErrorKind::Io, "matrix market: entry out of range");
    triplets.emplace_back(static_cast<Index>(i - 1), static_cast<Index>(j - 1), v);
  }
  SparseStorage out(static_cast<Index>(m), static_cast<Index>(n));
  out.setFromTriplets(triplets.begin(), triplets.end());
  out.makeCompressed();
  return out;
}

inline void save_matrix_market(const std::string& path, const SparseStorage& m) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::Io, "cannot open " + path);
  write_matrix_market(os, m);
}

inline SparseStorage load_matrix_market(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::Io, "cannot open " + path);
  return read_matrix_market(is);
}

}  // namespace bpsfp
