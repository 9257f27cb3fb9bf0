#pragma once

#include "bpsfp/core.hpp"
#include "bpsfp/experiments.hpp"
#include "bpsfp/linops.hpp"
#include "bpsfp/objectives.hpp"
#include "bpsfp/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

namespace bpsfp {

// ---------------------------------------------------------------------------
// Phantom

/// Ellipse in normalized coordinates [-1, 1]^2 (y pointing up).
struct Ellipse {
  double intensity;
  double semi_x;
  double semi_y;
  double center_x;
  double center_y;
  double angle_deg;
};

/// Modified Shepp-Logan head phantom (higher-contrast variant).
inline std::vector<Ellipse> modified_shepp_logan() {
  return {
      {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},        {-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0},
      {-0.2, 0.11, 0.31, 0.22, 0.0, -18.0},    {-0.2, 0.16, 0.41, -0.22, 0.0, 18.0},
      {0.1, 0.21, 0.25, 0.0, 0.35, 0.0},       {0.1, 0.046, 0.046, 0.0, 0.1, 0.0},
      {0.1, 0.046, 0.046, 0.0, -0.1, 0.0},     {0.1, 0.046, 0.023, -0.08, -0.605, 0.0},
      {0.1, 0.023, 0.023, 0.0, -0.606, 0.0},   {0.1, 0.023, 0.046, 0.06, -0.605, 0.0},
  };
}

/// Row-major H x W image; each pixel centre sums the intensities of the
/// ellipses containing it, then the result is clipped at 0.
inline Vector render_phantom(Index height, Index width, const std::vector<Ellipse>& ellipses) {
  if (height < 1 || width < 1) throw Error(ErrorKind::InvalidArgument, "render_phantom: empty image");
  Vector img = Vector::Zero(height * width);
  for (Index r = 0; r < height; ++r) {
    const double y = 1.0 - (2.0 * static_cast<double>(r) + 1.0) / static_cast<double>(height);
    for (Index c = 0; c < width; ++c) {
      const double x = (2.0 * static_cast<double>(c) + 1.0) / static_cast<double>(width) - 1.0;
      double v = 0.0;
      for (const auto& e : ellipses) {
        const double phi = e.angle_deg * std::numbers::pi / 180.0;
        const double dx = x - e.center_x, dy = y - e.center_y;
        const double u = dx * std::cos(phi) + dy * std::sin(phi);
        const double w = -dx * std::sin(phi) + dy * std::cos(phi);
        if ((u * u) / (e.semi_x * e.semi_x) + (w * w) / (e.semi_y * e.semi_y) <= 1.0) v += e.intensity;
      }
      img[r * width + c] = std::max(v, 0.0);
    }
  }
  return img;
}

/// Binary 8-bit PGM (P5). Values are mapped linearly from [0, max_value] to
/// [0, 255] and clipped; max_value <= 0 uses the image maximum.
inline void write_pgm(std::ostream& os, const Vector& image, Index height, Index width, double max_value = -1.0) {
  require_same_size(image.size(), height * width, "write_pgm");
  if (max_value <= 0.0) max_value = image.size() ? image.maxCoeff() : 0.0;
  os << "P5\n" << width << ' ' << height << "\n255\n";
  for (Index i = 0; i < image.size(); ++i) {
    const double scaled = max_value > 0.0 ? 255.0 * image[i] / max_value : 0.0;
    const auto byte = static_cast<unsigned char>(std::lround(std::clamp(scaled, 0.0, 255.0)));
    os.put(static_cast<char>(byte));
  }
}

inline void save_pgm(const std::string& path, const Vector& image, Index height, Index width, double max_value = -1.0) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::Io, "cannot open '" + path + "' for writing");
  write_pgm(os, image, height, width, max_value);
}

// ---------------------------------------------------------------------------
// Tomography problem

struct TomographySpec {
  Index height = 32;
  Index width = 32;
  std::vector<double> angles_deg{0, 15, 30, 45, 60, 75, 90, 105, 120, 135, 150, 165};
  Index rays_per_angle = 46;
  double noise_level = 0.05;
  double lambda = 1.0;
  std::uint64_t seed = 0;
};

struct TomographyProblem {
  Index height = 0;
  Index width = 0;
  ParallelProjector projector;
  Vector phantom;
  Vector b;
  NoisyData data;
  double one_norm_estimate = 0.0;  // c in 1^T u = c
};

/// Estimate of ||u||_1 for nonnegative u from parallel projections: each
/// angle's data sum times the ray spacing approximates the image integral;
/// the estimates are averaged over angles.
inline double estimate_one_norm(const ParallelProjector& projector, const Vector& data) {
  require_same_size(static_cast<Index>(projector.row_angle.size()), data.size(), "estimate_one_norm");
  if (projector.angle_count == 0) return 0.0;
  std::vector<double> sums(projector.angle_count, 0.0);
  for (std::size_t i = 0; i < projector.row_angle.size(); ++i) sums[projector.row_angle[i]] += std::abs(data[i]);
  double mean = 0.0;
  for (double s : sums) mean += s;
  mean /= static_cast<double>(projector.angle_count);
  return projector.ray_spacing * mean;
}

inline TomographyProblem build_tomography_problem(const TomographySpec& spec, const Vector* phantom = nullptr) {
  TomographyProblem p;
  p.height = spec.height;
  p.width = spec.width;
  p.projector = build_parallel_projector(spec.height, spec.width, spec.angles_deg, spec.rays_per_angle);
  p.phantom = phantom ? *phantom : render_phantom(spec.height, spec.width, modified_shepp_logan());
  require_same_size(p.phantom.size(), spec.height * spec.width, "build_tomography_problem: phantom");
  p.b = p.projector.matrix->apply(p.phantom);
  p.data = inject_noise(p.b, GaussianNoise{spec.noise_level}, spec.seed);
  p.one_norm_estimate = estimate_one_norm(p.projector, p.data.b_delta);
  return p;
}

enum class TomoVariant { Plain, Positive, OneNorm };

inline const char* to_string(TomoVariant v) {
  switch (v) {
    case TomoVariant::Plain:
      return "plain";
    case TomoVariant::Positive:
      return "positive";
    case TomoVariant::OneNorm:
      return "one_norm";
  }
  return "?";
}

/// Variables (u, p) with p the 2*H*W gradient field. Objective
/// 0.5||u||^2 + lambda*sum_j |(p_x, p_y)_j| + 0.5||p||^2; constraints
/// ||A u - b_delta||_2 <= delta and grad u = p, optionally u >= 0 and
/// 1^T u = c.
inline SolverConfig tomography_config(const TomographyProblem& problem, TomoVariant variant, double lambda,
                                      StepRule step = DynamicStep{}) {
  const Index n = problem.height * problem.width;
  Groups pairs(n);
  for (Index j = 0; j < n; ++j) pairs[j] = {j, n + j};

  SolverConfig config;
  config.objective = std::make_shared<ProductObjective>(std::vector<ObjectivePtr>{
      std::make_shared<SquaredNorm>(n), std::make_shared<GroupElasticNet>(lambda, 2 * n, std::move(pairs))});
  config.step = step;
  config.x0_star = Vector::Zero(3 * n);

  auto data_op = std::make_shared<BlockRow>(
      std::vector<LinearOperatorPtr>{problem.projector.matrix,
                                     std::make_shared<ZeroOperator>(problem.projector.matrix->rows(), 2 * n)});
  auto grad_op = std::make_shared<BlockRow>(std::vector<LinearOperatorPtr>{
      std::make_shared<Grad2D>(problem.height, problem.width), std::make_shared<ScaledIdentity>(2 * n, -1.0)});
  config.constraints.push_back(
      DifficultConstraint{data_op, NormBall{NormType::L2, problem.data.b_delta, problem.data.delta}});
  config.constraints.push_back(DifficultConstraint{grad_op, Point{Vector::Zero(2 * n)}});

  if (variant != TomoVariant::Plain) config.constraints.push_back(SimpleConstraint{NonnegCone{0, n}});
  if (variant == TomoVariant::OneNorm) {
    Vector ones = Vector::Zero(3 * n);
    ones.head(n).setOnes();
    config.constraints.push_back(SimpleConstraint{Hyperplane{std::move(ones), problem.one_norm_estimate}});
  }
  return config;
}

}  // namespace bpsfp
