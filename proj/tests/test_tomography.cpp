#include "oracles.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace bpsfp;

TEST(Phantom, RenderedValuesAreNonnegative) {
  const Vector img = render_phantom(32, 32, modified_shepp_logan());
  EXPECT_GE(img.minCoeff(), 0.0);
  EXPECT_NEAR(img.maxCoeff(), 1.0, 1e-12);
  EXPECT_EQ(img[0], 0.0);  // corner lies outside the head
  const Vector neg = render_phantom(4, 4, {{-1.0, 1.0, 1.0, 0.0, 0.0, 0.0}});
  EXPECT_EQ(neg, Vector::Zero(16));
}

TEST(Pgm, HeaderAndScaling) {
  Vector img(6);
  img << 0, 1, 2, 3, 4, 8;
  std::ostringstream os;
  write_pgm(os, img, 2, 3);
  const std::string s = os.str();
  ASSERT_EQ(s.substr(0, 11), "P5\n3 2\n255\n");
  ASSERT_EQ(s.size(), 17u);
  EXPECT_EQ(static_cast<unsigned char>(s[11]), 0);
  EXPECT_EQ(static_cast<unsigned char>(s[16]), 255);
  EXPECT_EQ(static_cast<unsigned char>(s[15]), 128);
  EXPECT_THROW(write_pgm(os, img, 2, 2), Error);
}

TEST(OneNormEstimate, ExactWhenRaysTileTheImage) {
  // Horizontal rays through every pixel-row centre (spacing 1) and vertical
  // rays through every column centre: each angle's data sum equals ||u||_1.
  const Index H = 10;
  const auto proj = build_parallel_projector(H, H, {0, 90}, H, static_cast<double>(H - 1));
  ASSERT_NEAR(proj.ray_spacing, 1.0, 1e-15);
  std::mt19937_64 rng(61);
  std::uniform_real_distribution<double> u(0, 2);
  Vector img(H * H);
  for (Index j = 0; j < img.size(); ++j) img[j] = u(rng);
  EXPECT_NEAR(estimate_one_norm(proj, proj.matrix->apply(img)), img.lpNorm<1>(), 1e-10);
}

TEST(TomographyConfig, Structure) {
  TomographySpec spec;
  spec.height = 8;
  spec.width = 8;
  spec.angles_deg = {0, 45, 90, 135};
  spec.rays_per_angle = 12;
  const auto problem = build_tomography_problem(spec);
  EXPECT_NEAR(problem.data.delta, 0.05 * problem.b.norm(), 1e-12);

  const auto plain = tomography_config(problem, TomoVariant::Plain, 1.0);
  const auto pos = tomography_config(problem, TomoVariant::Positive, 1.0);
  const auto one = tomography_config(problem, TomoVariant::OneNorm, 1.0);
  EXPECT_EQ(plain.constraints.size(), 2u);
  EXPECT_EQ(pos.constraints.size(), 3u);
  EXPECT_EQ(one.constraints.size(), 4u);
  EXPECT_EQ(plain.objective->dimension(), 3 * 64);
  EXPECT_TRUE(std::holds_alternative<DynamicStep>(one.step));
  const auto& plane = std::get<Hyperplane>(std::get<SimpleConstraint>(one.constraints[3]).set);
  EXPECT_EQ(plane.beta, problem.one_norm_estimate);
  EXPECT_EQ(plane.a.head(64).sum(), 64.0);
  EXPECT_EQ(plane.a.tail(128).squaredNorm(), 0.0);
}

TEST(TomographyConfig, ZeroPhantomWithoutNoiseIsFeasibleAtStart) {
  TomographySpec spec;
  spec.height = 6;
  spec.width = 6;
  spec.angles_deg = {0, 60, 120};
  spec.rays_per_angle = 8;
  spec.noise_level = 0.0;
  const Vector zero = Vector::Zero(36);
  const auto problem = build_tomography_problem(spec, &zero);
  for (auto v : {TomoVariant::Plain, TomoVariant::Positive, TomoVariant::OneNorm}) {
    const auto result = run(tomography_config(problem, v, 1.0));
    EXPECT_EQ(result.reason, Termination::Tolerance);
    EXPECT_EQ(result.iterations, 0u);
    EXPECT_EQ(result.final.x, Vector::Zero(108));
  }
}

TEST(TomographyConfig, SmallRunReducesViolations) {
  TomographySpec spec;
  spec.height = 8;
  spec.width = 8;
  spec.angles_deg = {0, 30, 60, 90, 120, 150};
  spec.rays_per_angle = 12;
  const auto problem = build_tomography_problem(spec);
  auto config = tomography_config(problem, TomoVariant::OneNorm, 1.0);
  config.max_iterations = 40000;
  config.residual_tolerance = 1e-4;
  const auto result = run(config);
  EXPECT_EQ(result.reason, Termination::Tolerance);
  const Vector u = result.final.x.head(64);
  EXPECT_GE(u.minCoeff(), -1e-4);
  EXPECT_NEAR(u.sum(), problem.one_norm_estimate, 1e-3);
}
