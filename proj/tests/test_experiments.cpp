#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace bpsfp;

TEST(GenerateInstance, DeterministicAndSparse) {
  InstanceSpec spec;
  spec.m = 20;
  spec.n = 40;
  spec.sparsity = 5;
  spec.seed = 3;
  const auto a = generate_instance(spec), b = generate_instance(spec);
  EXPECT_EQ(materialize(*a.A), materialize(*b.A));
  EXPECT_EQ(a.x_dagger, b.x_dagger);
  EXPECT_EQ((a.x_dagger.array() != 0.0).count(), 5);
  EXPECT_LE((a.b - a.A->apply(a.x_dagger)).norm(), 0.0);

  spec.seed = 4;
  EXPECT_NE(generate_instance(spec).x_dagger, a.x_dagger);
}

TEST(GenerateInstance, EmptySupport) {
  InstanceSpec spec;
  spec.m = 5;
  spec.n = 9;
  spec.sparsity = 0;
  const auto inst = generate_instance(spec);
  EXPECT_EQ(inst.x_dagger, Vector::Zero(9));
  EXPECT_EQ(inst.b, Vector::Zero(5));
}

TEST(GenerateInstance, MatrixKindsAndAmplitudes) {
  InstanceSpec spec;
  spec.m = 30;
  spec.n = 64;
  spec.sparsity = 64;
  spec.kind = MatrixKind::Bernoulli;
  spec.amplitudes = AmplitudeModel::Bernoulli;
  auto inst = generate_instance(spec);
  EXPECT_TRUE((materialize(*inst.A).array().abs() == 1.0).all());
  EXPECT_TRUE((inst.x_dagger.array().abs() == 1.0).all());

  spec.kind = MatrixKind::PartialDCT;
  spec.sparsity = 50;
  spec.amplitudes = AmplitudeModel::LargeDynamicRange;
  inst = generate_instance(spec);
  const Eigen::MatrixXd m = materialize(*inst.A);
  EXPECT_LE((m * m.transpose() - Eigen::MatrixXd::Identity(30, 30)).norm(), 1e-12);

  // log10 |x| uniform on [0, 5]: mean 2.5, variance 25/12.
  spec.n = 4000;
  spec.m = 10;
  spec.sparsity = 4000;
  spec.kind = MatrixKind::Gaussian;
  inst = generate_instance(spec);
  const Eigen::ArrayXd logs = inst.x_dagger.array().abs().log10();
  EXPECT_GE(logs.minCoeff(), 0.0);
  EXPECT_LE(logs.maxCoeff(), 5.0);
  const double mean = logs.mean();
  EXPECT_NEAR(mean, 2.5, 0.1);
  EXPECT_NEAR((logs - mean).square().mean(), 25.0 / 12.0, 0.15);
  EXPECT_THROW(parse_matrix_kind("haar"), Error);
}

TEST(InjectNoise, ZeroLevelsLeaveDataUnchanged) {
  const Vector b = Vector::LinSpaced(10, -2, 3);
  for (const NoiseModel& model : {NoiseModel{ImpulsiveNoise{0}}, NoiseModel{UniformNoise{0.0}}, NoiseModel{GaussianNoise{0.0}}}) {
    const auto d = inject_noise(b, model, 1);
    EXPECT_EQ(d.b_delta, b);
    EXPECT_EQ(d.delta, 0.0);
  }
}

TEST(InjectNoise, DeltaIdentitiesAndModels) {
  const Vector b = Vector::LinSpaced(10, -2, 3);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto imp = inject_noise(b, ImpulsiveNoise{3}, seed);
    EXPECT_EQ(imp.norm, NormType::L1);
    EXPECT_NEAR(imp.delta, (b - imp.b_delta).lpNorm<1>(), 1e-12);
    int changed = 0;
    for (Index i = 0; i < 10; ++i) {
      if (imp.b_delta[i] != b[i]) {
        ++changed;
        EXPECT_TRUE(imp.b_delta[i] == 3.0 || imp.b_delta[i] == -2.0);
      }
    }
    // An entry already at the extreme can be "replaced" by itself.
    EXPECT_LE(changed, 3);

    const auto uni = inject_noise(b, UniformNoise{1.0}, seed);
    EXPECT_NEAR(uni.delta, (b - uni.b_delta).lpNorm<Eigen::Infinity>(), 1e-12);
    EXPECT_LE(uni.delta, 1.0);

    const auto gau = inject_noise(b, GaussianNoise{0.05}, seed);
    EXPECT_NEAR(gau.delta, (b - gau.b_delta).norm(), 1e-12);
    EXPECT_NEAR(gau.delta, 0.05 * b.norm(), 1e-12);
  }
  int exact_three = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    exact_three += ((inject_noise(b, ImpulsiveNoise{3}, seed).b_delta - b).array() != 0.0).count() == 3;
  }
  EXPECT_GT(exact_three, 0);
}

TEST(CertifyLambda, Examples) {
  InstanceSpec spec;
  spec.m = 30;
  spec.n = 60;
  spec.sparsity = 3;
  spec.seed = 11;
  const auto inst = generate_instance(spec);
  CertificationOptions opts;
  opts.iterations = 20000;
  const auto cert = certify_lambda(inst.A, inst.x_dagger, inst.b, default_lambda_candidates(inst.x_dagger), opts);
  EXPECT_LE(cert.sup_error, 1e-5 * (1 + inst.x_dagger.lpNorm<Eigen::Infinity>()));
  EXPECT_LE((cert.x_pd - inst.x_dagger).lpNorm<Eigen::Infinity>(), cert.sup_error);

  spec.sparsity = 30;
  const auto dense_inst = generate_instance(spec);
  try {
    certify_lambda(dense_inst.A, dense_inst.x_dagger, dense_inst.b, default_lambda_candidates(dense_inst.x_dagger), opts);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::CertificationFailed);
  }

  spec.sparsity = 0;
  const auto zero = generate_instance(spec);
  opts.iterations = 10;
  EXPECT_EQ(certify_lambda(zero.A, zero.x_dagger, zero.b, {0.01}, opts).lambda, 0.01);
}
