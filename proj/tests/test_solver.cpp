#include "oracles.hpp"

#include <gtest/gtest.h>

#include <set>
#include <sstream>

using namespace bpsfp;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

std::shared_ptr<DenseMatrix> dense(const Eigen::MatrixXd& m) { return std::make_shared<DenseMatrix>(m); }

std::shared_ptr<DenseMatrix> gaussian_matrix(Index m, Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd a(m, n);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j) a(i, j) = g(rng);
  return dense(a);
}

Vector sparse_vector(Index n, Index s, std::mt19937_64& rng) {
  Vector x = Vector::Zero(n);
  std::uniform_int_distribution<Index> pos(0, n - 1);
  std::normal_distribution<double> g;
  for (Index k = 0; k < s; ++k) x[pos(rng)] = g(rng);
  return x;
}

const std::vector<StepRule> kAllRules{ConstantStep{}, DynamicStep{}, ExactStep{}, InexactStep{}};

}  // namespace

TEST(BpsfpStep, MinimalErrorMatchesHandComputation) {
  auto A = dense((Eigen::MatrixXd(2, 3) << 1, 0, 1, 0, 2, -1).finished());
  const auto config = make_preset(Preset::MinimalError, A, vec({1, 2}));
  const auto start = PrimalDualPair::from_dual(*config.objective, Vector::Zero(3));
  const auto [next, rec] = bpsfp_step(config, start, 0);
  // r = (-1, -2), A^T r = (-1, -4, 1), ||r||^2 = 5, ||A^T r||^2 = 18.
  EXPECT_TRUE(next.x.isApprox(vec({5.0 / 18, 20.0 / 18, -5.0 / 18}), 1e-14));
  EXPECT_NEAR(rec.step_size, 5.0 / 18, 1e-15);
  EXPECT_NEAR(rec.w_norm, std::sqrt(5.0), 1e-15);
}

TEST(BpsfpStep, KaczmarzAndLandweberScalarCases) {
  const auto kac = make_preset(Preset::Kaczmarz, dense((Eigen::MatrixXd(1, 2) << 1, 0).finished()), vec({2}));
  const auto [x1, r1] = bpsfp_step(kac, PrimalDualPair::from_dual(*kac.objective, Vector::Zero(2)), 0);
  EXPECT_EQ(x1.x, vec({2, 0}));

  const auto lw = make_preset(Preset::Landweber, dense(Eigen::MatrixXd::Ones(1, 1)), vec({2}));
  const auto [x2, r2] = bpsfp_step(lw, PrimalDualPair::from_dual(*lw.objective, Vector::Zero(1)), 0);
  EXPECT_NEAR(x2.x[0], 2.0, 1e-12);
}

TEST(BpsfpStep, FeasibleStateIsNoOp) {
  auto A = dense((Eigen::MatrixXd(2, 3) << 1, 0, 1, 0, 2, -1).finished());
  const auto config = make_preset(Preset::LinearizedBregman, A, Vector::Zero(2), 1.0);
  const auto start = PrimalDualPair::from_dual(*config.objective, vec({0.5, -0.5, 0.25}));
  const auto [next, rec] = bpsfp_step(config, start, 0);
  EXPECT_EQ(rec.step_size, 0.0);
  EXPECT_EQ(next.x_star, start.x_star);

  const auto result = run(config);
  EXPECT_EQ(result.reason, Termination::Tolerance);
  EXPECT_EQ(result.iterations, 0u);
}

TEST(Run, ZeroIterationsReturnsInitialState) {
  auto A = dense(Eigen::MatrixXd::Identity(2, 2));
  auto config = make_preset(Preset::MinimalError, A, vec({1, 1}));
  config.max_iterations = 0;
  const auto result = run(config);
  EXPECT_EQ(result.reason, Termination::MaxIter);
  EXPECT_EQ(result.final.x, Vector::Zero(2));
  EXPECT_TRUE(result.history.empty());
}

TEST(Presets, StructureAndErrors) {
  std::mt19937_64 rng(41);
  auto A = gaussian_matrix(3, 5, rng);
  const Vector b = vec({1, 2, 3});
  EXPECT_TRUE(std::holds_alternative<ConstantStep>(make_preset(Preset::Landweber, A, b).step));
  EXPECT_TRUE(std::holds_alternative<DynamicStep>(make_preset(Preset::MinimalError, A, b).step));
  EXPECT_EQ(make_preset(Preset::Kaczmarz, A, b).constraints.size(), 3u);
  EXPECT_EQ(make_preset(Preset::SparseKaczmarz, A, b, 0.5).objective->name(), ElasticNet(0.5, 5).name());
  for (auto p : {Preset::LinearizedBregman, Preset::SparseKaczmarz}) {
    try {
      make_preset(p, A, b);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::MissingLambda);
    }
  }
  EXPECT_EQ(parse_preset("sparse_kaczmarz"), Preset::SparseKaczmarz);
  EXPECT_THROW(parse_preset("nope"), Error);
}

TEST(Presets, LinearizedBregmanConstantIsTheClassicalIteration) {
  std::mt19937_64 rng(42);
  auto A = gaussian_matrix(8, 15, rng);
  const Vector b = A->apply(sparse_vector(15, 3, rng));
  const double lambda = 0.7;
  auto config = make_preset(Preset::LinearizedBregman, A, b, lambda, ConstantStep{});
  config.max_iterations = 25;
  config.residual_tolerance = 1e-300;
  const auto result = run(config);

  const double nrm = A->norm_estimate();
  const double t = 1.0 / (nrm * nrm);
  const Eigen::MatrixXd M = A->matrix();
  Vector v = Vector::Zero(15), x = Vector::Zero(15);
  for (int k = 0; k < 25; ++k) {
    v -= t * M.transpose() * (M * x - b);
    for (Index j = 0; j < 15; ++j) x[j] = oracle::shrink(v[j], lambda);
  }
  EXPECT_LE((result.final.x - x).norm(), 1e-12 * (1 + x.norm()));
}

TEST(Run, KaczmarzConvergesOnConsistentSystem) {
  std::mt19937_64 rng(43);
  auto A = gaussian_matrix(10, 10, rng);
  const Vector x_true = sparse_vector(10, 10, rng);
  auto config = make_preset(Preset::Kaczmarz, A, A->apply(x_true));
  config.max_iterations = 100000;
  config.residual_tolerance = 1e-9;
  const auto result = run(config);
  EXPECT_EQ(result.reason, Termination::Tolerance);
  EXPECT_LE((result.final.x - x_true).norm(), 1e-6);
}

TEST(Run, PairConsistencyAndDecreaseForEveryRule) {
  std::mt19937_64 rng(44);
  auto A = gaussian_matrix(12, 30, rng);
  const Vector x_dagger = sparse_vector(30, 3, rng);
  const Vector b = A->apply(x_dagger);
  for (const auto& rule : kAllRules) {
    auto config = make_preset(Preset::LinearizedBregman, A, b, 2.0, rule);
    config.max_iterations = 300;
    const bool w_bound = std::holds_alternative<ExactStep>(rule) || std::holds_alternative<DynamicStep>(rule);
    oracle::DecreaseMonitor monitor(config.objective, x_dagger, w_bound);
    double worst_delta = 0.0;
    run(config, [&](const IterationRecord& rec, const PrimalDualPair& before, const PrimalDualPair& after) {
      monitor(rec, before, after);
      worst_delta = std::max(worst_delta, delta(*config.objective, after.x_star, after.x));
    });
    EXPECT_GE(monitor.worst_slack(), -1e-9) << to_string(rule);
    EXPECT_LE(worst_delta, 1e-8) << to_string(rule);
    EXPECT_GT(monitor.steps(), 0u);
  }
}

TEST(Run, DecreaseOnSimpleProjections) {
  std::mt19937_64 rng(45);
  auto A = gaussian_matrix(6, 12, rng);
  Vector x_dagger = sparse_vector(12, 3, rng).cwiseAbs();
  auto config = make_preset(Preset::SparseKaczmarz, A, A->apply(x_dagger), 1.0);
  config.constraints.push_back(SimpleConstraint{NonnegCone{}});
  config.constraints.push_back(SimpleConstraint{Box{Vector::Constant(12, -5.0), Vector::Constant(12, 5.0)}});
  config.control = RandomUniform{7};
  config.max_iterations = 500;
  oracle::DecreaseMonitor monitor(config.objective, x_dagger, false);
  run(config, [&](const IterationRecord& rec, const PrimalDualPair& b, const PrimalDualPair& a) { monitor(rec, b, a); });
  EXPECT_GE(monitor.worst_slack(), -1e-9);
}

TEST(StepRules, ExactEqualsDynamicForSquaredNorm) {
  std::mt19937_64 rng(46);
  auto A = gaussian_matrix(7, 11, rng);
  const Vector b = A->apply(sparse_vector(11, 11, rng));
  auto exact = make_preset(Preset::MinimalError, A, b);
  exact.step = ExactStep{};
  const auto dynamic = make_preset(Preset::MinimalError, A, b);
  auto state = PrimalDualPair::from_dual(*exact.objective, Vector::Zero(11));
  for (std::size_t k = 0; k < 50; ++k) {
    const auto [e, re] = bpsfp_step(exact, state, k);
    const auto [d, rd] = bpsfp_step(dynamic, state, k);
    EXPECT_NEAR(re.step_size, rd.step_size, 1e-12 * rd.step_size);
    state = d;
  }
}

// g'(t) <= 0 for every rule. Sufficient decrease g(t) <= g(0) + t g'(0) / 2
// is guaranteed for the constant and dynamic steps; exact and inexact steps
// only satisfy it at the dynamic step t~ <= t, i.e.
// g(t) <= g(0) + t~ g'(0) / 2, because g is nonincreasing on [0, t].
TEST(StepRules, StepConditionsHold) {
  std::mt19937_64 rng(47);
  auto A = gaussian_matrix(15, 25, rng);
  const Vector x_dagger = sparse_vector(25, 4, rng);
  const Vector b = A->apply(x_dagger);
  const Vector b_delta = b + 0.05 * Vector::Ones(15);
  const NormBall ball{NormType::L1, b_delta, 0.5};
  for (const auto& rule : kAllRules) {
    SolverConfig config;
    config.objective = std::make_shared<ElasticNet>(1.5, 25);
    config.constraints = {DifficultConstraint{A, ball}};
    config.step = rule;
    config.max_iterations = 200;
    const Objective& f = *config.objective;
    const bool at_own_step = std::holds_alternative<ConstantStep>(rule) || std::holds_alternative<DynamicStep>(rule);
    double worst_slope = -1.0, worst_decrease = -1.0;
    std::size_t steps = 0;
    run(config, [&](const IterationRecord& rec, const PrimalDualPair& before, const PrimalDualPair&) {
      if (rec.step_size == 0.0) return;
      ++steps;
      const Vector img = A->apply(before.x);
      const Vector w = img - project_orthogonal(ball, img);
      const Vector d = A->apply_adjoint(w);
      const double beta = d.dot(before.x) - w.squaredNorm();
      const double t = rec.step_size;
      const double scale = 1.0 + std::abs(beta) + d.norm() * before.x.norm();
      worst_slope = std::max(worst_slope, line_slope(f, before.x_star, d, beta, t) / scale);
      const double g0 = line_value(f, before.x_star, d, beta, 0.0);
      const double gt = line_value(f, before.x_star, d, beta, t);
      const double slope0 = line_slope(f, before.x_star, d, beta, 0.0);
      EXPECT_NEAR(slope0, -w.squaredNorm(), 1e-9 * scale);
      const double t_ref = at_own_step ? t : f.alpha() * w.squaredNorm() / d.squaredNorm();
      EXPECT_GE(t, t_ref * (1 - 1e-12));
      worst_decrease = std::max(worst_decrease, (gt - (g0 + 0.5 * t_ref * slope0)) / (1.0 + std::abs(g0)));
    });
    EXPECT_GT(steps, 0u);
    EXPECT_LE(worst_slope, 1e-9) << to_string(rule);
    EXPECT_LE(worst_decrease, 1e-9) << to_string(rule);
  }
}

TEST(Control, Sequences) {
  EXPECT_EQ(control_index(Cyclic{}, 7, 3), 1u);
  const ControlSequence rnd = RandomUniform{99};
  std::set<std::size_t> seen;
  for (std::size_t k = 0; k < 200; ++k) {
    const auto i = control_index(rnd, k, 5);
    EXPECT_EQ(i, control_index(rnd, k, 5));
    seen.insert(i);
  }
  EXPECT_EQ(seen.size(), 5u);
  EXPECT_EQ(control_index(CustomOrder{{2, 0}}, 3, 3), 0u);
  EXPECT_THROW(control_index(CustomOrder{{4}}, 0, 3), Error);
  EXPECT_THROW(control_index(CustomOrder{}, 0, 3), Error);
}

TEST(HistoryCsv, SchemaAndDeterminism) {
  std::mt19937_64 rng(48);
  auto A = gaussian_matrix(5, 9, rng);
  const Vector b = A->apply(sparse_vector(9, 2, rng));
  auto config = make_preset(Preset::LinearizedBregman, A, b, 1.0, DynamicStep{});
  config.max_iterations = 20;
  auto csv = [&] {
    std::ostringstream os;
    write_history_csv(os, run(config).history, false);
    return os.str();
  };
  const std::string first = csv();
  EXPECT_EQ(first, csv());
  EXPECT_EQ(first.substr(0, first.find('\n')), "k,constraint_index,step_size,w_norm,max_violation,objective_value");
  EXPECT_EQ(std::count(first.begin(), first.end(), '\n'), 21);

  std::ostringstream with_time;
  write_history_csv(with_time, run(config).history);
  EXPECT_NE(with_time.str().find("elapsed_ms"), std::string::npos);
}

TEST(Validate, RejectsBadConfigs) {
  SolverConfig config;
  EXPECT_THROW(run(config), Error);
  config.objective = std::make_shared<SquaredNorm>(2);
  EXPECT_THROW(run(config), Error);
  config.constraints = {DifficultConstraint{dense(Eigen::MatrixXd::Ones(1, 3)), Point{vec({1})}}};
  EXPECT_THROW(run(config), Error);
  config.constraints = {SimpleConstraint{NonnegCone{}}};
  config.residual_tolerance = 0.0;
  EXPECT_THROW(run(config), Error);
}
