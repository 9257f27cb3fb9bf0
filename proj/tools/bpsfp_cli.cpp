// Experiment driver: step-size study, noisy recovery, tomography and a
// generic solve. Every subcommand reads an optional JSON config and writes
// CSV files (plus PGM images for tomo) into --out.

#include <CLI11.hpp>
#include <json.hpp>

#include "bpsfp/bpsfp.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

using namespace bpsfp;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> max_iter;
  std::optional<double> tol;
};

struct Context {
  json config = json::object();
  fs::path out;
  fs::path config_dir = ".";
  Options opts;
  bool any_max_iter = false;

  std::size_t max_iter(std::size_t fallback) const {
    return opts.max_iter.value_or(config.value("max_iterations", fallback));
  }
  double tol(double fallback) const { return opts.tol.value_or(config.value("tolerance", fallback)); }

  std::ofstream open(const std::string& name) const {
    std::ofstream os(out / name);
    if (!os) throw Error(ErrorKind::InvalidArgument, "cannot write " + (out / name).string());
    os << std::setprecision(17);
    return os;
  }

  void note(Termination t) { any_max_iter = any_max_iter || t == Termination::MaxIter; }
};

Context make_context(const Options& opts) {
  Context ctx;
  ctx.opts = opts;
  if (!opts.config_path.empty()) {
    std::ifstream is(opts.config_path);
    if (!is) throw Error(ErrorKind::InvalidArgument, "cannot read config " + opts.config_path);
    ctx.config = json::parse(is);
    ctx.config_dir = fs::path(opts.config_path).parent_path();
  }
  ctx.out = opts.out_dir;
  fs::create_directories(ctx.out);
  return ctx;
}

InstanceSpec instance_spec(const Context& ctx, InstanceSpec spec) {
  const json j = ctx.config.value("instance", json::object());
  spec.m = j.value("m", spec.m);
  spec.n = j.value("n", spec.n);
  spec.sparsity = j.value("sparsity", spec.sparsity);
  if (j.contains("kind")) spec.kind = parse_matrix_kind(j["kind"].get<std::string>());
  if (j.contains("amplitudes")) spec.amplitudes = parse_amplitude_model(j["amplitudes"].get<std::string>());
  spec.seed = ctx.opts.seed.value_or(j.value("seed", spec.seed));
  return spec;
}

NoiseModel noise_model(const json& j, NoiseModel fallback) {
  if (j.is_null()) return fallback;
  const std::string type = j.at("type").get<std::string>();
  if (type == "impulsive") return ImpulsiveNoise{j.value("count", Index{0})};
  if (type == "uniform") return UniformNoise{j.value("range", 0.0)};
  if (type == "gaussian") return GaussianNoise{j.value("level", 0.0)};
  throw Error(ErrorKind::InvalidArgument, "unknown noise type '" + type + "'");
}

std::vector<std::string> string_list(const json& config, const char* key, std::vector<std::string> fallback) {
  return config.contains(key) ? config[key].get<std::vector<std::string>>() : fallback;
}

/// Configured lambda, or the smallest certified candidate.
double choose_lambda(const Context& ctx, const Instance& inst) {
  if (ctx.config.contains("lambda")) return ctx.config["lambda"].get<double>();
  CertificationOptions opts;
  opts.iterations = ctx.config.value("certify_iterations", opts.iterations);
  return certify_lambda(inst.A, inst.x_dagger, inst.b, default_lambda_candidates(inst.x_dagger), opts).lambda;
}

// ---------------------------------------------------------------------------

int bench_stepsizes(Context& ctx) {
  InstanceSpec defaults;
  const Instance inst = generate_instance(instance_spec(ctx, defaults));
  const bool squared = ctx.config.value("objective", std::string("elastic_net")) == "squared_norm";
  const double lambda = squared ? 0.0 : choose_lambda(ctx, inst);
  const auto rules = string_list(ctx.config, "rules", {"constant", "dynamic", "exact", "inexact"});
  const double bnorm = inst.b.norm();

  std::vector<std::vector<double>> residuals;
  auto summary = ctx.open("summary.csv");
  auto timing = ctx.open("timing.csv");
  summary << "rule,lambda,iterations,termination,final_residual,err_rel\n";
  timing << "rule,iterations,elapsed_ms\n";
  for (const auto& name : rules) {
    auto config = make_preset(Preset::LinearizedBregman, inst.A, inst.b, lambda, parse_step_rule(name));
    if (squared) config.objective = std::make_shared<SquaredNorm>(inst.A->cols());
    config.max_iterations = ctx.max_iter(5000);
    config.residual_tolerance = ctx.tol(1e-6) * (bnorm > 0.0 ? bnorm : 1.0);
    config.record_history = false;
    std::vector<double> trace{bnorm};
    const auto res = run(config, [&](const IterationRecord&, const PrimalDualPair&, const PrimalDualPair& after) {
      trace.push_back((inst.A->apply(after.x) - inst.b).norm());
    });
    ctx.note(res.reason);
    summary << name << ',' << lambda << ',' << res.iterations << ',' << to_string(res.reason) << ',' << trace.back()
            << ',' << relative_error(res.final.x, inst.x_dagger) << '\n';
    timing << name << ',' << res.iterations << ',' << res.elapsed_ms << '\n';
    residuals.push_back(std::move(trace));
  }

  // One column per rule; finished runs repeat their last residual.
  std::size_t rows = 0;
  for (const auto& r : residuals) rows = std::max(rows, r.size());
  auto os = ctx.open("residuals.csv");
  os << 'k';
  for (const auto& name : rules) os << ",residual_" << name;
  os << '\n';
  for (std::size_t k = 0; k < rows; ++k) {
    os << k;
    for (const auto& r : residuals) os << ',' << r[std::min(k, r.size() - 1)];
    os << '\n';
  }
  return 0;
}

int noisy_recovery(Context& ctx) {
  InstanceSpec defaults;
  defaults.m = 200;
  defaults.n = 400;
  defaults.sparsity = 8;
  const InstanceSpec spec = instance_spec(ctx, defaults);
  const Instance inst = generate_instance(spec);
  const double lambda = choose_lambda(ctx, inst);
  const NoiseModel model = noise_model(ctx.config.value("noise", json()), ImpulsiveNoise{10});
  const NoisyData data = inject_noise(inst.b, model, ctx.config.value("noise_seed", spec.seed + 1000));
  const auto rules = string_list(ctx.config, "rules", {"exact", "dynamic"});

  auto summary = ctx.open("summary.csv");
  auto timing = ctx.open("timing.csv");
  summary << "method,lambda,delta,iterations,termination,objective,feasibility,err_rel\n";
  timing << "method,iterations,elapsed_ms\n";
  for (const auto& name : rules) {
    SolverConfig config;
    config.objective = std::make_shared<ElasticNet>(lambda, inst.A->cols());
    config.constraints = {DifficultConstraint{inst.A, NormBall{data.norm, data.b_delta, data.delta}}};
    config.step = parse_step_rule(name);
    config.max_iterations = ctx.max_iter(50000);
    config.residual_tolerance = ctx.tol(1e-6);
    config.record_history = true;
    std::vector<double> feas, err;
    const auto res = run(config, [&](const IterationRecord&, const PrimalDualPair&, const PrimalDualPair& after) {
      feas.push_back(norm_of(inst.A->apply(after.x) - data.b_delta, data.norm) - data.delta);
      err.push_back(relative_error(after.x, inst.x_dagger));
    });
    ctx.note(res.reason);

    auto os = ctx.open("trace_" + name + ".csv");
    os << "k,constraint_index,step_size,w_norm,max_violation,objective_value,feasibility,err_rel\n";
    for (std::size_t i = 0; i < res.history.size(); ++i) {
      const auto& r = res.history[i];
      os << r.k << ',' << r.constraint_index << ',' << r.step_size << ',' << r.w_norm << ',' << r.max_violation << ','
         << r.objective_value << ',' << feas[i] << ',' << err[i] << '\n';
    }
    const double f_final = norm_of(inst.A->apply(res.final.x) - data.b_delta, data.norm) - data.delta;
    summary << name << ',' << lambda << ',' << data.delta << ',' << res.iterations << ',' << to_string(res.reason) << ','
            << elasticnet_value(res.final.x, lambda) << ',' << f_final << ','
            << relative_error(res.final.x, inst.x_dagger) << '\n';
    timing << name << ',' << res.iterations << ',' << res.elapsed_ms << '\n';
  }

  PDConfig pd;
  pd.lambda = lambda;
  pd.A = inst.A;
  pd.b_delta = data.b_delta;
  pd.delta = data.delta;
  pd.noise_norm = data.norm;
  pd.max_iterations = ctx.config.value("pd_iterations", std::size_t{20000});
  const auto pres = run_pd(pd);
  auto os = ctx.open("trace_pd.csv");
  write_pd_history_csv(os, pres.history, pres.tau, false);
  const double pd_feas = norm_of(inst.A->apply(pres.x) - data.b_delta, data.norm) - data.delta;
  summary << "pd," << lambda << ',' << data.delta << ',' << pd.max_iterations << ",fixed,"
          << elasticnet_value(pres.x, lambda) << ',' << pd_feas << ',' << relative_error(pres.x, inst.x_dagger) << '\n';
  timing << "pd," << pd.max_iterations << ',' << (pres.history.empty() ? 0.0 : pres.history.back().elapsed_ms) << '\n';
  return 0;
}

TomoVariant parse_variant(const std::string& s) {
  if (s == "plain") return TomoVariant::Plain;
  if (s == "positive") return TomoVariant::Positive;
  if (s == "one_norm") return TomoVariant::OneNorm;
  throw Error(ErrorKind::InvalidArgument, "unknown tomography variant '" + s + "'");
}

int tomo(Context& ctx) {
  const json& c = ctx.config;
  TomographySpec spec;
  spec.height = c.value("height", spec.height);
  spec.width = c.value("width", spec.width);
  if (c.contains("angles_deg")) spec.angles_deg = c["angles_deg"].get<std::vector<double>>();
  spec.rays_per_angle = c.value("rays_per_angle", spec.rays_per_angle);
  spec.noise_level = c.value("noise_level", spec.noise_level);
  spec.lambda = c.value("lambda", spec.lambda);
  spec.seed = ctx.opts.seed.value_or(c.value("seed", spec.seed));
  const auto problem = build_tomography_problem(spec);
  const Index n = spec.height * spec.width;
  save_pgm((ctx.out / "phantom.pgm").string(), problem.phantom, spec.height, spec.width);

  auto summary = ctx.open("summary.csv");
  auto timing = ctx.open("timing.csv");
  summary << "variant,iterations,termination,data_violation,gradient_violation,error_l2\n";
  timing << "variant,iterations,elapsed_ms\n";
  const double scale = problem.phantom.maxCoeff();
  for (const auto& name : string_list(c, "variants", {"plain", "positive", "one_norm"})) {
    auto config = tomography_config(problem, parse_variant(name), spec.lambda);
    config.max_iterations = ctx.max_iter(20000);
    config.residual_tolerance = ctx.tol(1e-2);
    const auto res = run(config);
    ctx.note(res.reason);
    auto os = ctx.open("trace_" + name + ".csv");
    write_history_csv(os, res.history, false, true);
    const Vector u = res.final.x.head(n);
    summary << name << ',' << res.iterations << ',' << to_string(res.reason) << ',' << res.final_violations[0] << ','
            << res.final_violations[1] << ',' << (u - problem.phantom).norm() << '\n';
    timing << name << ',' << res.iterations << ',' << res.elapsed_ms << '\n';
    save_pgm((ctx.out / ("recon_" + name + ".pgm")).string(), u, spec.height, spec.width, scale);
  }
  return 0;
}

ControlSequence parse_control(const json& j) {
  if (j.is_null() || j == "cyclic") return Cyclic{};
  if (j.is_object() && j.contains("random")) return RandomUniform{j["random"].get<std::uint64_t>()};
  if (j.is_array()) return CustomOrder{j.get<std::vector<std::size_t>>()};
  throw Error(ErrorKind::InvalidArgument, "control must be \"cyclic\", {\"random\": seed} or an index list");
}

int solve(Context& ctx) {
  const json& c = ctx.config;
  LinearOperatorPtr A;
  Vector b;
  std::optional<Instance> inst;
  if (c.contains("matrix")) {
    fs::path path = c["matrix"].get<std::string>();
    if (path.is_relative()) path = ctx.config_dir / path;
    A = std::make_shared<SparseMatrix>(load_matrix_market(path.string()));
    const auto rhs = c.at("rhs").get<std::vector<double>>();
    b = Eigen::Map<const Vector>(rhs.data(), static_cast<Index>(rhs.size()));
  } else {
    inst = generate_instance(instance_spec(ctx, InstanceSpec{}));
    A = inst->A;
    b = inst->b;
  }

  const Preset preset = parse_preset(c.value("preset", std::string("linearized_bregman")));
  std::optional<double> lambda;
  const bool sparse = preset == Preset::LinearizedBregman || preset == Preset::SparseKaczmarz;
  if (c.contains("lambda")) {
    lambda = c["lambda"].get<double>();
  } else if (sparse && inst) {
    lambda = choose_lambda(ctx, *inst);
  }
  auto config = make_preset(preset, A, b, lambda, parse_step_rule(c.value("step", std::string("exact"))));
  if (c.contains("step") && preset != Preset::LinearizedBregman) config.step = parse_step_rule(c["step"]);
  config.control = parse_control(c.value("control", json()));
  config.max_iterations = ctx.max_iter(10000);
  config.residual_tolerance = ctx.tol(1e-6);
  const auto res = run(config);
  ctx.note(res.reason);

  auto hist = ctx.open("history.csv");
  write_history_csv(hist, res.history, false, false);
  auto sol = ctx.open("solution.csv");
  sol << "i,x\n";
  for (Index i = 0; i < res.final.x.size(); ++i) sol << i << ',' << res.final.x[i] << '\n';
  auto summary = ctx.open("summary.csv");
  summary << "preset,iterations,termination,residual,err_rel\n";
  summary << c.value("preset", std::string("linearized_bregman")) << ',' << res.iterations << ','
          << to_string(res.reason) << ',' << (A->apply(res.final.x) - b).norm() << ',';
  if (inst) summary << relative_error(res.final.x, inst->x_dagger);
  summary << '\n';
  auto timing = ctx.open("timing.csv");
  timing << "iterations,elapsed_ms\n" << res.iterations << ',' << res.elapsed_ms << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bregman projection solvers for split feasibility problems"};
  app.require_subcommand(1);
  Options opts;
  std::uint64_t seed = 0;
  std::size_t max_iter = 0;
  double tol = 0.0;

  using Handler = int (*)(Context&);
  std::vector<std::pair<CLI::App*, Handler>> commands{
      {app.add_subcommand("bench-stepsizes", "compare step-size rules on one sparse recovery instance"), bench_stepsizes},
      {app.add_subcommand("noisy-recovery", "noise-ball constrained recovery against the primal-dual comparator"),
       noisy_recovery},
      {app.add_subcommand("tomo", "TV-regularized tomography in three constraint variants"), tomo},
      {app.add_subcommand("solve", "run one preset on a generated instance or a MatrixMarket file"), solve},
  };
  for (auto& [sub, handler] : commands) {
    sub->add_option("--config", opts.config_path, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--out", opts.out_dir, "output directory")->capture_default_str();
    sub->add_option("--seed", seed, "instance seed");
    sub->add_option("--max-iter", max_iter, "iteration cap per run");
    sub->add_option("--tol", tol, "residual tolerance")->check(CLI::PositiveNumber);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  for (auto& [sub, handler] : commands) {
    if (!sub->parsed()) continue;
    if (sub->count("--seed")) opts.seed = seed;
    if (sub->count("--max-iter")) opts.max_iter = max_iter;
    if (sub->count("--tol")) opts.tol = tol;
    try {
      Context ctx = make_context(opts);
      const int code = handler(ctx);
      return code != 0 ? code : (ctx.any_max_iter ? 2 : 0);
    } catch (const Error& e) {
      std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
    }
    return 1;
  }
  return 1;
}
