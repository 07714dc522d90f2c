// Command-line front end: batch experiment runners for the two bundled
// problem families, a config-file driven runner, and a quick self test.

#include <CLI11.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "fsipl/fsipl.hpp"

namespace {

using fsipl::ExperimentConfig;
using fsipl::ExperimentResult;

// Shared experiment flags; p and mu accept repeated values to form a grid.
struct GridArgs {
  long long n = 0;
  long long m = 0;
  std::vector<long long> p;
  std::vector<double> mu;
  int repeats = 0;
  std::uint64_t seed = 0;
  std::string out;
  int threads = 0;
  double eps = 0.0;
  long long max_iter = 0;
  double theta = 0.0;
};

void add_grid_flags(CLI::App* cmd, GridArgs* args, bool with_samples) {
  cmd->add_option("--n", args->n, "ambient row dimension");
  if (with_samples) cmd->add_option("--m", args->m, "sample count (rows of the data matrix)");
  cmd->add_option("--p", args->p, "column counts to sweep (repeatable)");
  cmd->add_option("--mu", args->mu, "sparsity weights to sweep (repeatable)");
  cmd->add_option("--repeats", args->repeats, "seeded repetitions per grid cell");
  cmd->add_option("--seed", args->seed, "base seed; run seeds are base + task index");
  cmd->add_option("--out", args->out, "output directory for CSV results");
  cmd->add_option("--threads", args->threads, "worker threads (results independent of count)");
  cmd->add_option("--eps", args->eps, "stationarity target on the residual");
  cmd->add_option("--max-iter", args->max_iter, "outer iteration cap");
  cmd->add_option("--theta", args->theta, "feasibility safeguard radius in (0, 1/2)");
}

void apply_grid_args(ExperimentConfig& cfg, const GridArgs& args) {
  if (args.n > 0) cfg.n = args.n;
  if (args.m > 0) cfg.m = args.m;
  if (!args.p.empty())
    cfg.p_grid.assign(args.p.begin(), args.p.end());
  if (!args.mu.empty()) cfg.mu_grid = args.mu;
  if (args.repeats > 0) cfg.repeats = args.repeats;
  if (args.seed != 0) cfg.base_seed = args.seed;
  if (!args.out.empty()) cfg.out_dir = args.out;
  if (args.threads > 0) cfg.threads = args.threads;
  if (args.theta > 0) cfg.theta = args.theta;
  if (args.eps > 0) cfg.solver_overrides["epsilon"] = fsipl::format_numeric(args.eps);
  if (args.max_iter > 0) cfg.solver_overrides["max_outer"] = std::to_string(args.max_iter);
}

void print_summary(const ExperimentResult& result) {
  std::printf("%-6s %6s %10s %8s %16s %10s %10s %10s\n", "kind", "p", "mu", "repeats",
              "mean_objective", "mean_sec", "mean_iter", "mean_proj");
  for (const auto& row : result.aggregate) {
    std::printf("%-6s %6lld %10.4g %8d %16.8g %10.3f %10.1f %10.1f\n", row.kind.c_str(),
                static_cast<long long>(row.p), row.mu, row.repeats, row.mean_objective,
                row.mean_seconds, row.mean_iterations, row.mean_proj_count);
  }
  std::printf("results written to %s\n", result.out_dir.c_str());
}

int run_grid(ExperimentConfig cfg, const GridArgs& args) {
  apply_grid_args(cfg, args);
  print_summary(fsipl::run_experiment(cfg));
  return 0;
}

// Fast invariant sweep: a handful of checks per module, seconds total.
// Returns the number of failed checks.
int run_selftest(std::uint64_t seed) {
  int failures = 0;
  auto check = [&failures](bool ok, const std::string& name) {
    std::printf("%s: %s\n", ok ? "ok" : "FAIL", name.c_str());
    if (!ok) ++failures;
  };

  fsipl::Rng rng(seed);

  {  // Scalar soft threshold against a derivative-free 1-d minimizer.
    double worst = 0.0;
    for (int i = 0; i < 25; ++i) {
      const double z = 4.0 * rng.normal();
      const double t = 0.05 + 2.0 * rng.uniform();
      const double mu = 0.1 + rng.uniform();
      const double got = std::copysign(std::max(std::abs(z) - t * mu, 0.0), z);
      worst = std::max(worst, std::abs(got - fsipl::scalar_prox_bruteforce(mu, t, z)));
    }
    check(worst <= 1e-8, "soft threshold matches brute-force prox");
  }

  {  // Dual gradient vs central differences on a small non-identity instance.
    const Eigen::Index n = 6, p = 2;
    const auto manifold = fsipl::ManifoldSpec::oblique(n, p);
    Eigen::MatrixXd gram = rng.gaussian(n, n);
    gram = Eigen::MatrixXd(0.5 / double(n) * (gram * gram.transpose()));
    gram = Eigen::MatrixXd(0.5 * (gram + gram.transpose()));
    auto prob = fsipl::ssc_instance(gram, 0.4, manifold.theta(), p);
    const Eigen::MatrixXd x = fsipl::random_orthonormal(n, p, seed ^ 17);
    const double t = 0.3;
    Eigen::MatrixXd lam = rng.gaussian(p, 1), mu = rng.gaussian(n, n);
    auto value = [&](const Eigen::MatrixXd& l, const Eigen::MatrixXd& m) {
      return fsipl::dual_value(prob, manifold, x, t, l, m);
    };
    const auto grad = fsipl::dual_gradient(prob, manifold, x, t, lam, mu);
    double worst = 0.0;
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
      Eigen::MatrixXd lp = lam, lm = lam;
      lp(i) += h;
      lm(i) -= h;
      worst = std::max(worst, std::abs((value(lp, mu) - value(lm, mu)) / (2 * h) - grad.grad_lam(i)));
    }
    for (Eigen::Index i = 0; i < mu.size(); ++i) {
      Eigen::MatrixXd mp = mu, mm = mu;
      mp(i) += h;
      mm(i) -= h;
      worst = std::max(worst, std::abs((value(lam, mp) - value(lam, mm)) / (2 * h) - grad.grad_mu(i)));
    }
    check(worst <= 1e-5, "dual gradient matches finite differences");
  }

  {  // Identity-map reduced dual: recovered multiplier zeroes the full gradient.
    const Eigen::Index n = 8, p = 2;
    const auto manifold = fsipl::ManifoldSpec::stiefel(n, p);
    auto prob = fsipl::spca_instance(rng.gaussian(5, n), 0.5, manifold.theta(), p);
    const Eigen::MatrixXd x = fsipl::random_orthonormal(n, p, seed ^ 99);
    const auto sub = fsipl::solve_identity_shortcut(prob, manifold, x, 0.2, 1e-11, {});
    const auto grad =
        fsipl::dual_gradient(prob, manifold, x, 0.2, sub.dual.lam, sub.dual.mu);
    check(grad.grad_mu.norm() <= 1e-9 && grad.grad_lam.norm() <= 1e-9,
          "identity shortcut solves the full dual");
  }

  {  // Metric-operator spectrum stays inside the guaranteed window near M.
    const auto manifold = fsipl::ManifoldSpec::stiefel(7, 3);
    bool ok = true;
    for (int i = 0; i < 10 && ok; ++i) {
      Eigen::MatrixXd x = fsipl::random_orthonormal(7, 3, seed + i);
      x += 0.05 * rng.gaussian(7, 3);  // stay well inside the safeguard band
      for (int j = 0; j < 5; ++j) {
        Eigen::MatrixXd lam = rng.gaussian(3, 3);
        lam = Eigen::MatrixXd(0.5 * (lam + lam.transpose()));
        const double quad = (manifold.gram_apply(x, lam).array() * lam.array()).sum();
        const double nrm2 = lam.squaredNorm();
        ok = ok && quad >= (manifold.c1() - 1e-9) * nrm2 && quad <= (manifold.c2() + 1e-9) * nrm2;
      }
    }
    check(ok, "constraint metric spectrum within [C1, C2] near the manifold");
  }

  {  // End-to-end: a small sparse-basis solve reaches the residual target.
    const Eigen::Index n = 40, p = 3;
    const auto manifold = fsipl::ManifoldSpec::stiefel(n, p);
    auto prob = fsipl::spca_instance(fsipl::gen_spca_data(20, n, seed + 5), 0.5,
                                     manifold.theta(), p);
    auto cfg = fsipl::SolverConfig::spca_defaults(prob, manifold);
    cfg.epsilon = 1e-4;
    const auto report =
        fsipl::solve(prob, manifold, cfg, fsipl::random_orthonormal(n, p, seed + 6));
    check(report.termination == fsipl::Termination::Residual &&
              report.final_residual < cfg.epsilon && report.final_h_norm <= 1e-12,
          "small sparse-basis instance solved to stationarity");
  }

  std::printf(failures == 0 ? "selftest passed\n" : "selftest FAILED (%d)\n", failures);
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Feasibility-safeguarded inexact proximal linearized solver"};
  app.require_subcommand(1);

  GridArgs spca_args, ssc_args;
  std::string config_path;
  std::uint64_t selftest_seed = 1234;

  auto* spca = app.add_subcommand("spca", "sparse principal component batch");
  add_grid_flags(spca, &spca_args, true);
  auto* ssc = app.add_subcommand("ssc", "sparse spectral clustering batch");
  add_grid_flags(ssc, &ssc_args, false);
  auto* solve = app.add_subcommand("solve", "run a batch described by a config file");
  solve->add_option("--config", config_path, "sectioned key=value experiment file")
      ->required()
      ->check(CLI::ExistingFile);
  auto* selftest = app.add_subcommand("selftest", "quick invariant checks");
  selftest->add_option("--seed", selftest_seed, "seed for the randomized checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (spca->parsed()) return run_grid(ExperimentConfig::spca_defaults(), spca_args);
    if (ssc->parsed()) return run_grid(ExperimentConfig::ssc_defaults(), ssc_args);
    if (solve->parsed()) {
      print_summary(fsipl::run_experiment(fsipl::parse_experiment_file(config_path)));
      return 0;
    }
    if (selftest->parsed()) return run_selftest(selftest_seed);
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 2;
  }
  return 0;
}
