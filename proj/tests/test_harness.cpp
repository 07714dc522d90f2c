#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fsipl/harness.hpp"
#include "fsipl/rng.hpp"

using namespace fsipl;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
  fs::path dir = fs::temp_directory_path() / ("fsipl_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// CSV text with one column blanked, for comparisons that ignore timings.
std::string drop_column(const std::string& text, std::size_t column) {
  std::ostringstream out;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    std::istringstream cells(line);
    std::string cell;
    std::size_t i = 0;
    while (std::getline(cells, cell, ',')) {
      if (i) out << ',';
      out << (i == column ? "_" : cell);
      ++i;
    }
    out << '\n';
  }
  return out.str();
}

ExperimentConfig small_spca(const fs::path& dir) {
  ExperimentConfig cfg = ExperimentConfig::spca_defaults();
  cfg.m = 8;
  cfg.n = 16;
  cfg.p_grid = {2};
  cfg.mu_grid = {0.5};
  cfg.repeats = 2;
  cfg.base_seed = 4;
  cfg.out_dir = dir.string();
  return cfg;
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("sparse pca data generator centers and normalizes") {
  Eigen::MatrixXd b = gen_spca_data(50, 2000, 7);
  CHECK(b.rows() == 50);
  CHECK(b.cols() == 2000);
  CHECK(b.colwise().mean().cwiseAbs().maxCoeff() <= 1e-12);
  const double var = b.squaredNorm() / static_cast<double>(b.size());
  CHECK(var == doctest::Approx(1.0).epsilon(0.1));
  CHECK((gen_spca_data(50, 2000, 7) - b).norm() == 0.0);
  CHECK((gen_spca_data(50, 2000, 8) - b).norm() > 1.0);
}

TEST_CASE("clustering data generator produces a normalized laplacian pencil") {
  SscData data = gen_ssc_data(40, 3, 2);
  CHECK(data.laplacian.rows() == 40);
  CHECK((data.laplacian - data.laplacian.transpose()).norm() <= 1e-12);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(data.laplacian);
  CHECK(eig.eigenvalues().minCoeff() >= -1e-10);  // positive semidefinite
  CHECK(eig.eigenvalues().minCoeff() <= 1e-10);   // constant vector in the kernel
  CHECK((data.x0.transpose() * data.x0 - Eigen::MatrixXd::Identity(3, 3)).norm() <=
        1e-10);
  SscData again = gen_ssc_data(40, 3, 2);
  CHECK((again.laplacian - data.laplacian).norm() == 0.0);
  CHECK((again.x0 - data.x0).norm() == 0.0);
}

TEST_CASE("random orthonormal frames") {
  Eigen::MatrixXd q = random_orthonormal(12, 4, 3);
  CHECK((q.transpose() * q - Eigen::MatrixXd::Identity(4, 4)).norm() <= 1e-12);
  CHECK((random_orthonormal(12, 4, 3) - q).norm() == 0.0);
  CHECK_THROWS_AS(random_orthonormal(3, 5, 1), InvalidInputError);
}

TEST_CASE("numeric formatting survives a parse round trip") {
  Rng rng(81);
  for (int rep = 0; rep < 200; ++rep) {
    const double mag = std::pow(10.0, rng.uniform(-12.0, 12.0));
    const double v = (rng.uniform() < 0.5 ? -1.0 : 1.0) * mag * rng.uniform();
    CHECK(std::stod(format_numeric(v)) == v);
  }
  CHECK(std::stod(format_numeric(0.0)) == 0.0);
}

TEST_CASE("matrix CSV loading") {
  fs::path dir = fresh_dir("csv");
  fs::path file = dir / "m.csv";
  Rng rng(82);
  Eigen::MatrixXd m = rng.gaussian(5, 3);
  {
    std::ofstream out(file);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j)
        out << format_numeric(m(i, j)) << (j + 1 < m.cols() ? "," : "\n");
  }
  Eigen::MatrixXd back = load_matrix_csv(file.string());
  CHECK((back - m).norm() == 0.0);
  CHECK_THROWS(load_matrix_csv((dir / "missing.csv").string()));
  fs::remove_all(dir);
}

TEST_CASE("experiment run writes complete deterministic outputs") {
  fs::path dir_a = fresh_dir("runA");
  ExperimentResult res = run_experiment(small_spca(dir_a));
  REQUIRE(res.runs.size() == 2);
  CHECK(res.aggregate.size() == 1);

  const AggregateRow& agg = res.aggregate[0];
  CHECK(agg.repeats == 2);
  CHECK(agg.mean_objective ==
        doctest::Approx(0.5 * (res.runs[0].final_objective +
                               res.runs[1].final_objective))
            .epsilon(1e-12));
  CHECK(agg.mean_iterations ==
        doctest::Approx(0.5 * static_cast<double>(res.runs[0].iterations +
                                                  res.runs[1].iterations)));
  for (const RunRecord& run : res.runs) {
    CHECK(run.termination == "residual");
    CHECK(fs::exists(dir_a / ("trajectory_" + run.run_id + ".csv")));
  }
  CHECK(fs::exists(dir_a / "runs.csv"));
  CHECK(fs::exists(dir_a / "aggregate.csv"));
  CHECK(fs::exists(dir_a / "run_meta.txt"));

  fs::path dir_b = fresh_dir("runB");
  ExperimentResult rerun = run_experiment(small_spca(dir_b));
  // column 9 of runs.csv and column 5 of aggregate.csv hold wall times
  CHECK(drop_column(slurp(dir_a / "runs.csv"), 9) ==
        drop_column(slurp(dir_b / "runs.csv"), 9));
  CHECK(drop_column(slurp(dir_a / "aggregate.csv"), 5) ==
        drop_column(slurp(dir_b / "aggregate.csv"), 5));
  for (const RunRecord& run : rerun.runs)
    CHECK(slurp(dir_a / ("trajectory_" + run.run_id + ".csv")) ==
          slurp(dir_b / ("trajectory_" + run.run_id + ".csv")));
  CHECK(slurp(dir_a / "run_meta.txt") == slurp(dir_b / "run_meta.txt"));

  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
}

TEST_CASE("worker threads do not change the results") {
  fs::path dir_one = fresh_dir("thr1");
  fs::path dir_two = fresh_dir("thr2");
  ExperimentConfig one = small_spca(dir_one);
  one.repeats = 3;
  ExperimentConfig two = small_spca(dir_two);
  two.repeats = 3;
  two.threads = 2;
  run_experiment(one);
  run_experiment(two);
  CHECK(drop_column(slurp(dir_one / "runs.csv"), 9) ==
        drop_column(slurp(dir_two / "runs.csv"), 9));
  fs::remove_all(dir_one);
  fs::remove_all(dir_two);
}

TEST_CASE("config files parse into experiment and solver settings") {
  fs::path dir = fresh_dir("cfg");
  fs::path file = dir / "exp.cfg";
  {
    std::ofstream out(file);
    out << "# comment line\n"
        << "[experiment]\n"
        << "kind = ssc\n"
        << "n = 60\n"
        << "p_grid = 2,3\n"
        << "mu_grid = 0.25, 0.5\n"
        << "repeats = 4\n"
        << "base_seed = 11\n"
        << "threads = 2\n"
        << "\n"
        << "[solver]\n"
        << "epsilon = 1e-3\n"
        << "max_outer = 42\n";
  }
  ExperimentConfig cfg = parse_experiment_file(file.string());
  CHECK(cfg.kind == "ssc");
  CHECK(cfg.n == 60);
  REQUIRE(cfg.p_grid.size() == 2);
  CHECK(cfg.p_grid[1] == 3);
  REQUIRE(cfg.mu_grid.size() == 2);
  CHECK(cfg.mu_grid[0] == doctest::Approx(0.25));
  CHECK(cfg.repeats == 4);
  CHECK(cfg.base_seed == 11);
  CHECK(cfg.threads == 2);
  REQUIRE(cfg.solver_overrides.count("epsilon") == 1);
  CHECK(cfg.solver_overrides.at("max_outer") == "42");

  SscData data = gen_ssc_data(20, 2, 1);
  CompositeProblem prob = ssc_instance(data.laplacian, 0.25, cfg.theta, 2);
  ManifoldSpec man = ManifoldSpec::oblique(20, 2, cfg.theta);
  SolverConfig solver = solver_config_for(cfg, prob, man);
  CHECK(solver.epsilon == doctest::Approx(1e-3));
  CHECK(solver.max_outer == 42);

  fs::remove_all(dir);
}

TEST_CASE("unknown solver keys are refused") {
  Rng rng(83);
  CompositeProblem prob = spca_instance(rng.gaussian(4, 6), 0.5, 0.3, 2);
  SolverConfig cfg = SolverConfig::spca_defaults(prob, ManifoldSpec::stiefel(6, 2));
  CHECK_NOTHROW(apply_solver_override(cfg, "epsilon", "1e-5"));
  CHECK(cfg.epsilon == doctest::Approx(1e-5));
  CHECK_THROWS_AS(apply_solver_override(cfg, "not_a_field", "1"), InvalidInputError);
  CHECK_THROWS_AS(apply_solver_override(cfg, "epsilon", "banana"), InvalidInputError);
}

TEST_CASE("experiment validation") {
  ExperimentConfig cfg = ExperimentConfig::spca_defaults();
  cfg.kind = "unknown";
  CHECK_THROWS_AS(run_experiment(cfg), InvalidInputError);
  cfg = ExperimentConfig::spca_defaults();
  cfg.repeats = 0;
  CHECK_THROWS_AS(run_experiment(cfg), InvalidInputError);
}

}  // TEST_SUITE
