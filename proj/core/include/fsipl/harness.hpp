#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fsipl/composite.hpp"
#include "fsipl/solver.hpp"

namespace fsipl {

// Batch experiment description.  Field names double as config-file keys in
// the [experiment] section; solver_overrides mirrors the [solver] section
// with SolverConfig field names as keys.
struct ExperimentConfig {
  std::string kind = "spca";  // "spca" | "ssc"
  Eigen::Index m = 50;        // SPCA sample count (rows of B)
  Eigen::Index n = 2000;      // ambient row dimension
  std::vector<Eigen::Index> p_grid = {5};
  std::vector<double> mu_grid = {0.5};
  int repeats = 20;
  std::uint64_t base_seed = 1;
  std::string out_dir = "results";
  int threads = 1;
  double theta = 0.3;
  std::string data_file;  // optional CSV matrix replacing synthetic data
  std::map<std::string, std::string> solver_overrides;

  static ExperimentConfig spca_defaults();
  static ExperimentConfig ssc_defaults();
};

// Flat record of one solve inside a batch.
struct RunRecord {
  std::string run_id;
  std::string kind;
  Eigen::Index m = 0;
  Eigen::Index n = 0;
  Eigen::Index p = 0;
  double mu = 0.0;
  int repeat_index = 0;
  std::uint64_t seed = 0;
  double final_objective = 0.0;
  double wall_seconds = 0.0;
  long iterations = 0;
  long proj_count = 0;
  std::string termination;
};

struct AggregateRow {
  std::string kind;
  Eigen::Index p = 0;
  double mu = 0.0;
  int repeats = 0;
  double mean_objective = 0.0;
  double mean_seconds = 0.0;
  double mean_iterations = 0.0;
  double mean_proj_count = 0.0;
};

struct ExperimentResult {
  std::vector<RunRecord> runs;
  std::vector<AggregateRow> aggregate;
  std::string out_dir;
};

// Centered Gaussian data matrix for SPCA: m x n iid standard normals with
// each column shifted to zero mean.  Bit-identical for a given seed.
Eigen::MatrixXd gen_spca_data(Eigen::Index m, Eigen::Index n, std::uint64_t seed);

// Similarity-graph spectral clustering data: n random points in R^n give
// affinities W_ij = |<a_i, a_j>| (diagonal |a_i|^2), degree-normalized into
// L = I - S^{-1/2} W S^{-1/2}; x0 holds the p eigenvectors of the p smallest
// eigenvalues (deterministic sign convention).
struct SscData {
  Eigen::MatrixXd laplacian;
  Eigen::MatrixXd x0;
};
SscData gen_ssc_data(Eigen::Index n, Eigen::Index p, std::uint64_t seed);

// Orthonormal initial point: QR factor of a seeded Gaussian matrix with the
// sign convention that makes R's diagonal nonnegative.
Eigen::MatrixXd random_orthonormal(Eigen::Index n, Eigen::Index p, std::uint64_t seed);

// Runs the full grid (p x mu x repeats), one seeded deterministic solve per
// cell, optionally across worker threads (collection order is normalized, so
// non-timing output is thread-count independent).  Writes runs.csv,
// aggregate.csv, trajectory_<runid>.csv, and run_meta.txt into out_dir.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Dense matrix from a comma-separated file, one row per line.
Eigen::MatrixXd load_matrix_csv(const std::string& path);

// Sectioned key=value config file with [experiment] and [solver] sections.
ExperimentConfig parse_experiment_file(const std::string& path);

// Applies one [solver]-section override; throws InvalidInputError on an
// unknown key or unparseable value.
void apply_solver_override(SolverConfig& cfg, const std::string& key,
                           const std::string& value);

// Builds the SolverConfig for one grid cell: the per-kind defaults with the
// experiment's overrides applied.
SolverConfig solver_config_for(const ExperimentConfig& cfg, const CompositeProblem& prob,
                               const ManifoldSpec& manifold);

// Doubles rendered with 17 significant digits (round-trip exact).
std::string format_numeric(double value);

}  // namespace fsipl
