#include "fsipl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "fsipl/manifold.hpp"
#include "fsipl/rng.hpp"

namespace fsipl {

namespace {

constexpr std::uint64_t kInitSeedSalt = 0x9e3779b97f4a7c15ull;

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

double parse_double(const std::string& value, const std::string& key) {
  try {
    std::size_t used = 0;
    const double out = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return out;
  } catch (const std::exception&) {
    throw InvalidInputError("config: cannot parse '" + value + "' for key " + key);
  }
}

long parse_long(const std::string& value, const std::string& key) {
  try {
    std::size_t used = 0;
    const long out = std::stol(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return out;
  } catch (const std::exception&) {
    throw InvalidInputError("config: cannot parse '" + value + "' for key " + key);
  }
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream stream(value);
  std::string item;
  while (std::getline(stream, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

std::string format_numeric(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

ExperimentConfig ExperimentConfig::spca_defaults() {
  ExperimentConfig cfg;
  cfg.kind = "spca";
  cfg.m = 50;
  cfg.n = 2000;
  cfg.p_grid = {5};
  cfg.mu_grid = {0.5};
  cfg.repeats = 20;
  return cfg;
}

ExperimentConfig ExperimentConfig::ssc_defaults() {
  ExperimentConfig cfg;
  cfg.kind = "ssc";
  cfg.m = 0;
  cfg.n = 500;
  cfg.p_grid = {5};
  cfg.mu_grid = {0.5};
  cfg.repeats = 50;
  return cfg;
}

Eigen::MatrixXd gen_spca_data(Eigen::Index m, Eigen::Index n, std::uint64_t seed) {
  if (m < 1 || n < 1) throw InvalidInputError("gen_spca_data: dimensions must be positive");
  Rng rng(seed);
  Eigen::MatrixXd b = rng.gaussian(m, n);
  b.rowwise() -= b.colwise().mean();
  return b;
}

SscData gen_ssc_data(Eigen::Index n, Eigen::Index p, std::uint64_t seed) {
  if (n < 1 || p < 1 || p > n)
    throw InvalidInputError("gen_ssc_data: need 1 <= p <= n");
  Rng rng(seed);
  // n sample points as columns; affinity = |inner product|.
  Eigen::MatrixXd points = rng.gaussian(n, n);
  Eigen::MatrixXd w(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double affinity = std::abs(points.col(i).dot(points.col(j)));
      w(i, j) = affinity;
      w(j, i) = affinity;
    }
  }
  Eigen::VectorXd degree = w.rowwise().sum();
  if (degree.minCoeff() <= 0.0)
    throw InvalidInputError("gen_ssc_data: degenerate affinity row sum");
  const Eigen::VectorXd inv_sqrt = degree.array().rsqrt();
  SscData out;
  out.laplacian = -(inv_sqrt.asDiagonal() * w * inv_sqrt.asDiagonal());
  out.laplacian.diagonal().array() += 1.0;
  // Exact symmetry regardless of rounding in the scaling products.
  out.laplacian = 0.5 * (out.laplacian + out.laplacian.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(out.laplacian);
  out.x0 = eig.eigenvectors().leftCols(p);  // ascending eigenvalues
  // Deterministic sign: largest-magnitude entry of each column positive.
  for (Eigen::Index j = 0; j < p; ++j) {
    Eigen::Index at = 0;
    out.x0.col(j).cwiseAbs().maxCoeff(&at);
    if (out.x0(at, j) < 0.0) out.x0.col(j) = -out.x0.col(j);
  }
  return out;
}

Eigen::MatrixXd random_orthonormal(Eigen::Index n, Eigen::Index p, std::uint64_t seed) {
  if (n < 1 || p < 1 || p > n)
    throw InvalidInputError("random_orthonormal: need 1 <= p <= n");
  Rng rng(seed);
  const Eigen::MatrixXd gauss = rng.gaussian(n, p);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(gauss);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, p);
  const Eigen::MatrixXd r = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < p; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return q;
}

void apply_solver_override(SolverConfig& cfg, const std::string& key,
                           const std::string& value) {
  if (key == "gamma") cfg.gamma = parse_double(value, key);
  else if (key == "sigma") cfg.sigma = parse_double(value, key);
  else if (key == "alpha") cfg.alpha = parse_double(value, key);
  else if (key == "t_min") cfg.t_min = parse_double(value, key);
  else if (key == "t_max") cfg.t_max = parse_double(value, key);
  else if (key == "delta_bar") cfg.delta_bar = parse_double(value, key);
  else if (key == "eta_bar") cfg.eta_bar = parse_double(value, key);
  else if (key == "tau_bar") cfg.tau_bar = parse_double(value, key);
  else if (key == "theta") cfg.theta = parse_double(value, key);
  else if (key == "kappa") cfg.kappa = parse_double(value, key);
  else if (key == "rho0") cfg.rho0 = parse_double(value, key);
  else if (key == "rho_exponent") cfg.rho_exponent = parse_double(value, key);
  else if (key == "delta0") cfg.delta0 = parse_double(value, key);
  else if (key == "delta_c1") cfg.delta_c1 = parse_double(value, key);
  else if (key == "delta_c2") cfg.delta_c2 = parse_double(value, key);
  else if (key == "delta_c3") cfg.delta_c3 = parse_double(value, key);
  else if (key == "epsilon") cfg.epsilon = parse_double(value, key);
  else if (key == "max_outer") cfg.max_outer = parse_long(value, key);
  else if (key == "max_backtracks") cfg.max_backtracks = static_cast<int>(parse_long(value, key));
  else if (key == "dual_inner_cap") cfg.dual_inner_cap = parse_long(value, key);
  else throw InvalidInputError("config: unknown solver key '" + key + "'");
}

SolverConfig solver_config_for(const ExperimentConfig& cfg, const CompositeProblem& prob,
                               const ManifoldSpec& manifold) {
  SolverConfig solver = cfg.kind == "ssc" ? SolverConfig::ssc_defaults(prob, manifold)
                                          : SolverConfig::spca_defaults(prob, manifold);
  for (const auto& [key, value] : cfg.solver_overrides)
    apply_solver_override(solver, key, value);
  return solver;
}

Eigen::MatrixXd load_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInputError("load_matrix_csv: cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    std::vector<double> row;
    for (const std::string& cell : split_list(line))
      row.push_back(parse_double(cell, "matrix cell"));
    if (!rows.empty() && row.size() != rows.front().size())
      throw InvalidInputError("load_matrix_csv: ragged rows in " + path);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InvalidInputError("load_matrix_csv: empty matrix in " + path);
  Eigen::MatrixXd out(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) out(i, j) = rows[i][j];
  return out;
}

ExperimentConfig parse_experiment_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInputError("config: cannot open " + path);
  ExperimentConfig cfg;
  bool kind_seen = false;
  std::string section;
  std::string line;
  int line_no = 0;
  // First pass records raw pairs so kind-dependent defaults resolve first.
  std::vector<std::pair<std::string, std::string>> experiment_pairs;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      if (section != "experiment" && section != "solver")
        throw InvalidInputError("config: unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InvalidInputError("config: line " + std::to_string(line_no) +
                              " is not key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section == "solver") {
      cfg.solver_overrides[key] = value;
    } else if (section == "experiment") {
      if (key == "kind") kind_seen = true;
      experiment_pairs.emplace_back(key, value);
    } else {
      throw InvalidInputError("config: key '" + key + "' outside any section");
    }
  }
  if (!kind_seen) throw InvalidInputError("config: [experiment] must set kind");

  for (const auto& [key, value] : experiment_pairs)
    if (key == "kind") {
      if (value != "spca" && value != "ssc")
        throw InvalidInputError("config: kind must be spca or ssc");
      const auto overrides = cfg.solver_overrides;
      cfg = value == "spca" ? ExperimentConfig::spca_defaults()
                            : ExperimentConfig::ssc_defaults();
      cfg.solver_overrides = overrides;
    }
  for (const auto& [key, value] : experiment_pairs) {
    if (key == "kind") continue;
    if (key == "m") cfg.m = parse_long(value, key);
    else if (key == "n") cfg.n = parse_long(value, key);
    else if (key == "repeats") cfg.repeats = static_cast<int>(parse_long(value, key));
    else if (key == "base_seed") cfg.base_seed = static_cast<std::uint64_t>(parse_long(value, key));
    else if (key == "out_dir") cfg.out_dir = value;
    else if (key == "threads") cfg.threads = static_cast<int>(parse_long(value, key));
    else if (key == "theta") cfg.theta = parse_double(value, key);
    else if (key == "data_file") cfg.data_file = value;
    else if (key == "p_grid") {
      cfg.p_grid.clear();
      for (const std::string& item : split_list(value))
        cfg.p_grid.push_back(parse_long(item, key));
    } else if (key == "mu_grid") {
      cfg.mu_grid.clear();
      for (const std::string& item : split_list(value))
        cfg.mu_grid.push_back(parse_double(item, key));
    } else {
      throw InvalidInputError("config: unknown experiment key '" + key + "'");
    }
  }
  return cfg;
}

namespace {

struct RunTask {
  Eigen::Index p = 0;
  double mu = 0.0;
  int repeat = 0;
  std::size_t index = 0;
};

struct RunOutput {
  RunRecord record;
  std::vector<IterationRow> trajectory;
};

std::string make_run_id(const RunTask& task) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "p%lld_mu%g_r%d", static_cast<long long>(task.p), task.mu,
                task.repeat);
  return buf;
}

RunOutput execute_run(const ExperimentConfig& cfg, const RunTask& task,
                      const std::optional<Eigen::MatrixXd>& fixed_data) {
  const std::uint64_t seed = cfg.base_seed + static_cast<std::uint64_t>(task.index);
  RunOutput out;
  out.record.run_id = make_run_id(task);
  out.record.kind = cfg.kind;
  out.record.m = cfg.kind == "spca" ? cfg.m : 0;
  out.record.n = cfg.n;
  out.record.p = task.p;
  out.record.mu = task.mu;
  out.record.repeat_index = task.repeat;
  out.record.seed = seed;

  CompositeProblem prob;
  Eigen::MatrixXd x0;
  if (cfg.kind == "spca") {
    const Eigen::MatrixXd b =
        fixed_data ? *fixed_data : gen_spca_data(cfg.m, cfg.n, seed);
    prob = spca_instance(b, task.mu, cfg.theta, task.p);
    x0 = random_orthonormal(b.cols(), task.p, seed ^ kInitSeedSalt);
  } else {
    if (fixed_data) {
      prob = ssc_instance(*fixed_data, task.mu, cfg.theta, task.p);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(*fixed_data);
      x0 = eig.eigenvectors().leftCols(task.p);
      for (Eigen::Index j = 0; j < x0.cols(); ++j) {
        Eigen::Index at = 0;
        x0.col(j).cwiseAbs().maxCoeff(&at);
        if (x0(at, j) < 0.0) x0.col(j) = -x0.col(j);
      }
    } else {
      SscData data = gen_ssc_data(cfg.n, task.p, seed);
      prob = ssc_instance(data.laplacian, task.mu, cfg.theta, task.p);
      x0 = std::move(data.x0);
    }
  }
  const ManifoldSpec manifold = ManifoldSpec::stiefel(prob.rows, prob.cols, cfg.theta);
  const SolverConfig solver_cfg = solver_config_for(cfg, prob, manifold);

  auto take = [&](const SolveReport& report, const std::string& reason) {
    out.record.final_objective = report.final_objective;
    out.record.wall_seconds = report.wall_seconds;
    out.record.iterations = report.iterations;
    out.record.proj_count = report.proj_count;
    out.record.termination = reason;
    out.trajectory = report.rows;
  };
  try {
    const SolveReport report = solve(prob, manifold, solver_cfg, x0);
    take(report, termination_name(report.termination));
  } catch (const LineSearchFailureError& err) {
    take(err.partial, "line-search-failure");
  }
  return out;
}

void write_trajectory(const std::string& dir, const RunRecord& record,
                      const std::vector<IterationRow>& rows) {
  std::ofstream out(dir + "/trajectory_" + record.run_id + ".csv");
  out << "k,objective,residual,h_norm,t,delta,eta,tau,backtracks,cumulative_proj\n";
  long cumulative = 0;
  for (const IterationRow& row : rows) {
    cumulative += row.used_projection ? 1 : 0;
    out << row.k << ',' << format_numeric(row.objective) << ','
        << format_numeric(row.residual) << ',' << format_numeric(row.h_norm) << ','
        << format_numeric(row.t) << ',' << format_numeric(row.delta) << ','
        << format_numeric(row.eta) << ',' << format_numeric(row.tau) << ','
        << row.backtracks << ',' << cumulative << '\n';
  }
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  if (cfg.kind != "spca" && cfg.kind != "ssc")
    throw InvalidInputError("run_experiment: kind must be spca or ssc");
  if (cfg.repeats < 1) throw InvalidInputError("run_experiment: repeats must be positive");
  if (cfg.p_grid.empty() || cfg.mu_grid.empty())
    throw InvalidInputError("run_experiment: empty parameter grid");
  if (cfg.threads < 1) throw InvalidInputError("run_experiment: threads must be positive");

  std::filesystem::create_directories(cfg.out_dir);
  std::optional<Eigen::MatrixXd> fixed_data;
  if (!cfg.data_file.empty()) fixed_data = load_matrix_csv(cfg.data_file);

  std::vector<RunTask> tasks;
  for (const Eigen::Index p : cfg.p_grid)
    for (const double mu : cfg.mu_grid)
      for (int r = 0; r < cfg.repeats; ++r)
        tasks.push_back({p, mu, r, tasks.size()});

  std::vector<std::optional<RunOutput>> outputs(tasks.size());
  std::exception_ptr failure;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size() || abort.load()) return;
      try {
        outputs[i] = execute_run(cfg, tasks[i], fixed_data);
      } catch (...) {
        abort.store(true);
        failure = std::current_exception();
        return;
      }
    }
  };
  const int workers = std::min<int>(cfg.threads, static_cast<int>(tasks.size()));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  ExperimentResult result;
  result.out_dir = cfg.out_dir;
  for (const auto& output : outputs) result.runs.push_back(output->record);

  // Aggregate rows in grid order.
  for (const Eigen::Index p : cfg.p_grid) {
    for (const double mu : cfg.mu_grid) {
      AggregateRow agg;
      agg.kind = cfg.kind;
      agg.p = p;
      agg.mu = mu;
      for (const RunRecord& run : result.runs) {
        if (run.p != p || run.mu != mu) continue;
        ++agg.repeats;
        agg.mean_objective += run.final_objective;
        agg.mean_seconds += run.wall_seconds;
        agg.mean_iterations += static_cast<double>(run.iterations);
        agg.mean_proj_count += static_cast<double>(run.proj_count);
      }
      if (agg.repeats > 0) {
        agg.mean_objective /= agg.repeats;
        agg.mean_seconds /= agg.repeats;
        agg.mean_iterations /= agg.repeats;
        agg.mean_proj_count /= agg.repeats;
      }
      result.aggregate.push_back(agg);
    }
  }

  std::ofstream runs_csv(cfg.out_dir + "/runs.csv");
  runs_csv << "run_id,kind,m,n,p,mu,repeat,seed,objective,seconds,iterations,"
              "proj_count,termination\n";
  for (const RunRecord& run : result.runs) {
    runs_csv << run.run_id << ',' << run.kind << ',' << run.m << ',' << run.n << ','
             << run.p << ',' << format_numeric(run.mu) << ',' << run.repeat_index << ','
             << run.seed << ',' << format_numeric(run.final_objective) << ','
             << format_numeric(run.wall_seconds) << ',' << run.iterations << ','
             << run.proj_count << ',' << run.termination << '\n';
  }

  std::ofstream agg_csv(cfg.out_dir + "/aggregate.csv");
  agg_csv << "kind,p,mu,repeats,mean_objective,mean_seconds,mean_iterations,"
             "mean_proj_count\n";
  for (const AggregateRow& agg : result.aggregate) {
    agg_csv << agg.kind << ',' << agg.p << ',' << format_numeric(agg.mu) << ','
            << agg.repeats << ',' << format_numeric(agg.mean_objective) << ','
            << format_numeric(agg.mean_seconds) << ','
            << format_numeric(agg.mean_iterations) << ','
            << format_numeric(agg.mean_proj_count) << '\n';
  }

  for (std::size_t i = 0; i < tasks.size(); ++i)
    write_trajectory(cfg.out_dir, outputs[i]->record, outputs[i]->trajectory);

  std::ofstream meta(cfg.out_dir + "/run_meta.txt");
  meta << "generator=" << Rng::kGeneratorId << "\n"
       << "kind=" << cfg.kind << "\n"
       << "m=" << cfg.m << "\n"
       << "n=" << cfg.n << "\n"
       << "repeats=" << cfg.repeats << "\n"
       << "base_seed=" << cfg.base_seed << "\n"
       << "theta=" << format_numeric(cfg.theta) << "\n"
       << "threads=" << cfg.threads << "\n";
  meta << "p_grid=";
  for (std::size_t i = 0; i < cfg.p_grid.size(); ++i)
    meta << (i ? "," : "") << cfg.p_grid[i];
  meta << "\nmu_grid=";
  for (std::size_t i = 0; i < cfg.mu_grid.size(); ++i)
    meta << (i ? "," : "") << format_numeric(cfg.mu_grid[i]);
  meta << "\n";
  for (const auto& [key, value] : cfg.solver_overrides)
    meta << "solver." << key << "=" << value << "\n";

  return result;
}

}  // namespace fsipl
