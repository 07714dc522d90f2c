#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

#include "fsipl/composite.hpp"
#include "fsipl/dual_subproblem.hpp"
#include "fsipl/manifold.hpp"

namespace fsipl {

// Tuning knobs of the feasibility-safeguarded inexact proximal linearized
// solver.  Field names double as config-file keys.
struct SolverConfig {
  double gamma = 0.5;       // backtracking shrink factor for the tangent step
  double sigma = 2.0;       // sufficient-decrease weight in the accept test
  double alpha = 0.0;       // merit penalty weight (alpha_default(prob) when <= 0)
  double t_min = 1e-3;      // clamp range for the proximal parameter
  double t_max = 1e5;
  double delta_bar = 0.5;   // cap on the dual inexactness tolerance
  double eta_bar = 1.0;     // initial tangent stepsize each outer iteration
  double tau_bar = 0.0;     // initial correction stepsize; <= 0 resolves to
                            // min{2 kappa c1 / (theta L_h c2), 1 / c2}
  double theta = 0.3;       // safeguard radius (must match the manifold's)
  double kappa = 1.0;       // error-bound constant (must match the manifold's)
  double rho0 = 0.0;        // accept-test slack at k = 0 (15 p alpha when <= 0)
  double rho_exponent = 1.01;  // slack decay: rho_k = rho0 / k^rho_exponent
  double delta0 = 0.5;      // dual tolerance at k = 0
  double delta_c1 = 1.0;    // delta_k = min{c1 |d|/t, c2 / k^c3, delta_bar}
  double delta_c2 = 1.0;
  double delta_c3 = 1.01;
  double epsilon = 1e-4;    // stationarity target on the residual
  long max_outer = 5000;
  int max_backtracks = 60;  // failsafe; provably never binding for valid data
  long dual_inner_cap = 100000;

  // Per-problem presets mirroring the reference experiment settings.
  static SolverConfig spca_defaults(const CompositeProblem& prob, const ManifoldSpec& manifold);
  static SolverConfig ssc_defaults(const CompositeProblem& prob, const ManifoldSpec& manifold);
};

// Working state of one outer iteration.
struct IterateState {
  Eigen::MatrixXd x;       // current iterate (near-feasible)
  Eigen::MatrixXd x_prev;  // previous iterate (spectral estimation)
  Eigen::MatrixXd y;       // tangent trial point x + eta d
  DualState dual;          // multipliers of the current subproblem
  Eigen::MatrixXd lam_prev;       // constraint multiplier, one iteration back
  Eigen::MatrixXd lam_prev_prev;  // and two back
  Eigen::MatrixXd d;       // recovered ambient direction
  Eigen::MatrixXd v;       // recovered range displacement
  double t = 0.0;          // proximal parameter
  double delta = 0.0;      // dual inexactness tolerance
  double rho = 0.0;        // accept-test slack
  double eta = 0.0;        // accepted tangent stepsize
  double tau = 0.0;        // accepted correction stepsize
  long iter = 0;
  long proj_count = 0;
};

// One row per outer iteration; values describe the iterate at k and the step
// taken from it.  Terminating rows carry eta = tau = 0 and no trial data.
struct IterationRow {
  long k = 0;
  double objective = 0.0;       // F(x_k)
  double merit_value = 0.0;     // F(x_k) + alpha |h(x_k)|
  double residual = 0.0;        // stationarity residual at x_k
  double h_norm = 0.0;          // |h(x_k)|
  double d_norm = 0.0;
  double v_norm = 0.0;
  double t = 0.0;
  double delta = 0.0;
  double rho = 0.0;
  double eta = 0.0;
  double tau = 0.0;
  int backtracks = 0;
  bool used_projection = false;
  double lam_norm = 0.0;
  double mu_norm = 0.0;
  double h_y_norm = 0.0;        // |h(y_k)| at the accepted trial
  double y_dist = 0.0;          // dist(y_k, M) at the accepted trial
  long inner_iterations = 0;    // dual solver iterations spent at k
};

enum class Termination { Residual, MaxOuter, SubproblemFailure };

std::string termination_name(Termination t);

struct SolveReport {
  Eigen::MatrixXd final_x;  // last iterate projected onto M
  std::vector<IterationRow> rows;
  double wall_seconds = 0.0;
  Termination termination = Termination::MaxOuter;
  long iterations = 0;  // accepted outer steps
  long proj_count = 0;
  double final_objective = 0.0;
  double final_h_norm = 0.0;
  double final_residual = 0.0;
};

// Outer line search exhausted max_backtracks.  With valid problem constants
// the accept test is provably satisfiable after finitely many backtracks, so
// this is a diagnostic for broken inputs; carries the partial report.
class LineSearchFailureError : public std::runtime_error {
 public:
  LineSearchFailureError(const std::string& what, SolveReport partial, int backtracks)
      : std::runtime_error(what), partial(std::move(partial)), backtracks(backtracks) {}
  SolveReport partial;
  int backtracks;
};

// Default merit penalty weight: max{6 (l_f + l_g l_A), l_f + l_g l_A + 1},
// large enough that the merit function dominates infeasibility on the working
// neighborhood with margin.
double alpha_default(const CompositeProblem& prob);

// Spectral (quotient-of-secants) estimate of the proximal parameter from the
// last accepted step and multiplier movement, clamped to [t_min, t_max].
// Iteration 0 uses 1 / lip_f_grad.  A degenerate secant (|x - x_prev| below
// 1e-14) reuses the previous parameter.
double bb_proximal_parameter(const CompositeProblem& prob, const ManifoldSpec& manifold,
                             const SolverConfig& cfg, const IterateState& state);

struct ScheduleValues {
  double rho = 0.0;    // accept-test slack at k
  double delta = 0.0;  // dual tolerance at k
};

// rho_k = rho0 / k^rho_exponent (rho0 at k = 0); delta_0 = delta0 and
// delta_k = min{c1 |d_{k-1}| / t_{k-1}, c2 / k^c3, delta_bar}.
ScheduleValues schedules(const SolverConfig& cfg, long k, double prev_d_norm, double prev_t);

struct TrialPoint {
  Eigen::MatrixXd point;
  bool used_projection = false;
};

// Feasibility safeguard: inside the error-bound region (|h(y)| <= theta/kappa)
// take a correction step y - tau Dh(y)^T[h(y)]; outside it, project onto M.
TrialPoint trial_point(const ManifoldSpec& manifold, const Eigen::MatrixXd& y, double tau);

struct AcceptOutcome {
  bool accepted = false;
  double trial_merit = 0.0;
  double trial_h_norm = 0.0;
  explicit operator bool() const { return accepted; }
};

// Accepts the trial point iff |h(trial)| <= theta/kappa and the merit drops by
// the safeguarded sufficient-decrease amount:
//   merit(trial) <= merit(x) - (sigma/2)(eta^2 |d|^2 + tau^2 |h(y)|)
//                   - (eta / 2t) |v|^2
//                   + eta (alpha + lip_g + |lam| + |mu|) delta + rho.
// Comparisons are exact floating point; no extra slack.
AcceptOutcome accept_test(const CompositeProblem& prob, const ManifoldSpec& manifold,
                          const SolverConfig& cfg, const IterateState& state,
                          const Eigen::MatrixXd& trial, double merit_at_x, double eta,
                          double tau);

// Stationarity residual at (x, d, v, lam, mu):
//   max{ |grad f(x) + DA(x)^T[mu - v/t] + Dh(x)^T[lam]|, |v|, |h(x)| }.
double residual(const CompositeProblem& prob, const ManifoldSpec& manifold,
                const Eigen::MatrixXd& x, const Eigen::MatrixXd& d, const Eigen::MatrixXd& v,
                const Eigen::MatrixXd& lam, const Eigen::MatrixXd& mu, double t);

// Full solver loop: per outer iteration set the proximal parameter and
// schedules, solve the dual subproblem inexactly (identity shortcut when
// A = x), test the stationarity residual, then run the safeguarded line
// search.  Requires |h(x0)| <= 1e-10.  On an inner-solver cap the report is
// returned with Termination::SubproblemFailure; the final iterate is always
// projected onto M.
SolveReport solve(const CompositeProblem& prob, const ManifoldSpec& manifold,
                  const SolverConfig& cfg, const Eigen::MatrixXd& x0);

}  // namespace fsipl
