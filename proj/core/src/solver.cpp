#include "fsipl/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace fsipl {

namespace {

void validate_config(const SolverConfig& cfg, const ManifoldSpec& manifold) {
  if (!(cfg.gamma > 0.0 && cfg.gamma < 1.0))
    throw InvalidInputError("solver: gamma must lie in (0, 1)");
  if (!(cfg.sigma > 0.0)) throw InvalidInputError("solver: sigma must be positive");
  if (!(cfg.t_min > 0.0 && cfg.t_max >= cfg.t_min))
    throw InvalidInputError("solver: require 0 < t_min <= t_max");
  if (!(cfg.eta_bar > 0.0))
    throw InvalidInputError("solver: eta_bar must be positive");
  if (!(cfg.delta_bar > 0.0 && cfg.delta0 > 0.0))
    throw InvalidInputError("solver: dual tolerances must be positive");
  if (!(cfg.epsilon > 0.0)) throw InvalidInputError("solver: epsilon must be positive");
  if (cfg.max_outer < 0) throw InvalidInputError("solver: max_outer must be nonnegative");
  if (cfg.max_backtracks < 1) throw InvalidInputError("solver: max_backtracks must be positive");
  if (std::abs(cfg.theta - manifold.theta()) > 1e-12 ||
      std::abs(cfg.kappa - manifold.kappa()) > 1e-12)
    throw InvalidInputError("solver: config theta/kappa must match the manifold's");
}

}  // namespace

std::string termination_name(Termination t) {
  switch (t) {
    case Termination::Residual: return "residual";
    case Termination::MaxOuter: return "max_outer";
    case Termination::SubproblemFailure: return "subproblem-failure";
  }
  return "unknown";
}

double alpha_default(const CompositeProblem& prob) {
  const double scale = prob.bound_f_grad + prob.lip_g * prob.bound_map_jac;
  return std::max(6.0 * scale, scale + 1.0);
}

SolverConfig SolverConfig::spca_defaults(const CompositeProblem& prob,
                                         const ManifoldSpec& manifold) {
  SolverConfig c;
  c.alpha = alpha_default(prob);
  c.theta = manifold.theta();
  c.kappa = manifold.kappa();
  const double p = static_cast<double>(prob.cols);
  c.rho0 = 15.0 * p * c.alpha;
  c.delta_c1 = p * p;
  c.delta_c2 = p * p;
  c.delta_c3 = 1.01;
  c.epsilon = std::min(1e-4, 1e-8 * static_cast<double>(prob.rows * prob.cols));
  c.max_outer = 5000;
  return c;
}

SolverConfig SolverConfig::ssc_defaults(const CompositeProblem& prob,
                                        const ManifoldSpec& manifold) {
  SolverConfig c;
  c.alpha = alpha_default(prob);
  c.theta = manifold.theta();
  c.kappa = manifold.kappa();
  const double p = static_cast<double>(prob.cols);
  c.rho0 = 15.0 * p * c.alpha;
  c.delta_c1 = 1.0 / p;
  c.delta_c2 = p;
  c.delta_c3 = 1.1;
  c.epsilon = 1e-4;
  c.max_outer = 1000;
  return c;
}

double bb_proximal_parameter(const CompositeProblem& prob, const ManifoldSpec& manifold,
                             const SolverConfig& cfg, const IterateState& state) {
  if (state.x_prev.size() == 0) {
    if (!(prob.lip_f_grad > 0.0))
      throw InvalidInputError("bb_proximal_parameter: lip_f_grad must be positive");
    return 1.0 / prob.lip_f_grad;
  }
  const Eigen::MatrixXd secant = state.x - state.x_prev;
  const double secant_sq = secant.squaredNorm();
  if (std::sqrt(secant_sq) < 1e-14) return state.t;

  // Constrained-gradient secant: the gradient of f seen through the rough
  // tangent projector I - Dh^T Dh / 4, plus the multiplier-weighted change of
  // the constraint Jacobian.
  auto eff_grad = [&](const Eigen::MatrixXd& z) -> Eigen::MatrixXd {
    const Eigen::MatrixXd gf = prob.smooth_grad(z);
    return gf - 0.25 * manifold.jacobian_adjoint_apply(z, manifold.jacobian_apply(z, gf));
  };
  Eigen::MatrixXd delta_r = eff_grad(state.x) - eff_grad(state.x_prev);
  const Eigen::MatrixXd dlam = state.lam_prev - state.lam_prev_prev;
  delta_r += manifold.jacobian_adjoint_apply(state.x, dlam) -
             manifold.jacobian_adjoint_apply(state.x_prev, dlam);

  // Spectral stepsize: squared secant over the (absolute) secant-gradient
  // inner product, so t tracks inverse curvature of the constrained gradient.
  const double inner = std::abs(secant.cwiseProduct(delta_r).sum());
  const double quotient = secant_sq / std::max(inner, 1e-300);
  return std::min(std::max(cfg.t_min, quotient), cfg.t_max);
}

ScheduleValues schedules(const SolverConfig& cfg, long k, double prev_d_norm, double prev_t) {
  if (k < 0) throw InvalidInputError("schedules: k must be nonnegative");
  ScheduleValues out;
  if (k == 0) {
    out.rho = cfg.rho0;
    out.delta = cfg.delta0;
    return out;
  }
  if (!(prev_t > 0.0))
    throw InvalidInputError("schedules: previous proximal parameter must be positive");
  const double kd = static_cast<double>(k);
  out.rho = cfg.rho0 / std::pow(kd, cfg.rho_exponent);
  out.delta = std::min({cfg.delta_c1 * prev_d_norm / prev_t,
                        cfg.delta_c2 / std::pow(kd, cfg.delta_c3), cfg.delta_bar});
  return out;
}

TrialPoint trial_point(const ManifoldSpec& manifold, const Eigen::MatrixXd& y, double tau) {
  if (!(tau > 0.0)) throw InvalidInputError("trial_point: tau must be positive");
  TrialPoint out;
  const double h_norm = manifold.constraint_value(y).norm();
  if (h_norm <= manifold.theta() / manifold.kappa()) {
    out.point = y - tau * manifold.correction_gradient(y);
    out.used_projection = false;
  } else {
    out.point = manifold.project_to_manifold(y);
    out.used_projection = true;
  }
  return out;
}

AcceptOutcome accept_test(const CompositeProblem& prob, const ManifoldSpec& manifold,
                          const SolverConfig& cfg, const IterateState& state,
                          const Eigen::MatrixXd& trial, double merit_at_x, double eta,
                          double tau) {
  AcceptOutcome out;
  out.trial_h_norm = manifold.constraint_value(trial).norm();
  out.trial_merit = objective(prob, trial) + cfg.alpha * out.trial_h_norm;

  if (!(out.trial_h_norm <= cfg.theta / cfg.kappa)) {
    out.accepted = false;
    return out;
  }
  const double h_y = manifold.constraint_value(state.y).norm();
  const double decrease =
      0.5 * cfg.sigma * (eta * eta * state.d.squaredNorm() + tau * tau * h_y) +
      (eta / (2.0 * state.t)) * state.v.squaredNorm();
  const double inexact_allowance =
      eta * (cfg.alpha + prob.lip_g + state.dual.lam.norm() + state.dual.mu.norm()) *
      state.delta;
  out.accepted = out.trial_merit <= merit_at_x - decrease + inexact_allowance + state.rho;
  return out;
}

double residual(const CompositeProblem& prob, const ManifoldSpec& manifold,
                const Eigen::MatrixXd& x, const Eigen::MatrixXd& d, const Eigen::MatrixXd& v,
                const Eigen::MatrixXd& lam, const Eigen::MatrixXd& mu, double t) {
  if (!(t > 0.0)) throw InvalidInputError("residual: t must be positive");
  const Eigen::MatrixXd stationarity = prob.smooth_grad(x) +
                                       prob.map_jac_adjoint(x, mu - v / t) +
                                       manifold.jacobian_adjoint_apply(x, lam);
  (void)d;
  return std::max({stationarity.norm(), v.norm(), manifold.constraint_value(x).norm()});
}

SolveReport solve(const CompositeProblem& prob, const ManifoldSpec& manifold,
                  const SolverConfig& cfg, const Eigen::MatrixXd& x0) {
  if (x0.rows() != prob.rows || x0.cols() != prob.cols)
    throw InvalidInputError("solve: starting point has wrong shape");
  if (prob.rows != manifold.rows() || prob.cols != manifold.cols())
    throw InvalidInputError("solve: problem and manifold dimensions disagree");
  validate_config(cfg, manifold);
  if (manifold.constraint_value(x0).norm() > 1e-10)
    throw InvalidInputError("solve: starting point must be feasible (|h(x0)| <= 1e-10)");

  const auto t_start = std::chrono::steady_clock::now();
  SolverConfig c = cfg;
  if (c.alpha <= 0.0) c.alpha = alpha_default(prob);
  if (c.rho0 <= 0.0) c.rho0 = 15.0 * static_cast<double>(prob.cols) * c.alpha;
  if (c.tau_bar <= 0.0) {
    // Largest correction stepsize the tube's Gram bounds certify as
    // contracting: min{2 kappa c1 / (theta L_h c2), 1 / c2}.
    c.tau_bar = std::min(
        2.0 * c.kappa * manifold.c1() / (c.theta * manifold.lip_h() * manifold.c2()),
        1.0 / manifold.c2());
  }

  SolveReport report;
  const Eigen::Index lam_cols = manifold.kind() == ManifoldSpec::Kind::Stiefel ? manifold.cols() : 1;
  IterateState st;
  st.x = x0;
  st.lam_prev = Eigen::MatrixXd::Zero(manifold.cols(), lam_cols);
  st.lam_prev_prev = st.lam_prev;

  double prev_d_norm = 0.0;
  double prev_t = 0.0;
  Termination term = Termination::MaxOuter;

  auto finalize = [&](Termination why) {
    report.termination = why;
    report.final_x = manifold.project_to_manifold(st.x);
    report.final_objective = objective(prob, report.final_x);
    report.final_h_norm = manifold.constraint_value(report.final_x).norm();
    report.final_residual = report.rows.empty() ? std::numeric_limits<double>::quiet_NaN()
                                                : report.rows.back().residual;
    report.proj_count = st.proj_count;
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  };

  for (long k = 0; k < c.max_outer; ++k) {
    st.iter = k;
    st.t = bb_proximal_parameter(prob, manifold, c, st);
    const ScheduleValues sched = schedules(c, k, prev_d_norm, prev_t);
    st.delta = sched.delta;
    st.rho = sched.rho;

    const std::optional<DualState> warm =
        (k > 0) ? std::optional<DualState>(st.dual) : std::nullopt;
    SubproblemResult sub;
    try {
      sub = prob.identity_map
                ? solve_identity_shortcut(prob, manifold, st.x, st.t, st.delta, warm,
                                          c.dual_inner_cap)
                : solve_inexact(prob, manifold, st.x, st.t, st.delta, warm, c.dual_inner_cap);
    } catch (const SubproblemFailureError&) {
      finalize(Termination::SubproblemFailure);
      report.iterations = static_cast<long>(report.rows.size());
      return report;
    }
    st.dual = sub.dual;
    st.d = sub.primal.d;
    st.v = sub.primal.v;

    IterationRow row;
    row.k = k;
    row.objective = objective(prob, st.x);
    row.h_norm = manifold.constraint_value(st.x).norm();
    row.merit_value = row.objective + c.alpha * row.h_norm;
    row.residual =
        residual(prob, manifold, st.x, st.d, st.v, st.dual.lam, st.dual.mu, st.t);
    row.d_norm = st.d.norm();
    row.v_norm = st.v.norm();
    row.t = st.t;
    row.delta = st.delta;
    row.rho = st.rho;
    row.lam_norm = st.dual.lam.norm();
    row.mu_norm = st.dual.mu.norm();
    row.inner_iterations = sub.inner_iterations;

    if (row.residual < c.epsilon) {
      report.rows.push_back(row);
      term = Termination::Residual;
      break;
    }

    double eta = c.eta_bar;
    double tau = c.tau_bar;
    int backtracks = 0;
    TrialPoint tp;
    for (;;) {
      st.y = st.x + eta * st.d;
      // Trials only mean anything inside the tube dist(y, M) <= 2 theta where
      // the feasibility bounds hold; an escape counts as a rejection.
      bool accepted = false;
      if (manifold.distance_to_manifold(st.y) <= 2.0 * c.theta) {
        tp = trial_point(manifold, st.y, tau);
        accepted =
            accept_test(prob, manifold, c, st, tp.point, row.merit_value, eta, tau).accepted;
      }
      if (accepted) break;
      eta *= c.gamma;
      tau *= 0.5 * c.gamma;
      ++backtracks;
      if (backtracks > c.max_backtracks) {
        row.eta = eta;
        row.tau = tau;
        row.backtracks = backtracks;
        report.rows.push_back(row);
        finalize(Termination::MaxOuter);
        report.iterations = static_cast<long>(report.rows.size()) - 1;
        throw LineSearchFailureError(
            "solve: line search exhausted " + std::to_string(c.max_backtracks) +
                " backtracks at iteration " + std::to_string(k),
            report, backtracks);
      }
    }

    st.eta = eta;
    st.tau = tau;
    row.eta = eta;
    row.tau = tau;
    row.backtracks = backtracks;
    row.used_projection = tp.used_projection;
    row.h_y_norm = manifold.constraint_value(st.y).norm();
    row.y_dist = manifold.distance_to_manifold(st.y);
    report.rows.push_back(row);

    st.proj_count += tp.used_projection ? 1 : 0;
    st.lam_prev_prev = st.lam_prev;
    st.lam_prev = st.dual.lam;
    st.x_prev = st.x;
    st.x = tp.point;
    prev_d_norm = row.d_norm;
    prev_t = st.t;
  }

  finalize(term);
  report.iterations = static_cast<long>(report.rows.size()) -
                      (term == Termination::Residual ? 1 : 0);
  return report;
}

}  // namespace fsipl
