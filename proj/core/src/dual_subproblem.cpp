#include "fsipl/dual_subproblem.hpp"

#include <Eigen/QR>

#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <utility>

namespace fsipl {

namespace {

constexpr double kMinTol = 1e-14;

// Warm starts must not freeze the primal recovery: a warm solve also shrinks
// its own starting gradient by at least this factor (see lbfgs_descent).
// Cold starts keep the requested tolerance so a generous delta can return the
// zero multipliers untouched.
constexpr double kStartShrink = 0.25;

void check_inputs(const CompositeProblem& prob, const Eigen::MatrixXd& x, double t,
                  const char* op) {
  if (x.rows() != prob.rows || x.cols() != prob.cols)
    throw InvalidInputError(std::string(op) + ": point has wrong shape");
  if (!(t > 0.0)) throw InvalidInputError(std::string(op) + ": t must be positive");
}

Eigen::VectorXd pack_pair(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::VectorXd out(a.size() + b.size());
  out.head(a.size()) = Eigen::Map<const Eigen::VectorXd>(a.data(), a.size());
  out.tail(b.size()) = Eigen::Map<const Eigen::VectorXd>(b.data(), b.size());
  return out;
}

struct DescentOutcome {
  Eigen::VectorXd point;
  double grad_norm = 0.0;
  long iterations = 0;
  bool converged = false;
  Eigen::VectorXd best_point;
  double best_grad_norm = std::numeric_limits<double>::infinity();
};

// Limited-memory BFGS on a smooth convex objective with Armijo backtracking.
// Gradient-only, so it satisfies the first-order method contract.  Stops when
// the gradient norm reaches tol; the effective tolerance is tightened to a
// fraction of the starting gradient so a warm start that already sits inside
// tol still makes fresh progress (tightening never violates the requested
// bound).
DescentOutcome lbfgs_descent(const std::function<double(const Eigen::VectorXd&)>& value,
                             const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& grad,
                             Eigen::VectorXd start, double tol, long max_iters,
                             double lip_estimate, double start_shrink) {
  constexpr double kEps = std::numeric_limits<double>::epsilon();
  constexpr int kMemory = 12;
  constexpr double kArmijo = 1e-4;

  DescentOutcome out;
  Eigen::VectorXd z = std::move(start);
  double fz = value(z);
  Eigen::VectorXd gz = grad(z);
  double gn = gz.norm();
  out.best_point = z;
  out.best_grad_norm = gn;
  if (start_shrink < 1.0) tol = std::max(std::min(tol, start_shrink * gn), kMinTol);

  std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> pairs;  // (s, y)
  double h0 = 1.0 / std::max(lip_estimate, 1e-12);

  for (long it = 0; it < max_iters; ++it) {
    if (gn <= tol) {
      out.point = z;
      out.grad_norm = gn;
      out.iterations = it;
      out.converged = true;
      return out;
    }

    // Two-loop recursion for the quasi-Newton direction.
    Eigen::VectorXd dir = -gz;
    std::vector<double> alpha(pairs.size());
    for (std::size_t i = pairs.size(); i-- > 0;) {
      const auto& [s, y] = pairs[i];
      alpha[i] = s.dot(dir) / s.dot(y);
      dir -= alpha[i] * y;
    }
    dir *= h0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const auto& [s, y] = pairs[i];
      const double beta = y.dot(dir) / s.dot(y);
      dir += (alpha[i] - beta) * s;
    }
    double slope = gz.dot(dir);
    if (!(slope < 0.0)) {
      // Degenerate metric: fall back to a plain gradient step.
      pairs.clear();
      dir = -h0 * gz;
      slope = gz.dot(dir);
    }

    // Armijo backtracking with a rounding allowance so machine-precision
    // values do not force endless halving.
    double step = 1.0;
    Eigen::VectorXd zn;
    double fn = 0.0;
    bool moved = false;
    for (int halving = 0; halving < 60; ++halving) {
      zn = z + step * dir;
      fn = value(zn);
      const double slack = 8.0 * kEps * (std::abs(fz) + std::abs(fn) + 1.0);
      if (fn <= fz + kArmijo * step * slope + slack) {
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;  // numerical floor: no direction yields decrease

    const Eigen::VectorXd gzn = grad(zn);
    const Eigen::VectorXd s = zn - z;
    const Eigen::VectorXd y = gzn - gz;
    const double sy = s.dot(y);
    if (sy > 1e-10 * s.norm() * y.norm()) {
      pairs.emplace_back(s, y);
      if (pairs.size() > kMemory) pairs.pop_front();
      h0 = sy / y.squaredNorm();
    }

    z = std::move(zn);
    fz = fn;
    gz = gzn;
    gn = gz.norm();
    if (gn < out.best_grad_norm) {
      out.best_grad_norm = gn;
      out.best_point = z;
    }
    out.iterations = it + 1;
  }
  if (out.best_grad_norm <= tol) {
    out.point = out.best_point;
    out.grad_norm = out.best_grad_norm;
    out.converged = true;
    return out;
  }
  out.point = out.best_point;
  out.grad_norm = out.best_grad_norm;
  out.iterations = max_iters;
  out.converged = false;
  return out;
}

struct PolishOutcome {
  Eigen::VectorXd point;
  double grad_norm = std::numeric_limits<double>::infinity();
  long iterations = 0;
  bool converged = false;
};

// Duals with a near-singular piece stall a function-value line search: close
// to the floor, the Armijo decrease falls under rounding noise while the
// gradient is still above delta.  On such a piece G is quadratic with Hessian
//
//   t ([Dh; DA][Dh; DA]^T + blkdiag(0, S)),  S = diag prox slopes in [0, 1],
//
// so a factorized semismooth Newton step certifies gradient norms the line
// search cannot.  The slopes are probed with one extra prox evaluation, which
// assumes a separable prox; the gradient-decrease guard below makes the
// refinement a harmless no-op for anything else.  Only called for small dual
// dimensions, where the dense factorization is cheap.
PolishOutcome newton_polish(const CompositeProblem& prob, const ManifoldSpec& manifold,
                            const Eigen::MatrixXd& x, double t, const Eigen::MatrixXd& a_x,
                            Eigen::Index lam_size,
                            const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& grad,
                            Eigen::VectorXd start, double tol, long max_steps) {
  const Eigen::Index mu_size = prob.range_rows * prob.range_cols;
  const Eigen::Index dim = lam_size + mu_size;
  const Eigen::Index ambient = prob.rows * prob.cols;

  PolishOutcome out;
  out.point = std::move(start);
  Eigen::VectorXd g = grad(out.point);
  out.grad_norm = g.norm();

  // Both Jacobians are evaluated at the fixed outer iterate, so the quadratic
  // part of every piece is the same and is built once.
  Eigen::MatrixXd basis_image(dim, ambient);
  Eigen::MatrixXd unit = Eigen::MatrixXd::Zero(prob.rows, prob.cols);
  for (Eigen::Index j = 0; j < ambient; ++j) {
    unit(j % prob.rows, j / prob.rows) = 1.0;
    basis_image.col(j) =
        pack_pair(manifold.jacobian_apply(x, unit), prob.map_jac_apply(x, unit));
    unit(j % prob.rows, j / prob.rows) = 0.0;
  }
  const Eigen::MatrixXd quad = basis_image * basis_image.transpose();

  for (long it = 0; it < max_steps; ++it) {
    if (out.grad_norm <= tol) {
      out.converged = true;
      return out;
    }
    const Eigen::Map<const Eigen::MatrixXd> mu(out.point.data() + lam_size, prob.range_rows,
                                               prob.range_cols);
    const Eigen::MatrixXd z_mu = a_x + t * mu;
    const double probe = 1e-9 * (1.0 + z_mu.cwiseAbs().maxCoeff());
    const Eigen::MatrixXd p0 = prob.g_prox(t, z_mu);
    const Eigen::MatrixXd p1 = prob.g_prox(
        t, z_mu + Eigen::MatrixXd::Constant(z_mu.rows(), z_mu.cols(), probe));
    const Eigen::MatrixXd slopes = ((p1 - p0) / probe).cwiseMax(0.0).cwiseMin(1.0);

    Eigen::MatrixXd hess = t * quad;
    hess.diagonal().tail(mu_size) +=
        t * Eigen::Map<const Eigen::VectorXd>(slopes.data(), mu_size);
    // Minimum-norm solve: the packed multiplier space contains structural
    // kernel directions (the skew part of a symmetric-constraint multiplier,
    // flat directions of a singular piece), and the minimum-norm solution
    // leaves them exactly untouched where a ridge would inject noise.
    const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> fac(hess);
    const Eigen::VectorXd full_step = fac.solve(-g);

    double scale = 1.0;
    bool moved = false;
    for (int halving = 0; halving < 8; ++halving) {
      Eigen::VectorXd cand = out.point + scale * full_step;
      Eigen::VectorXd gc = grad(cand);
      const double gcn = gc.norm();
      if (gcn < out.grad_norm) {
        out.point = std::move(cand);
        g = std::move(gc);
        out.grad_norm = gcn;
        moved = true;
        break;
      }
      scale *= 0.5;
    }
    out.iterations = it + 1;
    if (!moved) break;
  }
  out.converged = out.grad_norm <= tol;
  return out;
}

}  // namespace

double dual_value(const CompositeProblem& prob, const ManifoldSpec& manifold,
                  const Eigen::MatrixXd& x, double t, const Eigen::MatrixXd& lam,
                  const Eigen::MatrixXd& mu) {
  check_inputs(prob, x, t, "dual_value");
  const Eigen::MatrixXd w = prob.smooth_grad(x) + manifold.jacobian_adjoint_apply(x, lam) +
                            prob.map_jac_adjoint(x, mu);
  const Eigen::MatrixXd a_x = prob.map_value(x);
  const MoreauEnvelope env = moreau_envelope(prob, t, a_x + t * mu);
  return 0.5 * t * w.squaredNorm() + 0.5 * t * mu.squaredNorm() - env.value;
}

DualGradient dual_gradient(const CompositeProblem& prob, const ManifoldSpec& manifold,
                           const Eigen::MatrixXd& x, double t, const Eigen::MatrixXd& lam,
                           const Eigen::MatrixXd& mu) {
  check_inputs(prob, x, t, "dual_gradient");
  const Eigen::MatrixXd w = prob.smooth_grad(x) + manifold.jacobian_adjoint_apply(x, lam) +
                            prob.map_jac_adjoint(x, mu);
  const Eigen::MatrixXd a_x = prob.map_value(x);
  DualGradient out;
  out.grad_lam = t * manifold.jacobian_apply(x, w);
  out.grad_mu = t * prob.map_jac_apply(x, w) + prob.g_prox(t, a_x + t * mu) - a_x;
  return out;
}

SubproblemResult solve_inexact(const CompositeProblem& prob, const ManifoldSpec& manifold,
                               const Eigen::MatrixXd& x, double t, double delta,
                               const std::optional<DualState>& warm, long max_inner) {
  check_inputs(prob, x, t, "solve_inexact");
  if (delta < 0.0) throw InvalidInputError("solve_inexact: delta must be nonnegative");
  const double tol = std::max(delta, kMinTol);

  const Eigen::MatrixXd grad_f = prob.smooth_grad(x);
  const Eigen::MatrixXd a_x = prob.map_value(x);
  const Eigen::Index lam_rows = manifold.cols();
  const Eigen::Index lam_cols = manifold.kind() == ManifoldSpec::Kind::Stiefel ? manifold.cols() : 1;

  Eigen::MatrixXd lam0 = Eigen::MatrixXd::Zero(lam_rows, lam_cols);
  Eigen::MatrixXd mu0 = Eigen::MatrixXd::Zero(prob.range_rows, prob.range_cols);
  if (warm) {
    if (warm->lam.rows() != lam_rows || warm->lam.cols() != lam_cols ||
        warm->mu.rows() != prob.range_rows || warm->mu.cols() != prob.range_cols)
      throw InvalidInputError("solve_inexact: warm start has wrong shape");
    lam0 = warm->lam;
    mu0 = warm->mu;
  }

  auto unpack = [&](const Eigen::VectorXd& z, Eigen::MatrixXd& lam, Eigen::MatrixXd& mu) {
    lam = Eigen::Map<const Eigen::MatrixXd>(z.data(), lam_rows, lam_cols);
    mu = Eigen::Map<const Eigen::MatrixXd>(z.data() + lam_rows * lam_cols, prob.range_rows,
                                           prob.range_cols);
  };

  auto value_fn = [&](const Eigen::VectorXd& z) {
    Eigen::MatrixXd lam, mu;
    unpack(z, lam, mu);
    const Eigen::MatrixXd w =
        grad_f + manifold.jacobian_adjoint_apply(x, lam) + prob.map_jac_adjoint(x, mu);
    const MoreauEnvelope env = moreau_envelope(prob, t, a_x + t * mu);
    return 0.5 * t * w.squaredNorm() + 0.5 * t * mu.squaredNorm() - env.value;
  };
  auto grad_fn = [&](const Eigen::VectorXd& z) {
    Eigen::MatrixXd lam, mu;
    unpack(z, lam, mu);
    const Eigen::MatrixXd w =
        grad_f + manifold.jacobian_adjoint_apply(x, lam) + prob.map_jac_adjoint(x, mu);
    const Eigen::MatrixXd glam = t * manifold.jacobian_apply(x, w);
    const Eigen::MatrixXd gmu =
        t * prob.map_jac_apply(x, w) + prob.g_prox(t, a_x + t * mu) - a_x;
    return pack_pair(glam, gmu);
  };

  const double lip0 =
      t * (manifold.c2() + prob.bound_map_jac * prob.bound_map_jac + 1.0) + 1.0;
  DescentOutcome run = lbfgs_descent(value_fn, grad_fn, pack_pair(lam0, mu0), tol,
                                     max_inner, lip0, warm ? kStartShrink : 1.0);

  if (!run.converged) {
    constexpr Eigen::Index kPolishMaxDim = 600;
    const Eigen::Index dual_dim = lam_rows * lam_cols + prob.range_rows * prob.range_cols;
    if (dual_dim <= kPolishMaxDim) {
      PolishOutcome polish = newton_polish(prob, manifold, x, t, a_x, lam_rows * lam_cols,
                                           grad_fn, run.best_point, tol, 40);
      run.iterations += polish.iterations;
      if (polish.converged) {
        run.point = std::move(polish.point);
        run.grad_norm = polish.grad_norm;
        run.converged = true;
      } else if (polish.grad_norm < run.best_grad_norm) {
        run.best_point = std::move(polish.point);
        run.best_grad_norm = polish.grad_norm;
      }
    }
  }

  SubproblemResult result;
  unpack(run.converged ? run.point : run.best_point, result.dual.lam, result.dual.mu);
  result.dual.dual_grad_norm = run.converged ? run.grad_norm : run.best_grad_norm;
  result.inner_iterations = run.iterations;
  if (!run.converged)
    throw SubproblemFailureError("solve_inexact: inner iteration cap reached (best grad norm " +
                                     std::to_string(run.best_grad_norm) + ", requested " +
                                     std::to_string(tol) + ")",
                                 result.dual, tol, run.iterations);

  const Eigen::MatrixXd w = grad_f + manifold.jacobian_adjoint_apply(x, result.dual.lam) +
                            prob.map_jac_adjoint(x, result.dual.mu);
  result.primal.d = -t * w;
  result.primal.v = prob.g_prox(t, a_x + t * result.dual.mu) - a_x;
  return result;
}

SubproblemResult solve_identity_shortcut(const CompositeProblem& prob,
                                         const ManifoldSpec& manifold,
                                         const Eigen::MatrixXd& x, double t, double delta,
                                         const std::optional<DualState>& warm,
                                         long max_inner) {
  check_inputs(prob, x, t, "solve_identity_shortcut");
  if (!prob.identity_map)
    throw InvalidInputError("solve_identity_shortcut: problem's coupling map is not identity");
  if (delta < 0.0)
    throw InvalidInputError("solve_identity_shortcut: delta must be nonnegative");
  const double tol = std::max(delta, kMinTol);
  const double half_t = 0.5 * t;

  const Eigen::MatrixXd grad_f = prob.smooth_grad(x);
  const Eigen::Index lam_rows = manifold.cols();
  const Eigen::Index lam_cols = manifold.kind() == ManifoldSpec::Kind::Stiefel ? manifold.cols() : 1;

  Eigen::MatrixXd lam0 = Eigen::MatrixXd::Zero(lam_rows, lam_cols);
  if (warm) {
    if (warm->lam.rows() != lam_rows || warm->lam.cols() != lam_cols)
      throw InvalidInputError("solve_identity_shortcut: warm start has wrong shape");
    lam0 = warm->lam;
  }

  auto as_lam = [&](const Eigen::VectorXd& z) -> Eigen::MatrixXd {
    return Eigen::Map<const Eigen::MatrixXd>(z.data(), lam_rows, lam_cols);
  };
  auto step_from = [&](const Eigen::MatrixXd& w) -> Eigen::MatrixXd {
    return prob.g_prox(half_t, x - half_t * w) - x;
  };

  auto value_fn = [&](const Eigen::VectorXd& z) {
    const Eigen::MatrixXd w = grad_f + manifold.jacobian_adjoint_apply(x, as_lam(z));
    const MoreauEnvelope env = moreau_envelope(prob, half_t, x - half_t * w);
    return 0.25 * t * w.squaredNorm() - env.value;
  };
  auto grad_fn = [&](const Eigen::VectorXd& z) -> Eigen::VectorXd {
    const Eigen::MatrixXd w = grad_f + manifold.jacobian_adjoint_apply(x, as_lam(z));
    const Eigen::MatrixXd g = -manifold.jacobian_apply(x, step_from(w));
    return Eigen::Map<const Eigen::VectorXd>(g.data(), g.size());
  };

  const double lip0 = 0.5 * t * manifold.c2() + 1.0;
  Eigen::VectorXd start = Eigen::Map<const Eigen::VectorXd>(lam0.data(), lam0.size());
  DescentOutcome run = lbfgs_descent(value_fn, grad_fn, std::move(start), tol,
                                     max_inner, lip0, warm ? kStartShrink : 1.0);

  SubproblemResult result;
  const Eigen::MatrixXd lam = as_lam(run.converged ? run.point : run.best_point);
  const Eigen::MatrixXd w = grad_f + manifold.jacobian_adjoint_apply(x, lam);
  const Eigen::MatrixXd d = step_from(w);
  result.dual.lam = lam;
  result.dual.mu = -d / t - w;
  result.dual.dual_grad_norm = run.converged ? run.grad_norm : run.best_grad_norm;
  result.inner_iterations = run.iterations;
  if (!run.converged)
    throw SubproblemFailureError(
        "solve_identity_shortcut: inner iteration cap reached (best grad norm " +
            std::to_string(run.best_grad_norm) + ", requested " + std::to_string(tol) + ")",
        result.dual, tol, run.iterations);
  result.primal.d = d;
  result.primal.v = d;
  return result;
}

}  // namespace fsipl
