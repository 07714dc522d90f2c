#pragma once

#include <Eigen/Dense>
#include <optional>
#include <stdexcept>

#include "fsipl/composite.hpp"
#include "fsipl/manifold.hpp"

namespace fsipl {

// Multipliers of the proximal linearized subproblem: lam pairs with the
// manifold constraint linearization, mu with the splitting constraint
// u = A(x) + DA(x)[d].  dual_grad_norm is the joint Euclidean norm of the
// dual gradient at (lam, mu) certified at return time.
struct DualState {
  Eigen::MatrixXd lam;
  Eigen::MatrixXd mu;
  double dual_grad_norm = 0.0;
};

// Primal step recovered from dual multipliers: ambient direction d and range
// displacement v (the subproblem's estimate of A(x + d) - A(x)).
struct PrimalRecovery {
  Eigen::MatrixXd d;
  Eigen::MatrixXd v;
};

struct DualGradient {
  Eigen::MatrixXd grad_lam;
  Eigen::MatrixXd grad_mu;
};

struct SubproblemResult {
  DualState dual;
  PrimalRecovery primal;
  long inner_iterations = 0;
};

// Inner dual solver hit its iteration cap before reaching the requested
// gradient tolerance; carries the best state seen.
class SubproblemFailureError : public std::runtime_error {
 public:
  SubproblemFailureError(const std::string& what, DualState best, double requested_tol,
                         long iterations)
      : std::runtime_error(what),
        best(std::move(best)),
        requested_tol(requested_tol),
        iterations(iterations) {}
  DualState best;
  double requested_tol;
  long iterations;
};

// Dual objective of the proximal linearized subproblem at outer iterate x
// with proximal parameter t (minimization form; constant terms in x omitted):
//
//   G(lam, mu) = (t/2) |w|^2 + (t/2) |mu|^2 - env_{t g}(A(x) + t mu),
//   w = grad f(x) + Dh(x)^T[lam] + DA(x)^T[mu],
//
// where env is the Moreau envelope of g.  G is convex and continuously
// differentiable.
double dual_value(const CompositeProblem& prob, const ManifoldSpec& manifold,
                  const Eigen::MatrixXd& x, double t, const Eigen::MatrixXd& lam,
                  const Eigen::MatrixXd& mu);

// Gradient of G: grad_lam = t Dh(x)[w],
//                grad_mu  = t DA(x)[w] + prox_{t g}(A(x) + t mu) - A(x).
// At the recovered primal pair this equals (-Dh(x)[d], -(DA(x)[d] - v)), so a
// small dual gradient certifies near-tangency of d and near-consistency of v.
DualGradient dual_gradient(const CompositeProblem& prob, const ManifoldSpec& manifold,
                           const Eigen::MatrixXd& x, double t, const Eigen::MatrixXd& lam,
                           const Eigen::MatrixXd& mu);

// Runs limited-memory BFGS with Armijo backtracking on G until the joint
// dual gradient norm drops to delta, then recovers
//   d = -t w,  v = prox_{t g}(A(x) + t mu) - A(x).
// warm seeds the multipliers (zeros otherwise).  delta below 1e-14 is clamped
// to 1e-14 (an exact solve cannot be certified in floating point).  If the
// iteration budget runs out on a small dual (dimension at most 600), a
// semismooth Newton refinement retries from the best visited point; G is
// piecewise quadratic, so a few factorized steps certify tolerances a
// function-value line search cannot.  Throws SubproblemFailureError when the
// budget (and refinement, where applicable) does not reach delta.
SubproblemResult solve_inexact(const CompositeProblem& prob, const ManifoldSpec& manifold,
                               const Eigen::MatrixXd& x, double t, double delta,
                               const std::optional<DualState>& warm = std::nullopt,
                               long max_inner = 100000);

// Specialized path for problems with A = identity.  Eliminating mu reduces
// the dual to the manifold multiplier alone:
//
//   reduced(lam) = (t/4) |w|^2 - env_{(t/2) g}(x - (t/2) w),
//   w = grad f(x) + Dh(x)^T[lam],
//   d(lam) = prox_{(t/2) g}(x - (t/2) w) - x,
//   grad reduced(lam) = -Dh(x)[d(lam)],
//
// and at any lam the full-dual pair (lam, mu) with mu = -d/t - w satisfies
// grad_mu G = 0 identically with grad_lam G equal to the reduced gradient, so
// the certified norm transfers to the full dual.  Recovery: d as above, v = d.
SubproblemResult solve_identity_shortcut(const CompositeProblem& prob,
                                         const ManifoldSpec& manifold,
                                         const Eigen::MatrixXd& x, double t, double delta,
                                         const std::optional<DualState>& warm = std::nullopt,
                                         long max_inner = 100000);

}  // namespace fsipl
