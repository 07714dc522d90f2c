#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>

#include "fsipl/composite.hpp"
#include "fsipl/dual_subproblem.hpp"
#include "fsipl/manifold.hpp"
#include "fsipl/solver.hpp"

namespace fsipl {

// Slow, independent reference implementations used by the test suites to
// certify the fast paths, plus the closed-form constants of the convergence
// analysis.  Nothing here is needed on the solve path.

// Central finite differences of a scalar function of a matrix argument.
Eigen::MatrixXd finite_diff_gradient(const std::function<double(const Eigen::MatrixXd&)>& fn,
                                     const Eigen::MatrixXd& x, double step = 1e-5);

// Global minimizer of weight*|u| + (u - z)^2 / (2t) by dense grid search
// (10^4 points) followed by golden-section refinement to width 1e-10.
double scalar_prox_bruteforce(double weight, double t, double z);

// Reference subproblem solution: the dual solved to gradient norm 1e-13 from
// 10 random multiplier starts; all recovered primal pairs must agree to 1e-8
// or OracleFailureError is thrown.  Restricted to ambient dimension <= 50.
PrimalRecovery brute_force_subproblem(const CompositeProblem& prob,
                                      const ManifoldSpec& manifold, const Eigen::MatrixXd& x,
                                      double t, std::uint64_t seed = 0);

// Constants of the convergence analysis, evaluated from the certified
// manifold/problem bounds.  Used only by tests; all bounds refer to the
// working neighborhood.
class TheoryConstants {
 public:
  TheoryConstants(const ManifoldSpec& manifold, const CompositeProblem& prob,
                  const SolverConfig& cfg);

  double m1() const { return m1_; }
  double m2() const { return m2_; }
  double tau_hat() const { return tau_hat_; }

  // Largest tangent stepsize keeping the trial point in the working
  // neighborhood, and the smaller one additionally guaranteeing descent.
  double eta_hat1(double t, double delta) const;
  double eta_hat2(double t, double delta) const;
  // Correction stepsize guaranteeing the accept test jointly with eta_hat2.
  double tau_hat2() const;

  // Upper bound on line-search backtracks per outer iteration.
  int backtrack_bound() const;

  // Smallest merit weight the analysis permits; valid configs exceed it.
  double min_merit_weight() const;

  // Norm bounds for the recovered subproblem quantities at dual tolerance
  // delta and proximal parameter t.
  double d_bound(double t, double delta) const;
  double v_bound(double t, double delta) const;
  double lam_bound(double t, double delta) const;
  double mu_bound(double t, double delta) const;

 private:
  double c1_, c2_, lip_h_, theta_, kappa_;
  double lip_f_, bound_f_, lip_g_, bound_a_, lip_a_;
  double alpha_, sigma_, gamma_, eta_bar_, tau_bar_, t_max_, delta_bar_;
  double m1_, m2_, tau_hat_;
};

}  // namespace fsipl
