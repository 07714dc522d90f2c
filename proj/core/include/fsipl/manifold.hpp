#pragma once

#include <Eigen/Dense>

#include "fsipl/errors.hpp"

namespace fsipl {

// Compact matrix manifold M = {X : h(X) = 0} described through its defining
// constraint map h and the operators derived from it.  Two families are
// built in:
//
//   Stiefel  h(X) = X'X - I   (n x p, p <= n; value is p x p symmetric)
//   Oblique  h(X) = (|x_i|^2 - 1)_i, unit-norm columns (value is p x 1)
//
// Points, tangent directions, and constraint values are dense matrices; all
// inner products and norms are Frobenius.  theta in (0, 1/2) fixes the working
// neighborhood {x : dist(x, M) <= 2 theta} on which the certified constants
// hold: the squared-Jacobian spectrum lies in [c1, c2], the constraint
// Jacobian is lip_h-Lipschitz, and dist(x, M) <= kappa * |h(x)| (kappa = 1
// for both families).  Instances are immutable after construction.
class ManifoldSpec {
 public:
  enum class Kind { Stiefel, Oblique };

  static ManifoldSpec stiefel(Eigen::Index rows, Eigen::Index cols, double theta = 0.3);
  static ManifoldSpec oblique(Eigen::Index rows, Eigen::Index cols, double theta = 0.3);

  Kind kind() const { return kind_; }
  Eigen::Index rows() const { return rows_; }
  Eigen::Index cols() const { return cols_; }

  // Dimension of the ambient space (rows * cols) and of the constraint value
  // as a vector space (p(p+1)/2 symmetric coordinates, or p).
  Eigen::Index ambient_dim() const { return rows_ * cols_; }
  Eigen::Index constraint_dim() const { return constraint_dim_; }

  double kappa() const { return kappa_; }
  double theta() const { return theta_; }
  double c1() const { return c1_; }
  double c2() const { return c2_; }
  double lip_h() const { return lip_h_; }

  // h(x).  Symmetric p x p for Stiefel, p x 1 for Oblique.
  Eigen::MatrixXd constraint_value(const Eigen::MatrixXd& x) const;

  // Constraint Jacobian applied to an ambient direction w: Dh(x)[w].
  Eigen::MatrixXd jacobian_apply(const Eigen::MatrixXd& x, const Eigen::MatrixXd& w) const;

  // Adjoint of the Jacobian applied to a constraint-space multiplier:
  // Dh(x)^T[lam].  lam must be symmetric for Stiefel.
  Eigen::MatrixXd jacobian_adjoint_apply(const Eigen::MatrixXd& x,
                                         const Eigen::MatrixXd& lam) const;

  // Gram operator Dh(x) Dh(x)^T applied to a constraint-space vector.
  Eigen::MatrixXd gram_apply(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) const;

  // Nearest point of M in Frobenius distance.
  Eigen::MatrixXd project_to_manifold(const Eigen::MatrixXd& x) const;

  // Gradient of the infeasibility potential N(x) = |h(x)|^2 / 2, i.e.
  // Dh(x)^T[h(x)].  Drives the correction step of the feasibility safeguard.
  Eigen::MatrixXd correction_gradient(const Eigen::MatrixXd& x) const;

  double distance_to_manifold(const Eigen::MatrixXd& x) const;

 private:
  ManifoldSpec(Kind kind, Eigen::Index rows, Eigen::Index cols, double theta);

  void check_point(const Eigen::MatrixXd& x, const char* op) const;
  void check_multiplier(const Eigen::MatrixXd& lam, const char* op) const;

  Kind kind_;
  Eigen::Index rows_;
  Eigen::Index cols_;
  Eigen::Index constraint_dim_;
  double kappa_;
  double theta_;
  double c1_;
  double c2_;
  double lip_h_;
};

}  // namespace fsipl
