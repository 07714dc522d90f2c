#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>

#include "fsipl/errors.hpp"
#include "fsipl/manifold.hpp"

namespace fsipl {

// Nonsmooth composite objective F(x) = f(x) + g(A(x)) with smooth f, a smooth
// (possibly nonlinear) coupling map A into a matrix range space, and a convex
// possibly nonsmooth g accessed through value and proximal evaluators.  All
// spaces are dense matrices under the Frobenius inner product.
//
// The bound fields certify behavior on the solver's working neighborhood:
//   lip_f_grad     Lipschitz modulus of the gradient of f (stepsize seeding)
//   bound_f_grad   sup |grad f|
//   lip_g          Lipschitz modulus of g (bounds subgradient norms)
//   bound_map_jac  sup operator norm of DA
//   lip_map_jac    Lipschitz modulus of DA (0 when A is linear)
struct CompositeProblem {
  Eigen::Index rows = 0;        // iterate row count
  Eigen::Index cols = 0;        // iterate column count
  Eigen::Index range_rows = 0;  // shape of A(x)
  Eigen::Index range_cols = 0;
  bool identity_map = false;    // true when A(x) = x

  std::function<double(const Eigen::MatrixXd&)> smooth_value;
  std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)> smooth_grad;
  std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)> map_value;
  // DA(x)[dir] and DA(x)^T[m]
  std::function<Eigen::MatrixXd(const Eigen::MatrixXd&, const Eigen::MatrixXd&)> map_jac_apply;
  std::function<Eigen::MatrixXd(const Eigen::MatrixXd&, const Eigen::MatrixXd&)> map_jac_adjoint;
  std::function<double(const Eigen::MatrixXd&)> g_value;
  // prox_{t g}(z): minimizer of g(u) + |u - z|^2 / (2t)
  std::function<Eigen::MatrixXd(double, const Eigen::MatrixXd&)> g_prox;

  double lip_f_grad = 0.0;
  double bound_f_grad = 0.0;
  double lip_g = 0.0;
  double bound_map_jac = 0.0;
  double lip_map_jac = 0.0;

  Eigen::Index map_range_dim() const { return range_rows * range_cols; }
};

// Moreau envelope of the problem's nonsmooth term at parameter t > 0:
//   value    = min_u g(u) + |u - z|^2 / (2t), attained at u = prox_{t g}(z)
//   gradient = (z - prox_{t g}(z)) / t
struct MoreauEnvelope {
  double value = 0.0;
  Eigen::MatrixXd gradient;
  Eigen::MatrixXd prox_point;
};

MoreauEnvelope moreau_envelope(const CompositeProblem& prob, double t,
                               const Eigen::MatrixXd& z);

// F(x) = f(x) + g(A(x)).
double objective(const CompositeProblem& prob, const Eigen::MatrixXd& x);

// Exact-penalty merit F(x) + alpha * |h(x)|.
double merit(const CompositeProblem& prob, const ManifoldSpec& manifold, double alpha,
             const Eigen::MatrixXd& x);

// Sparse principal component analysis seeking p orthonormal loading vectors:
//   f(X) = -tr(X' B'B X),  A = identity,  g = mu * entrywise l1.
// The Gram matrix B'B is formed once at construction.
CompositeProblem spca_instance(const Eigen::MatrixXd& b, double mu, double theta,
                               Eigen::Index p);

// Sparse spectral clustering on the projection XX':
//   f(X) = tr(L' XX'),  A(X) = XX',  g = mu * entrywise l1,
// with L a symmetric (normalized-Laplacian-like) matrix.
CompositeProblem ssc_instance(const Eigen::MatrixXd& laplacian, double mu, double theta,
                              Eigen::Index p);

// Data needed to rebuild a problem instance (used by the experiment harness
// and config files).
struct ProblemInstanceConfig {
  enum class Kind { Spca, Ssc };
  Kind kind = Kind::Spca;
  Eigen::MatrixXd data;  // B (m x n) for SPCA, L (n x n) for SSC
  double mu = 0.5;
  double theta = 0.3;
  Eigen::Index p = 1;
};

CompositeProblem make_instance(const ProblemInstanceConfig& config);

}  // namespace fsipl
