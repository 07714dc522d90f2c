#include "fsipl/composite.hpp"

#include <cmath>
#include <memory>

namespace fsipl {

namespace {

// Entrywise soft threshold: the proximal map of weight * l1 at parameter t.
Eigen::MatrixXd soft_threshold(const Eigen::MatrixXd& z, double level) {
  return z.unaryExpr([level](double v) {
    const double mag = std::abs(v) - level;
    return mag > 0.0 ? (v > 0.0 ? mag : -mag) : 0.0;
  });
}

void check_shape(const CompositeProblem& prob, const Eigen::MatrixXd& x, const char* op) {
  if (x.rows() != prob.rows || x.cols() != prob.cols)
    throw InvalidInputError(std::string("composite::") + op + ": point has wrong shape");
}

}  // namespace

MoreauEnvelope moreau_envelope(const CompositeProblem& prob, double t,
                               const Eigen::MatrixXd& z) {
  if (!(t > 0.0)) throw InvalidInputError("moreau_envelope: parameter t must be positive");
  MoreauEnvelope env;
  env.prox_point = prob.g_prox(t, z);
  env.gradient = (z - env.prox_point) / t;
  env.value = prob.g_value(env.prox_point) + (env.prox_point - z).squaredNorm() / (2.0 * t);
  return env;
}

double objective(const CompositeProblem& prob, const Eigen::MatrixXd& x) {
  check_shape(prob, x, "objective");
  return prob.smooth_value(x) + prob.g_value(prob.map_value(x));
}

double merit(const CompositeProblem& prob, const ManifoldSpec& manifold, double alpha,
             const Eigen::MatrixXd& x) {
  if (alpha < 0.0) throw InvalidInputError("merit: alpha must be nonnegative");
  return objective(prob, x) + alpha * manifold.constraint_value(x).norm();
}

CompositeProblem spca_instance(const Eigen::MatrixXd& b, double mu, double theta,
                               Eigen::Index p) {
  if (!(mu > 0.0)) throw InvalidInputError("spca_instance: mu must be positive");
  if (!b.allFinite()) throw InvalidInputError("spca_instance: data matrix must be finite");
  if (p < 1 || p > b.cols())
    throw InvalidInputError("spca_instance: p must satisfy 1 <= p <= cols(B)");

  const Eigen::Index n = b.cols();
  auto gram = std::make_shared<Eigen::MatrixXd>(b.transpose() * b);

  CompositeProblem prob;
  prob.rows = n;
  prob.cols = p;
  prob.range_rows = n;
  prob.range_cols = p;
  prob.identity_map = true;

  prob.smooth_value = [gram](const Eigen::MatrixXd& x) {
    return -(x.transpose() * (*gram * x)).trace();
  };
  prob.smooth_grad = [gram](const Eigen::MatrixXd& x) -> Eigen::MatrixXd {
    return -2.0 * (*gram * x);
  };
  prob.map_value = [](const Eigen::MatrixXd& x) { return x; };
  prob.map_jac_apply = [](const Eigen::MatrixXd&, const Eigen::MatrixXd& dir) { return dir; };
  prob.map_jac_adjoint = [](const Eigen::MatrixXd&, const Eigen::MatrixXd& m) { return m; };
  prob.g_value = [mu](const Eigen::MatrixXd& z) { return mu * z.cwiseAbs().sum(); };
  prob.g_prox = [mu](double t, const Eigen::MatrixXd& z) { return soft_threshold(z, t * mu); };

  const double b_frob_sq = b.squaredNorm();
  prob.lip_f_grad = 2.0 * gram->norm();
  prob.bound_f_grad = 2.0 * (1.0 + theta) * b_frob_sq;
  prob.lip_g = mu * std::sqrt(static_cast<double>(n * p));
  prob.bound_map_jac = 1.0;
  prob.lip_map_jac = 0.0;
  return prob;
}

CompositeProblem ssc_instance(const Eigen::MatrixXd& laplacian, double mu, double theta,
                              Eigen::Index p) {
  if (!(mu > 0.0)) throw InvalidInputError("ssc_instance: mu must be positive");
  if (!laplacian.allFinite()) throw InvalidInputError("ssc_instance: matrix must be finite");
  if (laplacian.rows() != laplacian.cols())
    throw InvalidInputError("ssc_instance: matrix must be square");
  if ((laplacian - laplacian.transpose()).norm() > 1e-10 * (1.0 + laplacian.norm()))
    throw InvalidInputError("ssc_instance: matrix must be symmetric");
  if (p < 1 || p > laplacian.rows())
    throw InvalidInputError("ssc_instance: p must satisfy 1 <= p <= n");

  const Eigen::Index n = laplacian.rows();
  auto lap = std::make_shared<Eigen::MatrixXd>(laplacian);

  CompositeProblem prob;
  prob.rows = n;
  prob.cols = p;
  prob.range_rows = n;
  prob.range_cols = n;
  prob.identity_map = false;

  prob.smooth_value = [lap](const Eigen::MatrixXd& x) {
    return (x.transpose() * (*lap * x)).trace();
  };
  prob.smooth_grad = [lap](const Eigen::MatrixXd& x) -> Eigen::MatrixXd {
    return 2.0 * (*lap * x);
  };
  prob.map_value = [](const Eigen::MatrixXd& x) -> Eigen::MatrixXd {
    return x * x.transpose();
  };
  prob.map_jac_apply = [](const Eigen::MatrixXd& x, const Eigen::MatrixXd& dir) -> Eigen::MatrixXd {
    Eigen::MatrixXd half = dir * x.transpose();
    return half + half.transpose();
  };
  prob.map_jac_adjoint = [](const Eigen::MatrixXd& x, const Eigen::MatrixXd& m) -> Eigen::MatrixXd {
    return (m + m.transpose()) * x;
  };
  prob.g_value = [mu](const Eigen::MatrixXd& z) { return mu * z.cwiseAbs().sum(); };
  prob.g_prox = [mu](double t, const Eigen::MatrixXd& z) { return soft_threshold(z, t * mu); };

  prob.lip_f_grad = 2.0 * lap->norm();
  prob.bound_f_grad = 2.0 * (1.0 + theta) * lap->norm();
  prob.lip_g = mu * static_cast<double>(n);
  prob.bound_map_jac = 2.0 * (1.0 + theta);
  prob.lip_map_jac = 2.0;
  return prob;
}

CompositeProblem make_instance(const ProblemInstanceConfig& config) {
  switch (config.kind) {
    case ProblemInstanceConfig::Kind::Spca:
      return spca_instance(config.data, config.mu, config.theta, config.p);
    case ProblemInstanceConfig::Kind::Ssc:
      return ssc_instance(config.data, config.mu, config.theta, config.p);
  }
  throw InvalidInputError("make_instance: unknown instance kind");
}

}  // namespace fsipl
