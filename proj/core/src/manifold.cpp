#include "fsipl/manifold.hpp"

#include <cmath>
#include <string>

namespace fsipl {

namespace {

std::string dim_string(const Eigen::MatrixXd& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

ManifoldSpec::ManifoldSpec(Kind kind, Eigen::Index rows, Eigen::Index cols, double theta)
    : kind_(kind), rows_(rows), cols_(cols) {
  if (rows < 1 || cols < 1)
    throw InvalidInputError("manifold: dimensions must be positive");
  if (kind == Kind::Stiefel && cols > rows)
    throw InvalidInputError("manifold: orthonormal columns require cols <= rows");
  if (!(theta > 0.0 && theta < 0.5))
    throw InvalidInputError("manifold: theta must lie in (0, 1/2)");
  theta_ = theta;
  kappa_ = 1.0;
  lip_h_ = 2.0;
  // Spectrum bounds for Dh Dh^T on the 2*theta working neighborhood; both
  // families have singular values of the point within [1-2theta, 1+2theta]
  // there, giving 4(1-2theta)^2 and 4(1+2theta)^2.
  c1_ = 4.0 * (1.0 - 2.0 * theta) * (1.0 - 2.0 * theta);
  c2_ = 4.0 * (1.0 + 2.0 * theta) * (1.0 + 2.0 * theta);
  constraint_dim_ = (kind == Kind::Stiefel) ? cols * (cols + 1) / 2 : cols;
}

ManifoldSpec ManifoldSpec::stiefel(Eigen::Index rows, Eigen::Index cols, double theta) {
  return ManifoldSpec(Kind::Stiefel, rows, cols, theta);
}

ManifoldSpec ManifoldSpec::oblique(Eigen::Index rows, Eigen::Index cols, double theta) {
  return ManifoldSpec(Kind::Oblique, rows, cols, theta);
}

void ManifoldSpec::check_point(const Eigen::MatrixXd& x, const char* op) const {
  if (x.rows() != rows_ || x.cols() != cols_)
    throw InvalidInputError(std::string("manifold::") + op + ": point is " + dim_string(x) +
                            ", expected " + std::to_string(rows_) + "x" + std::to_string(cols_));
}

void ManifoldSpec::check_multiplier(const Eigen::MatrixXd& lam, const char* op) const {
  if (kind_ == Kind::Stiefel) {
    if (lam.rows() != cols_ || lam.cols() != cols_)
      throw InvalidInputError(std::string("manifold::") + op + ": multiplier is " +
                              dim_string(lam) + ", expected " + std::to_string(cols_) + "x" +
                              std::to_string(cols_));
    const double asym = (lam - lam.transpose()).norm();
    if (asym > 1e-10 * (1.0 + lam.norm()))
      throw InvalidInputError(std::string("manifold::") + op +
                              ": multiplier for a symmetric constraint must be symmetric");
  } else {
    if (lam.rows() != cols_ || lam.cols() != 1)
      throw InvalidInputError(std::string("manifold::") + op + ": multiplier is " +
                              dim_string(lam) + ", expected " + std::to_string(cols_) + "x1");
  }
}

Eigen::MatrixXd ManifoldSpec::constraint_value(const Eigen::MatrixXd& x) const {
  check_point(x, "constraint_value");
  if (kind_ == Kind::Stiefel) {
    Eigen::MatrixXd h = x.transpose() * x;
    h.diagonal().array() -= 1.0;
    return h;
  }
  Eigen::MatrixXd h(cols_, 1);
  for (Eigen::Index j = 0; j < cols_; ++j) h(j, 0) = x.col(j).squaredNorm() - 1.0;
  return h;
}

Eigen::MatrixXd ManifoldSpec::jacobian_apply(const Eigen::MatrixXd& x,
                                             const Eigen::MatrixXd& w) const {
  check_point(x, "jacobian_apply");
  if (w.rows() != rows_ || w.cols() != cols_)
    throw InvalidInputError("manifold::jacobian_apply: direction is " + dim_string(w) +
                            ", expected point shape");
  if (kind_ == Kind::Stiefel) {
    const Eigen::MatrixXd cross = x.transpose() * w;
    return cross + cross.transpose();
  }
  Eigen::MatrixXd out(cols_, 1);
  for (Eigen::Index j = 0; j < cols_; ++j) out(j, 0) = 2.0 * x.col(j).dot(w.col(j));
  return out;
}

Eigen::MatrixXd ManifoldSpec::jacobian_adjoint_apply(const Eigen::MatrixXd& x,
                                                     const Eigen::MatrixXd& lam) const {
  check_point(x, "jacobian_adjoint_apply");
  check_multiplier(lam, "jacobian_adjoint_apply");
  if (kind_ == Kind::Stiefel) return 2.0 * x * lam;
  Eigen::MatrixXd out(rows_, cols_);
  for (Eigen::Index j = 0; j < cols_; ++j) out.col(j) = 2.0 * lam(j, 0) * x.col(j);
  return out;
}

Eigen::MatrixXd ManifoldSpec::gram_apply(const Eigen::MatrixXd& x,
                                         const Eigen::MatrixXd& y) const {
  check_point(x, "gram_apply");
  check_multiplier(y, "gram_apply");
  if (kind_ == Kind::Stiefel) {
    // Dh Dh^T [Y] = 2 X'X Y + 2 Y X'X for symmetric Y.
    const Eigen::MatrixXd gram = x.transpose() * x;
    return 2.0 * gram * y + 2.0 * y * gram;
  }
  Eigen::MatrixXd out(cols_, 1);
  for (Eigen::Index j = 0; j < cols_; ++j) out(j, 0) = 4.0 * x.col(j).squaredNorm() * y(j, 0);
  return out;
}

Eigen::MatrixXd ManifoldSpec::project_to_manifold(const Eigen::MatrixXd& x) const {
  check_point(x, "project_to_manifold");
  if (kind_ == Kind::Stiefel) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double sigma_min = svd.singularValues().minCoeff();
    if (sigma_min < 1e-12)
      throw DegenerateProjectionError(
          "manifold::project_to_manifold: rank-deficient point (sigma_min = " +
          std::to_string(sigma_min) + "), polar factor not well defined");
    return svd.matrixU() * svd.matrixV().transpose();
  }
  Eigen::MatrixXd out = x;
  for (Eigen::Index j = 0; j < cols_; ++j) {
    const double norm = out.col(j).norm();
    if (norm == 0.0) {
      out.col(j).setZero();
      out(0, j) = 1.0;
    } else {
      out.col(j) /= norm;
    }
  }
  return out;
}

Eigen::MatrixXd ManifoldSpec::correction_gradient(const Eigen::MatrixXd& x) const {
  check_point(x, "correction_gradient");
  return jacobian_adjoint_apply(x, constraint_value(x));
}

double ManifoldSpec::distance_to_manifold(const Eigen::MatrixXd& x) const {
  check_point(x, "distance_to_manifold");
  if (kind_ == Kind::Stiefel) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(x);
    return (svd.singularValues().array() - 1.0).matrix().norm();
  }
  double sq = 0.0;
  for (Eigen::Index j = 0; j < cols_; ++j) {
    const double gap = x.col(j).norm() - 1.0;
    sq += gap * gap;
  }
  return std::sqrt(sq);
}

}  // namespace fsipl
