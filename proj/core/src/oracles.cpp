#include "fsipl/oracles.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "fsipl/rng.hpp"

namespace fsipl {

Eigen::MatrixXd finite_diff_gradient(const std::function<double(const Eigen::MatrixXd&)>& fn,
                                     const Eigen::MatrixXd& x, double step) {
  if (!(step > 0.0)) throw InvalidInputError("finite_diff_gradient: step must be positive");
  Eigen::MatrixXd grad(x.rows(), x.cols());
  Eigen::MatrixXd probe = x;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double base = x(i, j);
      probe(i, j) = base + step;
      const double up = fn(probe);
      probe(i, j) = base - step;
      const double down = fn(probe);
      probe(i, j) = base;
      grad(i, j) = (up - down) / (2.0 * step);
    }
  }
  return grad;
}

double scalar_prox_bruteforce(double weight, double t, double z) {
  if (!(weight >= 0.0) || !(t > 0.0))
    throw InvalidInputError("scalar_prox_bruteforce: need weight >= 0 and t > 0");
  // Extended precision: near the minimum the objective is flat to within
  // double rounding, which would cap the localization around sqrt(t eps |f|).
  const auto value = [&](long double u) -> long double {
    const long double r = u - static_cast<long double>(z);
    return static_cast<long double>(weight) * std::abs(u) +
           r * r / (2.0L * static_cast<long double>(t));
  };
  // Search window centered at z; the minimizer of weight |u| + (u-z)^2/(2t)
  // always lies between 0 and z, well inside.
  const long double lo0 = z - 3.0 * std::abs(z) - 3.0;
  const long double hi0 = z + 3.0 * std::abs(z) + 3.0;
  const int grid = 10000;
  long double best_u = lo0;
  long double best_v = value(best_u);
  const auto consider = [&](long double u) {
    const long double v = value(u);
    if (v < best_v) {
      best_v = v;
      best_u = u;
    }
  };
  for (int i = 1; i <= grid; ++i) consider(lo0 + (hi0 - lo0) * static_cast<long double>(i) / grid);
  // Golden-section refinement on the bracketing cell (objective is convex,
  // hence unimodal); keeps the best point seen across all evaluations.
  const long double cell = (hi0 - lo0) / grid;
  long double lo = best_u - cell;
  long double hi = best_u + cell;
  const long double ratio = (std::sqrt(5.0L) - 1.0L) / 2.0L;
  long double a = hi - ratio * (hi - lo);
  long double b = lo + ratio * (hi - lo);
  long double fa = value(a);
  long double fb = value(b);
  if (fa < best_v) {
    best_v = fa;
    best_u = a;
  }
  if (fb < best_v) {
    best_v = fb;
    best_u = b;
  }
  while (hi - lo > 1e-10L) {
    if (fa <= fb) {
      hi = b;
      b = a;
      fb = fa;
      a = hi - ratio * (hi - lo);
      fa = value(a);
      if (fa < best_v) {
        best_v = fa;
        best_u = a;
      }
    } else {
      lo = a;
      a = b;
      fa = fb;
      b = lo + ratio * (hi - lo);
      fb = value(b);
      if (fb < best_v) {
        best_v = fb;
        best_u = b;
      }
    }
  }
  consider(0.5L * (lo + hi));
  return static_cast<double>(best_u);
}

PrimalRecovery brute_force_subproblem(const CompositeProblem& prob,
                                      const ManifoldSpec& manifold, const Eigen::MatrixXd& x,
                                      double t, std::uint64_t seed) {
  if (manifold.ambient_dim() > 50)
    throw InvalidInputError(
        "brute_force_subproblem: restricted to ambient dimension <= 50");

  Rng rng(seed ^ 0x9e3779b97f4a7c15ull);
  const Eigen::Index lam_cols = manifold.kind() == ManifoldSpec::Kind::Stiefel ? manifold.cols() : 1;
  std::vector<PrimalRecovery> answers;
  answers.reserve(10);
  for (int start = 0; start < 10; ++start) {
    DualState warm;
    if (start == 0) {
      warm.lam = Eigen::MatrixXd::Zero(manifold.cols(), lam_cols);
      warm.mu = Eigen::MatrixXd::Zero(prob.range_rows, prob.range_cols);
    } else {
      warm.lam = rng.gaussian(manifold.cols(), lam_cols);
      if (manifold.kind() == ManifoldSpec::Kind::Stiefel)
        warm.lam = 0.5 * (warm.lam + warm.lam.transpose()).eval();
      warm.mu = rng.gaussian(prob.range_rows, prob.range_cols);
    }
    try {
      answers.push_back(
          solve_inexact(prob, manifold, x, t, 1e-13, warm, 2000000).primal);
    } catch (const SubproblemFailureError& err) {
      throw OracleFailureError(std::string("brute_force_subproblem: start ") +
                               std::to_string(start) + " failed to certify: " + err.what());
    }
  }
  for (std::size_t i = 1; i < answers.size(); ++i) {
    const double dev = std::max((answers[i].d - answers[0].d).norm(),
                                (answers[i].v - answers[0].v).norm());
    if (dev > 1e-8)
      throw OracleFailureError(
          "brute_force_subproblem: multistart solutions disagree by " + std::to_string(dev));
  }
  return answers[0];
}

TheoryConstants::TheoryConstants(const ManifoldSpec& manifold, const CompositeProblem& prob,
                                 const SolverConfig& cfg) {
  c1_ = manifold.c1();
  c2_ = manifold.c2();
  lip_h_ = manifold.lip_h();
  theta_ = manifold.theta();
  kappa_ = manifold.kappa();
  lip_f_ = prob.lip_f_grad;
  bound_f_ = prob.bound_f_grad;
  lip_g_ = prob.lip_g;
  bound_a_ = prob.bound_map_jac;
  lip_a_ = prob.lip_map_jac;
  alpha_ = cfg.alpha > 0.0 ? cfg.alpha : alpha_default(prob);
  sigma_ = cfg.sigma;
  gamma_ = cfg.gamma;
  eta_bar_ = cfg.eta_bar;
  t_max_ = cfg.t_max;
  delta_bar_ = cfg.delta_bar;

  const double scale = bound_f_ + lip_g_ * bound_a_;
  m1_ = std::sqrt(c2_) * scale;
  m2_ = kappa_ * scale;
  tau_hat_ = std::min(2.0 * kappa_ * c1_ / (theta_ * lip_h_ * c2_), 1.0 / c2_);
  tau_bar_ = cfg.tau_bar > 0.0 ? cfg.tau_bar : tau_hat_;  // mirror solve()'s sentinel
}

double TheoryConstants::d_bound(double t, double delta) const {
  return t * (2.0 * bound_f_ + lip_g_) + ((bound_a_ + 1.0) / std::sqrt(c1_) + 1.0) * delta;
}

double TheoryConstants::v_bound(double t, double delta) const {
  return t * (bound_f_ + 2.0 * lip_g_) + ((bound_a_ + 1.0) / std::sqrt(c1_) + 1.0) * delta;
}

double TheoryConstants::lam_bound(double t, double delta) const {
  const double spread = (bound_a_ + 1.0) / std::sqrt(c1_) + 1.0;
  return ((3.0 + bound_a_) * bound_f_ + (3.0 * bound_a_ + 1.0) * lip_g_ +
          spread * (bound_a_ + 1.0) * delta / t) /
         std::sqrt(c1_);
}

double TheoryConstants::mu_bound(double t, double delta) const {
  const double spread = (bound_a_ + 1.0) / std::sqrt(c1_) + 1.0;
  return bound_f_ + 3.0 * lip_g_ + spread * delta / t;
}

double TheoryConstants::eta_hat1(double t, double delta) const {
  return std::min(theta_ / d_bound(t, delta), 1.0);
}

double TheoryConstants::eta_hat2(double t, double delta) const {
  const double descent_cap =
      1.0 / (t * (lip_f_ + lip_g_ * lip_a_ + alpha_ * lip_h_ + sigma_));
  return std::min(eta_hat1(t, delta), descent_cap);
}

double TheoryConstants::tau_hat2() const {
  const double b = theta_ / kappa_;
  return std::min(tau_hat_,
                  2.0 * (alpha_ * c1_ - m1_) / (alpha_ * lip_h_ * c2_ * b + sigma_));
}

int TheoryConstants::backtrack_bound() const {
  const double eta_floor = gamma_ * eta_hat2(t_max_, delta_bar_);
  const double tau_floor = 0.5 * gamma_ * tau_hat2();
  const double eta_count = std::ceil(std::log(eta_floor / eta_bar_) / std::log(gamma_));
  const double tau_count =
      std::ceil(std::log(tau_floor / tau_bar_) / std::log(0.5 * gamma_));
  return static_cast<int>(std::max({eta_count, tau_count, 0.0}));
}

double TheoryConstants::min_merit_weight() const {
  return std::max(m1_ / c1_, m2_ + 0.5 * sigma_ * tau_hat_ * tau_hat_);
}

}  // namespace fsipl
