#pragma once

#include <Eigen/Dense>

namespace uavsec {

// First-order surrogates used to convexify the planning problem. Every
// surrogate is exact at its expansion point and restrictive: any point
// satisfying the surrogate constraint satisfies the original one. They are
// emitted as coefficient data so the model builder can assemble sparse
// matrices deterministically.

/// Tangent of a function of one variable at x_tilde.
struct Linearization {
  double f_tilde = 0.0;
  double slope = 0.0;
  double x_tilde = 0.0;
  double operator()(double x) const { return f_tilde + slope * (x - x_tilde); }
};

/// Tangent plane of a function of two variables at (x1_tilde, x2_tilde).
struct Linearization2 {
  double f_tilde = 0.0;
  double g1 = 0.0;
  double g2 = 0.0;
  double x1_tilde = 0.0;
  double x2_tilde = 0.0;
  double operator()(double x1, double x2) const {
    return f_tilde + g1 * (x1 - x1_tilde) + g2 * (x2 - x2_tilde);
  }
};

/// Linear overestimator of sum(a - a^2): sum over terms of
/// (1 - 2*a_tilde)*a + a_tilde^2. Used as the left side of "<= phi".
struct PenaltySurrogate {
  Eigen::VectorXd coeff;    // per-term weight on a
  double constant = 0.0;    // sum of a_tilde^2
  Eigen::VectorXd a_tilde;  // expansion point, kept for diagnostics
  double operator()(const Eigen::VectorXd& a) const { return coeff.dot(a) + constant; }
};
PenaltySurrogate penalty_surrogate(const Eigen::VectorXd& a_tilde);

/// Concave minorant of 4*sum(a_m*b_m) via 4ab = (a+b)^2 - (a-b)^2 with the
/// convex square linearized: sum[2(at+bt)(a+b) - (at+bt)^2 - (a-b)^2].
/// Evaluates to at most 4*sum(a*b) everywhere, with equality at the expansion
/// point; use as "value >= 4*rhs".
struct BilinearGeSurrogate {
  Eigen::VectorXd lin;       // 2(a_tilde+b_tilde), multiplies (a+b)
  double constant = 0.0;     // -sum (a_tilde+b_tilde)^2
  double operator()(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
    return lin.dot(a + b) + constant - (a - b).squaredNorm();
  }
};
BilinearGeSurrogate bilinear_ge_surrogate(const Eigen::VectorXd& a_tilde,
                                          const Eigen::VectorXd& b_tilde);

/// Convex majorant of 4*sum(a_m*b_m): sum[(a+b)^2 - 2(at-bt)(a-at+bt-b)
/// - (at-bt)^2]. Evaluates to at least 4*sum(a*b); use as "value <= 4*rhs".
struct BilinearLeSurrogate {
  Eigen::VectorXd lin;       // -2(a_tilde-b_tilde), multiplies (a-b)
  double constant = 0.0;     // sum (a_tilde-b_tilde)^2
  double operator()(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
    return (a + b).squaredNorm() + lin.dot(a - b) + constant;
  }
};
BilinearLeSurrogate bilinear_le_surrogate(const Eigen::VectorXd& a_tilde,
                                          const Eigen::VectorXd& b_tilde);

/// f1(x1,x2) = log2(1 + c/(x1*x2)), jointly convex for c >= 0, x1,x2 > 0.
double f1_value(double c, double x1, double x2);
Linearization2 f1_lower_bound(double c, double x1_tilde, double x2_tilde);

/// f3(x1,x2) = c/(x1*x2), jointly convex on the positive orthant.
double f3_value(double c, double x1, double x2);
Linearization2 f3_lower_bound(double c, double x1_tilde, double x2_tilde);

/// Affine overestimator of sqrt(x): sqrt(xt) + (x-xt)/(2 sqrt(xt)).
Linearization sqrt_upper_linearization(double x_tilde);

/// Affine underestimator of 2^r: 2^rt + 2^rt ln2 (r - rt).
Linearization exp2_linearization(double r_tilde);

/// Tangent plane of prod_m 1/theta_m (convex), a global lower bound:
/// (sum_m -theta_m/theta_tilde_m + M + 1) * prod_m 1/theta_tilde_m.
struct InvProductLowerBound {
  Eigen::VectorXd coeff;   // per-m weight on theta_m
  double constant = 0.0;
  double operator()(const Eigen::VectorXd& theta) const { return coeff.dot(theta) + constant; }
};
InvProductLowerBound inv_product_lower_bound(const Eigen::VectorXd& theta_tilde);

/// log(x) >= log(xt) + 2 - 2 sqrt(xt/x) for x, xt > 0 (natural log).
struct LogLowerBound {
  double x_tilde = 0.0;
  double operator()(double x) const;
};
LogLowerBound log_lower_bound(double x_tilde);

/// Safe replacement of the outage coupling exp(-(s2/(ps*lam)) sqrt(sig*tau))
/// <= 1 - 1/theta. Requiring
///   (s2/(ps*lam)) sqrt(sig*tau) >= rhs(theta)
/// with rhs below implies the original constraint, with equality at
/// theta = theta_tilde. theta_hat = 1 - 1/theta_tilde.
struct ExpConeSurrogate {
  double theta_hat = 0.0;
  double log_theta_hat = 0.0;
  double rhs(double theta) const;
};
ExpConeSurrogate exp_cone_surrogate(double theta_tilde);

}  // namespace uavsec
