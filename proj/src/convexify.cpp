#include "uavsec/convexify.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace uavsec {

namespace {
void require_positive(double x, const char* what) {
  if (!(x > 0.0)) throw std::domain_error(std::string(what) + " must be positive");
}
}  // namespace

PenaltySurrogate penalty_surrogate(const Eigen::VectorXd& a_tilde) {
  PenaltySurrogate s;
  s.a_tilde = a_tilde;
  s.coeff = Eigen::VectorXd::Ones(a_tilde.size()) - 2.0 * a_tilde;
  s.constant = a_tilde.squaredNorm();
  return s;
}

BilinearGeSurrogate bilinear_ge_surrogate(const Eigen::VectorXd& a_tilde,
                                          const Eigen::VectorXd& b_tilde) {
  BilinearGeSurrogate s;
  s.lin = 2.0 * (a_tilde + b_tilde);
  s.constant = -(a_tilde + b_tilde).squaredNorm();
  return s;
}

BilinearLeSurrogate bilinear_le_surrogate(const Eigen::VectorXd& a_tilde,
                                          const Eigen::VectorXd& b_tilde) {
  BilinearLeSurrogate s;
  s.lin = -2.0 * (a_tilde - b_tilde);
  s.constant = (a_tilde - b_tilde).squaredNorm();
  return s;
}

double f1_value(double c, double x1, double x2) { return std::log2(1.0 + c / (x1 * x2)); }

Linearization2 f1_lower_bound(double c, double x1_tilde, double x2_tilde) {
  if (c < 0.0) throw std::domain_error("f1_lower_bound: c must be nonnegative");
  require_positive(x1_tilde, "f1_lower_bound: x1_tilde");
  require_positive(x2_tilde, "f1_lower_bound: x2_tilde");
  Linearization2 l;
  l.x1_tilde = x1_tilde;
  l.x2_tilde = x2_tilde;
  l.f_tilde = f1_value(c, x1_tilde, x2_tilde);
  const double denom = (x1_tilde * x2_tilde + c) * std::numbers::ln2;
  l.g1 = -c / (x1_tilde * denom);
  l.g2 = -c / (x2_tilde * denom);
  return l;
}

double f3_value(double c, double x1, double x2) { return c / (x1 * x2); }

Linearization2 f3_lower_bound(double c, double x1_tilde, double x2_tilde) {
  if (c < 0.0) throw std::domain_error("f3_lower_bound: c must be nonnegative");
  require_positive(x1_tilde, "f3_lower_bound: x1_tilde");
  require_positive(x2_tilde, "f3_lower_bound: x2_tilde");
  Linearization2 l;
  l.x1_tilde = x1_tilde;
  l.x2_tilde = x2_tilde;
  l.f_tilde = f3_value(c, x1_tilde, x2_tilde);
  l.g1 = -c / (x1_tilde * x1_tilde * x2_tilde);
  l.g2 = -c / (x1_tilde * x2_tilde * x2_tilde);
  return l;
}

Linearization sqrt_upper_linearization(double x_tilde) {
  require_positive(x_tilde, "sqrt_upper_linearization: x_tilde");
  Linearization l;
  l.x_tilde = x_tilde;
  l.f_tilde = std::sqrt(x_tilde);
  l.slope = 0.5 / std::sqrt(x_tilde);
  return l;
}

Linearization exp2_linearization(double r_tilde) {
  Linearization l;
  l.x_tilde = r_tilde;
  l.f_tilde = std::exp2(r_tilde);
  l.slope = l.f_tilde * std::numbers::ln2;
  return l;
}

InvProductLowerBound inv_product_lower_bound(const Eigen::VectorXd& theta_tilde) {
  const Eigen::Index m = theta_tilde.size();
  for (Eigen::Index i = 0; i < m; i++) require_positive(theta_tilde(i), "inv_product_lower_bound: theta_tilde");
  const double prod_inv = (1.0 / theta_tilde.array()).prod();
  InvProductLowerBound s;
  s.coeff = -prod_inv / theta_tilde.array();
  s.constant = static_cast<double>(m + 1) * prod_inv;
  return s;
}

double LogLowerBound::operator()(double x) const {
  return std::log(x_tilde) + 2.0 - 2.0 * std::sqrt(x_tilde / x);
}

LogLowerBound log_lower_bound(double x_tilde) {
  require_positive(x_tilde, "log_lower_bound: x_tilde");
  return LogLowerBound{x_tilde};
}

double ExpConeSurrogate::rhs(double theta) const {
  return -log_theta_hat - 2.0 + 2.0 * std::sqrt(theta_hat) / std::sqrt(1.0 - 1.0 / theta);
}

ExpConeSurrogate exp_cone_surrogate(double theta_tilde) {
  if (!(theta_tilde > 1.0)) throw std::domain_error("exp_cone_surrogate: theta_tilde must exceed 1");
  ExpConeSurrogate s;
  s.theta_hat = 1.0 - 1.0 / theta_tilde;
  s.log_theta_hat = std::log(s.theta_hat);
  return s;
}

}  // namespace uavsec
