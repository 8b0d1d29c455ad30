#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "uavsec/convexify.hpp"

using namespace uavsec;
using Eigen::VectorXd;

namespace {
std::mt19937_64 rng(20240817);
double runif(double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}
VectorXd rvec(int n, double lo, double hi) {
  VectorXd v(n);
  for (int i = 0; i < n; i++) v(i) = runif(lo, hi);
  return v;
}
}  // namespace

TEST_CASE("penalty surrogate: tightness, restrictiveness, hand value") {
  // single-term hand check at a_tilde=0.5, a=0.3
  PenaltySurrogate s = penalty_surrogate(VectorXd::Constant(1, 0.5));
  VectorXd a = VectorXd::Constant(1, 0.3);
  CHECK(s(a) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(s(a) >= 0.3 - 0.09);  // exact value 0.21

  for (int t = 0; t < 10000; t++) {
    VectorXd at = rvec(6, 0.0, 1.0);
    PenaltySurrogate ps = penalty_surrogate(at);
    // exact at the expansion point
    double exact_at = (at.array() - at.array().square()).sum();
    CHECK(std::abs(ps(at) - exact_at) <= 1e-9);
    // overestimates the concave original everywhere (restrictive for <= phi)
    VectorXd x = rvec(6, -0.5, 1.5);
    double exact = (x.array() - x.array().square()).sum();
    CHECK(ps(x) >= exact - 1e-12);
  }
  // binary point with a_tilde = a gives zero
  VectorXd bin(4);
  bin << 0, 1, 1, 0;
  CHECK(penalty_surrogate(bin)(bin) == doctest::Approx(0.0));
}

TEST_CASE("bilinear >= surrogate") {
  // hand value: at=bt=1, a=2, b=0 -> 2*2*2 - 4 - 4 = 0 = 4ab
  BilinearGeSurrogate s1 = bilinear_ge_surrogate(VectorXd::Ones(1), VectorXd::Ones(1));
  VectorXd a = VectorXd::Constant(1, 2.0), b = VectorXd::Zero(1);
  CHECK(s1(a, b) == doctest::Approx(0.0));

  for (int t = 0; t < 10000; t++) {
    VectorXd at = rvec(5, -2, 2), bt = rvec(5, -2, 2);
    BilinearGeSurrogate s = bilinear_ge_surrogate(at, bt);
    CHECK(std::abs(s(at, bt) - 4.0 * at.dot(bt)) <= 1e-9);
    VectorXd x = rvec(5, -2, 2), y = rvec(5, -2, 2);
    CHECK(s(x, y) <= 4.0 * x.dot(y) + 1e-9);
  }
}

TEST_CASE("bilinear <= surrogate") {
  for (int t = 0; t < 10000; t++) {
    VectorXd at = rvec(5, -2, 2), bt = rvec(5, -2, 2);
    BilinearLeSurrogate s = bilinear_le_surrogate(at, bt);
    CHECK(std::abs(s(at, bt) - 4.0 * at.dot(bt)) <= 1e-9);
    VectorXd x = rvec(5, -2, 2), y = rvec(5, -2, 2);
    CHECK(s(x, y) >= 4.0 * x.dot(y) - 1e-9);
  }
  // degenerate expansion at zero: surrogate is (a+b)^2 >= 4ab always
  BilinearLeSurrogate z = bilinear_le_surrogate(VectorXd::Zero(1), VectorXd::Zero(1));
  CHECK(z(VectorXd::Zero(1), VectorXd::Zero(1)) == doctest::Approx(0.0));
}

TEST_CASE("f1 lower bound") {
  Linearization2 l = f1_lower_bound(1.0, 1.0, 1.0);
  CHECK(l(1.0, 1.0) == doctest::Approx(1.0).epsilon(1e-12));  // log2(2)
  CHECK(l(2.0, 1.0) == doctest::Approx(1.0 - 1.0 / (2.0 * std::log(2.0))).epsilon(1e-12));
  CHECK(l(2.0, 1.0) <= f1_value(1.0, 2.0, 1.0));

  for (int t = 0; t < 10000; t++) {
    double c = runif(0.0, 5.0), x1t = runif(0.1, 10), x2t = runif(0.1, 10);
    Linearization2 s = f1_lower_bound(c, x1t, x2t);
    CHECK(std::abs(s(x1t, x2t) - f1_value(c, x1t, x2t)) <= 1e-9);
    double x1 = runif(0.1, 10), x2 = runif(0.1, 10);
    CHECK(s(x1, x2) <= f1_value(c, x1, x2) + 1e-9);
  }
  CHECK_THROWS(f1_lower_bound(1.0, 0.0, 1.0));
}

TEST_CASE("f3 lower bound") {
  Linearization2 l = f3_lower_bound(1.0, 1.0, 1.0);
  CHECK(l(2.0, 2.0) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(l(2.0, 2.0) <= 0.25);

  for (int t = 0; t < 10000; t++) {
    double c = runif(0.0, 5.0), x1t = runif(0.1, 10), x2t = runif(0.1, 10);
    Linearization2 s = f3_lower_bound(c, x1t, x2t);
    CHECK(std::abs(s(x1t, x2t) - f3_value(c, x1t, x2t)) <= 1e-9);
    double x1 = runif(0.1, 10), x2 = runif(0.1, 10);
    CHECK(s(x1, x2) <= f3_value(c, x1, x2) + 1e-9);
  }
}

TEST_CASE("sqrt upper linearization") {
  Linearization l = sqrt_upper_linearization(4.0);
  CHECK(l(4.0) == doctest::Approx(2.0));
  Linearization l1 = sqrt_upper_linearization(1.0);
  CHECK(l1(4.0) == doctest::Approx(2.5));
  for (int t = 0; t < 10000; t++) {
    double xt = runif(1e-3, 100);
    Linearization s = sqrt_upper_linearization(xt);
    double x = runif(1e-3, 100);
    CHECK(s(x) >= std::sqrt(x) - 1e-9);
    CHECK(std::abs(s(xt) - std::sqrt(xt)) <= 1e-12);
  }
  CHECK_THROWS(sqrt_upper_linearization(0.0));
}

TEST_CASE("exp2 linearization") {
  Linearization l = exp2_linearization(1.0);
  CHECK(l(1.0) == doctest::Approx(2.0));
  CHECK(l(2.0) == doctest::Approx(2.0 + 2.0 * std::log(2.0)).epsilon(1e-12));
  CHECK(l(2.0) <= 4.0);
  for (int t = 0; t < 10000; t++) {
    double rt = runif(0.0, 10);
    Linearization s = exp2_linearization(rt);
    double r = runif(0.0, 10);
    CHECK(s(r) <= std::exp2(r) + 1e-9);
    CHECK(std::abs(s(rt) - std::exp2(rt)) <= 1e-9);
  }
}

TEST_CASE("inverse-product lower bound") {
  // exactness at the expansion point for several sizes; the constant must be
  // (number of factors + 1) for the plane to be tangent
  for (int m : {1, 2, 3, 5}) {
    for (int t = 0; t < 2000; t++) {
      VectorXd tt = rvec(m, 1.01, 10.0);
      InvProductLowerBound s = inv_product_lower_bound(tt);
      double exact = (1.0 / tt.array()).prod();
      CHECK(std::abs(s(tt) - exact) <= 1e-9);
      VectorXd x = rvec(m, 0.5, 10.0);
      CHECK(s(x) <= (1.0 / x.array()).prod() + 1e-9);
      // increasing any theta lowers the bound
      CHECK((s.coeff.array() < 0.0).all());
    }
  }
  // K=2-style single-factor hand check: theta_tilde = 2 -> f2(2) = 1/2
  InvProductLowerBound s = inv_product_lower_bound(VectorXd::Constant(1, 2.0));
  CHECK(s(VectorXd::Constant(1, 2.0)) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("log lower bound") {
  LogLowerBound l = log_lower_bound(1.0);
  CHECK(l(1.0) == doctest::Approx(0.0));
  CHECK(l(4.0) == doctest::Approx(1.0));
  CHECK(l(4.0) <= std::log(4.0));
  for (int t = 0; t < 10000; t++) {
    double xt = runif(1e-3, 1000), x = runif(1e-3, 1000);
    LogLowerBound s = log_lower_bound(xt);
    CHECK(s(x) <= std::log(x) + 1e-9);
    CHECK(std::abs(s(xt) - std::log(xt)) <= 1e-9);
  }
}

TEST_CASE("exp-cone safe surrogate implies the original constraint") {
  // original: exp(-w) <= 1 - 1/theta with w = (s2/(ps lam)) sqrt(sig tau) >= 0
  // surrogate: w >= rhs(theta)
  for (int t = 0; t < 10000; t++) {
    double theta_tilde = runif(1.0 + 1e-4, 50.0);
    ExpConeSurrogate s = exp_cone_surrogate(theta_tilde);
    // tightness: at theta = theta_tilde the rhs equals -log(1 - 1/theta)
    CHECK(std::abs(s.rhs(theta_tilde) - (-std::log(1.0 - 1.0 / theta_tilde))) <= 1e-9);
    // restrictiveness: rhs dominates -log(1 - 1/theta) for any theta > 1
    double theta = runif(1.0 + 1e-4, 50.0);
    CHECK(s.rhs(theta) >= -std::log(1.0 - 1.0 / theta) - 1e-9);
    // implication: any w meeting the surrogate satisfies the exponential form
    double w = s.rhs(theta) + runif(0.0, 2.0);
    CHECK(std::exp(-w) <= 1.0 - 1.0 / theta + 1e-12);
  }
  CHECK_THROWS(exp_cone_surrogate(1.0));
}
