#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "uavsec/psca.hpp"
#include "uavsec/scenario.hpp"
#include "uavsec/socp_model.hpp"

using namespace uavsec;

namespace {

Scenario small_scenario(int K, int N) {
  Scenario s = benchmark_scenario();
  REQUIRE(K <= s.num_sn());
  s.sn_positions.resize(K);
  s.sn_tx_power.conservativeResize(K);
  s.noise_sn.conservativeResize(K);
  s.lambda_eve.conservativeResize(K, K);
  s.n_slots = N;
  s.flight_period = N * s.slot_len;
  validate_or_throw(s);
  return s;
}

// physical view of one sampled solution vector
struct View {
  const VariableMap& vm;
  Eigen::VectorXd v;
  double a(int k, int n) const { return v(vm.alpha(k, n)); }
  Eigen::Vector2d q(const IteratePoint& zt, int n) const {
    if (vm.fixed_traj) return zt.q.col(n);
    return {v(vm.q(0, n)), v(vm.q(1, n))};
  }
};

// scalar restatement of one cone block, recomputed from first principles
bool scalar_ok(const Scenario& s, const IteratePoint& zt, const BlockInfo& b, const View& w,
               double band, bool& near_boundary) {
  const VariableMap& vm = w.vm;
  const int K = vm.K, N = vm.N;
  const double H2 = s.uav_altitude * s.uav_altitude;
  double lhs = 0.0, rhs = 0.0;
  switch (b.family) {
    case BlockFamily::speed: {
      lhs = (w.q(zt, b.n + 1) - w.q(zt, b.n)).norm();
      rhs = s.v_max * s.slot_len;
      break;
    }
    case BlockFamily::rate_sum: {
      double quad = 0.0, big_a = 0.0;
      for (int n = 0; n < N; n++) {
        const double at = zt.alpha(b.k, n), mt = zt.mu(b.k, n);
        const double av = w.a(b.k, n), mv = w.v(vm.mu(b.k, n));
        quad += (av - mv) * (av - mv);
        big_a += 2.0 * (at + mt) * (av + mv) - (at + mt) * (at + mt);
      }
      lhs = quad;
      rhs = big_a - 4.0 * N * w.v(vm.eta());
      break;
    }
    case BlockFamily::capacity: {
      const double ps = s.sn_tx_power(b.k);
      const double x1t = (zt.q.col(b.n) - s.sn_positions[b.k]).squaredNorm() + H2;
      const double x2t = -s.rho_si * zt.p_an(b.n) * s.lambda_self * std::log(s.eps_rop) +
                         s.noise_uav;
      const double gg = -s.beta0 * ps * s.rho_si * s.lambda_self * std::log(s.eps_rop);
      const double big_e = (x1t * x2t + s.beta0 * ps) * std::log(2.0);
      const double cap_t = std::log2(1.0 + s.beta0 * ps / (x1t * x2t));
      lhs = s.beta0 * ps / x1t * (w.q(zt, b.n) - s.sn_positions[b.k]).squaredNorm();
      rhs = gg * (zt.p_an(b.n) - w.v(vm.p(b.n))) / x2t +
            big_e * (cap_t - w.v(vm.re(b.k, b.n)) - w.v(vm.mu(b.k, b.n))) +
            s.beta0 * ps * (x1t - H2) / x1t;
      break;
    }
    case BlockFamily::sop_budget: {
      double quad = 0.0, lin = 0.0;
      for (int k = 0; k < K; k++) {
        const double dt = zt.alpha(k, b.n) - zt.nu(k, b.n);
        const double av = w.a(k, b.n), nv = w.v(vm.nu(k, b.n));
        quad += (av + nv) * (av + nv) + dt * dt;
        lin += 2.0 * dt * (av - nv);
      }
      lhs = quad;
      rhs = 4.0 * s.eps_sop + lin;
      break;
    }
    case BlockFamily::eve_distance: {
      const double x1t = (zt.q.col(b.n) - s.sn_positions[b.m]).squaredNorm() + H2;
      const double st = zt.sigma1(b.m, b.n);
      const double slope = 0.5 / std::sqrt(st);
      const double intercept = std::sqrt(st) - slope * st;
      const double ratio = x1t * x1t / (s.beta0 / s.noise_sn(b.m) * zt.p_an(b.n));
      lhs = (w.q(zt, b.n) - s.sn_positions[b.m]).squaredNorm();
      rhs = 2.0 * x1t + (1.0 - intercept) * ratio + (x1t - H2) -
            x1t * zt.p_an(b.n) * w.v(vm.zeta(b.n)) - slope * ratio * w.v(vm.sig(b.m, b.n));
      break;
    }
    case BlockFamily::power_inverse: {
      const double p = w.v(vm.p(b.n)), zv = w.v(vm.zeta(b.n));
      near_boundary = std::abs(p * zv - 1.0) < band || std::abs(p + zv) < band;
      return p + zv >= 0.0 && p * zv >= 1.0;
    }
    case BlockFamily::geo_mean: {
      const double cscale = s.sn_tx_power(b.k) * s.lambda_eve(b.k, b.m) / s.noise_sn(b.m);
      const double sg = w.v(vm.sig(b.m, b.n)), tv = w.v(vm.tau(b.k, b.n));
      const double pv = cscale * w.v(vm.pi(b.k, b.m, b.n));
      near_boundary = std::abs(sg * tv - pv * pv) < band * (1.0 + pv * pv) ||
                      std::abs(sg + tv) < band;
      return sg + tv >= 0.0 && sg * tv >= pv * pv;
    }
    case BlockFamily::log_bound: {
      const double th = zt.theta(pair_index(K, b.k, b.m), b.n);
      const double theta_hat = 1.0 - 1.0 / th;
      const double av = w.v(vm.varpi(b.k, b.m, b.n));
      const double bv = w.v(vm.pi(b.k, b.m, b.n)) + std::log(theta_hat) + 2.0;
      near_boundary = std::abs(av * bv - 2.0 * std::sqrt(theta_hat)) < band ||
                      std::abs(av + bv) < band;
      return av + bv >= 0.0 && av * bv >= 2.0 * std::sqrt(theta_hat);
    }
    case BlockFamily::sqrt_cap: {
      const double vp = w.v(vm.varpi(b.k, b.m, b.n)), xv = w.v(vm.xi(b.k, b.m, b.n));
      near_boundary = std::abs(vp * vp - (1.0 - xv)) < band || std::abs(2.0 - xv) < band;
      return xv <= 2.0 && vp * vp <= 1.0 - xv;
    }
    case BlockFamily::theta_xi: {
      const double th = w.v(vm.theta(b.k, b.m, b.n)), xv = w.v(vm.xi(b.k, b.m, b.n));
      near_boundary = std::abs(th * xv - 1.0) < band || std::abs(th + xv) < band;
      return th + xv >= 0.0 && th * xv >= 1.0;
    }
  }
  near_boundary = std::abs(rhs - lhs) < band * (1.0 + std::abs(rhs) + std::abs(lhs));
  return lhs <= rhs;
}

void check_point_feasible(const ConicProgram& p, const Eigen::VectorXd& x, double tol) {
  const Eigen::VectorXd slack = p.cone_rhs - p.cone_mat * x;
  for (int i = 0; i < p.cones.orthant; i++) REQUIRE(slack(i) >= -tol);
  int at = p.cones.orthant;
  for (int dim : p.cones.soc) {
    const double margin = slack(at) - slack.segment(at + 1, dim - 1).norm();
    REQUIRE(margin >= -tol * (1.0 + std::abs(slack(at))));
    at += dim;
  }
  if (p.num_eq() > 0) REQUIRE((p.eq_mat * x - p.eq_rhs).norm() <= tol);
}

}  // namespace

TEST_CASE("variable census and block inventory") {
  const int K = 3, N = 5;
  const Scenario s = small_scenario(K, N);
  const IteratePoint z = initialize(s);
  const BuildResult b = build_program(s, z, 1.0);

  const int expect = K * N + 2 * N + N + K * N + 2 + K * N + 4 * K * N + N +
                     4 * K * (K - 1) * N - K * N;
  CHECK(b.map.total == expect);
  CHECK(b.program.num_vars() == expect);
  CHECK(b.program.num_eq() == 2);

  std::map<BlockFamily, int> count;
  for (const auto& blk : b.blocks) count[blk.family]++;
  CHECK(count[BlockFamily::speed] == N - 1);
  CHECK(count[BlockFamily::rate_sum] == K);
  CHECK(count[BlockFamily::capacity] == K * N);
  CHECK(count[BlockFamily::sop_budget] == N);
  CHECK(count[BlockFamily::eve_distance] == K * N);
  CHECK(count[BlockFamily::power_inverse] == N);
  CHECK(count[BlockFamily::geo_mean] == K * (K - 1) * N);
  CHECK(count[BlockFamily::log_bound] == K * (K - 1) * N);
  CHECK(count[BlockFamily::sqrt_cap] == K * (K - 1) * N);
  CHECK(count[BlockFamily::theta_xi] == K * (K - 1) * N);

  int soc_rows = 0;
  for (int d : b.program.cones.soc) soc_rows += d;
  CHECK(b.program.num_cone_rows() == b.program.cones.orthant + soc_rows);
  for (const auto& blk : b.blocks) {
    CHECK(blk.row0 >= b.program.cones.orthant);
    CHECK(blk.row0 + blk.dim <= b.program.num_cone_rows());
  }
}

TEST_CASE("expansion point satisfies the assembled program") {
  const Scenario s = small_scenario(3, 5);
  const IteratePoint z = initialize(s);
  CHECK(audit_expansion_point(s, z).empty());
  for (bool fixed : {false, true}) {
    const BuildResult b = build_program(s, z, 1.0, fixed);
    check_point_feasible(b.program, pack_iterate(z, b), 1e-7);
  }
}

TEST_CASE("cone membership matches independent scalar recomputation") {
  const int K = 3, N = 5;
  const Scenario s = small_scenario(K, N);
  const IteratePoint zt = initialize(s);
  const BuildResult b = build_program(s, zt, 1.0);
  const ConicProgram& p = b.program;
  const Eigen::VectorXd x0 = pack_iterate(zt, b);

  std::mt19937_64 rng(0x5eedbeefULL);
  std::normal_distribution<double> gauss(0.0, 0.35);
  const double band = 1e-7;

  std::map<BlockFamily, int> in_count, out_count, tested;
  const int n_samples = 4000;
  for (int t = 0; t < n_samples; t++) {
    Eigen::VectorXd x = x0;
    for (int j = 0; j < x.size(); j++) x(j) += gauss(rng);
    View w{b.map, x.cwiseProduct(b.scale)};
    const Eigen::VectorXd slack = p.cone_rhs - p.cone_mat * x;
    for (const auto& blk : b.blocks) {
      const double s0 = slack(blk.row0);
      const double tail = slack.segment(blk.row0 + 1, blk.dim - 1).norm();
      const double margin = s0 - tail;
      if (std::abs(margin) < band * (1.0 + std::abs(s0) + tail)) continue;
      bool near = false;
      const bool want = scalar_ok(s, zt, blk, w, band, near);
      if (near) continue;
      tested[blk.family]++;
      const bool got = margin >= 0.0;
      if (got)
        in_count[blk.family]++;
      else
        out_count[blk.family]++;
      if (got != want) {
        CAPTURE(to_string(blk.family));
        CAPTURE(blk.k);
        CAPTURE(blk.m);
        CAPTURE(blk.n);
        CAPTURE(margin);
        REQUIRE(got == want);
      }
    }
  }
  for (const auto& blk : b.blocks) {
    CAPTURE(to_string(blk.family));
    CHECK(tested[blk.family] >= 10000);
    CHECK(in_count[blk.family] > 0);
    CHECK(out_count[blk.family] > 0);
  }
}

TEST_CASE("single-SN program drops the secrecy machinery") {
  const int N = 6;
  const Scenario s = small_scenario(1, N);
  const IteratePoint z = initialize(s);
  const BuildResult b = build_program(s, z, 1.0);
  CHECK(b.map.total == 1 * N + 2 * N + N + 1 * N + 2 + 1 * N);
  for (const auto& blk : b.blocks) {
    const bool core = blk.family == BlockFamily::speed || blk.family == BlockFamily::rate_sum ||
                      blk.family == BlockFamily::capacity;
    CHECK(core);
  }
  check_point_feasible(b.program, pack_iterate(z, b), 1e-7);
}

TEST_CASE("fixed-trajectory build drops motion rows") {
  const Scenario s = small_scenario(3, 5);
  const IteratePoint z = initialize(s);
  const BuildResult b = build_program(s, z, 1.0, true);
  CHECK(b.map.fixed_traj);
  CHECK(b.program.num_eq() == 0);
  for (const auto& blk : b.blocks) CHECK(blk.family != BlockFamily::speed);
  const BuildResult bf = build_program(s, z, 1.0, false);
  CHECK(b.map.total == bf.map.total - 2 * s.n_slots);
}

TEST_CASE("pack and extract round-trip") {
  const Scenario s = small_scenario(3, 4);
  const IteratePoint z = initialize(s);
  for (bool fixed : {false, true}) {
    const BuildResult b = build_program(s, z, 1.0, fixed);
    const Eigen::VectorXd x = pack_iterate(z, b);
    const IteratePoint z2 = extract_iterate(x, b, z);
    const double tol = 1e-12;
    CHECK(z2.alpha.isApprox(z.alpha, tol));
    CHECK(z2.q.isApprox(z.q, tol));
    CHECK(z2.p_an.isApprox(z.p_an, tol));
    CHECK(z2.r_e.isApprox(z.r_e, tol));
    CHECK(z2.mu.isApprox(z.mu, tol));
    CHECK(z2.nu.isApprox(z.nu, tol));
    CHECK(z2.theta.isApprox(z.theta, tol));
    CHECK(z2.sigma1.isApprox(z.sigma1, tol));
    CHECK(z2.tau.isApprox(z.tau, tol));
    CHECK(z2.zeta.isApprox(z.zeta, tol));
    CHECK(z2.pi.isApprox(z.pi, tol));
    CHECK(z2.varpi.isApprox(z.varpi, tol));
    CHECK(z2.xi.isApprox(z.xi, tol));
    CHECK(z2.eta == doctest::Approx(z.eta).epsilon(tol));
    CHECK(z2.phi == doctest::Approx(z.phi).epsilon(tol));
  }
}

TEST_CASE("assembly is deterministic") {
  const Scenario s = small_scenario(3, 4);
  const IteratePoint z = initialize(s);
  const BuildResult a = build_program(s, z, 7.5);
  const BuildResult b = build_program(s, z, 7.5);
  CHECK(dump_program(a.program) == dump_program(b.program));
}

TEST_CASE("bad expansion points and solutions are rejected") {
  const Scenario s = small_scenario(3, 4);
  IteratePoint z = initialize(s);
  const BuildResult b = build_program(s, z, 1.0);

  IteratePoint bad = z;
  bad.alpha(0, 0) = 1.5;
  CHECK(!audit_expansion_point(s, bad).empty());
  CHECK_THROWS_AS(build_program(s, bad, 1.0), std::invalid_argument);

  Eigen::VectorXd x = pack_iterate(z, b);
  x(b.map.alpha(0, 0)) = 5.0 / b.scale(b.map.alpha(0, 0));
  CHECK_THROWS_AS(extract_iterate(x, b, z), std::runtime_error);
  CHECK_THROWS_AS(extract_iterate(Eigen::VectorXd::Zero(3), b, z), std::runtime_error);
}
