#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "uavsec/baseline.hpp"
#include "uavsec/outage.hpp"
#include "uavsec/psca.hpp"

using namespace uavsec;

namespace {

Scenario small_scenario(int K, int N) {
  Scenario s = benchmark_scenario();
  s.sn_positions.resize(K);
  s.sn_tx_power.conservativeResize(K);
  s.noise_sn.conservativeResize(K);
  s.lambda_eve.conservativeResize(K, K);
  s.n_slots = N;
  s.flight_period = N * s.slot_len;
  validate_or_throw(s);
  return s;
}

void check_plan_feasible(const Scenario& s, const PlanResult& r) {
  const int N = s.n_slots;
  REQUIRE(static_cast<int>(r.schedule.size()) == N);
  // trajectory: periodic and speed-feasible, both exact by construction
  CHECK(r.trajectory.col(0) == r.trajectory.col(N - 1));
  for (int n = 0; n + 1 < N; n++)
    CHECK((r.trajectory.col(n + 1) - r.trajectory.col(n)).norm() <=
          s.v_max * s.slot_len + 1e-9);
  for (int n = 0; n < N; n++) {
    CHECK(r.p_an(n) >= -1e-12);
    CHECK(r.p_an(n) <= s.p_an_max + 1e-9);
    CHECK(r.schedule[n] >= -1);
    CHECK(r.schedule[n] < s.num_sn());
    if (r.schedule[n] < 0) continue;
    // scheduled slots meet the reliability target with equality and the
    // secrecy target as an inequality, certified by the closed forms
    CHECK(std::abs(r.rop(n) - s.eps_rop) < 1e-9);
    CHECK(r.sop(n) <= s.eps_sop + 1e-9);
  }
}

}  // namespace

TEST_CASE("initializer passes the expansion audit") {
  for (auto [K, N] : {std::pair{4, 210}, {3, 12}, {1, 8}}) {
    Scenario s = small_scenario(K, N);
    IteratePoint z = initialize(s);
    CHECK(audit_expansion_point(s, z).empty());
    CHECK(z.alpha.minCoeff() == doctest::Approx(1.0 / K));
    CHECK(z.p_an.maxCoeff() == doctest::Approx(s.p_an_max / 2));
  }
}

TEST_CASE("initializer rejects impossible secrecy setups") {
  Scenario s = small_scenario(3, 10);
  s.p_an_max = 0.0;  // no jamming power -> secrecy outage uncontrollable
  CHECK_THROWS_AS((void)initialize(s), std::invalid_argument);
}

TEST_CASE("point completion repairs solver round-off") {
  Scenario s = small_scenario(3, 12);
  IteratePoint z = initialize(s);
  // corrupt everything a solver could plausibly return inexactly
  z.q.col(0) += Vec2(3.0, -2.0);            // breaks periodicity
  z.q.col(5) += Vec2(25.0, 0.0);            // breaks the speed limit
  z.alpha(0, 3) = 1.2;                      // out of box
  z.alpha(1, 4) = 0.9;                      // makes the slot sum exceed 1
  z.alpha(2, 4) = 0.8;
  z.p_an(2) = -1e-10;                       // solver zero, slightly negative
  z.r_e.col(2).setConstant(40.0);           // ...with matching redundancy
  z.p_an(7) = s.p_an_max + 1e-7;
  z.mu.setConstant(99.0);                   // stale slacks
  IteratePoint c = complete_point(s, z);
  CHECK(audit_expansion_point(s, c).empty());
  CHECK(c.q.col(0) == c.q.col(s.n_slots - 1));
  for (int n = 0; n + 1 < s.n_slots; n++)
    CHECK((c.q.col(n + 1) - c.q.col(n)).norm() <= s.v_max * s.slot_len + 1e-12);
  CHECK(c.alpha.maxCoeff() <= 1.0 + 1e-12);
  CHECK(c.alpha.minCoeff() >= -1e-12);
  for (int n = 0; n < s.n_slots; n++) CHECK(c.alpha.col(n).sum() <= 1.0 + 1e-9);
  CHECK(c.p_an.minCoeff() > 0.0);  // floored: zero AN breaks the secrecy chain
  CHECK(c.p_an.maxCoeff() <= s.p_an_max);
}

TEST_CASE("completion is idempotent") {
  Scenario s = small_scenario(2, 8);
  IteratePoint z = initialize(s);
  IteratePoint c = complete_point(s, z);
  CHECK(c.eta == doctest::Approx(z.eta).epsilon(1e-12));
  CHECK((c.q - z.q).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((c.mu - z.mu).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("schedule rounding thresholds and ties") {
  Scenario s = small_scenario(3, 4);
  IteratePoint z = initialize(s);
  z.alpha.setZero();
  z.alpha(2, 0) = 1.0;                       // exactly binary -> identity
  z.alpha(0, 1) = 0.5; z.alpha(1, 1) = 0.5;  // tie -> lowest index
  z.alpha(1, 2) = 0.49;                      // below threshold -> idle
  z.alpha(0, 3) = 0.2; z.alpha(1, 3) = 0.7;  // clear winner
  auto sched = round_schedule(z);
  CHECK(sched == std::vector<int>{2, 0, -1, 1});
}

TEST_CASE("rate repair is tight against the closed forms") {
  Scenario s = small_scenario(3, 10);
  Eigen::Matrix2Xd q = circular_trajectory(s);
  Eigen::VectorXd p = Eigen::VectorXd::Constant(10, 0.5);
  std::vector<int> sched(10);
  for (int n = 0; n < 10; n++) sched[n] = n % 3;
  Eigen::MatrixXd ru, re;
  std::string warn = repair_rates(s, sched, q, p, ru, re);
  CHECK(warn.empty());
  for (int n = 0; n < 10; n++) {
    const int k = sched[n];
    REQUIRE(k >= 0);
    OutageInputs in;
    in.p_an = p(n);
    in.p_sn = s.sn_tx_power(k);
    in.r_code = ru(k, n);
    in.r_redundancy = re(k, n);
    LinkGeometry g{q.col(n), s.sn_positions[k], s.uav_altitude};
    CHECK(std::abs(rop_closed(in, g, s) - s.eps_rop) < 1e-9);
    CHECK(sop_closed(in, q.col(n), s, k) <= s.eps_sop + 1e-12);
    // minimality: nudging the redundancy rate down violates the target
    OutageInputs lower = in;
    lower.r_redundancy = re(k, n) - 1e-6;
    CHECK(sop_closed(lower, q.col(n), s, k) > s.eps_sop);
  }
}

TEST_CASE("rate repair with one node needs no redundancy") {
  Scenario s = small_scenario(1, 6);
  Eigen::Matrix2Xd q = circular_trajectory(s);
  Eigen::VectorXd p = Eigen::VectorXd::Zero(6);
  std::vector<int> sched(6, 0);
  Eigen::MatrixXd ru, re;
  CHECK(repair_rates(s, sched, q, p, ru, re).empty());
  CHECK(re.cwiseAbs().maxCoeff() == 0.0);
  CHECK(ru.minCoeff() > 0.0);
}

TEST_CASE("plan metrics match a direct recomputation") {
  Scenario s = small_scenario(2, 4);
  PlanResult r;
  r.schedule = {0, 1, -1, 0};
  r.trajectory = circular_trajectory(s);
  r.p_an = Eigen::VectorXd::Constant(4, 1.0);
  r.r_u = Eigen::MatrixXd::Zero(2, 4);
  r.r_e = Eigen::MatrixXd::Zero(2, 4);
  r.r_u(0, 0) = 3.0; r.r_e(0, 0) = 1.0;
  r.r_u(1, 1) = 2.0; r.r_e(1, 1) = 2.5;  // negative contribution kept as-is
  r.r_u(0, 3) = 4.0; r.r_e(0, 3) = 1.5;
  evaluate_plan(s, r);
  CHECK(r.asr(0) == doctest::Approx((2.0 + 2.5) / 4.0));
  CHECK(r.asr(1) == doctest::Approx(-0.5 / 4.0));
  CHECK(r.min_asr == doctest::Approx(-0.125));
  CHECK(r.rop(2) == 0.0);  // idle slot contributes nothing
}

TEST_CASE("solo-node planning reaches the hover optimum") {
  Scenario s = small_scenario(1, 10);
  PlanResult r = plan(s);
  CHECK(r.converged);
  CHECK(r.trace.back().phi < 1e-6);
  // single node, zero enclosing radius: the tour degenerates to hovering
  // right above the node, where the reliability-matched rate is analytic
  const double cap = std::log2(1.0 + s.beta0 * s.sn_tx_power(0) /
                                         (s.uav_altitude * s.uav_altitude * s.noise_uav));
  CHECK(r.min_asr > 0.95 * cap);
  for (int n = 0; n < s.n_slots; n++) CHECK(r.schedule[n] == 0);
  check_plan_feasible(s, r);
}

TEST_CASE("desk-scale planning returns a certified non-trivial plan") {
  Scenario s = small_scenario(3, 10);
  PlanResult r = plan(s);
  REQUIRE(!r.trace.empty());
  CHECK(r.trace.back().phi < 1e-6);
  CHECK(r.min_asr > 0.0);
  // every node is served, otherwise the max-min objective would be zero
  std::vector<bool> served(3, false);
  for (int n = 0; n < s.n_slots; n++)
    if (r.schedule[n] >= 0) served[r.schedule[n]] = true;
  for (int k = 0; k < 3; k++) CHECK(served[k]);
  check_plan_feasible(s, r);
  // the penalty weight follows omega <- min(c*omega, omega_max) exactly
  PscaSettings def;
  double w = def.omega0;
  for (size_t i = 0; i < r.trace.size(); i++) {
    CHECK(r.trace[i].omega == doctest::Approx(w).epsilon(1e-12));
    w = std::min(def.growth * w, def.omega_max);
  }
  // once the weight is capped the penalized objective is nondecreasing
  double prev = -1e300;
  for (const auto& t : r.trace) {
    if (t.omega >= def.omega_max * (1.0 - 1e-12)) {
      CHECK(t.objective >= prev - 1e-9);
      prev = t.objective;
    }
  }
}

TEST_CASE("fixed-trajectory planning keeps the tour frozen") {
  Scenario s = small_scenario(3, 10);
  PlanResult r = run_ftprs(s);
  Eigen::Matrix2Xd circ = circular_trajectory(s);
  CHECK((r.trajectory - circ).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(r.min_asr >= 0.0);
  check_plan_feasible(s, r);
}

TEST_CASE("warm-started planning dominates the frozen-tour run") {
  Scenario s = small_scenario(3, 10);
  PlanResult ft = run_ftprs(s);
  PlanResult jt = plan(s, {}, false, &ft.relaxed);
  CHECK(jt.min_asr >= ft.min_asr - 1e-9);
  check_plan_feasible(s, jt);
}

TEST_CASE("smallest enclosing circle on known configurations") {
  using V = Vec2;
  auto c1 = smallest_enclosing_circle({V(3, 4)});
  CHECK(c1.radius == 0.0);
  CHECK(c1.center == V(3, 4));
  auto c2 = smallest_enclosing_circle({V(-1, 0), V(1, 0)});
  CHECK(c2.radius == doctest::Approx(1.0));
  CHECK(c2.center.norm() < 1e-12);
  // equilateral triangle with side 2: circumradius 2/sqrt(3)
  const double h = std::sqrt(3.0);
  auto c3 = smallest_enclosing_circle({V(-1, 0), V(1, 0), V(0, h)});
  CHECK(c3.radius == doctest::Approx(2.0 / h));
  // an interior point must not change the circle
  auto c4 = smallest_enclosing_circle({V(-1, 0), V(1, 0), V(0, h), V(0.1, 0.5)});
  CHECK(c4.radius == doctest::Approx(c3.radius));
  // obtuse triangle: the longest side is the diameter
  auto c5 = smallest_enclosing_circle({V(0, 0), V(4, 0), V(1, 0.5)});
  CHECK(c5.radius == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("circular tour is periodic and speed-feasible") {
  for (int N : {2, 7, 30}) {
    Scenario s = small_scenario(4, N);
    Eigen::Matrix2Xd q = circular_trajectory(s);
    REQUIRE(q.cols() == N);
    CHECK(q.col(0) == q.col(N - 1));
    for (int n = 0; n + 1 < N; n++)
      CHECK((q.col(n + 1) - q.col(n)).norm() <= s.v_max * s.slot_len + 1e-9);
  }
}
