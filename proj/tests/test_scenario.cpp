#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "uavsec/scenario.hpp"

using namespace uavsec;

TEST_CASE("unit conversions") {
  CHECK(dbm_to_watt(36.0) == doctest::Approx(3.981071705534972).epsilon(1e-12));
  CHECK(dbm_to_watt(30.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(dbm_to_watt(-110.0) == doctest::Approx(1e-14).epsilon(1e-12));
  CHECK(db_to_linear(-60.0) == doctest::Approx(1e-6).epsilon(1e-12));
  for (double x : {1e-14, 1e-6, 0.5, 1.0, 3.981, 123.456}) {
    CHECK(db_to_linear(linear_to_db(x)) == doctest::Approx(x).epsilon(1e-12));
    CHECK(dbm_to_watt(watt_to_dbm(x)) == doctest::Approx(x).epsilon(1e-12));
  }
}

TEST_CASE("benchmark preset matches documented values") {
  Scenario s = benchmark_scenario();
  CHECK(s.num_sn() == 4);
  CHECK(s.sn_positions[0].x() == -240);
  CHECK(s.sn_positions[3].y() == 160);
  CHECK(s.p_an_max == doctest::Approx(3.981071705534972));
  CHECK(s.sn_tx_power(2) == doctest::Approx(1.0));
  CHECK(s.v_max == 10.0);
  CHECK(s.uav_altitude == 100.0);
  CHECK(s.noise_uav == doctest::Approx(1e-14));
  CHECK(s.lambda_self == doctest::Approx(1e-6));
  CHECK(s.rho_si == doctest::Approx(1e-6));
  CHECK(s.beta0 == doctest::Approx(1e-6));
  CHECK(s.lambda_eve(0, 1) == doctest::Approx(1e-11));
  CHECK(s.flight_period == 210.0);
  CHECK(s.n_slots == 210);
  CHECK(s.eps_rop == 0.05);
  CHECK(s.eps_sop == 0.05);
  CHECK(validate(s).empty());
}

TEST_CASE("parser handles db/dbm variants and broadcast") {
  const char* text = R"(
# comment line
sn_positions = -240 -160; 160 -160; 240 80; 0 160
sn_tx_power_dbm = 30
uav_altitude = 100
flight_period = 210
n_slots = 210
slot_len = 1
v_max = 10
p_an_max_dbm = 36
beta0_db = -60
lambda_self_db = -60
rho_si_db = -60
lambda_eve_db = -60
noise_uav_dbm = -110
noise_sn_dbm = -110
eps_rop = 0.05
eps_sop = 0.05
)";
  Scenario s = load_scenario(text);
  Scenario ref = benchmark_scenario();
  CHECK(s.num_sn() == 4);
  CHECK(s.p_an_max == doctest::Approx(ref.p_an_max).epsilon(1e-15));
  CHECK(s.sn_tx_power(3) == doctest::Approx(1.0));
  CHECK(s.noise_sn(1) == doctest::Approx(1e-14));
  CHECK(s.lambda_eve(0, 2) == doctest::Approx(1e-6));
  CHECK(s.lambda_eve.rows() == 4);
}

TEST_CASE("linear key wins over suffixed variant") {
  std::string text = serialize_scenario(benchmark_scenario());
  text += "p_an_max = 2.0\np_an_max_dbm = 30\n";
  // later duplicate keys overwrite earlier ones, so re-parse from a clean doc
  Scenario s = load_scenario(text);
  CHECK(s.p_an_max == 2.0);
}

TEST_CASE("serialize round-trips field-exact") {
  Scenario a = benchmark_scenario();
  a.sn_tx_power(1) = 0.123456789012345678;
  a.lambda_eve(2, 0) = 7.77e-7;
  a.noise_sn(3) = 1.3e-14;
  Scenario b = load_scenario(serialize_scenario(a));
  CHECK(a.sn_positions == b.sn_positions);
  CHECK(a.sn_tx_power == b.sn_tx_power);
  CHECK(a.lambda_eve == b.lambda_eve);
  CHECK(a.noise_sn == b.noise_sn);
  CHECK(a.uav_altitude == b.uav_altitude);
  CHECK(a.flight_period == b.flight_period);
  CHECK(a.n_slots == b.n_slots);
  CHECK(a.slot_len == b.slot_len);
  CHECK(a.v_max == b.v_max);
  CHECK(a.p_an_max == b.p_an_max);
  CHECK(a.beta0 == b.beta0);
  CHECK(a.lambda_self == b.lambda_self);
  CHECK(a.rho_si == b.rho_si);
  CHECK(a.noise_uav == b.noise_uav);
  CHECK(a.eps_rop == b.eps_rop);
  CHECK(a.eps_sop == b.eps_sop);
}

TEST_CASE("validation catches bad fields") {
  Scenario s = benchmark_scenario();
  s.n_slots = 211;  // breaks T = N * slot_len
  auto errs = validate(s);
  REQUIRE(errs.size() == 1);
  CHECK(errs[0].find("flight_period") != std::string::npos);

  s = benchmark_scenario();
  s.eps_rop = 0.0;
  errs = validate(s);
  REQUIRE(errs.size() == 1);
  CHECK(errs[0].find("eps_rop") != std::string::npos);

  s = benchmark_scenario();
  s.rho_si = 1.5;
  errs = validate(s);
  REQUIRE(errs.size() == 1);
  CHECK(errs[0].find("rho_si") != std::string::npos);

  s = benchmark_scenario();
  s.eps_sop = 1.0;
  s.noise_uav = 0.0;
  CHECK(validate(s).size() == 2);
  CHECK_THROWS_AS(validate_or_throw(s), ScenarioError);
}

TEST_CASE("parser errors") {
  CHECK_THROWS_AS(load_scenario("not a key value line\n"), ScenarioError);
  CHECK_THROWS_AS(load_scenario("sn_positions = 0 0;\n"), ScenarioError);  // missing keys
}
