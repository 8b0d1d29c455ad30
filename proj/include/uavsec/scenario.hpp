#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace uavsec {

using Vec2 = Eigen::Vector2d;

// dB / dBm conversions (linear power units are watts).
double db_to_linear(double db);
double linear_to_db(double lin);
double dbm_to_watt(double dbm);
double watt_to_dbm(double w);

/// All physical and system parameters of one planning problem, in SI linear
/// units. Immutable after construction; safe to share across threads.
struct Scenario {
  std::vector<Vec2> sn_positions;  // w_k, horizontal coordinates [m]
  Eigen::VectorXd sn_tx_power;     // P_s^k per SN [W], constant over slots
  double uav_altitude = 100.0;     // H [m]
  double flight_period = 0.0;      // T [s]
  int n_slots = 0;                 // N
  double slot_len = 1.0;           // delta_t [s]
  double v_max = 10.0;             // [m/s]
  double p_an_max = 0.0;           // AN power cap [W]
  double beta0 = 0.0;              // reference channel gain at 1 m, linear
  double lambda_self = 0.0;        // mean self-interference channel power, linear
  double rho_si = 0.0;             // self-interference cancellation coefficient
  Eigen::MatrixXd lambda_eve;      // K x K mean eavesdropping channel powers, linear
  double noise_uav = 0.0;          // sigma_u^2 [W]
  Eigen::VectorXd noise_sn;        // sigma_m^2 per SN [W]
  double eps_rop = 0.05;           // max allowable reliability outage probability
  double eps_sop = 0.05;           // max tolerable secrecy outage probability

  int num_sn() const { return static_cast<int>(sn_positions.size()); }
};

struct ScenarioError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Checks every Scenario invariant; returns one message per violation.
std::vector<std::string> validate(const Scenario& s);
void validate_or_throw(const Scenario& s);

/// Parses a flat key = value document. Keys match the Scenario field names;
/// power/gain fields accept _dbm / _db suffixed variants (the linear key wins
/// if both are present). Scalars broadcast to per-SN vectors and to the full
/// eavesdropper matrix.
Scenario load_scenario(const std::string& config_text);
Scenario load_scenario_file(const std::string& path);

/// Emits a document that load_scenario() parses back field-exact.
std::string serialize_scenario(const Scenario& s);

/// The four-SN benchmark configuration used throughout the experiments.
Scenario benchmark_scenario();

}  // namespace uavsec
