#pragma once

#include "uavsec/conic.hpp"
#include "uavsec/scenario.hpp"

namespace uavsec {

/// Row index of eavesdropper m within SN k's (K-1)-sized family.
inline int pair_index(int K, int k, int m) { return k * (K - 1) + (m < k ? m : m - 1); }

/// Domain floors keeping the fractional surrogates well defined.
inline constexpr double kThetaFloor = 1.0 + 1e-6;
inline constexpr double kSlackFloor = 1e-9;

/// One full point of the planning problem: decision variables plus every
/// slack family. Matrices are K x N (or K(K-1) x N for per-eavesdropper
/// families, rows ordered by pair_index).
struct IteratePoint {
  Eigen::MatrixXd alpha;    // scheduling relaxation, K x N
  Eigen::Matrix2Xd q;       // UAV horizontal trajectory [m], 2 x N
  Eigen::VectorXd p_an;     // AN transmit power [W], N
  Eigen::MatrixXd r_e;      // redundancy rates, K x N
  double eta = 0.0;         // min average secrecy rate proxy
  double phi = 0.0;         // binariness slack
  Eigen::MatrixXd mu;       // per-slot secrecy-rate slack, K x N
  Eigen::MatrixXd nu;       // per-slot secrecy-outage slack, K x N
  Eigen::MatrixXd theta;    // outage product slack, K(K-1) x N
  Eigen::MatrixXd sigma1;   // eavesdropper SINR-denominator slack, K x N (by m)
  Eigen::MatrixXd tau;      // redundancy-rate square slack, K x N
  Eigen::VectorXd zeta;     // reciprocal AN power slack, N
  Eigen::MatrixXd pi;       // exponent-argument slack, K(K-1) x N
  Eigen::MatrixXd varpi;    // sqrt(1-xi) slack, K(K-1) x N
  Eigen::MatrixXd xi;       // 1/theta slack, K(K-1) x N

  int num_sn() const { return static_cast<int>(alpha.rows()); }
  int num_slots() const { return static_cast<int>(alpha.cols()); }
};

/// Allocates a zero-initialized point with the right shapes for (K, N).
IteratePoint make_iterate(int K, int N);

/// Column offsets of every variable family in the assembled program.
/// When the trajectory is fixed, q has no columns and q() must not be called.
struct VariableMap {
  int K = 0, N = 0;
  bool fixed_traj = false;
  int off_alpha = 0, off_q = 0, off_p = 0, off_re = 0, off_eta = 0, off_phi = 0;
  int off_mu = 0, off_nu = 0, off_theta = 0, off_sig = 0, off_tau = 0, off_zeta = 0;
  int off_pi = 0, off_varpi = 0, off_xi = 0;
  int total = 0;

  int alpha(int k, int n) const { return off_alpha + k * N + n; }
  int q(int d, int n) const { return off_q + 2 * n + d; }
  int p(int n) const { return off_p + n; }
  int re(int k, int n) const { return off_re + k * N + n; }
  int eta() const { return off_eta; }
  int phi() const { return off_phi; }
  int mu(int k, int n) const { return off_mu + k * N + n; }
  int nu(int k, int n) const { return off_nu + k * N + n; }
  int theta(int k, int m, int n) const { return off_theta + pair_index(K, k, m) * N + n; }
  int sig(int m, int n) const { return off_sig + m * N + n; }
  int tau(int k, int n) const { return off_tau + k * N + n; }
  int zeta(int n) const { return off_zeta + n; }
  int pi(int k, int m, int n) const { return off_pi + pair_index(K, k, m) * N + n; }
  int varpi(int k, int m, int n) const { return off_varpi + pair_index(K, k, m) * N + n; }
  int xi(int k, int m, int n) const { return off_xi + pair_index(K, k, m) * N + n; }
};

enum class BlockFamily {
  speed,          // ||q[n+1]-q[n]|| <= v_max * slot_len
  rate_sum,       // sum_n (alpha-mu)^2 <= aggregated linear bound (couples eta)
  capacity,       // squared-distance form of the per-slot rate surrogate
  sop_budget,     // sum_k (alpha+nu)^2 + const <= outage budget bound
  eve_distance,   // ||q-w_m||^2 <= linear bound in (zeta, sigma1)
  power_inverse,  // p_an * zeta >= 1
  geo_mean,       // sqrt(sigma1*tau) >= pi * scale
  log_bound,      // varpi*(pi + const) >= 2 sqrt(theta_hat)
  sqrt_cap,       // varpi^2 <= 1 - xi
  theta_xi,       // theta * xi >= 1
};

const char* to_string(BlockFamily f);

struct BlockInfo {
  BlockFamily family;
  int k = -1, m = -1, n = -1;  // indices where applicable, -1 otherwise
  int row0 = 0;                // first row of this cone in the cone matrix
  int dim = 0;
};

struct BuildResult {
  ConicProgram program;            // in scaled solver units
  VariableMap map;
  Eigen::VectorXd scale;           // physical value = scale[j] * solver value
  std::vector<BlockInfo> blocks;   // one entry per SOC block, in layout order
};

/// Checks the expansion point against every original (pre-surrogate)
/// constraint of the planning problem; returns one message per violation
/// beyond the tolerance.
std::vector<std::string> audit_expansion_point(const Scenario& s, const IteratePoint& z,
                                               double tol = 1e-8);

/// Assembles the convexified planning problem at expansion point z_tilde with
/// penalty weight omega into standard conic form (objective: minimize
/// -eta + omega*phi). Deterministic. With fixed_traj the trajectory columns
/// are dropped and z_tilde.q is folded in as constants. Throws
/// std::invalid_argument when the expansion point fails the audit.
BuildResult build_program(const Scenario& s, const IteratePoint& z_tilde, double omega,
                          bool fixed_traj = false);

/// Packs a point into a scaled solver vector (inverse of extract_iterate).
Eigen::VectorXd pack_iterate(const IteratePoint& z, const BuildResult& b);

/// Rebuilds a point from a solver solution, unscaling and restoring fixed
/// trajectory columns from z_tilde. Values are clamped into their domains
/// within `tol`; violations beyond it throw std::runtime_error.
IteratePoint extract_iterate(const Eigen::VectorXd& x, const BuildResult& b,
                             const IteratePoint& z_tilde, double tol = 1e-6);

}  // namespace uavsec
