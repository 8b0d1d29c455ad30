#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "uavsec/scenario.hpp"
#include "uavsec/socp_model.hpp"
#include "uavsec/solver.hpp"

namespace uavsec {

struct PscaSettings {
  // The ramp is deliberately gentle: the relaxation needs a few dozen
  // iterations to polarize the schedule weights; once the penalty dominates
  // it freezes every weight on its nearest binary value, so dominating too
  // early collapses the whole schedule to idle.
  double omega0 = 0.003;     // initial binariness penalty weight
  double growth = 1.25;      // penalty growth factor per outer iteration
  double omega_max = 1e3;    // penalty cap
  double phi_tol = 1e-6;     // binariness slack required at convergence
  double obj_rel_tol = 1e-4; // relative objective change threshold
  int obj_stall_iters = 3;   // consecutive small-change iterations to stop
  int max_outer = 100;
  // Iterates are re-completed exactly after extraction, so mildly inaccurate
  // subproblem solutions (e.g. on a degenerate cone boundary) are safe to use.
  double accept_res_tol = 1e-4;  // residual cap for reduced-accuracy solves
  SolverSettings solver;
};

struct IterationRecord {
  int iter = 0;
  double objective = 0.0;  // eta - omega*phi after slack recompletion
  double eta = 0.0;
  double phi = 0.0;
  double omega = 0.0;
  std::string solver_status;
};

/// Raised when the conic solver returns an unusable iterate; carries the
/// outer-iteration index and the terminal status.
struct SolveFailure : std::runtime_error {
  SolveFailure(const std::string& msg, SolveStatus st, int it)
      : std::runtime_error(msg), status(st), iteration(it) {}
  SolveStatus status;
  int iteration;
};

struct PlanResult {
  IteratePoint relaxed;            // final continuous iterate
  std::vector<int> schedule;       // per slot: scheduled SN, -1 when idle
  Eigen::Matrix2Xd trajectory;     // 2 x N
  Eigen::VectorXd p_an;            // N
  Eigen::MatrixXd r_u, r_e;        // K x N repaired rates (zero when idle)
  Eigen::VectorXd asr;             // per-SN average secrecy rate
  double min_asr = 0.0;
  Eigen::VectorXd sop, rop;        // per-slot outages of the scheduled link
  std::vector<IterationRecord> trace;
  bool converged = false;
  std::string warning;             // non-fatal issues (idle slots, cap hits)
};

/// Feasible starting point on a maximum-speed circle around the SN centroid,
/// uniform scheduling, half AN power, redundancy rates sized for a secrecy
/// outage of eps_sop/2, all slack families completed exactly.
IteratePoint initialize(const Scenario& s);
IteratePoint initialize_with_trajectory(const Scenario& s, const Eigen::Matrix2Xd& q);

/// Repairs small solver round-off on (alpha, q, p_an, r_e) and recomputes
/// every slack family exactly from the closed-form outage chain, so the
/// point passes the expansion audit. Keeps trajectory periodicity and speed
/// limits exact.
IteratePoint complete_point(const Scenario& s, const IteratePoint& decision);

/// Runs the penalized successive-convexification loop. With fixed_traj the
/// trajectory stays at its initial value. warm_start (optional) replaces the
/// default initializer. Throws SolveFailure when a subproblem cannot be
/// solved to acceptable accuracy.
PlanResult plan(const Scenario& s, const PscaSettings& st = {}, bool fixed_traj = false,
                const IteratePoint* warm_start = nullptr);

/// Argmax rounding of the relaxed schedule; a slot stays idle unless its best
/// weight reaches 0.5. Ties pick the lowest SN index.
std::vector<int> round_schedule(const IteratePoint& z);

/// Exact post-rounding rates: the codeword rate meets the reliability target
/// with equality; the redundancy rate is the smallest one meeting the secrecy
/// target (bisection). Slots whose secrecy target is unreachable are idled and
/// reported in the returned message (empty when none).
std::string repair_rates(const Scenario& s, std::vector<int>& schedule,
                         const Eigen::Matrix2Xd& q, const Eigen::VectorXd& p_an,
                         Eigen::MatrixXd& r_u, Eigen::MatrixXd& r_e);

/// Fills asr/min_asr and the per-slot closed-form outages of `r` from its
/// schedule, trajectory, powers and rates.
void evaluate_plan(const Scenario& s, PlanResult& r);

}  // namespace uavsec
