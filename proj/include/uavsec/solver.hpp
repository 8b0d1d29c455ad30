#pragma once

#include "uavsec/conic.hpp"

namespace uavsec {

struct SolverSettings {
  int max_iterations = 200;
  double feas_tol = 1e-8;      // primal/dual residual tolerance
  double abs_gap_tol = 1e-8;   // absolute complementarity gap
  double rel_gap_tol = 1e-8;   // relative duality gap
  double infeas_tol = 1e-8;    // infeasibility certificate tolerance
};

enum class SolveStatus {
  optimal,
  primal_infeasible,
  dual_infeasible,
  iteration_limit,
  numerical_failure,
};

const char* to_string(SolveStatus s);

struct ResidualReport {
  double primal = 0.0;    // normalized primal residual
  double dual = 0.0;      // normalized dual residual
  double gap = 0.0;       // absolute complementarity gap
  double rel_gap = 0.0;   // gap relative to |objective|
  double cone_violation = 0.0;  // worst distance of s from its cone
};

struct SolveResult {
  SolveStatus status = SolveStatus::numerical_failure;
  Eigen::VectorXd x;       // primal variables
  Eigen::VectorXd y;       // equality multipliers
  Eigen::VectorXd z;       // cone multipliers
  Eigen::VectorXd s;       // cone slacks, cone_rhs - cone_mat*x
  double objective = 0.0;  // c'x
  ResidualReport residuals;
  int iterations = 0;
};

/// Solves the conic program with a homogeneous self-dual primal-dual
/// interior-point method (Nesterov-Todd scaling, Mehrotra
/// predictor-corrector). Deterministic for fixed inputs.
SolveResult solve(const ConicProgram& p, const SolverSettings& settings = {});

/// Recomputes the residual report from scratch against the original problem
/// data. For infeasible statuses, validates the returned certificate instead.
ResidualReport check_certificate(const ConicProgram& p, const SolveResult& r);

}  // namespace uavsec
