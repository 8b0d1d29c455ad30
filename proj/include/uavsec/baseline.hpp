#pragma once

#include "uavsec/psca.hpp"
#include "uavsec/scenario.hpp"

namespace uavsec {

struct Circle {
  Vec2 center = Vec2::Zero();
  double radius = 0.0;
};

/// Smallest circle enclosing all points (exact, brute force over the
/// pair/triple boundary candidates; fine for small point sets).
Circle smallest_enclosing_circle(const std::vector<Vec2>& pts);

/// Closed circular tour centered at the SN centroid: N points, q[0] = q[N-1],
/// radius capped so every hop respects the speed limit and the circle stays
/// within the smallest enclosing circle of the SNs.
Eigen::Matrix2Xd circular_trajectory(const Scenario& s);

/// Fixed-trajectory benchmark: the optimization runs with the trajectory
/// pinned to the circular tour, all other variables free.
PlanResult run_ftprs(const Scenario& s, const PscaSettings& st = {});

}  // namespace uavsec
