#include "uavsec/baseline.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace uavsec {

namespace {

bool covers(const Circle& c, const std::vector<Vec2>& pts) {
  const double r = c.radius * (1.0 + 1e-12) + 1e-12;
  for (const auto& p : pts)
    if ((p - c.center).norm() > r) return false;
  return true;
}

Circle circumcircle(const Vec2& a, const Vec2& b, const Vec2& c) {
  const Vec2 ab = b - a, ac = c - a;
  const double det = 2.0 * (ab.x() * ac.y() - ab.y() * ac.x());
  const double scale = std::max({ab.norm(), ac.norm(), 1.0});
  if (std::abs(det) < 1e-12 * scale * scale) return {Vec2::Zero(), -1.0};
  const double d1 = ab.squaredNorm(), d2 = ac.squaredNorm();
  Vec2 rel;
  rel.x() = (ac.y() * d1 - ab.y() * d2) / det;
  rel.y() = (ab.x() * d2 - ac.x() * d1) / det;
  return {a + rel, rel.norm()};
}

}  // namespace

Circle smallest_enclosing_circle(const std::vector<Vec2>& pts) {
  const int n = static_cast<int>(pts.size());
  if (n == 0) return {};
  if (n == 1) return {pts[0], 0.0};
  Circle best{Vec2::Zero(), std::numeric_limits<double>::infinity()};
  for (int i = 0; i < n; i++)
    for (int j = i + 1; j < n; j++) {
      const Circle c{0.5 * (pts[i] + pts[j]), 0.5 * (pts[i] - pts[j]).norm()};
      if (c.radius < best.radius && covers(c, pts)) best = c;
    }
  for (int i = 0; i < n; i++)
    for (int j = i + 1; j < n; j++)
      for (int k = j + 1; k < n; k++) {
        const Circle c = circumcircle(pts[i], pts[j], pts[k]);
        if (c.radius >= 0.0 && c.radius < best.radius && covers(c, pts)) best = c;
      }
  return best;
}

Eigen::Matrix2Xd circular_trajectory(const Scenario& s) {
  const int N = s.n_slots;
  Vec2 centroid = Vec2::Zero();
  for (const auto& w : s.sn_positions) centroid += w;
  centroid /= static_cast<double>(s.num_sn());
  const Circle enc = smallest_enclosing_circle(s.sn_positions);
  // arc-length speed bound keeps every chord under v_max * slot_len
  const double r_speed = N > 1 ? s.v_max * s.slot_len * (N - 1) / (2.0 * std::numbers::pi) : 0.0;
  const double r = std::min(r_speed, enc.radius);
  Eigen::Matrix2Xd q(2, N);
  for (int n = 0; n < N; n++) {
    const double ang = N > 1 ? 2.0 * std::numbers::pi * (n % (N - 1)) / (N - 1) : 0.0;
    q.col(n) = centroid + r * Vec2(std::cos(ang), std::sin(ang));
  }
  return q;
}

PlanResult run_ftprs(const Scenario& s, const PscaSettings& st) {
  return plan(s, st, /*fixed_traj=*/true);
}

}  // namespace uavsec
