#include "uavsec/psca.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "uavsec/baseline.hpp"
#include "uavsec/outage.hpp"

namespace uavsec {

namespace {

double re_floor(int K) { return K > 1 ? std::log2(1.0 + std::sqrt(kSlackFloor)) : 0.0; }

LinkGeometry link(const Scenario& s, const Eigen::Matrix2Xd& q, int k, int n) {
  return {q.col(n), s.sn_positions[k], s.uav_altitude};
}

}  // namespace

IteratePoint complete_point(const Scenario& s, const IteratePoint& in) {
  const int K = s.num_sn();
  const int N = s.n_slots;
  IteratePoint z = make_iterate(K, N);
  z.q = in.q;
  z.p_an = in.p_an;
  z.alpha = in.alpha;
  z.r_e = in.r_e;

  // pin periodicity exactly, then shrink the whole tour around its mean if
  // round-off pushed any hop past the speed limit
  const Vec2 mid = 0.5 * (z.q.col(0) + z.q.col(N - 1));
  z.q.col(0) = mid;
  z.q.col(N - 1) = mid;
  const double vstep = s.v_max * s.slot_len;
  if (vstep <= 0.0) {
    const Vec2 c = z.q.rowwise().mean();
    for (int n = 0; n < N; n++) z.q.col(n) = c;
  } else {
    double worst = 1.0;
    for (int n = 0; n + 1 < N; n++)
      worst = std::max(worst, (z.q.col(n + 1) - z.q.col(n)).norm() / vstep);
    if (worst > 1.0) {
      const Vec2 c = z.q.rowwise().mean();
      for (int n = 0; n < N; n++) z.q.col(n) = c + (z.q.col(n) - c) / worst;
    }
  }

  const double refl = re_floor(K);
  for (int n = 0; n < N; n++) {
    // with eavesdroppers around, a zero AN power would break the reciprocal
    // slack; flooring upward can only lower the secrecy outage, so it is safe
    const double p_lo = K > 1 ? std::min(kSlackFloor, s.p_an_max) : 0.0;
    z.p_an(n) = std::clamp(z.p_an(n), p_lo, s.p_an_max);
    double asum = 0.0;
    for (int k = 0; k < K; k++) {
      z.alpha(k, n) = std::clamp(z.alpha(k, n), 0.0, 1.0);
      z.r_e(k, n) = std::max(z.r_e(k, n), refl);
      asum += z.alpha(k, n);
    }
    if (asum > 1.0)
      for (int k = 0; k < K; k++) z.alpha(k, n) /= asum;
  }

  for (int k = 0; k < K; k++)
    for (int n = 0; n < N; n++)
      z.mu(k, n) = rate_from_rop(s.eps_rop, z.p_an(n), s.sn_tx_power(k), link(s, z.q, k, n), s) -
                   z.r_e(k, n);

  for (int n = 0; n < N && K > 1; n++) {
    z.zeta(n) = 1.0 / std::max(z.p_an(n), 1e-12);
    for (int m = 0; m < K; m++) {
      const double d2 = link(s, z.q, m, n).dist_sq();
      const double bound = s.beta0 / s.noise_sn(m) * z.p_an(n) / d2 + 1.0;
      z.sigma1(m, n) = bound * bound;
    }
    for (int k = 0; k < K; k++) {
      const double e2 = std::exp2(z.r_e(k, n));
      z.tau(k, n) = std::max((e2 - 1.0) * (e2 - 1.0), kSlackFloor);
      double prod_inv = 1.0;
      for (int m = 0; m < K; m++) {
        if (m == k) continue;
        const double couple = s.noise_sn(m) / (s.sn_tx_power(k) * s.lambda_eve(k, m)) *
                              std::sqrt(z.sigma1(m, n) * z.tau(k, n));
        const double eprime = std::exp(-couple);
        double th = eprime < 1.0 ? std::min(1.0 / (1.0 - eprime), 1e16) : 1e16;
        th = std::max(th, kThetaFloor);
        prod_inv /= th;
        const int r = pair_index(K, k, m);
        z.theta(r, n) = th;
        const double theta_hat = 1.0 - 1.0 / th;
        z.xi(r, n) = 1.0 / th;
        z.varpi(r, n) = std::sqrt(1.0 - z.xi(r, n));
        const double lower = -std::log(theta_hat);
        z.pi(r, n) = 0.5 * (lower + std::max(couple, lower));
      }
      z.nu(k, n) = 1.0 - prod_inv;
    }
    // the outage budget is usually active at an optimum, so round-off can
    // leave the slot marginally over it; shrinking the weights restores it
    // without touching any other constraint
    double budget = 0.0;
    for (int k = 0; k < K; k++) budget += z.alpha(k, n) * z.nu(k, n);
    if (budget > s.eps_sop)
      for (int k = 0; k < K; k++) z.alpha(k, n) *= s.eps_sop / budget;
  }

  z.eta = std::numeric_limits<double>::infinity();
  z.phi = 0.0;
  for (int k = 0; k < K; k++) {
    double acc = 0.0;
    for (int n = 0; n < N; n++) acc += z.alpha(k, n) * z.mu(k, n);
    z.eta = std::min(z.eta, acc / N);
  }
  for (int k = 0; k < K; k++)
    for (int n = 0; n < N; n++) z.phi += z.alpha(k, n) - z.alpha(k, n) * z.alpha(k, n);
  return z;
}

IteratePoint initialize_with_trajectory(const Scenario& s, const Eigen::Matrix2Xd& q) {
  const int K = s.num_sn();
  const int N = s.n_slots;
  if (K > 1 && s.p_an_max <= 0.0)
    throw std::invalid_argument("multiple SNs need a positive AN power cap");
  IteratePoint z = make_iterate(K, N);
  z.q = q;
  z.p_an.setConstant(s.p_an_max / 2.0);
  z.alpha.setConstant(1.0 / K);
  if (K > 1) {
    // redundancy rates sized so the closed-form secrecy outage sits at half
    // the budget: sum_k alpha*nu stays strictly inside eps_sop
    const double target = s.eps_sop / 2.0;
    for (int k = 0; k < K; k++)
      for (int n = 0; n < N; n++) {
        OutageInputs in;
        in.p_an = z.p_an(n);
        in.p_sn = s.sn_tx_power(k);
        double lo = 0.0, hi = 64.0;
        in.r_redundancy = hi;
        if (sop_closed(in, z.q.col(n), s, k) > target)
          throw std::runtime_error("cannot initialize: secrecy target unreachable");
        for (int it = 0; it < 60; it++) {
          const double m = 0.5 * (lo + hi);
          in.r_redundancy = m;
          (sop_closed(in, z.q.col(n), s, k) <= target ? hi : lo) = m;
        }
        z.r_e(k, n) = hi;
      }
  }
  return complete_point(s, z);
}

IteratePoint initialize(const Scenario& s) {
  return initialize_with_trajectory(s, circular_trajectory(s));
}

PlanResult plan(const Scenario& s, const PscaSettings& st, bool fixed_traj,
                const IteratePoint* warm_start) {
  IteratePoint z = warm_start ? complete_point(s, *warm_start) : initialize(s);
  PlanResult out;
  double omega = st.omega0;
  double prev_obj = 0.0;
  bool have_prev_capped = false;
  int stall = 0;
  for (int it = 0; it < st.max_outer; it++) {
    const bool capped = omega >= st.omega_max * (1.0 - 1e-12);
    const BuildResult b = build_program(s, z, omega, fixed_traj);
    const SolveResult r = solve(b.program, st.solver);
    if (r.status == SolveStatus::primal_infeasible || r.status == SolveStatus::dual_infeasible) {
      std::ostringstream os;
      os << "subproblem " << to_string(r.status) << " at outer iteration " << it;
      throw SolveFailure(os.str(), r.status, it);
    }
    if (r.status != SolveStatus::optimal) {
      const ResidualReport rep = check_certificate(b.program, r);
      const double worst =
          std::max({rep.primal, rep.dual, rep.rel_gap, rep.cone_violation});
      if (!(worst < st.accept_res_tol)) {
        std::ostringstream os;
        os << "solver returned " << to_string(r.status) << " with residual " << worst
           << " at outer iteration " << it;
        throw SolveFailure(os.str(), r.status, it);
      }
    }
    z = complete_point(s, extract_iterate(r.x, b, z));
    const double obj = z.eta - omega * z.phi;
    out.trace.push_back({it, obj, z.eta, z.phi, omega, to_string(r.status)});
    if (capped && have_prev_capped &&
        std::abs(obj - prev_obj) <= st.obj_rel_tol * std::max(1.0, std::abs(prev_obj)))
      stall++;
    else
      stall = 0;
    if (capped) {
      have_prev_capped = true;
      prev_obj = obj;
    }
    if (capped && z.phi < st.phi_tol && stall >= st.obj_stall_iters) {
      out.converged = true;
      break;
    }
    omega = std::min(omega * st.growth, st.omega_max);
  }

  out.relaxed = z;
  out.schedule = round_schedule(z);
  out.trajectory = z.q;
  // tiny AN floor: the reliability-outage exponent divides by the AN power,
  // so a solver-zero power would amplify rate round-off past certification
  out.p_an = z.p_an.cwiseMax(std::min(1e-8, s.p_an_max));
  std::string w = repair_rates(s, out.schedule, out.trajectory, out.p_an, out.r_u, out.r_e);
  if (!out.converged) out.warning += "no convergence within the outer iteration cap; ";
  out.warning += w;
  evaluate_plan(s, out);
  return out;
}

std::vector<int> round_schedule(const IteratePoint& z) {
  const int K = z.num_sn();
  const int N = z.num_slots();
  std::vector<int> sched(N, -1);
  for (int n = 0; n < N; n++) {
    int bi = 0;
    for (int k = 1; k < K; k++)
      if (z.alpha(k, n) > z.alpha(bi, n)) bi = k;
    if (z.alpha(bi, n) >= 0.5) sched[n] = bi;
  }
  return sched;
}

std::string repair_rates(const Scenario& s, std::vector<int>& schedule,
                         const Eigen::Matrix2Xd& q, const Eigen::VectorXd& p_an,
                         Eigen::MatrixXd& r_u, Eigen::MatrixXd& r_e) {
  const int K = s.num_sn();
  const int N = s.n_slots;
  r_u = Eigen::MatrixXd::Zero(K, N);
  r_e = Eigen::MatrixXd::Zero(K, N);
  std::ostringstream warn;
  int nonpositive = 0;
  for (int n = 0; n < N; n++) {
    const int k = schedule[n];
    if (k < 0) continue;
    const double ru = rate_from_rop(s.eps_rop, p_an(n), s.sn_tx_power(k), link(s, q, k, n), s);
    double re = 0.0;
    if (K > 1) {
      OutageInputs in;
      in.p_an = p_an(n);
      in.p_sn = s.sn_tx_power(k);
      in.r_code = ru;
      in.r_redundancy = 64.0;
      if (sop_closed(in, q.col(n), s, k) > s.eps_sop) {
        schedule[n] = -1;
        warn << "slot " << n << ": secrecy target unreachable, idled; ";
        continue;
      }
      double lo = 0.0, hi = 64.0;
      for (int it = 0; it < 50; it++) {
        const double m = 0.5 * (lo + hi);
        in.r_redundancy = m;
        (sop_closed(in, q.col(n), s, k) <= s.eps_sop ? hi : lo) = m;
      }
      re = hi;
    }
    if (re >= ru) nonpositive++;
    r_u(k, n) = ru;
    r_e(k, n) = re;
  }
  if (nonpositive > 0) warn << nonpositive << " slot(s) with nonpositive secrecy rate; ";
  return warn.str();
}

void evaluate_plan(const Scenario& s, PlanResult& r) {
  const int K = s.num_sn();
  const int N = s.n_slots;
  r.asr = Eigen::VectorXd::Zero(K);
  r.sop = Eigen::VectorXd::Zero(N);
  r.rop = Eigen::VectorXd::Zero(N);
  for (int n = 0; n < N; n++) {
    const int k = r.schedule[n];
    if (k < 0) continue;
    r.asr(k) += r.r_u(k, n) - r.r_e(k, n);
    OutageInputs in;
    in.p_an = r.p_an(n);
    in.p_sn = s.sn_tx_power(k);
    in.r_code = r.r_u(k, n);
    in.r_redundancy = r.r_e(k, n);
    r.rop(n) = rop_closed(in, link(s, r.trajectory, k, n), s);
    r.sop(n) = K > 1 ? sop_closed(in, r.trajectory.col(n), s, k) : 0.0;
  }
  r.asr /= N;
  r.min_asr = r.asr.minCoeff();
}

}  // namespace uavsec
