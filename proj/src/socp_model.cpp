#include "uavsec/socp_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "uavsec/convexify.hpp"

namespace uavsec {

const char* to_string(BlockFamily f) {
  switch (f) {
    case BlockFamily::speed: return "speed";
    case BlockFamily::rate_sum: return "rate_sum";
    case BlockFamily::capacity: return "capacity";
    case BlockFamily::sop_budget: return "sop_budget";
    case BlockFamily::eve_distance: return "eve_distance";
    case BlockFamily::power_inverse: return "power_inverse";
    case BlockFamily::geo_mean: return "geo_mean";
    case BlockFamily::log_bound: return "log_bound";
    case BlockFamily::sqrt_cap: return "sqrt_cap";
    case BlockFamily::theta_xi: return "theta_xi";
  }
  return "unknown";
}

IteratePoint make_iterate(int K, int N) {
  IteratePoint z;
  z.alpha = Eigen::MatrixXd::Zero(K, N);
  z.q = Eigen::Matrix2Xd::Zero(2, N);
  z.p_an = Eigen::VectorXd::Zero(N);
  z.r_e = Eigen::MatrixXd::Zero(K, N);
  z.mu = Eigen::MatrixXd::Zero(K, N);
  z.nu = Eigen::MatrixXd::Zero(K, N);
  z.theta = Eigen::MatrixXd::Zero(K * (K - 1), N);
  z.sigma1 = Eigen::MatrixXd::Zero(K, N);
  z.tau = Eigen::MatrixXd::Zero(K, N);
  z.zeta = Eigen::VectorXd::Zero(N);
  z.pi = Eigen::MatrixXd::Zero(K * (K - 1), N);
  z.varpi = Eigen::MatrixXd::Zero(K * (K - 1), N);
  z.xi = Eigen::MatrixXd::Zero(K * (K - 1), N);
  return z;
}

namespace {

double dist_sq(const IteratePoint& z, const Scenario& s, int m, int n) {
  return (z.q.col(n) - s.sn_positions[m]).squaredNorm() + s.uav_altitude * s.uav_altitude;
}

// effective UAV-side noise (self-interference folded in at the reliability
// target): -rho*P*lambda_uu*ln(eps_r) + sigma_u^2
double eff_noise(const Scenario& s, double p_an) {
  return -s.rho_si * p_an * s.lambda_self * std::log(s.eps_rop) + s.noise_uav;
}

double capacity(const Scenario& s, const IteratePoint& z, int k, int n) {
  const double x1 = dist_sq(z, s, k, n);
  return std::log2(1.0 + s.beta0 * s.sn_tx_power(k) / x1 / eff_noise(s, z.p_an(n)));
}

VariableMap make_map(int K, int N, bool fixed_traj) {
  VariableMap vm;
  vm.K = K;
  vm.N = N;
  vm.fixed_traj = fixed_traj;
  int at = 0;
  vm.off_alpha = at;
  at += K * N;
  vm.off_q = at;
  if (!fixed_traj) at += 2 * N;
  vm.off_p = at;
  at += N;
  vm.off_re = at;
  at += K * N;
  vm.off_eta = at++;
  vm.off_phi = at++;
  vm.off_mu = at;
  at += K * N;
  if (K > 1) {
    vm.off_nu = at;
    at += K * N;
    vm.off_theta = at;
    at += K * (K - 1) * N;
    vm.off_sig = at;
    at += K * N;
    vm.off_tau = at;
    at += K * N;
    vm.off_zeta = at;
    at += N;
    vm.off_pi = at;
    at += K * (K - 1) * N;
    vm.off_varpi = at;
    at += K * (K - 1) * N;
    vm.off_xi = at;
    at += K * (K - 1) * N;
  }
  vm.total = at;
  return vm;
}

// accumulates one constraint matrix in triplet form with an affine-row helper
struct RowBuilder {
  std::vector<Eigen::Triplet<double>> trip;
  std::vector<double> rhs;
  int row = 0;

  void coeff(int col, double v) {
    if (v != 0.0) trip.emplace_back(row, col, v);
  }
  void finish(double r) {
    rhs.push_back(r);
    row++;
  }
};

}  // namespace

std::vector<std::string> audit_expansion_point(const Scenario& s, const IteratePoint& z,
                                               double tol) {
  std::vector<std::string> errs;
  const int K = z.num_sn();
  const int N = z.num_slots();
  auto bad = [&](const std::string& what, int k, int m, int n, double lhs, double rhs) {
    std::ostringstream os;
    os << what << " violated";
    if (k >= 0) os << " k=" << k;
    if (m >= 0) os << " m=" << m;
    if (n >= 0) os << " n=" << n;
    os << ": " << lhs << " vs " << rhs;
    errs.push_back(os.str());
  };
  auto le = [&](double lhs, double rhs, const std::string& what, int k = -1, int m = -1,
                int n = -1) {
    if (lhs > rhs + tol * std::max(1.0, std::abs(rhs))) bad(what, k, m, n, lhs, rhs);
  };

  if (K != s.num_sn()) errs.push_back("iterate SN count does not match scenario");
  if (N != s.n_slots) errs.push_back("iterate slot count does not match scenario");
  if (!errs.empty()) return errs;

  for (int n = 0; n < N; n++) {
    double asum = 0.0;
    for (int k = 0; k < K; k++) {
      le(-z.alpha(k, n), 0.0, "alpha >= 0", k, -1, n);
      le(z.alpha(k, n), 1.0, "alpha <= 1", k, -1, n);
      le(-z.r_e(k, n), 0.0, "r_e >= 0", k, -1, n);
      asum += z.alpha(k, n);
    }
    le(asum, 1.0, "scheduling sum <= 1", -1, -1, n);
    le(-z.p_an(n), 0.0, "p_an >= 0", -1, -1, n);
    le(z.p_an(n), s.p_an_max, "p_an <= cap", -1, -1, n);
  }
  le((z.q.col(0) - z.q.col(N - 1)).norm(), 0.0, "trajectory periodicity");
  const double vstep = s.v_max * s.slot_len;
  for (int n = 0; n + 1 < N; n++)
    le((z.q.col(n + 1) - z.q.col(n)).norm(), vstep, "speed limit", -1, -1, n);

  // binariness slack covers the relaxation residual
  double relax = 0.0;
  for (int k = 0; k < K; k++)
    for (int n = 0; n < N; n++) relax += z.alpha(k, n) - z.alpha(k, n) * z.alpha(k, n);
  le(relax, z.phi, "binariness slack");
  le(-z.phi, 0.0, "phi >= 0");

  // rate slacks: mu below the true capacity margin, eta below the average
  for (int k = 0; k < K; k++) {
    double acc = 0.0;
    for (int n = 0; n < N; n++) {
      le(z.mu(k, n), capacity(s, z, k, n) - z.r_e(k, n), "rate slack", k, -1, n);
      acc += z.alpha(k, n) * z.mu(k, n);
    }
    le(N * z.eta, acc, "min-rate aggregation", k);
  }

  if (K == 1) return errs;

  for (int n = 0; n < N; n++) {
    double budget = 0.0;
    for (int k = 0; k < K; k++) budget += z.alpha(k, n) * z.nu(k, n);
    le(budget, s.eps_sop, "outage budget", -1, -1, n);
    le(1.0, z.p_an(n) * z.zeta(n), "reciprocal power slack", -1, -1, n);
    for (int m = 0; m < K; m++) {
      const double lhs = std::sqrt(std::max(z.sigma1(m, n), 0.0));
      const double rhs = s.beta0 / s.noise_sn(m) * z.p_an(n) / dist_sq(z, s, m, n) + 1.0;
      le(lhs, rhs, "sqrt(sigma1) bound", -1, m, n);
      le(kSlackFloor, z.sigma1(m, n), "sigma1 floor", -1, m, n);
    }
    for (int k = 0; k < K; k++) {
      le(kSlackFloor, z.tau(k, n), "tau floor", k, -1, n);
      le(1.0 + std::sqrt(std::max(z.tau(k, n), 0.0)), std::exp2(z.r_e(k, n)),
         "sqrt(tau) bound", k, -1, n);
      double prod_inv = 1.0;
      for (int m = 0; m < K; m++) {
        if (m == k) continue;
        const double th = z.theta(pair_index(K, k, m), n);
        le(kThetaFloor, th, "theta floor", k, m, n);
        if (th <= 1.0) continue;
        prod_inv /= th;
        const double gm = std::sqrt(std::max(z.sigma1(m, n) * z.tau(k, n), 0.0));
        const double coupling = s.noise_sn(m) / (s.sn_tx_power(k) * s.lambda_eve(k, m)) * gm;
        le(std::exp(-coupling), 1.0 - 1.0 / th, "outage coupling", k, m, n);
        const double xi = z.xi(pair_index(K, k, m), n);
        const double vp = z.varpi(pair_index(K, k, m), n);
        const double pi = z.pi(pair_index(K, k, m), n);
        le(1.0 / th, xi, "xi >= 1/theta", k, m, n);
        le(xi, 1.0, "xi <= 1", k, m, n);
        le(0.0, vp, "varpi >= 0", k, m, n);
        le(vp, std::sqrt(std::max(1.0 - xi, 0.0)), "varpi bound", k, m, n);
        le(pi, coupling, "pi below coupling", k, m, n);
        const double theta_hat = 1.0 - 1.0 / th;
        if (vp > 0.0)
          le(-std::log(theta_hat) - 2.0 + 2.0 * std::sqrt(theta_hat) / vp, pi,
             "pi above log bound", k, m, n);
        else
          bad("pi above log bound (varpi zero)", k, m, n, 0.0, pi);
      }
      le(1.0 - z.nu(k, n), prod_inv, "outage product slack", k, -1, n);
    }
  }
  return errs;
}

BuildResult build_program(const Scenario& s, const IteratePoint& zt, double omega,
                          bool fixed_traj) {
  {
    auto errs = audit_expansion_point(s, zt);
    if (!errs.empty()) {
      std::string msg = "expansion point rejected:";
      for (const auto& e : errs) msg += "\n  " + e;
      throw std::invalid_argument(msg);
    }
  }
  const int K = s.num_sn();
  const int N = s.n_slots;
  const double H2 = s.uav_altitude * s.uav_altitude;

  BuildResult out;
  out.map = make_map(K, N, fixed_traj);
  const VariableMap& vm = out.map;
  {
    // closed-form census of the index map
    const int expect = K * N + (fixed_traj ? 0 : 2 * N) + N + K * N + 2 + K * N +
                       (K > 1 ? 4 * K * N + N + 4 * K * (K - 1) * N - K * N : 0);
    if (vm.total != expect) throw std::logic_error("variable census mismatch");
  }

  RowBuilder lin;   // orthant rows
  RowBuilder cone;  // SOC rows, appended after the orthant block
  ConeLayout cones;
  auto begin_cone = [&](BlockFamily f, int k, int m, int n, int dim) {
    out.blocks.push_back({f, k, m, n, cone.row, dim});
    cones.soc.push_back(dim);
  };

  // ---- linear (orthant) rows: rhs - a'x >= 0 ----
  for (int n = 0; n < N; n++) {  // scheduling sum <= 1
    for (int k = 0; k < K; k++) lin.coeff(vm.alpha(k, n), 1.0);
    lin.finish(1.0);
  }
  for (int n = 0; n < N; n++) {  // 0 <= p_an <= cap
    lin.coeff(vm.p(n), 1.0);
    lin.finish(s.p_an_max);
    lin.coeff(vm.p(n), -1.0);
    lin.finish(0.0);
  }
  for (int k = 0; k < K; k++)
    for (int n = 0; n < N; n++) {  // 0 <= alpha <= 1
      lin.coeff(vm.alpha(k, n), 1.0);
      lin.finish(1.0);
      lin.coeff(vm.alpha(k, n), -1.0);
      lin.finish(0.0);
    }
  for (int k = 0; k < K; k++)
    for (int n = 0; n < N; n++) {  // r_e >= 0
      lin.coeff(vm.re(k, n), -1.0);
      lin.finish(0.0);
    }
  lin.coeff(vm.phi(), -1.0);  // phi >= 0
  lin.finish(0.0);
  {
    // binariness surrogate: sum (1-2at)*a - phi <= -sum at^2
    double c0 = 0.0;
    for (int k = 0; k < K; k++)
      for (int n = 0; n < N; n++) {
        lin.coeff(vm.alpha(k, n), 1.0 - 2.0 * zt.alpha(k, n));
        c0 += zt.alpha(k, n) * zt.alpha(k, n);
      }
    lin.coeff(vm.phi(), -1.0);
    lin.finish(-c0);
  }
  if (K > 1) {
    for (int k = 0; k < K; k++)
      for (int n = 0; n < N; n++) {
        // tangent of prod 1/theta must stay above 1 - nu
        Eigen::VectorXd th_t(K - 1);
        for (int m = 0, j = 0; m < K; m++)
          if (m != k) th_t(j++) = zt.theta(pair_index(K, k, m), n);
        const InvProductLowerBound f2 = inv_product_lower_bound(th_t);
        for (int m = 0, j = 0; m < K; m++)
          if (m != k) lin.coeff(vm.theta(k, m, n), -f2.coeff(j++));
        lin.coeff(vm.nu(k, n), -1.0);
        lin.finish(f2.constant - 1.0);

        // redundancy-rate linearization: 2^R lower bound minus sqrt(tau)
        // overestimate must stay >= 1
        const Linearization e2 = exp2_linearization(zt.r_e(k, n));
        const Linearization st = sqrt_upper_linearization(zt.tau(k, n));
        lin.coeff(vm.re(k, n), -e2.slope);
        lin.coeff(vm.tau(k, n), st.slope);
        lin.finish(e2.f_tilde - e2.slope * e2.x_tilde -
                   (st.f_tilde - st.slope * st.x_tilde) - 1.0);

        // domain floors
        lin.coeff(vm.tau(k, n), -1.0);
        lin.finish(-kSlackFloor);
        for (int m = 0; m < K; m++) {
          if (m == k) continue;
          lin.coeff(vm.theta(k, m, n), -1.0);
          lin.finish(-kThetaFloor);
        }
      }
    for (int m = 0; m < K; m++)
      for (int n = 0; n < N; n++) {
        lin.coeff(vm.sig(m, n), -1.0);
        lin.finish(-kSlackFloor);
      }
  }

  // ---- equality rows: trajectory periodicity ----
  RowBuilder eq;
  if (!fixed_traj) {
    for (int d = 0; d < 2; d++) {
      eq.coeff(vm.q(d, 0), 1.0);
      eq.coeff(vm.q(d, N - 1), -1.0);
      eq.finish(0.0);
    }
  }

  // ---- second-order cones ----
  if (!fixed_traj) {
    const double vstep = s.v_max * s.slot_len;
    for (int n = 0; n + 1 < N; n++) {
      begin_cone(BlockFamily::speed, -1, -1, n, 3);
      cone.finish(vstep);  // head
      for (int d = 0; d < 2; d++) {
        cone.coeff(vm.q(d, n + 1), -1.0);
        cone.coeff(vm.q(d, n), 1.0);
        cone.finish(0.0);
      }
    }
  }

  // Hyperbolic blocks encode quad <= B as ||(u, (B-1)/2)|| <= (B+1)/2. The
  // bound is divided by its expansion-point value (and entries by its square
  // root) so the quadratic part stays commensurate with the +-1/2 constants;
  // otherwise cones whose natural scale is far from 1 become razor-thin and
  // stall the interior-point method.
  auto bound_scale = [](double b_tilde) { return std::max(b_tilde, 1e-12); };

  // per-SN rate aggregation: sum_n (alpha-mu)^2 <= A_k, A_k the bilinear
  // minorant of 4*sum alpha*mu minus 4*N*eta
  for (int k = 0; k < K; k++) {
    const Eigen::VectorXd at = zt.alpha.row(k).transpose();
    const Eigen::VectorXd mt = zt.mu.row(k).transpose();
    const BilinearGeSurrogate bg = bilinear_ge_surrogate(at, mt);
    double a_tilde = bg.constant - 4.0 * N * zt.eta;
    for (int n = 0; n < N; n++) a_tilde += bg.lin(n) * (at(n) + mt(n));
    const double ga = bound_scale(a_tilde);
    const double sga = std::sqrt(ga);
    begin_cone(BlockFamily::rate_sum, k, -1, -1, N + 2);
    for (int pass = 0; pass < 2; pass++) {
      // pass 0 emits the head (A+1)/2; the tail entry (A-1)/2 is emitted last
      if (pass == 1)
        for (int n = 0; n < N; n++) {
          cone.coeff(vm.alpha(k, n), -1.0 / sga);
          cone.coeff(vm.mu(k, n), 1.0 / sga);
          cone.finish(0.0);
        }
      for (int n = 0; n < N; n++) {
        cone.coeff(vm.alpha(k, n), -bg.lin(n) / 2.0 / ga);
        cone.coeff(vm.mu(k, n), -bg.lin(n) / 2.0 / ga);
      }
      cone.coeff(vm.eta(), 2.0 * N / ga);
      cone.finish((bg.constant / ga + (pass == 0 ? 1.0 : -1.0)) / 2.0);
    }
  }

  // per-(k,n) capacity surrogate in squared-distance form
  for (int k = 0; k < K; k++) {
    const double ps = s.sn_tx_power(k);
    for (int n = 0; n < N; n++) {
      const double x1t = dist_sq(zt, s, k, n);
      const double x2t = eff_noise(s, zt.p_an(n));
      const double qw2 = x1t - H2;
      const double cap_t = std::log2(1.0 + s.beta0 * ps / x1t / x2t);
      const double gg = -s.beta0 * ps * s.rho_si * s.lambda_self * std::log(s.eps_rop);
      const double big_e = (x1t * x2t + s.beta0 * ps) * std::numbers::ln2;
      // bound value: gg*(pt - p)/x2t + big_e*(cap_t - r_e - mu) + beta0*ps*qw2/x1t
      const double b_const = gg * zt.p_an(n) / x2t + big_e * cap_t + s.beta0 * ps * qw2 / x1t;
      const double gb =
          bound_scale(big_e * (cap_t - zt.r_e(k, n) - zt.mu(k, n)) + s.beta0 * ps * qw2 / x1t);
      const double scale_q = std::sqrt(s.beta0 * ps / x1t / gb);
      begin_cone(BlockFamily::capacity, k, -1, n, 4);
      for (int pass = 0; pass < 2; pass++) {
        if (pass == 1) {
          for (int d = 0; d < 2; d++) {
            if (fixed_traj) {
              cone.finish(scale_q * (zt.q(d, n) - s.sn_positions[k](d)));
            } else {
              cone.coeff(vm.q(d, n), -scale_q);
              cone.finish(-scale_q * s.sn_positions[k](d));
            }
          }
        }
        cone.coeff(vm.p(n), gg / x2t / 2.0 / gb);
        cone.coeff(vm.re(k, n), big_e / 2.0 / gb);
        cone.coeff(vm.mu(k, n), big_e / 2.0 / gb);
        cone.finish((b_const / gb + (pass == 0 ? 1.0 : -1.0)) / 2.0);
      }
    }
  }

  if (K > 1) {
    // per-slot outage budget: sum_k (alpha+nu)^2 + sum_k (at-nt)^2 <= C
    for (int n = 0; n < N; n++) {
      const Eigen::VectorXd at = zt.alpha.col(n);
      const Eigen::VectorXd nt = zt.nu.col(n);
      const Eigen::VectorXd d_t = at - nt;
      const double gc = bound_scale(4.0 * s.eps_sop + 2.0 * d_t.squaredNorm());
      const double sgc = std::sqrt(gc);
      begin_cone(BlockFamily::sop_budget, -1, -1, n, 2 * K + 2);
      for (int pass = 0; pass < 2; pass++) {
        if (pass == 1) {
          for (int k = 0; k < K; k++) {
            cone.coeff(vm.alpha(k, n), -1.0 / sgc);
            cone.coeff(vm.nu(k, n), -1.0 / sgc);
            cone.finish(0.0);
          }
          for (int k = 0; k < K; k++) cone.finish(d_t(k) / sgc);
        }
        for (int k = 0; k < K; k++) {
          cone.coeff(vm.alpha(k, n), -d_t(k) / gc);
          cone.coeff(vm.nu(k, n), d_t(k) / gc);
        }
        cone.finish((4.0 * s.eps_sop / gc + (pass == 0 ? 1.0 : -1.0)) / 2.0);
      }
    }

    // eavesdropper distance bound ||q - w_m||^2 <= D, linear in (zeta, sigma1)
    for (int m = 0; m < K; m++) {
      for (int n = 0; n < N; n++) {
        const double x1t = dist_sq(zt, s, m, n);
        const double qw2 = x1t - H2;
        const double pt = zt.p_an(n);
        const Linearization ss = sqrt_upper_linearization(zt.sigma1(m, n));
        const double ratio = x1t * x1t / (s.beta0 / s.noise_sn(m) * pt);
        const double d_const = 2.0 * x1t +
                               (1.0 - (ss.f_tilde - ss.slope * ss.x_tilde)) * ratio + qw2;
        const double gd = bound_scale(d_const - x1t * pt * zt.zeta(n) -
                                      ss.slope * ratio * zt.sigma1(m, n));
        const double sgd = std::sqrt(gd);
        begin_cone(BlockFamily::eve_distance, -1, m, n, 4);
        for (int pass = 0; pass < 2; pass++) {
          if (pass == 1) {
            for (int d = 0; d < 2; d++) {
              if (fixed_traj) {
                cone.finish((zt.q(d, n) - s.sn_positions[m](d)) / sgd);
              } else {
                cone.coeff(vm.q(d, n), -1.0 / sgd);
                cone.finish(-s.sn_positions[m](d) / sgd);
              }
            }
          }
          cone.coeff(vm.zeta(n), x1t * pt / 2.0 / gd);
          cone.coeff(vm.sig(m, n), ss.slope * ratio / 2.0 / gd);
          cone.finish((d_const / gd + (pass == 0 ? 1.0 : -1.0)) / 2.0);
        }
      }
    }

    // reciprocal power: p_an * zeta >= 1; both factors normalized to their
    // expansion-point magnitudes
    for (int n = 0; n < N; n++) {
      const double ga = bound_scale(zt.p_an(n));
      const double gb = bound_scale(zt.zeta(n));
      begin_cone(BlockFamily::power_inverse, -1, -1, n, 3);
      cone.coeff(vm.p(n), -0.5 / ga);
      cone.coeff(vm.zeta(n), -0.5 / gb);
      cone.finish(0.0);
      cone.coeff(vm.p(n), -0.5 / ga);
      cone.coeff(vm.zeta(n), 0.5 / gb);
      cone.finish(0.0);
      cone.finish(1.0 / std::sqrt(ga * gb));
    }

    for (int k = 0; k < K; k++) {
      for (int m = 0; m < K; m++) {
        if (m == k) continue;
        const double cscale = s.sn_tx_power(k) * s.lambda_eve(k, m) / s.noise_sn(m);
        for (int n = 0; n < N; n++) {
          const int pr = pair_index(K, k, m);
          // sqrt(sigma1*tau) >= pi*cscale
          {
            const double ga = bound_scale(zt.sigma1(m, n));
            const double gb = bound_scale(zt.tau(k, n));
            begin_cone(BlockFamily::geo_mean, k, m, n, 3);
            cone.coeff(vm.sig(m, n), -0.5 / ga);
            cone.coeff(vm.tau(k, n), -0.5 / gb);
            cone.finish(0.0);
            cone.coeff(vm.pi(k, m, n), -cscale / std::sqrt(ga * gb));
            cone.finish(0.0);
            cone.coeff(vm.sig(m, n), -0.5 / ga);
            cone.coeff(vm.tau(k, n), 0.5 / gb);
            cone.finish(0.0);
          }

          // varpi*(pi + log(theta_hat) + 2) >= 2 sqrt(theta_hat)
          const ExpConeSurrogate ec = exp_cone_surrogate(zt.theta(pr, n));
          const double lconst = ec.log_theta_hat + 2.0;
          {
            const double ga = bound_scale(zt.varpi(pr, n));
            const double gb = bound_scale(zt.pi(pr, n) + lconst);
            begin_cone(BlockFamily::log_bound, k, m, n, 3);
            cone.coeff(vm.varpi(k, m, n), -0.5 / ga);
            cone.coeff(vm.pi(k, m, n), -0.5 / gb);
            cone.finish(lconst / 2.0 / gb);
            cone.coeff(vm.varpi(k, m, n), -0.5 / ga);
            cone.coeff(vm.pi(k, m, n), 0.5 / gb);
            cone.finish(-lconst / 2.0 / gb);
            cone.finish(std::numbers::sqrt2 * std::pow(ec.theta_hat, 0.25) /
                        std::sqrt(ga * gb));
          }

          // varpi^2 <= 1 - xi
          {
            const double gx = bound_scale(1.0 - zt.xi(pr, n));
            begin_cone(BlockFamily::sqrt_cap, k, m, n, 3);
            cone.coeff(vm.xi(k, m, n), 0.5 / gx);
            cone.finish((1.0 / gx + 1.0) / 2.0);
            cone.coeff(vm.varpi(k, m, n), -1.0 / std::sqrt(gx));
            cone.finish(0.0);
            cone.coeff(vm.xi(k, m, n), 0.5 / gx);
            cone.finish((1.0 / gx - 1.0) / 2.0);
          }

          // theta * xi >= 1
          {
            const double ga = bound_scale(zt.theta(pr, n));
            const double gb = bound_scale(zt.xi(pr, n));
            begin_cone(BlockFamily::theta_xi, k, m, n, 3);
            cone.coeff(vm.theta(k, m, n), -0.5 / ga);
            cone.coeff(vm.xi(k, m, n), -0.5 / gb);
            cone.finish(0.0);
            cone.coeff(vm.theta(k, m, n), -0.5 / ga);
            cone.coeff(vm.xi(k, m, n), 0.5 / gb);
            cone.finish(0.0);
            cone.finish(1.0 / std::sqrt(ga * gb));
          }
        }
      }
    }
  }

  // ---- assemble, then scale columns so solver variables are O(1) ----
  cones.orthant = lin.row;
  ConicProgram& p = out.program;
  p.c = Eigen::VectorXd::Zero(vm.total);
  p.c(vm.eta()) = -1.0;
  p.c(vm.phi()) = omega;

  out.scale = Eigen::VectorXd::Ones(vm.total);
  {
    const Eigen::VectorXd packed_phys = [&] {
      Eigen::VectorXd v(vm.total);
      BuildResult tmp;  // identity-scale packing of the expansion point
      tmp.map = vm;
      tmp.scale = Eigen::VectorXd::Ones(vm.total);
      v = pack_iterate(zt, tmp);
      return v;
    }();
    for (int j = 0; j < vm.total; j++)
      out.scale(j) = std::max(std::abs(packed_phys(j)), 1e-3);
  }

  // after column scaling, normalize rows so no row mixes the huge slack
  // magnitudes with O(1) data; SOC blocks share one factor to stay conic
  const int total_rows = lin.row + cone.row;
  Eigen::VectorXd rowmax = Eigen::VectorXd::Zero(total_rows);
  for (const auto& t : lin.trip)
    rowmax(t.row()) = std::max(rowmax(t.row()), std::abs(t.value() * out.scale(t.col())));
  for (const auto& t : cone.trip)
    rowmax(lin.row + t.row()) =
        std::max(rowmax(lin.row + t.row()), std::abs(t.value() * out.scale(t.col())));
  for (int i = 0; i < lin.row; i++) rowmax(i) = std::max(rowmax(i), std::abs(lin.rhs[i]));
  for (int i = 0; i < cone.row; i++)
    rowmax(lin.row + i) = std::max(rowmax(lin.row + i), std::abs(cone.rhs[i]));
  Eigen::VectorXd rowfac(total_rows);
  for (int i = 0; i < lin.row; i++) rowfac(i) = std::max(rowmax(i), 1e-10);
  {
    int at = lin.row;
    for (int dim : cones.soc) {
      const double f = std::max(rowmax.segment(at, dim).maxCoeff(), 1e-10);
      rowfac.segment(at, dim).setConstant(f);
      at += dim;
    }
  }

  std::vector<Eigen::Triplet<double>> gtrip;
  gtrip.reserve(lin.trip.size() + cone.trip.size());
  for (const auto& t : lin.trip)
    gtrip.emplace_back(t.row(), t.col(), t.value() * out.scale(t.col()) / rowfac(t.row()));
  for (const auto& t : cone.trip)
    gtrip.emplace_back(lin.row + t.row(), t.col(),
                       t.value() * out.scale(t.col()) / rowfac(lin.row + t.row()));
  p.cone_mat.resize(total_rows, vm.total);
  p.cone_mat.setFromTriplets(gtrip.begin(), gtrip.end());
  p.cone_mat.makeCompressed();
  p.cone_rhs.resize(total_rows);
  for (int i = 0; i < lin.row; i++) p.cone_rhs(i) = lin.rhs[i] / rowfac(i);
  for (int i = 0; i < cone.row; i++)
    p.cone_rhs(lin.row + i) = cone.rhs[i] / rowfac(lin.row + i);

  std::vector<Eigen::Triplet<double>> etrip;
  for (const auto& t : eq.trip)
    etrip.emplace_back(t.row(), t.col(), t.value() * out.scale(t.col()));
  p.eq_mat.resize(eq.row, vm.total);
  p.eq_mat.setFromTriplets(etrip.begin(), etrip.end());
  p.eq_mat.makeCompressed();
  p.eq_rhs.resize(eq.row);
  for (int i = 0; i < eq.row; i++) p.eq_rhs(i) = eq.rhs[i];

  p.c = p.c.cwiseProduct(out.scale);
  p.cones = cones;
  for (auto& blk : out.blocks) blk.row0 += lin.row;

  auto errs = p.check();
  if (!errs.empty()) throw std::logic_error("assembled program malformed: " + errs.front());
  return out;
}

Eigen::VectorXd pack_iterate(const IteratePoint& z, const BuildResult& b) {
  const VariableMap& vm = b.map;
  const int K = vm.K, N = vm.N;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(vm.total);
  for (int k = 0; k < K; k++)
    for (int n = 0; n < N; n++) {
      x(vm.alpha(k, n)) = z.alpha(k, n);
      x(vm.re(k, n)) = z.r_e(k, n);
      x(vm.mu(k, n)) = z.mu(k, n);
    }
  if (!vm.fixed_traj)
    for (int n = 0; n < N; n++)
      for (int d = 0; d < 2; d++) x(vm.q(d, n)) = z.q(d, n);
  for (int n = 0; n < N; n++) x(vm.p(n)) = z.p_an(n);
  x(vm.eta()) = z.eta;
  x(vm.phi()) = z.phi;
  if (K > 1) {
    for (int n = 0; n < N; n++) {
      x(vm.zeta(n)) = z.zeta(n);
      for (int k = 0; k < K; k++) {
        x(vm.nu(k, n)) = z.nu(k, n);
        x(vm.sig(k, n)) = z.sigma1(k, n);
        x(vm.tau(k, n)) = z.tau(k, n);
        for (int m = 0; m < K; m++) {
          if (m == k) continue;
          x(vm.theta(k, m, n)) = z.theta(pair_index(K, k, m), n);
          x(vm.pi(k, m, n)) = z.pi(pair_index(K, k, m), n);
          x(vm.varpi(k, m, n)) = z.varpi(pair_index(K, k, m), n);
          x(vm.xi(k, m, n)) = z.xi(pair_index(K, k, m), n);
        }
      }
    }
  }
  return x.cwiseQuotient(b.scale);
}

IteratePoint extract_iterate(const Eigen::VectorXd& x, const BuildResult& b,
                             const IteratePoint& z_tilde, double tol) {
  const VariableMap& vm = b.map;
  const int K = vm.K, N = vm.N;
  if (x.size() != vm.total) throw std::runtime_error("solution length mismatch");
  const Eigen::VectorXd v = x.cwiseProduct(b.scale);

  auto clamp = [&](double val, double lo, double hi, const char* what) {
    if (val < lo - tol || val > hi + tol) {
      std::ostringstream os;
      os << "extracted " << what << " out of range: " << val;
      throw std::runtime_error(os.str());
    }
    return std::clamp(val, lo, hi);
  };
  const double inf = std::numeric_limits<double>::infinity();

  IteratePoint z = make_iterate(K, N);
  z.eta = v(vm.eta());
  z.phi = clamp(v(vm.phi()), 0.0, inf, "phi");
  for (int n = 0; n < N; n++) {
    z.p_an(n) = clamp(v(vm.p(n)), 0.0, inf, "p_an");
    for (int d = 0; d < 2; d++) z.q(d, n) = vm.fixed_traj ? z_tilde.q(d, n) : v(vm.q(d, n));
    for (int k = 0; k < K; k++) {
      z.alpha(k, n) = clamp(v(vm.alpha(k, n)), 0.0, 1.0, "alpha");
      z.r_e(k, n) = clamp(v(vm.re(k, n)), 0.0, inf, "r_e");
      z.mu(k, n) = v(vm.mu(k, n));
    }
  }
  if (K > 1) {
    for (int n = 0; n < N; n++) {
      z.zeta(n) = v(vm.zeta(n));
      for (int k = 0; k < K; k++) {
        z.nu(k, n) = v(vm.nu(k, n));
        z.sigma1(k, n) = clamp(v(vm.sig(k, n)), kSlackFloor, inf, "sigma1");
        z.tau(k, n) = clamp(v(vm.tau(k, n)), kSlackFloor, inf, "tau");
        for (int m = 0; m < K; m++) {
          if (m == k) continue;
          const int r = pair_index(K, k, m);
          z.theta(r, n) = clamp(v(vm.theta(k, m, n)), kThetaFloor, inf, "theta");
          z.pi(r, n) = v(vm.pi(k, m, n));
          z.varpi(r, n) = v(vm.varpi(k, m, n));
          z.xi(r, n) = v(vm.xi(k, m, n));
        }
      }
    }
  }
  return z;
}

}  // namespace uavsec
