#include "uavsec/outage.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace uavsec {

namespace {

// Uniform in (0,1), never exactly 0 or 1, so -log is always finite.
double uniform01(std::mt19937_64& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

double exp_draw(std::mt19937_64& rng, double mean) { return -mean * std::log(uniform01(rng)); }

McResult binomial_result(std::int64_t hits, std::int64_t n) {
  McResult r;
  r.estimate = static_cast<double>(hits) / static_cast<double>(n);
  r.std_error = std::sqrt(std::max(r.estimate * (1.0 - r.estimate), 0.0) / static_cast<double>(n));
  return r;
}

}  // namespace

double los_gain(const LinkGeometry& g, double beta0) { return beta0 / g.dist_sq(); }

double rop_closed(const OutageInputs& in, const LinkGeometry& g, const Scenario& s,
                  double* raw_out) {
  const double h2 = los_gain(g, s.beta0);  // legitimate-link power gain
  if (in.p_an == 0.0) {
    // Limit of the closed form: no self-interference, capacity is deterministic.
    const double cap = std::log2(1.0 + in.p_sn * h2 / s.noise_uav);
    const double v = in.r_code < cap ? 0.0 : 1.0;
    if (raw_out) *raw_out = v;
    return v;
  }
  if (in.r_code <= 0.0) {
    if (raw_out) *raw_out = 0.0;
    return 0.0;
  }
  const double snr_gap = in.p_sn * h2 / (std::exp2(in.r_code) - 1.0) - s.noise_uav;
  const double raw = std::exp(-snr_gap / (s.rho_si * in.p_an * s.lambda_self));
  if (raw_out) *raw_out = raw;
  return std::clamp(raw, 0.0, 1.0);
}

double sop_closed(const OutageInputs& in, const Vec2& uav_xy, const Scenario& s, int scheduled_k) {
  const int K = s.num_sn();
  const double gap = std::exp2(in.r_redundancy) - 1.0;
  double no_leak = 1.0;  // probability that every eavesdropper capacity stays below R_e
  for (int m = 0; m < K; m++) {
    if (m == scheduled_k) continue;
    LinkGeometry ge{uav_xy, s.sn_positions[m], s.uav_altitude};
    const double an_at_m = in.p_an * los_gain(ge, s.beta0);
    const double p_exceed =
        std::exp(-gap * (an_at_m + s.noise_sn(m)) / (in.p_sn * s.lambda_eve(scheduled_k, m)));
    no_leak *= 1.0 - p_exceed;
  }
  return std::clamp(1.0 - no_leak, 0.0, 1.0);
}

double rate_from_rop(double eps_r, double p_an, double p_sn, const LinkGeometry& g,
                     const Scenario& s) {
  if (!(eps_r > 0.0 && eps_r < 1.0)) throw std::domain_error("rate_from_rop: eps_r must be in (0,1)");
  const double h2 = los_gain(g, s.beta0);
  const double denom = -s.rho_si * p_an * s.lambda_self * std::log(eps_r) + s.noise_uav;
  return std::log2(1.0 + p_sn * h2 / denom);
}

McResult mc_rop(const OutageInputs& in, const LinkGeometry& g, const Scenario& s,
                std::int64_t n_trials, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double h2 = los_gain(g, s.beta0);
  std::int64_t hits = 0;
  for (std::int64_t t = 0; t < n_trials; t++) {
    const double g_si = exp_draw(rng, s.lambda_self);
    const double cap = std::log2(1.0 + in.p_sn * h2 / (s.rho_si * in.p_an * g_si + s.noise_uav));
    if (in.r_code > cap) hits++;
  }
  return binomial_result(hits, n_trials);
}

McResult mc_sop(const OutageInputs& in, const Vec2& uav_xy, const Scenario& s, int scheduled_k,
                std::int64_t n_trials, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int K = s.num_sn();
  std::vector<double> an_at(K, 0.0);
  for (int m = 0; m < K; m++) {
    if (m == scheduled_k) continue;
    LinkGeometry ge{uav_xy, s.sn_positions[m], s.uav_altitude};
    an_at[m] = in.p_an * los_gain(ge, s.beta0);
  }
  std::int64_t hits = 0;
  for (std::int64_t t = 0; t < n_trials; t++) {
    double best = 0.0;
    for (int m = 0; m < K; m++) {
      if (m == scheduled_k) continue;
      const double g_km = exp_draw(rng, s.lambda_eve(scheduled_k, m));
      const double cap = std::log2(1.0 + in.p_sn * g_km / (an_at[m] + s.noise_sn(m)));
      best = std::max(best, cap);
    }
    if (in.r_redundancy < best) hits++;
  }
  return binomial_result(hits, n_trials);
}

}  // namespace uavsec
