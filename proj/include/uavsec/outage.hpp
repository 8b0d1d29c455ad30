#pragma once

#include "uavsec/scenario.hpp"

#include <cstdint>

namespace uavsec {

/// Geometry of one UAV-to-ground link.
struct LinkGeometry {
  Vec2 uav_xy;
  Vec2 sn_xy;
  double altitude = 100.0;

  double dist_sq() const { return (uav_xy - sn_xy).squaredNorm() + altitude * altitude; }
};

/// Per-slot transmit powers and wiretap-code rates for one scheduled link.
struct OutageInputs {
  double p_an = 0.0;          // UAV artificial-noise power [W]
  double p_sn = 0.0;          // SN transmit power [W]
  double r_code = 0.0;        // codeword rate [bits/s/Hz]
  double r_redundancy = 0.0;  // redundancy rate [bits/s/Hz]
};

struct McResult {
  double estimate = 0.0;
  double std_error = 0.0;
};

/// Line-of-sight power gain beta0 / (dist^2 + H^2).
double los_gain(const LinkGeometry& g, double beta0);

/// Closed-form reliability outage probability, clamped to [0,1]. With p_an = 0
/// the expression degenerates; the pointwise limit is used: 0 when r_code is
/// below the noise-only capacity, 1 otherwise. If raw_out is non-null it
/// receives the pre-clamp value.
double rop_closed(const OutageInputs& in, const LinkGeometry& g, const Scenario& s,
                  double* raw_out = nullptr);

/// Closed-form secrecy outage probability of the scheduled SN k against the
/// best of the other SNs acting as eavesdroppers.
double sop_closed(const OutageInputs& in, const Vec2& uav_xy, const Scenario& s, int scheduled_k);

/// Codeword rate achieving exactly the target reliability outage eps_r.
double rate_from_rop(double eps_r, double p_an, double p_sn, const LinkGeometry& g,
                     const Scenario& s);

/// Monte Carlo estimates of the two outage probabilities; the fading gains are
/// drawn exponentially, everything else is deterministic. Reproducible for a
/// fixed seed.
McResult mc_rop(const OutageInputs& in, const LinkGeometry& g, const Scenario& s,
                std::int64_t n_trials, std::uint64_t seed);
McResult mc_sop(const OutageInputs& in, const Vec2& uav_xy, const Scenario& s, int scheduled_k,
                std::int64_t n_trials, std::uint64_t seed);

}  // namespace uavsec
