// SPDX-License-Identifier: Apache-2.0
// Antenna gain, path loss, received power, noise, and SINR computation under
// reuse-rho frequency coloring, plus the per-scenario link table.
#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "leopos/common.hpp"
#include "leopos/geometry.hpp"

namespace leopos {

// Radio-link parameters. Defaults follow a 3GPP-NTN-style S-band downlink.
struct LinkParams {
  double f0_hz = 2.0e9;              // carrier frequency
  double bandwidth_hz = 30.0e6;      // system bandwidth W shared by the reuse colors
  int reuse_factor = 3;              // rho: beams split W into W/rho co-channel sub-bands
  double aperture_radius_m = 0.5;    // satellite antenna aperture radius a
  double tx_gain_dbi = 30.0;         // satellite antenna peak gain G_T
  double rx_gain_dbi = 0.0;          // UE antenna gain G_R
  double noise_figure_db = 7.0;      // UE noise figure
  double antenna_temp_k = 290.0;     // UE antenna temperature
  double atmospheric_loss_db = 0.1;  // gas absorption PL_g
  double scintillation_loss_db = 2.2;  // scintillation PL_s
  // Noise-equivalent bandwidth of the positioning measurement. Defaults to the
  // occupied reference-signal bandwidth (240 subcarriers x 15 kHz), not the full
  // W/rho sub-band; this reproduces the ~14 dB serving-satellite SNR operating point.
  double noise_bandwidth_hz = 3.6e6;
  // Shadow-fading std-dev buckets: (min elevation deg, sigma dB), sorted ascending by
  // elevation; the bucket with the largest min elevation <= link elevation applies.
  // Empty means sigma = 0 everywhere (clear-sky LOS).
  std::vector<std::pair<double, double>> sf_sigma_buckets;
};

// Interferer set used in the SINR denominator.
enum class InterferenceMode {
  kCoChannel,  // active beams of the same satellite sharing the reuse-3 color (default)
  kLiteral,    // every other active beam of the same satellite
};

// Normalized power pattern of a uniformly illuminated circular aperture,
// (2 J1(x)/x)^2 with x = 2*pi*f0*a*sin(theta)/c. Exactly 1 at theta = 0; beyond
// pi/2 the pattern is held at its pi/2 value as a constant backlobe floor.
double antenna_gain(double theta_rad, double aperture_radius_m, double f0_hz);

// 32.45 + 20 log10(f_MHz * d_km) + sf + pl_g + pl_s. Matches free-space loss
// 20 log10(4*pi*d*f/c) to within 0.01 dB.
double path_loss_db(double distance_km, double f0_hz, double sf_db, double pl_g_db,
                    double pl_s_db);

// Received power in dBW: P_dBW + G_T - 10 log10(rho) + gain_dB(theta) + G_R - PL.
// Zero transmit power returns -infinity (beam off).
double received_power_dbw(double power_w, double theta_rad, double path_loss_db,
                          const LinkParams& lp);

// 10 log10(k*T*B) + NF.
double noise_power_dbw(double noise_figure_db, double temp_k, double bandwidth_hz);

// Reuse-3 color classes of a hexagonal layout (no two lattice-adjacent beams share one).
std::vector<int> reuse3_coloring(const BeamLayout& layout);

// Shadow-fading std-dev for a link elevation, from the bucket table (0 if empty).
double sf_sigma_for_elevation(const LinkParams& lp, double elevation_deg);

// Deterministic log-normal shadow-fading draw in dB, keyed by (seed, user, satellite):
// independent of evaluation order and thread count.
double shadow_fading_db(std::uint64_t seed, int user_id, int sat_id, double sigma_db);

// A user with a stable global identifier (used as the shadow-fading key).
struct User {
  int id = 0;
  GroundPosition pos;
};

// One satellite's beam configuration for link evaluation: layout plus per-beam
// transmit power in watts (0 = beam off).
struct SatelliteBeams {
  SatelliteState state;
  BeamLayout layout;
  std::vector<double> power_w;
};

// One (user, satellite, beam) link for an active beam.
struct LinkEntry {
  int sat_index = 0;  // index into the SatelliteBeams vector
  int beam = 0;
  double theta_rad = 0.0;     // off-boresight angle at the satellite
  double distance_km = 0.0;   // slant range
  double rx_dbw = -kInf;      // received power
  double sinr_linear = 0.0;   // SINR under the table's interference mode
};

struct LinkTable {
  // per_user[j] lists links for user j to every visible satellite's active beams,
  // ordered by (sat_index, beam).
  std::vector<std::vector<LinkEntry>> per_user;
  double noise_w = 0.0;
  InterferenceMode mode = InterferenceMode::kCoChannel;
};

// Builds the link table for the given users and satellite beam configurations.
// Invisible (below-horizon) satellites contribute no entries. sf_seed keys the
// shadow-fading draws; with an empty sigma table the result is fully deterministic.
LinkTable build_link_table(const std::vector<SatelliteBeams>& sats,
                           const std::vector<User>& users, const LinkParams& lp,
                           InterferenceMode mode, std::uint64_t sf_seed);

// Entry lookup; throws std::out_of_range if the (user, satellite, beam) link is absent.
const LinkEntry& link_at(const LinkTable& table, int user_index, int sat_index, int beam);

}  // namespace leopos
