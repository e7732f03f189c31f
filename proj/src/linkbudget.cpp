// SPDX-License-Identifier: Apache-2.0
#include "leopos/linkbudget.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace leopos {

double antenna_gain(double theta_rad, double aperture_radius_m, double f0_hz) {
  if (aperture_radius_m <= 0.0) throw std::invalid_argument("aperture radius must be positive");
  if (f0_hz <= 0.0) throw std::invalid_argument("carrier frequency must be positive");
  double theta = std::min(std::abs(theta_rad), kPi / 2.0);
  double x = 2.0 * kPi * f0_hz * aperture_radius_m * std::sin(theta) / kSpeedOfLightMPerS;
  if (x < 1e-9) return 1.0;
  double amp = 2.0 * std::cyl_bessel_j(1.0, x) / x;
  return amp * amp;
}

double path_loss_db(double distance_km, double f0_hz, double sf_db, double pl_g_db,
                    double pl_s_db) {
  if (distance_km <= 0.0) throw std::invalid_argument("distance must be positive");
  if (f0_hz <= 0.0) throw std::invalid_argument("carrier frequency must be positive");
  return 32.45 + 20.0 * std::log10(f0_hz / 1e6 * distance_km) + sf_db + pl_g_db + pl_s_db;
}

double received_power_dbw(double power_w, double theta_rad, double path_loss_db,
                          const LinkParams& lp) {
  if (power_w < 0.0) throw std::invalid_argument("transmit power must be nonnegative");
  if (lp.reuse_factor < 1) throw std::invalid_argument("reuse factor must be >= 1");
  if (power_w == 0.0) return -kInf;
  double gain = antenna_gain(theta_rad, lp.aperture_radius_m, lp.f0_hz);
  return 10.0 * std::log10(power_w) + lp.tx_gain_dbi - 10.0 * std::log10(lp.reuse_factor) +
         lin2db(gain) + lp.rx_gain_dbi - path_loss_db;
}

double noise_power_dbw(double noise_figure_db, double temp_k, double bandwidth_hz) {
  if (bandwidth_hz <= 0.0) throw std::invalid_argument("bandwidth must be positive");
  if (temp_k <= 0.0) throw std::invalid_argument("temperature must be positive");
  return 10.0 * std::log10(kBoltzmannJPerK * temp_k * bandwidth_hz) + noise_figure_db;
}

std::vector<int> reuse3_coloring(const BeamLayout& layout) {
  if (layout.colors.size() != layout.centers.size())
    throw std::invalid_argument("layout colors are not populated");
  return layout.colors;
}

double sf_sigma_for_elevation(const LinkParams& lp, double elevation_deg) {
  if (lp.sf_sigma_buckets.empty()) return 0.0;
  double sigma = lp.sf_sigma_buckets.front().second;
  for (const auto& [min_elev, s] : lp.sf_sigma_buckets)
    if (elevation_deg >= min_elev) sigma = s;
  return sigma;
}

double shadow_fading_db(std::uint64_t seed, int user_id, int sat_id, double sigma_db) {
  if (sigma_db <= 0.0) return 0.0;
  std::uint64_t key = hash_combine(seed, static_cast<std::uint64_t>(user_id) + 0x9e3779b97f4a7c15ULL);
  key = hash_combine(key, static_cast<std::uint64_t>(sat_id) + 0x517cc1b727220a95ULL);
  Rng rng(key);
  return sigma_db * rng.normal();
}

LinkTable build_link_table(const std::vector<SatelliteBeams>& sats,
                           const std::vector<User>& users, const LinkParams& lp,
                           InterferenceMode mode, std::uint64_t sf_seed) {
  for (const auto& sb : sats)
    if (sb.power_w.size() != sb.layout.centers.size())
      throw std::invalid_argument("per-beam power vector does not match the layout size");

  LinkTable table;
  table.mode = mode;
  table.noise_w =
      db2lin(noise_power_dbw(lp.noise_figure_db, lp.antenna_temp_k, lp.noise_bandwidth_hz));
  table.per_user.resize(users.size());

  // Beam boresight directions, cached per satellite.
  std::vector<std::vector<Eigen::Vector3d>> beam_dirs(sats.size());
  for (size_t i = 0; i < sats.size(); ++i) {
    beam_dirs[i].reserve(sats[i].layout.centers.size());
    for (const auto& c : sats[i].layout.centers)
      beam_dirs[i].push_back(uv_to_direction(sats[i].state, c));
  }

  for (size_t j = 0; j < users.size(); ++j) {
    auto& rows = table.per_user[j];
    for (size_t i = 0; i < sats.size(); ++i) {
      const auto& sb = sats[i];
      double elev = elevation_angle_deg(sb.state, users[j].pos);
      if (elev <= 0.0) continue;
      double sf = shadow_fading_db(sf_seed, users[j].id, sb.state.sat_id,
                                   sf_sigma_for_elevation(lp, elev));
      double dist = slant_distance_km(sb.state, users[j].pos);
      double pl = path_loss_db(dist, lp.f0_hz, sf, lp.atmospheric_loss_db,
                               lp.scintillation_loss_db);
      Eigen::Vector3d to_ue = (users[j].pos.ecef_km - sb.state.position_km).normalized();
      size_t first = rows.size();
      for (size_t b = 0; b < sb.power_w.size(); ++b) {
        if (sb.power_w[b] <= 0.0) continue;
        LinkEntry e;
        e.sat_index = static_cast<int>(i);
        e.beam = static_cast<int>(b);
        e.theta_rad = std::acos(std::clamp(beam_dirs[i][b].dot(to_ue), -1.0, 1.0));
        e.distance_km = dist;
        e.rx_dbw = received_power_dbw(sb.power_w[b], e.theta_rad, pl, lp);
        rows.push_back(e);
      }
      // SINR over this satellite's active beams (inter-satellite interference neglected).
      for (size_t k = first; k < rows.size(); ++k) {
        double interference = 0.0;
        for (size_t m = first; m < rows.size(); ++m) {
          if (m == k) continue;
          if (mode == InterferenceMode::kCoChannel &&
              sb.layout.colors[rows[m].beam] != sb.layout.colors[rows[k].beam])
            continue;
          interference += db2lin(rows[m].rx_dbw);
        }
        rows[k].sinr_linear = db2lin(rows[k].rx_dbw) / (interference + table.noise_w);
      }
    }
  }
  return table;
}

const LinkEntry& link_at(const LinkTable& table, int user_index, int sat_index, int beam) {
  if (user_index < 0 || static_cast<size_t>(user_index) >= table.per_user.size())
    throw std::out_of_range("no such user in link table");
  for (const auto& e : table.per_user[user_index])
    if (e.sat_index == sat_index && e.beam == beam) return e;
  throw std::out_of_range("no link entry for (user " + std::to_string(user_index) + ", sat " +
                          std::to_string(sat_index) + ", beam " + std::to_string(beam) + ")");
}

}  // namespace leopos
