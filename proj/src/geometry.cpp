// SPDX-License-Identifier: Apache-2.0
#include "leopos/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace leopos {

namespace {

Eigen::Matrix3d rot_z(double angle_rad) {
  double c = std::cos(angle_rad), s = std::sin(angle_rad);
  Eigen::Matrix3d m;
  m << c, -s, 0, s, c, 0, 0, 0, 1;
  return m;
}

// Orthonormal UV basis of a satellite: boresight k toward nadir, x axis along the velocity
// projected onto the plane normal to k, y completing the right-handed triad.
struct UvBasis {
  Eigen::Vector3d k, x, y;
};

UvBasis uv_basis(const SatelliteState& sat) {
  if (sat.position_km.norm() <= 0.0)
    throw std::invalid_argument("satellite position must be nonzero");
  Eigen::Vector3d k = -sat.position_km.normalized();
  Eigen::Vector3d vp = sat.velocity_km_s - sat.velocity_km_s.dot(k) * k;
  if (vp.norm() < 1e-12)
    throw std::invalid_argument("satellite velocity is degenerate (parallel to nadir axis)");
  UvBasis b;
  b.k = k;
  b.x = vp.normalized();
  b.y = k.cross(b.x);
  return b;
}

}  // namespace

GroundPosition ground_from_geodetic(double lat_deg, double lon_deg, const EarthModel& earth) {
  if (!(lat_deg >= -90.0 && lat_deg <= 90.0))
    throw std::invalid_argument("latitude must be in [-90, 90] deg");
  GroundPosition g;
  g.lat_deg = lat_deg;
  g.lon_deg = lon_deg;
  double lat = deg2rad(lat_deg), lon = deg2rad(lon_deg);
  g.ecef_km = earth.radius_km * Eigen::Vector3d(std::cos(lat) * std::cos(lon),
                                                std::cos(lat) * std::sin(lon), std::sin(lat));
  return g;
}

double orbital_period_s(double radius_km) {
  if (radius_km <= 0.0) throw std::invalid_argument("orbit radius must be positive");
  return 2.0 * kPi * std::sqrt(radius_km * radius_km * radius_km / kMuKm3PerS2);
}

std::vector<OrbitalElements> build_constellation(const ConstellationParams& params,
                                                 const EarthModel& earth) {
  if (params.num_planes < 1) throw std::invalid_argument("num_planes must be >= 1");
  if (params.sats_per_plane < 1) throw std::invalid_argument("sats_per_plane must be >= 1");
  if (params.altitude_km <= 0.0) throw std::invalid_argument("altitude_km must be positive");
  if (params.raan_spread_deg <= 0.0 || params.raan_spread_deg > 360.0)
    throw std::invalid_argument("raan_spread_deg must be in (0, 360]");

  const int planes = params.num_planes;
  const int per_plane = params.sats_per_plane;
  const double incl = deg2rad(params.inclination_deg);
  const double radius = earth.radius_km + params.altitude_km;
  const double raan_step = deg2rad(params.raan_spread_deg) / planes;
  const double anomaly_step = 2.0 * kPi / per_plane;
  const double phase_step =
      deg2rad(360.0 * params.phasing_factor / static_cast<double>(planes * per_plane));

  std::vector<OrbitalElements> out;
  out.reserve(static_cast<size_t>(planes) * per_plane);
  for (int p = 0; p < planes; ++p) {
    for (int q = 0; q < per_plane; ++q) {
      OrbitalElements e;
      e.sat_id = p * per_plane + q;
      e.raan_rad = p * raan_step;
      e.inclination_rad = incl;
      e.anomaly0_rad = q * anomaly_step + p * phase_step;
      e.radius_km = radius;
      out.push_back(e);
    }
  }
  return out;
}

std::vector<SatelliteState> propagate(const std::vector<OrbitalElements>& elements,
                                      int snapshot_index, int num_snapshots,
                                      const EarthModel& earth) {
  if (num_snapshots < 1) throw std::invalid_argument("num_snapshots must be >= 1");
  if (snapshot_index < 0) throw std::invalid_argument("snapshot_index must be >= 0");

  std::vector<SatelliteState> out;
  out.reserve(elements.size());
  const double frac = static_cast<double>(snapshot_index) / num_snapshots;
  for (const auto& e : elements) {
    const double n = std::sqrt(kMuKm3PerS2 / (e.radius_km * e.radius_km * e.radius_km));
    const double t = frac * orbital_period_s(e.radius_km);
    const double u = e.anomaly0_rad + 2.0 * kPi * frac;
    const double cu = std::cos(u), su = std::sin(u);
    const double co = std::cos(e.raan_rad), so = std::sin(e.raan_rad);
    const double ci = std::cos(e.inclination_rad), si = std::sin(e.inclination_rad);

    Eigen::Vector3d pos_eci(co * cu - so * su * ci, so * cu + co * su * ci, su * si);
    pos_eci *= e.radius_km;
    Eigen::Vector3d vel_eci(-co * su - so * cu * ci, -so * su + co * cu * ci, cu * si);
    vel_eci *= e.radius_km * n;

    const Eigen::Matrix3d frame = rot_z(-earth.rotation_rate_rad_s * t);
    SatelliteState s;
    s.sat_id = e.sat_id;
    s.position_km = frame * pos_eci;
    s.velocity_km_s = frame * vel_eci -
                      earth.rotation_rate_rad_s * Eigen::Vector3d::UnitZ().cross(s.position_km);
    s.nadir_lat_deg = rad2deg(std::asin(s.position_km.z() / s.position_km.norm()));
    s.nadir_lon_deg = rad2deg(std::atan2(s.position_km.y(), s.position_km.x()));
    out.push_back(s);
  }
  return out;
}

double slant_distance_km(const SatelliteState& sat, const GroundPosition& ue) {
  double d = (sat.position_km - ue.ecef_km).norm();
  if (d <= 0.0) throw std::domain_error("satellite and user are co-located");
  return d;
}

double elevation_angle_deg(const SatelliteState& sat, const GroundPosition& ue) {
  Eigen::Vector3d up = ue.ecef_km.normalized();
  Eigen::Vector3d to_sat = sat.position_km - ue.ecef_km;
  double nrm = to_sat.norm();
  if (nrm <= 0.0) throw std::domain_error("satellite and user are co-located");
  return rad2deg(std::asin(std::clamp(up.dot(to_sat) / nrm, -1.0, 1.0)));
}

GroundPosition sub_satellite_point(const SatelliteState& sat, const EarthModel& earth) {
  return ground_from_geodetic(sat.nadir_lat_deg, sat.nadir_lon_deg, earth);
}

bool is_visible(const SatelliteState& sat, const GroundPosition& ue) {
  return elevation_angle_deg(sat, ue) > 0.0;
}

UvCoordinate direction_to_uv(const SatelliteState& sat, const Eigen::Vector3d& target_ecef_km) {
  Eigen::Vector3d up = target_ecef_km.normalized();
  Eigen::Vector3d to_sat = sat.position_km - target_ecef_km;
  if (up.dot(to_sat) < 0.0)
    throw std::domain_error("target is below the satellite's horizon");
  UvBasis b = uv_basis(sat);
  Eigen::Vector3d d = (target_ecef_km - sat.position_km).normalized();
  return UvCoordinate{d.dot(b.x), d.dot(b.y)};
}

Eigen::Vector3d uv_to_direction(const SatelliteState& sat, const UvCoordinate& uv) {
  double s = uv.u * uv.u + uv.v * uv.v;
  if (s > 1.0 + 1e-12) throw std::invalid_argument("uv coordinate outside the unit disk");
  UvBasis b = uv_basis(sat);
  double w = std::sqrt(std::max(0.0, 1.0 - s));
  return (w * b.k + uv.u * b.x + uv.v * b.y).normalized();
}

double off_boresight_angle_rad(const SatelliteState& sat, const UvCoordinate& beam_center,
                               const GroundPosition& ue) {
  if (elevation_angle_deg(sat, ue) < 0.0)
    throw std::domain_error("user is below the satellite's horizon");
  Eigen::Vector3d beam_dir = uv_to_direction(sat, beam_center);
  Eigen::Vector3d to_ue = (ue.ecef_km - sat.position_km).normalized();
  return std::acos(std::clamp(beam_dir.dot(to_ue), -1.0, 1.0));
}

std::optional<int> centered_hex_rings(int b_cov) {
  if (b_cov < 1) return std::nullopt;
  for (int r = 0;; ++r) {
    int count = 3 * r * (r + 1) + 1;
    if (count == b_cov) return r;
    if (count > b_cov) return std::nullopt;
  }
}

BeamLayout hex_beam_layout(int b_cov, double beam_radius_uv) {
  auto rings = centered_hex_rings(b_cov);
  if (!rings)
    throw std::invalid_argument("beam count " + std::to_string(b_cov) +
                                " is not a centered hexagonal number (1, 7, 19, 37, 61, ...)");
  if (beam_radius_uv <= 0.0) throw std::invalid_argument("beam_radius_uv must be positive");

  const int R = *rings;
  const double spacing = 2.0 * beam_radius_uv;
  BeamLayout layout;
  layout.beam_radius_uv = beam_radius_uv;
  struct Cell {
    int q, r, dist;
  };
  std::vector<Cell> cells;
  for (int q = -R; q <= R; ++q) {
    for (int r = -R; r <= R; ++r) {
      int d = std::max({std::abs(q), std::abs(r), std::abs(q + r)});
      if (d <= R) cells.push_back({q, r, d});
    }
  }
  std::sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) {
    if (a.dist != b.dist) return a.dist < b.dist;
    if (a.q != b.q) return a.q < b.q;
    return a.r < b.r;
  });
  for (const auto& c : cells) {
    UvCoordinate uv{spacing * (c.q + 0.5 * c.r), spacing * (std::sqrt(3.0) / 2.0) * c.r};
    if (uv.u * uv.u + uv.v * uv.v > 1.0)
      throw std::invalid_argument("beam layout does not fit inside the unit disk");
    layout.centers.push_back(uv);
    layout.axial.emplace_back(c.q, c.r);
    layout.colors.push_back(((c.q - c.r) % 3 + 3) % 3);
  }
  return layout;
}

BeamLayout translate_layout(const BeamLayout& layout, const UvCoordinate& offset) {
  BeamLayout out = layout;
  for (auto& c : out.centers) {
    c.u += offset.u;
    c.v += offset.v;
    if (c.u * c.u + c.v * c.v > 1.0)
      throw std::domain_error("translated beam center leaves the unit disk");
  }
  return out;
}

}  // namespace leopos
