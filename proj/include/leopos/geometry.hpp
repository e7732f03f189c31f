// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <optional>
#include <utility>
#include <vector>

#include "leopos/common.hpp"

namespace leopos {

struct EarthModel {
  double radius_km = kEarthRadiusKm;
  double rotation_rate_rad_s = kEarthRotationRadPerS;
};

struct ConstellationParams {
  int num_planes = 40;
  int sats_per_plane = 60;
  double inclination_deg = 87.5;
  double altitude_km = 1200.0;
  // Offset of 20 slots staggers adjacent planes by half the 6-degree
  // in-plane spacing, evening out ground coverage between planes.
  int phasing_factor = 20;
  // Near-polar constellations spread ascending nodes over a half circle
  // (star pattern): a full-circle spread would duplicate coverage with
  // nearly coincident co-rotating/counter-rotating satellite pairs.
  double raan_spread_deg = 180.0;
};

struct OrbitalElements {
  int sat_id = 0;
  double raan_rad = 0.0;
  double inclination_rad = 0.0;
  double anomaly0_rad = 0.0;  // argument of latitude at epoch (circular orbit)
  double radius_km = 0.0;     // orbit radius from Earth center
};

struct SatelliteState {
  int sat_id = 0;
  Eigen::Vector3d position_km = Eigen::Vector3d::Zero();   // ECEF
  Eigen::Vector3d velocity_km_s = Eigen::Vector3d::Zero();  // ECEF
  double nadir_lat_deg = 0.0;
  double nadir_lon_deg = 0.0;
};

struct GroundPosition {
  double lat_deg = 0.0;
  double lon_deg = 0.0;
  Eigen::Vector3d ecef_km = Eigen::Vector3d::Zero();
};

GroundPosition ground_from_geodetic(double lat_deg, double lon_deg,
                                    const EarthModel& earth = EarthModel());

struct UvCoordinate {
  double u = 0.0;
  double v = 0.0;
};

// Beam pointing grid of one satellite in its UV plane. Centers sit on a hexagonal lattice;
// axial holds the lattice coordinates each center was generated from, colors the reuse-3
// frequency color per beam.
struct BeamLayout {
  std::vector<UvCoordinate> centers;
  std::vector<std::pair<int, int>> axial;
  std::vector<int> colors;
  double beam_radius_uv = 0.0;
};

// Walker-style shell: planes evenly spread over raan_spread_deg, satellites evenly spaced in
// each plane, inter-plane phase offset phasing_factor * 360 / (P * Q) degrees.
std::vector<OrbitalElements> build_constellation(const ConstellationParams& params,
                                                 const EarthModel& earth = EarthModel());

// State at snapshot_index of num_snapshots equally spaced over one orbital period.
// Earth-fixed frame; the frame rotates under the constellation at earth.rotation_rate_rad_s.
std::vector<SatelliteState> propagate(const std::vector<OrbitalElements>& elements,
                                      int snapshot_index, int num_snapshots,
                                      const EarthModel& earth = EarthModel());

double slant_distance_km(const SatelliteState& sat, const GroundPosition& ue);

double elevation_angle_deg(const SatelliteState& sat, const GroundPosition& ue);

GroundPosition sub_satellite_point(const SatelliteState& sat,
                                   const EarthModel& earth = EarthModel());

// UV coordinates of an Earth-fixed target as seen from the satellite: u = sin(theta)cos(phi),
// v = sin(theta)sin(phi), theta off the nadir boresight, phi measured from the velocity
// direction projected onto the UV plane. Throws if the target is below the satellite's horizon.
UvCoordinate direction_to_uv(const SatelliteState& sat, const Eigen::Vector3d& target_ecef_km);

// Unit direction vector (ECEF) for a UV coordinate; requires u^2 + v^2 <= 1.
Eigen::Vector3d uv_to_direction(const SatelliteState& sat, const UvCoordinate& uv);

// Angle between the beam boresight pointed at beam_center and the direction to the user.
double off_boresight_angle_rad(const SatelliteState& sat, const UvCoordinate& beam_center,
                               const GroundPosition& ue);

// Rings of the centered hexagonal number b_cov (1, 7, 19, 37, 61, ...), or nullopt.
std::optional<int> centered_hex_rings(int b_cov);

// Hexagonal layout of b_cov beams centered at UV (0,0) with nearest-center spacing
// 2 * beam_radius_uv; reuse-3 coloring applied.
BeamLayout hex_beam_layout(int b_cov, double beam_radius_uv);

// Rigid translation of every center by offset; throws if any translated center leaves the
// closed unit disk.
BeamLayout translate_layout(const BeamLayout& layout, const UvCoordinate& offset);

bool is_visible(const SatelliteState& sat, const GroundPosition& ue);

// Circular orbit period for the given orbit radius.
double orbital_period_s(double radius_km);

}  // namespace leopos
