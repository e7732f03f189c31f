// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "leopos/geometry.hpp"

using namespace leopos;

namespace {

EarthModel earth_no_rotation() {
  EarthModel e;
  e.rotation_rate_rad_s = 0.0;
  return e;
}

SatelliteState sat_at(double lat_deg, double lon_deg, double alt_km,
                      const Eigen::Vector3d& vel = Eigen::Vector3d(0, 7.0, 0)) {
  SatelliteState s;
  double lat = deg2rad(lat_deg), lon = deg2rad(lon_deg);
  double r = kEarthRadiusKm + alt_km;
  s.position_km = r * Eigen::Vector3d(std::cos(lat) * std::cos(lon),
                                      std::cos(lat) * std::sin(lon), std::sin(lat));
  s.velocity_km_s = vel;
  s.nadir_lat_deg = lat_deg;
  s.nadir_lon_deg = lon_deg;
  return s;
}

// Independent enumeration oracle: centered hexagonal count via cube coordinates.
int hex_count_within(int rings) {
  int count = 0;
  for (int x = -rings; x <= rings; ++x)
    for (int y = -rings; y <= rings; ++y)
      for (int z = -rings; z <= rings; ++z)
        if (x + y + z == 0 &&
            std::max({std::abs(x), std::abs(y), std::abs(z)}) <= rings)
          ++count;
  return count;
}

}  // namespace

TEST_CASE("constellation - plane and phase spacing") {
  ConstellationParams p;
  p.num_planes = 2;
  p.sats_per_plane = 2;
  p.inclination_deg = 90.0;
  p.altitude_km = 800.0;
  p.phasing_factor = 1;
  p.raan_spread_deg = 360.0;
  auto elems = build_constellation(p);
  REQUIRE(elems.size() == 4);
  // RAAN spacing 360/2 = 180 deg; phase offset between planes 1*360/(2*2) = 90 deg.
  CHECK(elems[0].raan_rad == doctest::Approx(0.0));
  CHECK(elems[2].raan_rad == doctest::Approx(kPi));
  CHECK(elems[1].anomaly0_rad - elems[0].anomaly0_rad == doctest::Approx(kPi));
  CHECK(elems[2].anomaly0_rad - elems[0].anomaly0_rad == doctest::Approx(kPi / 2.0));
  for (const auto& e : elems) CHECK(e.radius_km == doctest::Approx(kEarthRadiusKm + 800.0));
}

TEST_CASE("constellation - default shell has 2400 satellites in a half-circle star pattern") {
  ConstellationParams p;
  auto elems = build_constellation(p);
  REQUIRE(elems.size() == 2400);
  // 40 planes spread over 180 deg of ascending node: 4.5 deg apart
  CHECK(elems[60].raan_rad - elems[0].raan_rad == doctest::Approx(deg2rad(4.5)));
  std::set<int> ids;
  for (const auto& e : elems) ids.insert(e.sat_id);
  CHECK(ids.size() == 2400);  // ids unique
}

TEST_CASE("constellation - parameter validation") {
  ConstellationParams p;
  p.num_planes = 0;
  CHECK_THROWS_AS((void)build_constellation(p), std::invalid_argument);
  p = ConstellationParams();
  p.altitude_km = -5.0;
  CHECK_THROWS_AS((void)build_constellation(p), std::invalid_argument);
}

TEST_CASE("orbital period - Kepler value at 1200 km") {
  // Oracle evaluated from first principles: T = 2*pi*sqrt(a^3/mu).
  double r = 6371.0 + 1200.0;
  double oracle = 2.0 * kPi * std::sqrt(r * r * r / 398600.4418);
  CHECK(orbital_period_s(r) == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(orbital_period_s(r) / 60.0 == doctest::Approx(109.3).epsilon(2e-3));  // ~109 min
}

TEST_CASE("propagate - radius conservation and snapshot stepping") {
  ConstellationParams p;
  p.num_planes = 3;
  p.sats_per_plane = 4;
  auto elems = build_constellation(p);
  auto earth = earth_no_rotation();
  for (int k : {0, 7, 19}) {
    auto sats = propagate(elems, k, 20, earth);
    REQUIRE(sats.size() == elems.size());
    for (const auto& s : sats) {
      CHECK(s.position_km.norm() == doctest::Approx(kEarthRadiusKm + 1200.0).epsilon(1e-9));
      // velocity magnitude = sqrt(mu/r) for a circular orbit in a non-rotating frame
      CHECK(s.velocity_km_s.norm() ==
            doctest::Approx(std::sqrt(kMuKm3PerS2 / s.position_km.norm())).epsilon(1e-9));
      CHECK(std::abs(s.position_km.dot(s.velocity_km_s)) < 1e-6);
    }
  }
}

TEST_CASE("propagate - periodicity without Earth rotation") {
  ConstellationParams p;
  p.num_planes = 2;
  p.sats_per_plane = 3;
  auto elems = build_constellation(p);
  auto earth = earth_no_rotation();
  auto a = propagate(elems, 0, 16, earth);
  auto b = propagate(elems, 16, 16, earth);
  for (size_t i = 0; i < a.size(); ++i)
    CHECK((a[i].position_km - b[i].position_km).norm() < 1e-6);
}

TEST_CASE("propagate - Earth rotation shifts nadir longitude by -omega*T") {
  ConstellationParams p;
  p.num_planes = 1;
  p.sats_per_plane = 1;
  p.inclination_deg = 87.5;
  auto elems = build_constellation(p);
  EarthModel earth;  // default rotation
  auto s0 = propagate(elems, 0, 4, earth);
  auto s1 = propagate(elems, 4, 4, earth);
  double period = orbital_period_s(elems[0].radius_km);
  double expect = s0[0].nadir_lon_deg - rad2deg(earth.rotation_rate_rad_s * period);
  while (expect < -180.0) expect += 360.0;
  CHECK(s1[0].nadir_lon_deg == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("slant distance - zenith and horizon") {
  auto sat = sat_at(0.0, 0.0, 1200.0);
  auto ue = ground_from_geodetic(0.0, 0.0);
  CHECK(slant_distance_km(sat, ue) == doctest::Approx(1200.0).epsilon(1e-12));

  // Horizon: ue at central angle acos(Re/r); oracle d = sqrt(r^2 - Re^2).
  double r = kEarthRadiusKm + 1200.0;
  double psi = std::acos(kEarthRadiusKm / r);
  auto ue_h = ground_from_geodetic(0.0, rad2deg(psi));
  double oracle = std::sqrt(r * r - kEarthRadiusKm * kEarthRadiusKm);
  CHECK(oracle == doctest::Approx(4090.28).epsilon(1e-5));
  CHECK(slant_distance_km(sat, ue_h) == doctest::Approx(oracle).epsilon(1e-10));
  CHECK(elevation_angle_deg(sat, ue_h) == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("elevation - zenith is 90 and decreases with offset") {
  auto sat = sat_at(0.0, 0.0, 1200.0);
  CHECK(elevation_angle_deg(sat, ground_from_geodetic(0.0, 0.0)) == doctest::Approx(90.0));
  double prev = 90.0;
  for (double off : {2.0, 5.0, 10.0, 20.0}) {
    double el = elevation_angle_deg(sat, ground_from_geodetic(0.0, off));
    CHECK(el < prev);
    prev = el;
  }
}

TEST_CASE("sub-satellite point matches nadir lat/lon") {
  auto sat = sat_at(12.5, -33.25, 1000.0);
  auto sub = sub_satellite_point(sat);
  CHECK(sub.lat_deg == doctest::Approx(12.5).epsilon(1e-10));
  CHECK(sub.lon_deg == doctest::Approx(-33.25).epsilon(1e-10));
  CHECK(sub.ecef_km.norm() == doctest::Approx(kEarthRadiusKm));
}

TEST_CASE("uv - nadir maps to origin, velocity axis carries u") {
  auto sat = sat_at(0.0, 0.0, 1200.0, Eigen::Vector3d(0, 0, 7.3));
  auto nadir = ground_from_geodetic(0.0, 0.0);
  auto uv = direction_to_uv(sat, nadir.ecef_km);
  CHECK(std::abs(uv.u) < 1e-14);
  CHECK(std::abs(uv.v) < 1e-14);
  // A ground point displaced along the velocity direction (+z here) has u > 0, v == 0.
  auto ahead = ground_from_geodetic(3.0, 0.0);
  auto uv2 = direction_to_uv(sat, ahead.ecef_km);
  CHECK(uv2.u > 0.0);
  CHECK(std::abs(uv2.v) < 1e-12);
}

TEST_CASE("uv - round trip against direction vector") {
  auto sat = sat_at(10.0, 25.0, 1200.0, Eigen::Vector3d(-3.0, 5.5, 2.0));
  Rng rng(99);
  for (int i = 0; i < 200; ++i) {
    double lat = 10.0 + rng.uniform(-8.0, 8.0);
    double lon = 25.0 + rng.uniform(-8.0, 8.0);
    auto ue = ground_from_geodetic(lat, lon);
    auto uv = direction_to_uv(sat, ue.ecef_km);
    CHECK(uv.u * uv.u + uv.v * uv.v <= 1.0);
    Eigen::Vector3d dir = uv_to_direction(sat, uv);
    Eigen::Vector3d expect = (ue.ecef_km - sat.position_km).normalized();
    CHECK((dir - expect).norm() < 1e-12);
  }
}

TEST_CASE("uv - far-side target raises visibility error") {
  auto sat = sat_at(0.0, 0.0, 1200.0);
  auto far = ground_from_geodetic(0.0, 170.0);
  CHECK_THROWS_AS((void)direction_to_uv(sat, far.ecef_km), std::domain_error);
  UvCoordinate bad{0.9, 0.9};  // norm > 1
  CHECK_THROWS_AS((void)uv_to_direction(sat, bad), std::invalid_argument);
}

TEST_CASE("centered hexagonal numbers") {
  CHECK(centered_hex_rings(1) == 0);
  CHECK(centered_hex_rings(7) == 1);
  CHECK(centered_hex_rings(19) == 2);
  CHECK(centered_hex_rings(37) == 3);
  CHECK(centered_hex_rings(61) == 4);
  CHECK_FALSE(centered_hex_rings(8).has_value());
  CHECK_FALSE(centered_hex_rings(0).has_value());
  CHECK_FALSE(centered_hex_rings(-7).has_value());
}

TEST_CASE("hex layout - counts match lattice enumeration oracle") {
  for (int rings = 0; rings <= 4; ++rings) {
    int count = hex_count_within(rings);
    auto layout = hex_beam_layout(count, 0.02);
    CHECK(static_cast<int>(layout.centers.size()) == count);
    CHECK(layout.axial.size() == layout.centers.size());
    CHECK(layout.colors.size() == layout.centers.size());
  }
  CHECK_THROWS_AS((void)hex_beam_layout(8, 0.02), std::invalid_argument);
  CHECK_THROWS_AS((void)hex_beam_layout(7, 0.0), std::invalid_argument);
  // Layout that would leave the unit disk is rejected.
  CHECK_THROWS_AS((void)hex_beam_layout(61, 0.2), std::invalid_argument);
}

TEST_CASE("hex layout - nearest-center spacing is exactly 2 * radius") {
  auto layout = hex_beam_layout(61, 0.03);
  double min_d = kInf;
  for (size_t i = 0; i < layout.centers.size(); ++i)
    for (size_t j = i + 1; j < layout.centers.size(); ++j) {
      double du = layout.centers[i].u - layout.centers[j].u;
      double dv = layout.centers[i].v - layout.centers[j].v;
      min_d = std::min(min_d, std::hypot(du, dv));
    }
  CHECK(min_d == doctest::Approx(0.06).epsilon(1e-12));
}

TEST_CASE("hex layout - reuse-3 coloring is proper and balanced") {
  auto layout = hex_beam_layout(61, 0.025);
  int counts[3] = {0, 0, 0};
  for (size_t i = 0; i < layout.centers.size(); ++i) {
    REQUIRE(layout.colors[i] >= 0);
    REQUIRE(layout.colors[i] < 3);
    ++counts[layout.colors[i]];
    for (size_t j = i + 1; j < layout.centers.size(); ++j) {
      int dq = layout.axial[i].first - layout.axial[j].first;
      int dr = layout.axial[i].second - layout.axial[j].second;
      bool adjacent = std::max({std::abs(dq), std::abs(dr), std::abs(dq + dr)}) == 1;
      if (adjacent) CHECK(layout.colors[i] != layout.colors[j]);
    }
  }
  // Proper 3-colorings of the triangular lattice are coset colorings; on a centered
  // hex ball the coset sizes differ by at most 2 (19/21/21 at 61 beams).
  CHECK(std::max({counts[0], counts[1], counts[2]}) -
            std::min({counts[0], counts[1], counts[2]}) <=
        2);
}

TEST_CASE("translate layout - rigid shift and horizon error") {
  auto layout = hex_beam_layout(19, 0.03);
  UvCoordinate off{0.4, -0.2};
  auto moved = translate_layout(layout, off);
  for (size_t i = 0; i < layout.centers.size(); ++i) {
    CHECK(moved.centers[i].u == doctest::Approx(layout.centers[i].u + 0.4));
    CHECK(moved.centers[i].v == doctest::Approx(layout.centers[i].v - 0.2));
    CHECK(moved.colors[i] == layout.colors[i]);
  }
  CHECK_THROWS_AS((void)translate_layout(layout, UvCoordinate{0.99, 0.0}), std::domain_error);
}

TEST_CASE("off-boresight angle - zero toward own center, matches acos oracle") {
  auto sat = sat_at(0.0, 0.0, 1200.0, Eigen::Vector3d(0, 0, 7.3));
  auto ue = ground_from_geodetic(1.5, 2.0);
  auto uv = direction_to_uv(sat, ue.ecef_km);
  CHECK(off_boresight_angle_rad(sat, uv, ue) < 1e-9);

  // Beam at nadir, user off nadir: angle equals angle(nadir_dir, user_dir).
  Eigen::Vector3d to_ue = (ue.ecef_km - sat.position_km).normalized();
  Eigen::Vector3d nadir_dir = -sat.position_km.normalized();
  double oracle = std::acos(std::clamp(nadir_dir.dot(to_ue), -1.0, 1.0));
  CHECK(off_boresight_angle_rad(sat, UvCoordinate{0, 0}, ue) ==
        doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("visibility predicate") {
  auto sat = sat_at(0.0, 0.0, 1200.0);
  CHECK(is_visible(sat, ground_from_geodetic(0.0, 10.0)));
  CHECK_FALSE(is_visible(sat, ground_from_geodetic(0.0, 120.0)));
}
