// SPDX-License-Identifier: Apache-2.0
// Scenario configuration (JSON), user deployment, experiment sweeps over
// orbital height and time snapshots, and deterministic CSV emission.
#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "leopos/crlb.hpp"
#include "leopos/fbhca.hpp"
#include "leopos/geometry.hpp"
#include "leopos/linkbudget.hpp"

namespace leopos {

// Axis-aligned deployment region in geodetic degrees (lo <= hi; a degenerate
// box is a single point).
struct RegionBox {
  double lon_lo = -70.0, lon_hi = -60.0;
  double lat_lo = -5.0, lat_hi = 5.0;
};

// Per-satellite beam pattern configuration. The default radius is close to an
// eighth of the single-satellite coverage half-width at the 1200 km reference
// height, which spreads a 61-beam layout over the nadir region while keeping
// the outer ring inside the antenna main lobe.
struct BeamConfig {
  int count = 61;
  double radius_uv = 0.025;
};

// Experiment-scale settings.
struct RunConfig {
  int users = 50;      // deployed UE count J
  int snapshots = 20;  // time snapshots S, spanning one orbital period
  std::vector<double> heights_km = {800, 900, 1000, 1100, 1200, 1300, 1400, 1500};
  std::vector<int> n_pos_set = {4, 6, 8};  // snapshot-sweep positioning set sizes
  std::uint64_t seed = 1;
  bool emit_runtime = false;  // fill the runtime_ms column (breaks byte determinism)
  std::string out_dir = ".";
};

// Fully resolved configuration; every field has a default so an empty config
// file is valid.
struct ScenarioConfig {
  ConstellationParams constellation;
  LinkParams link;
  BeamConfig beams;
  AlgoConfig algo;  // includes the reference-signal shape and sf seed
  RegionBox region;
  RunConfig run;
  std::vector<std::string> warnings;  // accepted-but-flagged settings
};

ScenarioConfig default_config();

// Parses and validates a JSON config; `origin` names the source in messages.
// An all-whitespace text yields the defaults. Throws std::runtime_error with
// line/column diagnostics on malformed JSON and std::invalid_argument naming
// the offending field on validation failures (unknown fields included).
ScenarioConfig parse_config_text(const std::string& text, const std::string& origin);

// Reads the file and delegates to parse_config_text.
ScenarioConfig load_config(const std::string& path);

// J positions sampled uniformly in longitude and latitude over the box
// (per-coordinate uniform; the cosine area correction is negligible over the
// narrow default band), deterministic in the seed.
std::vector<GroundPosition> deploy_users(const RegionBox& region, int j, std::uint64_t seed);

// Satellite states at the snapshot, the deployed users, the beam layout, and
// the link parameters for one sweep point.
Scenario build_scenario(const ScenarioConfig& cfg, double height_km, int snapshot_index,
                        const std::vector<GroundPosition>& users);

// One sweep row. avg_crlb_m is NaN when no user was covered (the
// coverage-failure marker). covered_users is averaged over the row's
// snapshots and excluded_users is its exact complement toward J.
struct ResultRow {
  double sweep_value = 0.0;
  std::string algorithm;
  int n_pos = 0;
  double avg_crlb_m = std::numeric_limits<double>::quiet_NaN();
  double covered_users = 0.0;
  double excluded_users = 0.0;
  double runtime_ms = 0.0;
};

struct ExperimentResult {
  std::vector<ResultRow> rows;
  bool emit_runtime = false;  // controls the runtime_ms column content
};

// Mean interference-free SNR (received power over noise) of the associated
// beam per positioning rank (0 = serving satellite, higher ranks = cooperators
// by increasing distance), averaged in the dB domain over covered users and
// snapshots. One row of ranks per algorithm.
struct SnrTable {
  std::vector<std::string> algorithms;
  std::vector<std::vector<double>> mean_snr_db;
};

// Orbital-height sweep: for every configured height, runs the three schemes
// over all snapshots and averages the accuracy over covered users and
// snapshots. Rows are ordered by (height, algorithm); `threads` spreads the
// heights over worker threads without changing any output.
ExperimentResult run_orbit_height_sweep(const ScenarioConfig& cfg, int threads = 1);

struct SnapshotSweepOutput {
  ExperimentResult result;
  SnrTable snr;
};

// Snapshot sweep at the configured altitude: per-snapshot rows for every
// algorithm and every configured positioning set size, plus the per-rank SNR
// table accumulated at the base set size. Row order: (snapshot, algorithm,
// n_pos). Deterministic for any thread count.
SnapshotSweepOutput run_snapshot_sweep(const ScenarioConfig& cfg, int threads = 1);

// Writes "sweep_value,algorithm,n_pos,avg_crlb_m,covered_users,runtime_ms"
// rows with 6 significant digits and LF endings; the runtime column stays
// empty unless the result carries emit_runtime. Throws std::runtime_error
// naming the path on I/O failure.
void emit_csv(const ExperimentResult& result, const std::string& path);

// Writes "algorithm,sat_rank,mean_snr_db" rows (6 significant digits, LF).
void emit_snr_csv(const SnrTable& table, const std::string& path);

// Writes a plain-text companion script that plots the emitted CSV files.
void write_plot_stub(const std::string& path);

}  // namespace leopos
