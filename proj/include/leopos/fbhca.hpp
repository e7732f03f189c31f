// SPDX-License-Identifier: Apache-2.0
// Cooperative beam hopping for positioning: satellite selection, max-SINR user
// association, Voronoi-occupancy beam activation, SDP-driven power allocation,
// and the three end-to-end schemes (nadir equal-power baseline, cooperative
// equal-power, and the iterated cooperative optimizer).
#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "leopos/crlb.hpp"
#include "leopos/geometry.hpp"
#include "leopos/linkbudget.hpp"

namespace leopos {

// Parameters shared by all schemes.
struct AlgoConfig {
  int iterations = 5;           // optimization passes of the iterated scheme (>= 1)
  int n_pos = 4;                // positioning satellites per user (>= 4)
  double p_tot_beam_w = 110.0;  // per-beam transmit power cap
  double p_tot_sat_w = 6100.0;  // per-satellite total power budget
  int beam_budget = 61;         // max simultaneously active beams per satellite (>= 1)
  InterferenceMode mode = InterferenceMode::kCoChannel;
  std::uint64_t sf_seed = 0;    // shadow-fading draw key
  SignalSpec signal;            // reference-signal shape for TOA variance
};

// A positioning snapshot: satellite states, users, the per-satellite beam
// pattern (in each satellite's own UV frame, centered on its nadir), and the
// radio-link parameters.
struct Scenario {
  std::vector<SatelliteState> sats;
  std::vector<User> users;
  BeamLayout layout;
  LinkParams link;
};

// The n_pos visible satellites with the highest elevation toward `ue`, sorted
// by descending elevation (ties broken by ascending satellite index). Returned
// values are indices into `sats`. Throws std::runtime_error if fewer than
// n_pos satellites are visible; std::invalid_argument if n_pos < 1.
std::vector<int> select_positioning_sats(const GroundPosition& ue,
                                         const std::vector<SatelliteState>& sats,
                                         int n_pos);

// Per-user, per-satellite beam choice. beam[j][i] is the chosen beam of
// satellite slot i for user j, or -1 when that satellite offers no usable beam.
struct AssociationMap {
  std::vector<std::vector<int>> beam;
};

// Max-SINR association: for every user and every satellite slot present in the
// link table, picks the beam with the highest SINR (ties broken by the lowest
// beam index). Slots without any table entry for a user yield -1.
AssociationMap associate_users(const LinkTable& table, int num_users, int num_sats);

// Index of the nearest site for each point (Euclidean distance in the UV
// plane; ties broken by the lowest site index). Throws std::invalid_argument
// if sites is empty.
std::vector<int> voronoi_assign(const std::vector<UvCoordinate>& sites,
                                const std::vector<UvCoordinate>& points);

// Beam activation from cell occupancy, plus the (possibly reassigned) cell of
// every point after the activation budget is enforced.
struct BeamActivation {
  std::vector<char> active;        // per cell: 1 = beam on
  std::vector<int> cell_of_point;  // per point: its active cell
};

// Activates every cell that contains at least one point. If more than `budget`
// cells are occupied, keeps the `budget` most populated ones (ties broken by
// the lowest cell index) and reassigns orphaned points to the nearest active
// site (ties again by lowest index). Throws std::invalid_argument if
// budget < 1 or if `assignment` holds an out-of-range cell.
BeamActivation bh_design(const std::vector<UvCoordinate>& sites,
                         const std::vector<UvCoordinate>& points,
                         const std::vector<int>& assignment, int budget);

// A group of users sharing a serving satellite, evaluated as one independent
// beam-hopping time slot together with the satellites that position them.
struct Cluster {
  int serving_sat = -1;        // global satellite index; always sat_ids[0]
  std::vector<int> sat_ids;    // global satellite indices of the slot's actors
  // Beam layout of each satellite in sat_ids order, in that satellite's UV
  // frame. In cooperative mode, non-serving layouts are translated so their
  // centers point at the serving satellite's nadir, and translated beams whose
  // boresight leaves the Earth's disk are dropped.
  std::vector<BeamLayout> layouts;
  std::vector<int> user_ids;   // global user indices, ascending
  // Per cluster user: the positioning satellites as slots into sat_ids, with
  // the serving satellite first and cooperators following by increasing
  // distance from the serving satellite.
  std::vector<std::vector<int>> pos_slots;
};

// Partition of the users into clusters keyed by each user's highest-elevation
// (serving) satellite. A cluster's satellite set is the serving satellite
// plus its n_pos - 1 nearest cooperating satellites (3D distance, ties by
// index); in cooperative mode only satellites with a line of sight to the
// serving nadir qualify as cooperators. The serving satellite occupies slot 0
// and cooperators follow in ascending-distance order. Users with no visible
// satellite, users whose cluster lacks enough cooperators, and users below
// the horizon of any cluster satellite are listed in uncovered_users instead.
struct ClusterBuild {
  std::vector<Cluster> clusters;     // ordered by ascending serving satellite
  std::vector<int> uncovered_users;  // global user indices, ascending
};
ClusterBuild build_clusters(const Scenario& sc, int n_pos, bool cooperative);

// Association, reference choice, and positioning accuracy for one cluster slot
// under the given activation and powers. Entries of crlb_m are NaN for users
// whose evaluation failed (a needed satellite without a usable beam, or a
// degenerate geometry); ref_slot is -1 for those users.
struct ClusterEval {
  AssociationMap assoc;        // [cluster user][slot]
  std::vector<int> ref_slot;   // TDOA reference slot per cluster user
  std::vector<double> crlb_m;  // per cluster user, in meters
};
ClusterEval evaluate_cluster(const Scenario& sc, const Cluster& cl,
                             const std::vector<std::vector<char>>& active,
                             const std::vector<Eigen::VectorXd>& power_w,
                             const AlgoConfig& cfg);

// One power-allocation pass for a cluster at a fixed association and
// activation. Interference and the covariance coupling are frozen at
// prev_power_w; the beam powers serving users as non-reference anchors are
// optimized jointly, then the remaining reference-only beams are optimized per
// satellite. The result is kept only if it does not degrade the cluster's
// average accuracy re-evaluated with the true (unfrozen) link model at the
// same association; otherwise prev_power_w is returned unchanged. A cluster
// without users is returned unchanged as well.
std::vector<Eigen::VectorXd> allocate_power(const Scenario& sc, const Cluster& cl,
                                            const std::vector<std::vector<char>>& active,
                                            const AssociationMap& assoc,
                                            const std::vector<Eigen::VectorXd>& prev_power_w,
                                            const AlgoConfig& cfg);

// Resolved configuration of one cluster slot.
struct ClusterSolution {
  int cluster_index = -1;                 // into ClusterBuild::clusters
  std::vector<std::vector<char>> active;  // [slot][beam]
  std::vector<Eigen::VectorXd> power_w;   // [slot][beam]; 0 on inactive beams
  AssociationMap assoc;                   // [cluster user][slot]
  std::vector<int> ref_slot;              // per cluster user; -1 = excluded
  std::vector<double> crlb_m;             // per cluster user; NaN = excluded
  int best_iterate = 0;  // optimization pass that produced the kept allocation
                         // (0 = the equal-power allocation)
};

// End-to-end result of one scheme on one scenario.
struct Solution {
  ClusterBuild partition;
  std::vector<ClusterSolution> per_cluster;
  double avg_crlb_m = std::numeric_limits<double>::quiet_NaN();  // over covered users
  int covered_users = 0;
  int excluded_users = 0;
};

// Baseline: every satellite keeps its nadir-pointing layout with all beams
// active at the uniform power min(p_tot_sat_w / num_beams, p_tot_beam_w).
Solution run_tmcb(const Scenario& sc, const AlgoConfig& cfg);

// Cooperative equal-power allocation: translated layouts, Voronoi-occupancy
// beam activation under the activation budget, and every active beam of a
// satellite at min(p_tot_beam_w, p_tot_sat_w / active_beam_count).
Solution run_uvbhs_epa(const Scenario& sc, const AlgoConfig& cfg);

// Iterated cooperative optimization: starts from the uniform allocation
// p_tot_beam_w / beam_budget on the active beams, then alternates max-SINR
// association and the SDP power pass for cfg.iterations rounds per cluster,
// returning for each cluster the best allocation among the equal-power
// candidate and every optimization pass.
Solution run_fbhca(const Scenario& sc, const AlgoConfig& cfg);

// Feasibility and consistency audit of a solution: association points only at
// active, powered beams of known slots; at most one beam per (user, satellite);
// per-beam powers within [0, p_tot_beam_w] and zero on inactive beams;
// per-satellite totals within p_tot_sat_w; active-beam counts within
// beam_budget; the association is max-SINR under the solution's own powers;
// and stored accuracies match a re-evaluation. Returns human-readable
// violation descriptions (empty = solution passes).
std::vector<std::string> audit_solution(const Scenario& sc, const AlgoConfig& cfg,
                                        const Solution& sol);

}  // namespace leopos
