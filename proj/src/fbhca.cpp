// SPDX-License-Identifier: Apache-2.0
// Cooperative beam hopping for positioning: clustering, association, Voronoi
// beam activation, SDP power allocation, the three end-to-end schemes, and the
// solution audit.
#include "leopos/fbhca.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "leopos/common.hpp"
#include "leopos/sdp.hpp"

namespace leopos {
namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

void validate_algo_config(const AlgoConfig& cfg) {
  if (cfg.iterations < 1) throw std::invalid_argument("iterations must be at least 1");
  if (cfg.n_pos < 4) throw std::invalid_argument("n_pos must be at least 4");
  if (!(cfg.p_tot_beam_w > 0.0)) throw std::invalid_argument("p_tot_beam_w must be positive");
  if (!(cfg.p_tot_sat_w > 0.0)) throw std::invalid_argument("p_tot_sat_w must be positive");
  if (cfg.beam_budget < 1) throw std::invalid_argument("beam_budget must be at least 1");
}

void validate_cluster_shapes(const Cluster& cl, const std::vector<std::vector<char>>& active,
                             const std::vector<Eigen::VectorXd>& power_w) {
  if (cl.sat_ids.empty() || cl.layouts.size() != cl.sat_ids.size())
    throw std::invalid_argument("cluster layouts do not match its satellite list");
  if (active.size() != cl.sat_ids.size() || power_w.size() != cl.sat_ids.size())
    throw std::invalid_argument("activation/power shape does not match the cluster");
  for (size_t s = 0; s < cl.sat_ids.size(); ++s) {
    size_t n = cl.layouts[s].centers.size();
    if (active[s].size() != n || static_cast<size_t>(power_w[s].size()) != n)
      throw std::invalid_argument("activation/power shape does not match a slot layout");
  }
  if (cl.pos_slots.size() != cl.user_ids.size())
    throw std::invalid_argument("cluster positioning slots do not match its user list");
}

// Powers with inactive beams forced to zero (the physical transmit state).
std::vector<Eigen::VectorXd> effective_powers(const std::vector<std::vector<char>>& active,
                                              const std::vector<Eigen::VectorXd>& power_w) {
  std::vector<Eigen::VectorXd> eff = power_w;
  for (size_t s = 0; s < eff.size(); ++s)
    for (int b = 0; b < eff[s].size(); ++b)
      if (!active[s][b]) eff[s][b] = 0.0;
  return eff;
}

std::vector<User> cluster_users(const Scenario& sc, const Cluster& cl) {
  std::vector<User> out;
  out.reserve(cl.user_ids.size());
  for (int id : cl.user_ids) out.push_back(sc.users[id]);
  return out;
}

std::vector<SatelliteBeams> cluster_beams(const Scenario& sc, const Cluster& cl,
                                          const std::vector<Eigen::VectorXd>& power_w) {
  std::vector<SatelliteBeams> out;
  out.reserve(cl.sat_ids.size());
  for (size_t s = 0; s < cl.sat_ids.size(); ++s) {
    SatelliteBeams sb;
    sb.state = sc.sats[cl.sat_ids[s]];
    sb.layout = cl.layouts[s];
    sb.power_w.assign(power_w[s].data(), power_w[s].data() + power_w[s].size());
    out.push_back(std::move(sb));
  }
  return out;
}

// SINR of a (user, slot, beam) link, or 0 when the link is absent from the table.
double sinr_or_zero(const LinkTable& table, int user, int slot, int beam) {
  if (beam < 0) return 0.0;
  for (const auto& e : table.per_user[user])
    if (e.sat_index == slot && e.beam == beam) return e.sinr_linear;
  return 0.0;
}

// Scale from SINR to inverse TOA variance: 1/sigma^2 = kInfo * beta.
double info_scale(const SignalSpec& spec) {
  double ts = spec.symbol_duration_s;
  return 8.0 * kPi * kPi * gamma_term(spec) / (ts * ts);
}

// Core of evaluate_cluster; `forced` pins the association instead of re-deriving it.
ClusterEval evaluate_core(const Scenario& sc, const Cluster& cl,
                          const std::vector<std::vector<char>>& active,
                          const std::vector<Eigen::VectorXd>& power_w, const AlgoConfig& cfg,
                          const AssociationMap* forced) {
  validate_cluster_shapes(cl, active, power_w);
  const int num_users = static_cast<int>(cl.user_ids.size());
  const int num_slots = static_cast<int>(cl.sat_ids.size());

  auto eff = effective_powers(active, power_w);
  auto table = build_link_table(cluster_beams(sc, cl, eff), cluster_users(sc, cl), sc.link,
                                cfg.mode, cfg.sf_seed);

  ClusterEval ev;
  if (forced) {
    if (forced->beam.size() != static_cast<size_t>(num_users))
      throw std::invalid_argument("forced association does not match the cluster users");
    ev.assoc = *forced;
  } else {
    ev.assoc = associate_users(table, num_users, num_slots);
  }
  ev.ref_slot.assign(num_users, -1);
  ev.crlb_m.assign(num_users, kNan);

  const double kinfo = info_scale(cfg.signal);
  for (int j = 0; j < num_users; ++j) {
    if (ev.assoc.beam[j].size() != static_cast<size_t>(num_slots))
      throw std::invalid_argument("association row does not match the cluster slots");
    const auto& pos = cl.pos_slots[j];
    bool usable = !pos.empty();
    std::vector<double> beta(pos.size(), 0.0);
    for (size_t k = 0; k < pos.size() && usable; ++k) {
      beta[k] = sinr_or_zero(table, j, pos[k], ev.assoc.beam[j][pos[k]]);
      if (!(beta[k] > 0.0)) usable = false;  // a needed satellite without a usable beam
    }
    if (!usable) continue;

    int ref_pos = 0;
    for (size_t k = 1; k < pos.size(); ++k)
      if (beta[k] > beta[ref_pos]) ref_pos = static_cast<int>(k);

    ToaStats toa;
    std::vector<SatelliteState> ps;
    for (size_t k = 0; k < pos.size(); ++k) {
      toa.sigma_sq_s2.push_back(1.0 / (kinfo * beta[k]));
      ps.push_back(sc.sats[cl.sat_ids[pos[k]]]);
    }
    toa.ref_index = ref_pos;
    try {
      auto A = build_A(sc.users[cl.user_ids[j]].pos, ps, ref_pos);
      ev.crlb_m[j] = tdoa_crlb_m(A, build_R(toa));
      ev.ref_slot[j] = pos[ref_pos];
    } catch (const std::exception&) {
      ev.crlb_m[j] = kNan;
      ev.ref_slot[j] = -1;
    }
  }
  return ev;
}

double mean_finite(const std::vector<double>& v, int* count_out = nullptr) {
  double sum = 0.0;
  int n = 0;
  for (double x : v)
    if (std::isfinite(x)) {
      sum += x;
      ++n;
    }
  if (count_out) *count_out = n;
  return n > 0 ? sum / n : kNan;
}

// Beam activation of every slot from the Voronoi occupancy of the users that
// position with it, under the per-satellite activation budget.
std::vector<std::vector<char>> occupancy_activation(const Scenario& sc, const Cluster& cl,
                                                    int budget) {
  std::vector<std::vector<char>> active(cl.sat_ids.size());
  for (size_t s = 0; s < cl.sat_ids.size(); ++s) {
    std::vector<UvCoordinate> pts;
    for (size_t j = 0; j < cl.user_ids.size(); ++j)
      if (std::find(cl.pos_slots[j].begin(), cl.pos_slots[j].end(), static_cast<int>(s)) !=
          cl.pos_slots[j].end())
        pts.push_back(
            direction_to_uv(sc.sats[cl.sat_ids[s]], sc.users[cl.user_ids[j]].pos.ecef_km));
    auto assignment = voronoi_assign(cl.layouts[s].centers, pts);
    active[s] = bh_design(cl.layouts[s].centers, pts, assignment, budget).active;
  }
  return active;
}

// Equal-power rule: every active beam of a slot at min(cap, budget / active count).
std::vector<Eigen::VectorXd> equal_power(const Cluster& cl,
                                         const std::vector<std::vector<char>>& active,
                                         const AlgoConfig& cfg) {
  std::vector<Eigen::VectorXd> power(cl.sat_ids.size());
  for (size_t s = 0; s < cl.sat_ids.size(); ++s) {
    int n = static_cast<int>(cl.layouts[s].centers.size());
    power[s] = Eigen::VectorXd::Zero(n);
    int n_act = 0;
    for (char a : active[s]) n_act += a ? 1 : 0;
    if (n_act == 0) continue;
    double p = std::min(cfg.p_tot_beam_w, cfg.p_tot_sat_w / n_act);
    for (int b = 0; b < n; ++b)
      if (active[s][b]) power[s][b] = p;
  }
  return power;
}

Solution assemble_solution(ClusterBuild&& build, std::vector<ClusterSolution>&& per_cluster,
                           size_t total_users) {
  Solution sol;
  sol.partition = std::move(build);
  sol.per_cluster = std::move(per_cluster);
  double sum = 0.0;
  int covered = 0, failed = 0;
  for (const auto& cs : sol.per_cluster)
    for (double x : cs.crlb_m) {
      if (std::isfinite(x)) {
        sum += x;
        ++covered;
      } else {
        ++failed;
      }
    }
  sol.covered_users = covered;
  sol.excluded_users = static_cast<int>(sol.partition.uncovered_users.size()) + failed;
  sol.avg_crlb_m = covered > 0 ? sum / covered : kNan;
  (void)total_users;
  return sol;
}

}  // namespace

// --- selection, association, activation --------------------------------------

std::vector<int> select_positioning_sats(const GroundPosition& ue,
                                         const std::vector<SatelliteState>& sats, int n_pos) {
  if (n_pos < 1) throw std::invalid_argument("n_pos must be at least 1");
  std::vector<std::pair<double, int>> vis;  // (elevation, index)
  for (size_t i = 0; i < sats.size(); ++i) {
    double e = elevation_angle_deg(sats[i], ue);
    if (e > 0.0) vis.push_back({e, static_cast<int>(i)});
  }
  if (static_cast<int>(vis.size()) < n_pos)
    throw std::runtime_error("only " + std::to_string(vis.size()) + " of " +
                             std::to_string(sats.size()) +
                             " satellites are visible; positioning needs " +
                             std::to_string(n_pos));
  std::sort(vis.begin(), vis.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<int> out(n_pos);
  for (int k = 0; k < n_pos; ++k) out[k] = vis[k].second;
  return out;
}

AssociationMap associate_users(const LinkTable& table, int num_users, int num_sats) {
  if (num_users < 0 || num_sats < 0) throw std::invalid_argument("negative table dimensions");
  if (table.per_user.size() < static_cast<size_t>(num_users))
    throw std::invalid_argument("link table holds fewer users than requested");
  AssociationMap assoc;
  assoc.beam.assign(num_users, std::vector<int>(num_sats, -1));
  std::vector<double> best(num_sats);
  for (int j = 0; j < num_users; ++j) {
    std::fill(best.begin(), best.end(), 0.0);
    for (const auto& e : table.per_user[j]) {
      if (e.sat_index < 0 || e.sat_index >= num_sats) continue;
      if (e.sinr_linear > best[e.sat_index]) {  // strict: ties keep the lower beam index
        best[e.sat_index] = e.sinr_linear;
        assoc.beam[j][e.sat_index] = e.beam;
      }
    }
  }
  return assoc;
}

std::vector<int> voronoi_assign(const std::vector<UvCoordinate>& sites,
                                const std::vector<UvCoordinate>& points) {
  if (sites.empty()) throw std::invalid_argument("voronoi assignment needs at least one site");
  std::vector<int> out(points.size(), 0);
  for (size_t p = 0; p < points.size(); ++p) {
    int best = 0;
    double bd = kInf;
    for (size_t s = 0; s < sites.size(); ++s) {
      double du = points[p].u - sites[s].u, dv = points[p].v - sites[s].v;
      double d = du * du + dv * dv;
      if (d < bd) {  // strict: ties keep the lower site index
        bd = d;
        best = static_cast<int>(s);
      }
    }
    out[p] = best;
  }
  return out;
}

BeamActivation bh_design(const std::vector<UvCoordinate>& sites,
                         const std::vector<UvCoordinate>& points,
                         const std::vector<int>& assignment, int budget) {
  if (budget < 1) throw std::invalid_argument("activation budget must be at least 1");
  if (assignment.size() != points.size())
    throw std::invalid_argument("assignment does not match the point count");
  const int num_cells = static_cast<int>(sites.size());
  std::vector<int> count(num_cells, 0);
  for (int a : assignment) {
    if (a < 0 || a >= num_cells) throw std::invalid_argument("assignment references an unknown cell");
    ++count[a];
  }

  BeamActivation act;
  act.active.assign(num_cells, 0);
  act.cell_of_point = assignment;

  std::vector<int> occupied;
  for (int c = 0; c < num_cells; ++c)
    if (count[c] > 0) occupied.push_back(c);
  if (static_cast<int>(occupied.size()) <= budget) {
    for (int c : occupied) act.active[c] = 1;
    return act;
  }

  // Keep the most populated cells, ties to the lower index.
  std::sort(occupied.begin(), occupied.end(), [&](int a, int b) {
    if (count[a] != count[b]) return count[a] > count[b];
    return a < b;
  });
  occupied.resize(budget);
  for (int c : occupied) act.active[c] = 1;

  // Orphaned points move to the nearest active site (ties to the lower index).
  for (size_t p = 0; p < points.size(); ++p) {
    if (act.active[assignment[p]]) continue;
    int best = -1;
    double bd = kInf;
    for (int c = 0; c < num_cells; ++c) {
      if (!act.active[c]) continue;
      double du = points[p].u - sites[c].u, dv = points[p].v - sites[c].v;
      double d = du * du + dv * dv;
      if (d < bd) {
        bd = d;
        best = c;
      }
    }
    act.cell_of_point[p] = best;
  }
  return act;
}

// --- cluster building ---------------------------------------------------------

ClusterBuild build_clusters(const Scenario& sc, int n_pos, bool cooperative) {
  if (n_pos < 1) throw std::invalid_argument("n_pos must be at least 1");
  ClusterBuild build;

  std::map<int, std::vector<int>> groups;  // serving satellite -> user indices
  for (size_t j = 0; j < sc.users.size(); ++j) {
    try {
      auto sel = select_positioning_sats(sc.users[j].pos, sc.sats, 1);
      groups[sel[0]].push_back(static_cast<int>(j));
    } catch (const std::runtime_error&) {
      build.uncovered_users.push_back(static_cast<int>(j));
    }
  }

  const double earth_radius = EarthModel().radius_km;
  for (auto& [serving, members] : groups) {
    GroundPosition nadir = sub_satellite_point(sc.sats[serving]);

    // Cooperators are the satellites closest to the serving one. Aiming a
    // layout at the serving nadir requires a line of sight to that point, so
    // satellites without one cannot cooperate.
    std::vector<std::pair<double, int>> cand;  // (distance km, sat index)
    for (size_t s = 0; s < sc.sats.size(); ++s) {
      if (static_cast<int>(s) == serving) continue;
      if (cooperative && !is_visible(sc.sats[s], nadir)) continue;
      cand.push_back({(sc.sats[s].position_km - sc.sats[serving].position_km).norm(),
                      static_cast<int>(s)});
    }
    if (static_cast<int>(cand.size()) < n_pos - 1) {
      for (int j : members) build.uncovered_users.push_back(j);
      continue;
    }
    std::sort(cand.begin(), cand.end());  // ascending distance, ties by index

    Cluster cl;
    cl.serving_sat = serving;
    cl.sat_ids.push_back(serving);
    for (int k = 0; k + 1 < n_pos; ++k) cl.sat_ids.push_back(cand[static_cast<size_t>(k)].second);

    for (size_t s = 0; s < cl.sat_ids.size(); ++s) {
      if (!cooperative || cl.sat_ids[s] == serving) {
        cl.layouts.push_back(sc.layout);
        continue;
      }
      const SatelliteState& st = sc.sats[cl.sat_ids[s]];
      UvCoordinate off = direction_to_uv(st, nadir.ecef_km);
      double sin_rim = earth_radius / st.position_km.norm();
      BeamLayout tl;
      tl.beam_radius_uv = sc.layout.beam_radius_uv;
      for (size_t b = 0; b < sc.layout.centers.size(); ++b) {
        UvCoordinate c{sc.layout.centers[b].u + off.u, sc.layout.centers[b].v + off.v};
        if (std::hypot(c.u, c.v) > sin_rim) continue;  // boresight leaves the footprint
        tl.centers.push_back(c);
        if (b < sc.layout.axial.size()) tl.axial.push_back(sc.layout.axial[b]);
        if (b < sc.layout.colors.size()) tl.colors.push_back(sc.layout.colors[b]);
      }
      cl.layouts.push_back(std::move(tl));
    }

    // Every member measures the same slots, serving first; a user below the
    // horizon of any cluster satellite cannot take that measurement set.
    for (int j : members) {
      bool sees_all = true;
      const GroundPosition& upos = sc.users[static_cast<size_t>(j)].pos;
      for (int s : cl.sat_ids) {
        if (elevation_angle_deg(sc.sats[static_cast<size_t>(s)], upos) <= 0.0) {
          sees_all = false;
          break;
        }
      }
      if (!sees_all) {
        build.uncovered_users.push_back(j);
        continue;
      }
      cl.user_ids.push_back(j);
      std::vector<int> slots(cl.sat_ids.size());
      std::iota(slots.begin(), slots.end(), 0);
      cl.pos_slots.push_back(std::move(slots));
    }
    if (cl.user_ids.empty()) continue;
    build.clusters.push_back(std::move(cl));
  }
  std::sort(build.uncovered_users.begin(), build.uncovered_users.end());
  return build;
}

// --- evaluation ----------------------------------------------------------------

ClusterEval evaluate_cluster(const Scenario& sc, const Cluster& cl,
                             const std::vector<std::vector<char>>& active,
                             const std::vector<Eigen::VectorXd>& power_w,
                             const AlgoConfig& cfg) {
  return evaluate_core(sc, cl, active, power_w, cfg, nullptr);
}

// --- power allocation ------------------------------------------------------------

std::vector<Eigen::VectorXd> allocate_power(const Scenario& sc, const Cluster& cl,
                                            const std::vector<std::vector<char>>& active,
                                            const AssociationMap& assoc,
                                            const std::vector<Eigen::VectorXd>& prev_power_w,
                                            const AlgoConfig& cfg) {
  validate_algo_config(cfg);
  validate_cluster_shapes(cl, active, prev_power_w);
  if (cl.user_ids.empty()) return prev_power_w;
  if (assoc.beam.size() != cl.user_ids.size())
    throw std::invalid_argument("association does not match the cluster users");

  const int num_users = static_cast<int>(cl.user_ids.size());
  auto eff_prev = effective_powers(active, prev_power_w);
  auto table = build_link_table(cluster_beams(sc, cl, eff_prev), cluster_users(sc, cl), sc.link,
                                cfg.mode, cfg.sf_seed);
  const double kinfo = info_scale(cfg.signal);

  // Per-user frozen link data along its positioning slots.
  struct UserCtx {
    bool ok = false;
    std::vector<int> pos;                        // positioning slots
    int ref_pos = 0;                             // index into pos
    std::vector<double> w;                       // 1/sigma^2 at prev, per pos entry
    std::vector<double> kappa;                   // per-watt 1/sigma^2, per pos entry
    std::vector<std::pair<int, int>> beams;      // (slot, beam) per pos entry
    std::vector<Eigen::Vector3d> rows;           // geometry rows, non-reference order
    Eigen::Vector3d frozen_v = Eigen::Vector3d::Zero();
  };
  std::vector<UserCtx> ctx(num_users);

  for (int j = 0; j < num_users; ++j) {
    UserCtx& u = ctx[j];
    u.pos = cl.pos_slots[j];
    if (u.pos.empty()) continue;
    bool usable = true;
    for (int slot : u.pos) {
      int beam = assoc.beam[j][slot];
      double beta = sinr_or_zero(table, j, slot, beam);
      double p = beam >= 0 ? eff_prev[slot][beam] : 0.0;
      if (!(beta > 0.0) || !(p > 0.0)) {
        usable = false;
        break;
      }
      u.w.push_back(kinfo * beta);
      u.kappa.push_back(kinfo * beta / p);
      u.beams.push_back({slot, beam});
    }
    if (!usable) continue;
    u.ref_pos = 0;
    for (size_t k = 1; k < u.pos.size(); ++k)
      if (u.w[k] > u.w[u.ref_pos]) u.ref_pos = static_cast<int>(k);

    std::vector<SatelliteState> ps;
    for (int slot : u.pos) ps.push_back(sc.sats[cl.sat_ids[slot]]);
    Eigen::MatrixXd A;
    try {
      A = build_A(sc.users[cl.user_ids[j]].pos, ps, u.ref_pos);
    } catch (const std::exception&) {
      continue;
    }
    for (int r = 0; r < A.rows(); ++r) u.rows.push_back(A.row(r).transpose());

    // Frozen covariance coupling at the previous powers.
    Eigen::Matrix3d Y = Eigen::Matrix3d::Zero();
    Eigen::Vector3d uvec = Eigen::Vector3d::Zero();
    double omega = 0.0;
    int r = 0;
    for (size_t k = 0; k < u.pos.size(); ++k) {
      omega += u.w[k];
      if (static_cast<int>(k) == u.ref_pos) continue;
      Y += u.w[k] * u.rows[r] * u.rows[r].transpose();
      uvec += u.w[k] * u.rows[r];
      ++r;
    }
    Eigen::LLT<Eigen::Matrix3d> llt(Y);
    if (llt.info() != Eigen::Success) continue;
    Eigen::Vector3d z = uvec / std::sqrt(omega);
    Eigen::Vector3d yz = llt.solve(z);
    double alpha = std::max(1.0 - z.dot(yz), 1e-12);
    u.frozen_v = yz / std::sqrt(alpha);
    u.ok = true;
  }

  // Weights for the reference-beam pass at given powers; false when degenerate.
  auto ref_user_inputs = [&](const UserCtx& u, const std::vector<Eigen::VectorXd>& at,
                             double& g_out, double& d_out) {
    Eigen::Matrix3d Y = Eigen::Matrix3d::Zero();
    Eigen::Vector3d uvec = Eigen::Vector3d::Zero();
    double w_sum = 0.0;
    int r = 0;
    for (size_t k = 0; k < u.pos.size(); ++k) {
      if (static_cast<int>(k) == u.ref_pos) continue;
      double w = u.kappa[k] * at[u.beams[k].first][u.beams[k].second];
      Y += w * u.rows[r] * u.rows[r].transpose();
      uvec += w * u.rows[r];
      w_sum += w;
      ++r;
    }
    Eigen::LLT<Eigen::Matrix3d> llt(Y);
    if (llt.info() != Eigen::Success) return false;
    Eigen::Vector3d yu = llt.solve(uvec);
    g_out = yu.squaredNorm();
    d_out = std::max(w_sum - uvec.dot(yu), 0.0);
    return true;
  };

  auto cand = eff_prev;

  // Joint pass over the beams serving users as non-reference anchors.
  std::map<std::pair<int, int>, int> var_of;
  for (const auto& u : ctx) {
    if (!u.ok) continue;
    for (size_t k = 0; k < u.pos.size(); ++k)
      if (static_cast<int>(k) != u.ref_pos) var_of.emplace(u.beams[k], -1);
  }
  int next = 0;
  for (auto& [key, id] : var_of) id = next++;

  if (next > 0) {
    PowerSdpInputs in;
    in.num_power_vars = next;
    in.p_tot_beam_w = cfg.p_tot_beam_w;
    in.start_powers_w = Eigen::VectorXd::Zero(next);
    for (const auto& [key, id] : var_of) in.start_powers_w[id] = cand[key.first][key.second];
    for (const auto& u : ctx) {
      if (!u.ok) continue;
      PowerSdpUser su;
      su.rows = u.rows;
      su.frozen_v = u.frozen_v;
      for (size_t k = 0; k < u.pos.size(); ++k) {
        if (static_cast<int>(k) == u.ref_pos) continue;
        su.power_var.push_back(var_of.at(u.beams[k]));
        su.kappa.push_back(u.kappa[k]);
      }
      in.users.push_back(std::move(su));
    }
    std::map<int, std::vector<int>> slot_vars;
    for (const auto& [key, id] : var_of) slot_vars[key.first].push_back(id);
    for (const auto& [slot, vars] : slot_vars) {
      double frozen = 0.0;
      for (int b = 0; b < cand[slot].size(); ++b)
        if (active[slot][b] && !var_of.count({slot, b})) frozen += cand[slot][b];
      double budget = std::max(cfg.p_tot_sat_w - frozen, 1e-6 * vars.size());
      in.sat_budgets.push_back({vars, budget});
    }
    try {
      auto layout = assemble_power_sdp(in);
      auto s = solve_sdp(layout.problem, 1e-7, 200);
      if (s.status != SdpStatus::kInfeasible) {
        auto powers = layout.extract_powers_w(s.x);
        for (const auto& [key, id] : var_of) cand[key.first][key.second] = powers[id];
      }
    } catch (const std::exception&) {
      // keep the previous powers for this pass
    }
  }

  // Per-satellite pass over the remaining reference-only beams.
  std::map<int, std::set<std::pair<int, int>>> ref_groups;  // slot -> its reference beams
  for (const auto& u : ctx) {
    if (!u.ok) continue;
    auto rb = u.beams[u.ref_pos];
    if (!var_of.count(rb)) ref_groups[rb.first].insert(rb);
  }
  for (const auto& [slot, beams] : ref_groups) {
    std::map<std::pair<int, int>, int> ref_var;
    int rn = 0;
    for (const auto& b : beams) ref_var[b] = rn++;
    RefPowerSdpInputs in;
    in.num_power_vars = rn;
    in.p_tot_beam_w = cfg.p_tot_beam_w;
    double frozen = 0.0;
    for (int b = 0; b < cand[slot].size(); ++b)
      if (active[slot][b] && !ref_var.count({slot, b})) frozen += cand[slot][b];
    in.sat_budget_w = std::max(cfg.p_tot_sat_w - frozen, 1e-6 * rn);
    in.start_powers_w = Eigen::VectorXd::Zero(rn);
    for (const auto& [key, id] : ref_var) in.start_powers_w[id] = cand[key.first][key.second];
    for (const auto& u : ctx) {
      if (!u.ok) continue;
      auto rb = u.beams[u.ref_pos];
      auto it = ref_var.find(rb);
      if (it == ref_var.end()) continue;
      double g = 0.0, d = 0.0;
      if (!ref_user_inputs(u, cand, g, d)) continue;
      RefPowerUser ru;
      ru.g_km2 = g;
      ru.d_per_s2 = d;
      ru.kappa = u.kappa[u.ref_pos];
      ru.power_var = it->second;
      in.users.push_back(ru);
    }
    if (in.users.empty()) continue;
    try {
      auto layout = assemble_reference_power_sdp(in);
      auto s = solve_sdp(layout.problem, 1e-7, 200);
      if (s.status != SdpStatus::kInfeasible) {
        auto powers = layout.extract_powers_w(s.x);
        for (const auto& [key, id] : ref_var) cand[key.first][key.second] = powers[id];
      }
    } catch (const std::exception&) {
      // keep the incoming powers for this satellite
    }
  }

  // Feasibility cleanup: clamp to the box and rescale any budget overshoot.
  for (size_t s = 0; s < cand.size(); ++s) {
    double total = 0.0;
    for (int b = 0; b < cand[s].size(); ++b) {
      if (!active[s][b]) {
        cand[s][b] = 0.0;
        continue;
      }
      cand[s][b] = std::min(std::max(cand[s][b], 0.0), cfg.p_tot_beam_w);
      total += cand[s][b];
    }
    if (total > cfg.p_tot_sat_w) cand[s] *= cfg.p_tot_sat_w / total;
  }

  // Keep the candidate only if the true (unfrozen) model confirms it.
  auto ev_prev = evaluate_core(sc, cl, active, eff_prev, cfg, &assoc);
  auto ev_cand = evaluate_core(sc, cl, active, cand, cfg, &assoc);
  double sum_prev = 0.0, sum_cand = 0.0;
  int common = 0;
  for (int j = 0; j < num_users; ++j)
    if (std::isfinite(ev_prev.crlb_m[j]) && std::isfinite(ev_cand.crlb_m[j])) {
      sum_prev += ev_prev.crlb_m[j];
      sum_cand += ev_cand.crlb_m[j];
      ++common;
    }
  if (common == 0) return prev_power_w;
  if (sum_cand > sum_prev + 1e-9 * std::max(1.0, sum_prev)) return prev_power_w;
  return cand;
}

// --- end-to-end schemes -----------------------------------------------------------

Solution run_tmcb(const Scenario& sc, const AlgoConfig& cfg) {
  validate_algo_config(cfg);
  auto build = build_clusters(sc, cfg.n_pos, false);
  std::vector<ClusterSolution> per_cluster;
  const int num_beams = static_cast<int>(sc.layout.centers.size());
  const double p = std::min(cfg.p_tot_sat_w / std::max(num_beams, 1), cfg.p_tot_beam_w);
  for (size_t c = 0; c < build.clusters.size(); ++c) {
    const Cluster& cl = build.clusters[c];
    ClusterSolution cs;
    cs.cluster_index = static_cast<int>(c);
    for (const auto& l : cl.layouts) {
      cs.active.push_back(std::vector<char>(l.centers.size(), 1));
      cs.power_w.push_back(
          Eigen::VectorXd::Constant(static_cast<int>(l.centers.size()), p));
    }
    auto ev = evaluate_cluster(sc, cl, cs.active, cs.power_w, cfg);
    cs.assoc = std::move(ev.assoc);
    cs.ref_slot = std::move(ev.ref_slot);
    cs.crlb_m = std::move(ev.crlb_m);
    per_cluster.push_back(std::move(cs));
  }
  return assemble_solution(std::move(build), std::move(per_cluster), sc.users.size());
}

Solution run_uvbhs_epa(const Scenario& sc, const AlgoConfig& cfg) {
  validate_algo_config(cfg);
  auto build = build_clusters(sc, cfg.n_pos, true);
  std::vector<ClusterSolution> per_cluster;
  for (size_t c = 0; c < build.clusters.size(); ++c) {
    const Cluster& cl = build.clusters[c];
    ClusterSolution cs;
    cs.cluster_index = static_cast<int>(c);
    cs.active = occupancy_activation(sc, cl, cfg.beam_budget);
    cs.power_w = equal_power(cl, cs.active, cfg);
    auto ev = evaluate_cluster(sc, cl, cs.active, cs.power_w, cfg);
    cs.assoc = std::move(ev.assoc);
    cs.ref_slot = std::move(ev.ref_slot);
    cs.crlb_m = std::move(ev.crlb_m);
    per_cluster.push_back(std::move(cs));
  }
  return assemble_solution(std::move(build), std::move(per_cluster), sc.users.size());
}

Solution run_fbhca(const Scenario& sc, const AlgoConfig& cfg) {
  validate_algo_config(cfg);
  auto build = build_clusters(sc, cfg.n_pos, true);
  std::vector<ClusterSolution> per_cluster;
  for (size_t c = 0; c < build.clusters.size(); ++c) {
    const Cluster& cl = build.clusters[c];
    auto active = occupancy_activation(sc, cl, cfg.beam_budget);

    // Candidate 0: the equal-power allocation.
    auto best_power = equal_power(cl, active, cfg);
    auto best_ev = evaluate_cluster(sc, cl, active, best_power, cfg);
    double best_mean = mean_finite(best_ev.crlb_m);
    int best_iter = 0;

    // Iterated allocation from the uniform per-beam start.
    std::vector<Eigen::VectorXd> power(cl.sat_ids.size());
    for (size_t s = 0; s < cl.sat_ids.size(); ++s) {
      power[s] = Eigen::VectorXd::Zero(static_cast<int>(cl.layouts[s].centers.size()));
      for (int b = 0; b < power[s].size(); ++b)
        if (active[s][b]) power[s][b] = cfg.p_tot_beam_w / cfg.beam_budget;
    }
    auto ev = evaluate_cluster(sc, cl, active, power, cfg);
    for (int m = 1; m <= cfg.iterations; ++m) {
      power = allocate_power(sc, cl, active, ev.assoc, power, cfg);
      ev = evaluate_cluster(sc, cl, active, power, cfg);
      double mean = mean_finite(ev.crlb_m);
      if (std::isfinite(mean) && (!std::isfinite(best_mean) || mean < best_mean)) {
        best_mean = mean;
        best_power = power;
        best_ev = ev;
        best_iter = m;
      }
    }

    ClusterSolution cs;
    cs.cluster_index = static_cast<int>(c);
    cs.active = std::move(active);
    cs.power_w = std::move(best_power);
    cs.assoc = std::move(best_ev.assoc);
    cs.ref_slot = std::move(best_ev.ref_slot);
    cs.crlb_m = std::move(best_ev.crlb_m);
    cs.best_iterate = best_iter;
    per_cluster.push_back(std::move(cs));
  }
  return assemble_solution(std::move(build), std::move(per_cluster), sc.users.size());
}

// --- audit -------------------------------------------------------------------------

std::vector<std::string> audit_solution(const Scenario& sc, const AlgoConfig& cfg,
                                        const Solution& sol) {
  std::vector<std::string> bad;
  auto note = [&](const std::string& s) { bad.push_back(s); };

  for (const auto& cs : sol.per_cluster) {
    if (cs.cluster_index < 0 ||
        cs.cluster_index >= static_cast<int>(sol.partition.clusters.size())) {
      note("cluster solution references an unknown cluster");
      continue;
    }
    const Cluster& cl = sol.partition.clusters[cs.cluster_index];
    const std::string tag = "cluster " + std::to_string(cs.cluster_index) + ": ";
    try {
      validate_cluster_shapes(cl, cs.active, cs.power_w);
    } catch (const std::exception& e) {
      note(tag + e.what());
      continue;
    }
    if (cs.assoc.beam.size() != cl.user_ids.size() || cs.ref_slot.size() != cl.user_ids.size() ||
        cs.crlb_m.size() != cl.user_ids.size()) {
      note(tag + "per-user arrays do not match the cluster users");
      continue;
    }

    for (size_t s = 0; s < cl.sat_ids.size(); ++s) {
      int n_act = 0;
      double total = 0.0;
      for (size_t b = 0; b < cl.layouts[s].centers.size(); ++b) {
        n_act += cs.active[s][b] ? 1 : 0;
        double p = cs.power_w[s][static_cast<int>(b)];
        if (p < 0.0) note(tag + "negative power on slot " + std::to_string(s));
        if (p > cfg.p_tot_beam_w * (1.0 + 1e-6))
          note(tag + "slot " + std::to_string(s) + " beam " + std::to_string(b) +
               " exceeds the per-beam cap");
        if (!cs.active[s][b] && p != 0.0)
          note(tag + "power on an inactive beam of slot " + std::to_string(s));
        total += std::max(p, 0.0);
      }
      if (n_act > cfg.beam_budget)
        note(tag + "slot " + std::to_string(s) + " exceeds the activation budget");
      if (total > cfg.p_tot_sat_w * (1.0 + 1e-6))
        note(tag + "slot " + std::to_string(s) + " exceeds the satellite power budget");
    }

    // Association targets and a full re-evaluation of the stored configuration.
    for (size_t j = 0; j < cl.user_ids.size(); ++j)
      for (size_t s = 0; s < cl.sat_ids.size(); ++s) {
        int b = cs.assoc.beam[j][s];
        if (b < 0) continue;
        if (b >= static_cast<int>(cl.layouts[s].centers.size()) || !cs.active[s][b] ||
            !(cs.power_w[s][b] > 0.0))
          note(tag + "association targets an inactive or unpowered beam");
      }
    ClusterEval ev;
    try {
      ev = evaluate_cluster(sc, cl, cs.active, cs.power_w, cfg);
    } catch (const std::exception& e) {
      note(tag + "re-evaluation failed: " + e.what());
      continue;
    }
    for (size_t j = 0; j < cl.user_ids.size(); ++j) {
      if (ev.assoc.beam[j] != cs.assoc.beam[j])
        note(tag + "user " + std::to_string(cl.user_ids[j]) +
             " association is not max-SINR under the stored powers");
      bool sf = std::isfinite(cs.crlb_m[j]), ef = std::isfinite(ev.crlb_m[j]);
      if (sf != ef ||
          (sf && std::abs(ev.crlb_m[j] - cs.crlb_m[j]) > 1e-9 * std::max(1.0, cs.crlb_m[j])))
        note(tag + "user " + std::to_string(cl.user_ids[j]) +
             " stored accuracy deviates from re-evaluation");
      if (sf && ef && ev.ref_slot[j] != cs.ref_slot[j])
        note(tag + "user " + std::to_string(cl.user_ids[j]) +
             " stored reference deviates from re-evaluation");
    }
  }

  // Coverage accounting across the partition.
  int covered = 0, failed = 0;
  for (const auto& cs : sol.per_cluster)
    for (double x : cs.crlb_m) {
      if (std::isfinite(x))
        ++covered;
      else
        ++failed;
    }
  int excluded = static_cast<int>(sol.partition.uncovered_users.size()) + failed;
  if (covered != sol.covered_users || excluded != sol.excluded_users)
    note("coverage accounting does not match the per-user results");
  if (covered > 0) {
    double sum = 0.0;
    for (const auto& cs : sol.per_cluster)
      for (double x : cs.crlb_m)
        if (std::isfinite(x)) sum += x;
    if (std::abs(sum / covered - sol.avg_crlb_m) > 1e-9 * std::max(1.0, sol.avg_crlb_m))
      note("stored average accuracy deviates from the per-user results");
  }
  return bad;
}

}  // namespace leopos
