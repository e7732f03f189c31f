// SPDX-License-Identifier: Apache-2.0
// Experiment sweeps: orbit-height and snapshot drivers with deterministic
// multi-threaded execution and per-rank SNR accumulation.
#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "leopos/runner.hpp"

namespace leopos {
namespace {

constexpr std::array<const char*, 3> kAlgoNames = {"tmcb", "uvbhs_epa", "fbhca"};
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

Solution run_scheme(int which, const Scenario& sc, const AlgoConfig& ac) {
  switch (which) {
    case 0:
      return run_tmcb(sc, ac);
    case 1:
      return run_uvbhs_epa(sc, ac);
    default:
      return run_fbhca(sc, ac);
  }
}

// Sum of the positioning accuracy over covered users, in deterministic
// (cluster, user) order.
double finite_crlb_sum(const Solution& sol) {
  double sum = 0.0;
  for (const ClusterSolution& cs : sol.per_cluster)
    for (double v : cs.crlb_m)
      if (std::isfinite(v)) sum += v;
  return sum;
}

// Index-sharded worker pool. Each index is processed exactly once and workers
// write only to their own index's slot, so results are independent of the
// thread count; the first exception wins and is rethrown on the caller.
void parallel_for(int n, int threads, const std::function<void(int)>& body) {
  threads = std::max(1, std::min(threads, n));
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::mutex err_mutex;
  std::exception_ptr err;
  auto work = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!err) err = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(threads));
  for (int t = 0; t < threads; ++t) pool.emplace_back(work);
  for (std::thread& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

struct AlgoAccum {
  double crlb_sum = 0.0;
  double covered = 0.0;
  double runtime_ms = 0.0;
};

void check_run_shape(const ScenarioConfig& cfg) {
  if (cfg.run.users < 1) throw std::invalid_argument("config field run.users must be >= 1");
  if (cfg.run.snapshots < 1)
    throw std::invalid_argument("config field run.snapshots must be >= 1");
}

// Interference-free SNR (received power over noise) of each covered user's
// associated beam, accumulated in dB per positioning rank. Averaging in the
// dB domain keeps the table representative of the typical user: a linear mean
// would be dominated by the few users sitting near a neighboring beam center.
void accumulate_snr(const Scenario& sc, const Solution& sol, const AlgoConfig& ac,
                    std::vector<double>& db_sum, std::vector<long>& count) {
  for (const ClusterSolution& cs : sol.per_cluster) {
    const Cluster& cl = sol.partition.clusters[static_cast<size_t>(cs.cluster_index)];
    std::vector<SatelliteBeams> sats(cl.sat_ids.size());
    for (size_t slot = 0; slot < cl.sat_ids.size(); ++slot) {
      sats[slot].state = sc.sats[static_cast<size_t>(cl.sat_ids[slot])];
      sats[slot].layout = cl.layouts[slot];
      const Eigen::VectorXd& p = cs.power_w[slot];
      sats[slot].power_w.assign(p.data(), p.data() + p.size());
    }
    std::vector<User> users;
    users.reserve(cl.user_ids.size());
    for (int gid : cl.user_ids) users.push_back(sc.users[static_cast<size_t>(gid)]);
    const LinkTable table = build_link_table(sats, users, sc.link, ac.mode, ac.sf_seed);

    for (size_t j = 0; j < users.size(); ++j) {
      if (!std::isfinite(cs.crlb_m[j])) continue;
      const std::vector<int>& slots = cl.pos_slots[j];
      for (size_t rank = 0; rank < slots.size() && rank < db_sum.size(); ++rank) {
        const int slot = slots[rank];
        const int beam = cs.assoc.beam[j][static_cast<size_t>(slot)];
        if (beam < 0) continue;
        const LinkEntry& e = link_at(table, static_cast<int>(j), slot, beam);
        db_sum[rank] += e.rx_dbw - 10.0 * std::log10(table.noise_w);
        ++count[rank];
      }
    }
  }
}

}  // namespace

ExperimentResult run_orbit_height_sweep(const ScenarioConfig& cfg, int threads) {
  check_run_shape(cfg);
  if (cfg.run.heights_km.empty())
    throw std::invalid_argument("config field run.heights_km must list at least one height");

  const auto users = deploy_users(cfg.region, cfg.run.users, cfg.run.seed);
  const int num_heights = static_cast<int>(cfg.run.heights_km.size());
  std::vector<std::array<AlgoAccum, 3>> acc(static_cast<size_t>(num_heights));

  parallel_for(num_heights, threads, [&](int h) {
    for (int s = 0; s < cfg.run.snapshots; ++s) {
      const Scenario sc = build_scenario(cfg, cfg.run.heights_km[static_cast<size_t>(h)], s, users);
      for (int a = 0; a < 3; ++a) {
        const auto t0 = std::chrono::steady_clock::now();
        const Solution sol = run_scheme(a, sc, cfg.algo);
        const auto t1 = std::chrono::steady_clock::now();
        AlgoAccum& slot = acc[static_cast<size_t>(h)][static_cast<size_t>(a)];
        slot.crlb_sum += finite_crlb_sum(sol);
        slot.covered += sol.covered_users;
        slot.runtime_ms += std::chrono::duration<double, std::milli>(t1 - t0).count();
      }
    }
  });

  ExperimentResult result;
  result.emit_runtime = cfg.run.emit_runtime;
  for (int h = 0; h < num_heights; ++h) {
    for (int a = 0; a < 3; ++a) {
      const AlgoAccum& slot = acc[static_cast<size_t>(h)][static_cast<size_t>(a)];
      ResultRow row;
      row.sweep_value = cfg.run.heights_km[static_cast<size_t>(h)];
      row.algorithm = kAlgoNames[static_cast<size_t>(a)];
      row.n_pos = cfg.algo.n_pos;
      row.avg_crlb_m = slot.covered > 0 ? slot.crlb_sum / slot.covered : kNan;
      row.covered_users = slot.covered / cfg.run.snapshots;
      row.excluded_users = cfg.run.users - row.covered_users;
      row.runtime_ms = slot.runtime_ms;
      result.rows.push_back(std::move(row));
    }
  }
  return result;
}

SnapshotSweepOutput run_snapshot_sweep(const ScenarioConfig& cfg, int threads) {
  check_run_shape(cfg);
  if (cfg.run.n_pos_set.empty())
    throw std::invalid_argument("config field run.n_pos_set must list at least one set size");

  const auto users = deploy_users(cfg.region, cfg.run.users, cfg.run.seed);
  const int num_snapshots = cfg.run.snapshots;
  const int base_n_pos = cfg.algo.n_pos;

  struct SnapshotPart {
    std::vector<ResultRow> rows;
    std::array<std::vector<double>, 3> snr_sum;
    std::array<std::vector<long>, 3> snr_count;
  };
  std::vector<SnapshotPart> parts(static_cast<size_t>(num_snapshots));

  parallel_for(num_snapshots, threads, [&](int s) {
    SnapshotPart& part = parts[static_cast<size_t>(s)];
    for (auto& v : part.snr_sum) v.assign(static_cast<size_t>(base_n_pos), 0.0);
    for (auto& v : part.snr_count) v.assign(static_cast<size_t>(base_n_pos), 0);
    const Scenario sc = build_scenario(cfg, cfg.constellation.altitude_km, s, users);
    for (int a = 0; a < 3; ++a) {
      for (int np : cfg.run.n_pos_set) {
        AlgoConfig ac = cfg.algo;
        ac.n_pos = np;
        const auto t0 = std::chrono::steady_clock::now();
        const Solution sol = run_scheme(a, sc, ac);
        const auto t1 = std::chrono::steady_clock::now();

        ResultRow row;
        row.sweep_value = s;
        row.algorithm = kAlgoNames[static_cast<size_t>(a)];
        row.n_pos = np;
        const double covered = sol.covered_users;
        row.avg_crlb_m = covered > 0 ? finite_crlb_sum(sol) / covered : kNan;
        row.covered_users = covered;
        row.excluded_users = cfg.run.users - covered;
        row.runtime_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        part.rows.push_back(std::move(row));

        if (np == base_n_pos)
          accumulate_snr(sc, sol, ac, part.snr_sum[static_cast<size_t>(a)],
                         part.snr_count[static_cast<size_t>(a)]);
      }
    }
  });

  SnapshotSweepOutput out;
  out.result.emit_runtime = cfg.run.emit_runtime;
  std::array<std::vector<double>, 3> snr_sum;
  std::array<std::vector<long>, 3> snr_count;
  for (int a = 0; a < 3; ++a) {
    snr_sum[static_cast<size_t>(a)].assign(static_cast<size_t>(base_n_pos), 0.0);
    snr_count[static_cast<size_t>(a)].assign(static_cast<size_t>(base_n_pos), 0);
  }
  for (SnapshotPart& part : parts) {
    for (ResultRow& row : part.rows) out.result.rows.push_back(std::move(row));
    for (size_t a = 0; a < 3; ++a)
      for (int k = 0; k < base_n_pos; ++k) {
        snr_sum[a][static_cast<size_t>(k)] += part.snr_sum[a][static_cast<size_t>(k)];
        snr_count[a][static_cast<size_t>(k)] += part.snr_count[a][static_cast<size_t>(k)];
      }
  }
  for (size_t a = 0; a < 3; ++a) {
    out.snr.algorithms.push_back(kAlgoNames[a]);
    std::vector<double> ranks(static_cast<size_t>(base_n_pos), kNan);
    for (int k = 0; k < base_n_pos; ++k) {
      const size_t ku = static_cast<size_t>(k);
      if (snr_count[a][ku] > 0)
        ranks[ku] = snr_sum[a][ku] / static_cast<double>(snr_count[a][ku]);
    }
    out.snr.mean_snr_db.push_back(std::move(ranks));
  }
  return out;
}

}  // namespace leopos
