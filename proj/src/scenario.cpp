// SPDX-License-Identifier: Apache-2.0
// Config parsing/validation, user deployment, scenario assembly, and CSV output.
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "leopos/runner.hpp"

namespace leopos {
namespace {

using nlohmann::json;

[[noreturn]] void fail_field(const std::string& field, const std::string& why) {
  throw std::invalid_argument("config field " + field + " " + why);
}

void require_field(bool ok, const std::string& field, const std::string& why) {
  if (!ok) fail_field(field, why);
}

// Typed accessors over one JSON config section. Every key an accessor touches
// is marked consumed; finish() rejects anything left over so typos surface as
// errors instead of silently keeping defaults.
class Section {
 public:
  Section(const json& j, std::string prefix) : obj_(&j), prefix_(std::move(prefix)) {
    if (!j.is_object())
      throw std::invalid_argument("config section " + prefix_ + " must be an object");
  }

  std::string path(const std::string& key) const {
    return prefix_.empty() ? key : prefix_ + "." + key;
  }

  const json* find(const char* key) {
    seen_.insert(key);
    auto it = obj_->find(key);
    return it == obj_->end() ? nullptr : &*it;
  }

  void number(const char* key, double& into) {
    if (const json* v = find(key)) {
      if (!v->is_number()) fail_field(path(key), "must be a number");
      into = v->get<double>();
    }
  }

  void integer(const char* key, int& into) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) fail_field(path(key), "must be an integer");
      into = v->get<int>();
    }
  }

  void unsigned64(const char* key, std::uint64_t& into) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer() || (v->is_number_integer() && !v->is_number_unsigned() &&
                                      v->get<long long>() < 0))
        fail_field(path(key), "must be a non-negative integer");
      into = v->get<std::uint64_t>();
    }
  }

  void boolean(const char* key, bool& into) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) fail_field(path(key), "must be true or false");
      into = v->get<bool>();
    }
  }

  void text(const char* key, std::string& into) {
    if (const json* v = find(key)) {
      if (!v->is_string()) fail_field(path(key), "must be a string");
      into = v->get<std::string>();
    }
  }

  void finish() {
    for (auto it = obj_->begin(); it != obj_->end(); ++it)
      if (!seen_.count(it.key()))
        throw std::invalid_argument("unknown config field " + path(it.key()));
  }

 private:
  const json* obj_;
  std::string prefix_;
  std::set<std::string> seen_;
};

std::vector<double> number_array(const json& v, const std::string& field) {
  if (!v.is_array()) fail_field(field, "must be an array of numbers");
  std::vector<double> out;
  for (const json& e : v) {
    if (!e.is_number()) fail_field(field, "must be an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

void parse_constellation(const json& j, ScenarioConfig& cfg) {
  Section s(j, "constellation");
  s.integer("num_planes", cfg.constellation.num_planes);
  s.integer("sats_per_plane", cfg.constellation.sats_per_plane);
  s.number("inclination_deg", cfg.constellation.inclination_deg);
  s.number("altitude_km", cfg.constellation.altitude_km);
  s.integer("phasing_factor", cfg.constellation.phasing_factor);
  s.number("raan_spread_deg", cfg.constellation.raan_spread_deg);
  s.finish();
  require_field(cfg.constellation.num_planes >= 1, "constellation.num_planes", "must be >= 1");
  require_field(cfg.constellation.sats_per_plane >= 1, "constellation.sats_per_plane",
                "must be >= 1");
  require_field(cfg.constellation.altitude_km > 0, "constellation.altitude_km",
                "must be positive");
  require_field(cfg.constellation.inclination_deg >= 0 && cfg.constellation.inclination_deg <= 180,
                "constellation.inclination_deg", "must be within [0, 180]");
  require_field(cfg.constellation.raan_spread_deg > 0 && cfg.constellation.raan_spread_deg <= 360,
                "constellation.raan_spread_deg", "must be within (0, 360]");
}

void parse_link(const json& j, ScenarioConfig& cfg) {
  Section s(j, "link");
  LinkParams& lp = cfg.link;
  s.number("f0_hz", lp.f0_hz);
  s.number("bandwidth_hz", lp.bandwidth_hz);
  s.integer("reuse_factor", lp.reuse_factor);
  s.number("aperture_radius_m", lp.aperture_radius_m);
  s.number("tx_gain_dbi", lp.tx_gain_dbi);
  s.number("rx_gain_dbi", lp.rx_gain_dbi);
  s.number("noise_figure_db", lp.noise_figure_db);
  s.number("antenna_temp_k", lp.antenna_temp_k);
  s.number("atmospheric_loss_db", lp.atmospheric_loss_db);
  s.number("scintillation_loss_db", lp.scintillation_loss_db);
  s.number("noise_bandwidth_hz", lp.noise_bandwidth_hz);
  if (const json* v = s.find("sf_sigma_buckets")) {
    if (!v->is_array()) fail_field("link.sf_sigma_buckets", "must be an array of [elev, sigma]");
    lp.sf_sigma_buckets.clear();
    for (const json& e : *v) {
      const auto pair = number_array(e, "link.sf_sigma_buckets");
      if (pair.size() != 2) fail_field("link.sf_sigma_buckets", "entries must be [elev, sigma]");
      require_field(pair[1] >= 0, "link.sf_sigma_buckets", "sigma must be non-negative");
      if (!lp.sf_sigma_buckets.empty() && pair[0] <= lp.sf_sigma_buckets.back().first)
        fail_field("link.sf_sigma_buckets", "elevations must be strictly ascending");
      lp.sf_sigma_buckets.emplace_back(pair[0], pair[1]);
    }
  }
  s.finish();
  require_field(lp.f0_hz > 0, "link.f0_hz", "must be positive");
  require_field(lp.bandwidth_hz > 0, "link.bandwidth_hz", "must be positive");
  require_field(lp.reuse_factor >= 1, "link.reuse_factor", "must be >= 1");
  require_field(lp.aperture_radius_m > 0, "link.aperture_radius_m", "must be positive");
  require_field(lp.antenna_temp_k > 0, "link.antenna_temp_k", "must be positive");
  require_field(lp.noise_bandwidth_hz > 0, "link.noise_bandwidth_hz", "must be positive");
}

void parse_signal(const json& j, ScenarioConfig& cfg) {
  Section s(j, "signal");
  SignalSpec& sp = cfg.algo.signal;
  s.integer("num_symbols", sp.num_symbols);
  s.integer("num_subcarriers", sp.num_subcarriers);
  double spacing_hz = 1.0 / sp.symbol_duration_s;
  s.number("subcarrier_spacing_hz", spacing_hz);
  s.number("symbol_energy", sp.symbol_energy);
  s.finish();
  require_field(sp.num_symbols >= 1, "signal.num_symbols", "must be >= 1");
  require_field(sp.num_subcarriers >= 2 && sp.num_subcarriers % 2 == 0,
                "signal.num_subcarriers", "must be an even count >= 2");
  require_field(spacing_hz > 0, "signal.subcarrier_spacing_hz", "must be positive");
  require_field(sp.symbol_energy > 0, "signal.symbol_energy", "must be positive");
  sp.symbol_duration_s = 1.0 / spacing_hz;
}

void parse_beams(const json& j, ScenarioConfig& cfg) {
  Section s(j, "beams");
  s.integer("count", cfg.beams.count);
  s.number("radius_uv", cfg.beams.radius_uv);
  s.finish();
  require_field(centered_hex_rings(cfg.beams.count).has_value(), "beams.count",
                "must be a centered hexagonal count (1, 7, 19, 37, 61, ...)");
  require_field(cfg.beams.radius_uv > 0, "beams.radius_uv", "must be positive");
}

void parse_algo(const json& j, ScenarioConfig& cfg) {
  Section s(j, "algo");
  AlgoConfig& ac = cfg.algo;
  s.integer("iterations", ac.iterations);
  s.integer("n_pos", ac.n_pos);
  s.number("p_tot_beam_w", ac.p_tot_beam_w);
  s.number("p_tot_sat_w", ac.p_tot_sat_w);
  s.integer("beam_budget", ac.beam_budget);
  std::string mode = ac.mode == InterferenceMode::kLiteral ? "literal" : "co_channel";
  s.text("interference", mode);
  s.finish();
  require_field(ac.iterations >= 1, "algo.iterations", "must be >= 1");
  require_field(ac.n_pos >= 4, "algo.n_pos", "must be >= 4");
  require_field(ac.p_tot_beam_w > 0, "algo.p_tot_beam_w", "must be positive");
  require_field(ac.p_tot_sat_w > 0, "algo.p_tot_sat_w", "must be positive");
  require_field(ac.beam_budget >= 1, "algo.beam_budget", "must be >= 1");
  if (mode == "co_channel")
    ac.mode = InterferenceMode::kCoChannel;
  else if (mode == "literal")
    ac.mode = InterferenceMode::kLiteral;
  else
    fail_field("algo.interference", "must be \"co_channel\" or \"literal\"");
}

void parse_region(const json& j, ScenarioConfig& cfg) {
  Section s(j, "region");
  if (const json* v = s.find("lon_deg")) {
    const auto arr = number_array(*v, "region.lon_deg");
    if (arr.size() != 2 || arr[0] > arr[1] || arr[0] < -180 || arr[1] > 180)
      fail_field("region.lon_deg", "must be [lo, hi] within [-180, 180] with lo <= hi");
    cfg.region.lon_lo = arr[0];
    cfg.region.lon_hi = arr[1];
  }
  if (const json* v = s.find("lat_deg")) {
    const auto arr = number_array(*v, "region.lat_deg");
    if (arr.size() != 2 || arr[0] > arr[1] || arr[0] < -90 || arr[1] > 90)
      fail_field("region.lat_deg", "must be [lo, hi] within [-90, 90] with lo <= hi");
    cfg.region.lat_lo = arr[0];
    cfg.region.lat_hi = arr[1];
  }
  s.finish();
}

void parse_run(const json& j, ScenarioConfig& cfg) {
  Section s(j, "run");
  RunConfig& r = cfg.run;
  s.integer("users", r.users);
  s.integer("snapshots", r.snapshots);
  if (const json* v = s.find("heights_km")) {
    r.heights_km = number_array(*v, "run.heights_km");
    require_field(!r.heights_km.empty(), "run.heights_km", "must list at least one height");
    for (double h : r.heights_km)
      require_field(h > 0, "run.heights_km", "heights must be positive");
  }
  if (const json* v = s.find("n_pos_set")) {
    if (!v->is_array()) fail_field("run.n_pos_set", "must be an array of integers");
    r.n_pos_set.clear();
    for (const json& e : *v) {
      if (!e.is_number_integer()) fail_field("run.n_pos_set", "must be an array of integers");
      const int np = e.get<int>();
      require_field(np >= 4, "run.n_pos_set", "entries must be >= 4");
      r.n_pos_set.push_back(np);
    }
    require_field(!r.n_pos_set.empty(), "run.n_pos_set", "must list at least one set size");
    std::sort(r.n_pos_set.begin(), r.n_pos_set.end());
    r.n_pos_set.erase(std::unique(r.n_pos_set.begin(), r.n_pos_set.end()), r.n_pos_set.end());
  }
  s.unsigned64("seed", r.seed);
  s.boolean("emit_runtime", r.emit_runtime);
  s.text("out_dir", r.out_dir);
  s.finish();
  require_field(r.users >= 1, "run.users", "must be >= 1");
  require_field(r.snapshots >= 1, "run.snapshots", "must be >= 1");
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

ScenarioConfig default_config() { return ScenarioConfig{}; }

ScenarioConfig parse_config_text(const std::string& text, const std::string& origin) {
  ScenarioConfig cfg = default_config();

  const auto non_space = text.find_first_not_of(" \t\r\n");
  if (non_space == std::string::npos) return cfg;

  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("config " + origin + ": " + e.what());
  }
  if (!root.is_object())
    throw std::invalid_argument("config " + origin + ": top level must be an object");

  Section top(root, "");
  // beams before algo: the activation budget defaults to the beam count
  if (const json* v = top.find("constellation")) parse_constellation(*v, cfg);
  if (const json* v = top.find("link")) parse_link(*v, cfg);
  if (const json* v = top.find("signal")) parse_signal(*v, cfg);
  if (const json* v = top.find("beams")) {
    parse_beams(*v, cfg);
    const bool budget_given =
        root.contains("algo") && root["algo"].is_object() && root["algo"].contains("beam_budget");
    if (!budget_given) cfg.algo.beam_budget = cfg.beams.count;
  }
  if (const json* v = top.find("algo")) parse_algo(*v, cfg);
  if (const json* v = top.find("region")) parse_region(*v, cfg);
  if (const json* v = top.find("run")) parse_run(*v, cfg);
  top.finish();

  // the shadow-fading draw key follows the run seed
  cfg.algo.sf_seed = cfg.run.seed;

  if (cfg.constellation.altitude_km < 800.0) {
    std::ostringstream w;
    w << "constellation.altitude_km = " << cfg.constellation.altitude_km
      << " is below 800 km: expect coverage failures at the default constellation scale";
    cfg.warnings.push_back(w.str());
  }
  if (std::any_of(cfg.run.heights_km.begin(), cfg.run.heights_km.end(),
                  [](double h) { return h < 800.0; }))
    cfg.warnings.push_back(
        "run.heights_km includes heights below 800 km: expect coverage failures at the "
        "default constellation scale");
  return cfg;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) throw std::runtime_error("cannot read config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

std::vector<GroundPosition> deploy_users(const RegionBox& region, int j, std::uint64_t seed) {
  if (j < 0) throw std::invalid_argument("user count must be non-negative");
  if (region.lon_lo > region.lon_hi || region.lat_lo > region.lat_hi)
    throw std::invalid_argument("deployment region must have lo <= hi bounds");
  std::mt19937_64 rng(seed);
  // explicit 53-bit uniforms: identical draws on every platform
  const auto unit = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  std::vector<GroundPosition> users;
  users.reserve(static_cast<size_t>(j));
  for (int i = 0; i < j; ++i) {
    const double lon = region.lon_lo + (region.lon_hi - region.lon_lo) * unit();
    const double lat = region.lat_lo + (region.lat_hi - region.lat_lo) * unit();
    users.push_back(ground_from_geodetic(lat, lon));
  }
  return users;
}

Scenario build_scenario(const ScenarioConfig& cfg, double height_km, int snapshot_index,
                        const std::vector<GroundPosition>& users) {
  ConstellationParams params = cfg.constellation;
  params.altitude_km = height_km;
  Scenario sc;
  sc.sats = propagate(build_constellation(params), snapshot_index, cfg.run.snapshots);
  sc.users.reserve(users.size());
  for (size_t j = 0; j < users.size(); ++j)
    sc.users.push_back(User{static_cast<int>(j), users[j]});
  sc.layout = hex_beam_layout(cfg.beams.count, cfg.beams.radius_uv);
  sc.link = cfg.link;
  return sc;
}

void emit_csv(const ExperimentResult& result, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out.good()) throw std::runtime_error("cannot write " + path);
  out << "sweep_value,algorithm,n_pos,avg_crlb_m,covered_users,runtime_ms\n";
  for (const ResultRow& row : result.rows) {
    out << format_number(row.sweep_value) << ',' << row.algorithm << ',' << row.n_pos << ','
        << format_number(row.avg_crlb_m) << ',' << format_number(row.covered_users) << ',';
    if (result.emit_runtime) out << format_number(row.runtime_ms);
    out << '\n';
  }
  if (!out.good()) throw std::runtime_error("cannot write " + path);
}

void emit_snr_csv(const SnrTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out.good()) throw std::runtime_error("cannot write " + path);
  out << "algorithm,sat_rank,mean_snr_db\n";
  for (size_t a = 0; a < table.algorithms.size(); ++a)
    for (size_t k = 0; k < table.mean_snr_db[a].size(); ++k)
      out << table.algorithms[a] << ',' << k << ',' << format_number(table.mean_snr_db[a][k])
          << '\n';
  if (!out.good()) throw std::runtime_error("cannot write " + path);
}

void write_plot_stub(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out.good()) throw std::runtime_error("cannot write " + path);
  out << R"PY(#!/usr/bin/env python3
"""Plots the sweep CSVs written by the simulator (run out of process).

Usage:
    python3 plot_results.py [height_sweep.csv] [snapshot_sweep.csv]

Each input is optional; the script plots whichever files exist. Positioning
accuracy (avg_crlb_m) is drawn per algorithm against the sweep value. Requires
matplotlib.
"""
import csv
import os
import sys


def load(path):
    series = {}
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            key = (row["algorithm"], row["n_pos"])
            try:
                y = float(row["avg_crlb_m"])
            except ValueError:
                continue
            series.setdefault(key, []).append((float(row["sweep_value"]), y))
    return series


def plot(path, ax):
    for (algo, n_pos), pts in sorted(load(path).items()):
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts],
                marker="o", label=f"{algo} (n_pos={n_pos})")
    ax.set_xlabel("sweep value")
    ax.set_ylabel("avg CRLB (m)")
    ax.set_title(os.path.basename(path))
    ax.grid(True)
    ax.legend()


def main(argv):
    import matplotlib.pyplot as plt

    inputs = argv[1:] or [p for p in ("height_sweep.csv", "snapshot_sweep.csv")
                          if os.path.exists(p)]
    if not inputs:
        print("no sweep CSVs found", file=sys.stderr)
        return 1
    fig, axes = plt.subplots(1, len(inputs), figsize=(7 * len(inputs), 5))
    axes = axes if len(inputs) > 1 else [axes]
    for path, ax in zip(inputs, axes):
        plot(path, ax)
    out = "sweep_plots.png"
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
)PY";
  if (!out.good()) throw std::runtime_error("cannot write " + path);
}

}  // namespace leopos
