#pragma once

#include <cmath>
#include <ctime>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "config.hpp"
#include "dynamics.hpp"
#include "model.hpp"
#include "spectral.hpp"
#include "table.hpp"

namespace omcrow {

inline constexpr const char kToolVersion[] = "0.1.0";
inline constexpr const char kUnitsDecl[] = "frequencies in units of G, lengths in units of L";

// Raised when a dynamic run blows up after producing part of its trace; the
// partially filled table is carried along so the front end can still write it.
struct AbortedRun : NumericalError {
  ResultTable partial;
  AbortedRun(const std::string& msg, ResultTable table)
      : NumericalError(msg), partial(std::move(table)) {}
};

namespace detail {

inline std::string iso_utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline const char* format_name(OutputFormat f) { return f == OutputFormat::Csv ? "csv" : "json"; }
inline const char* boundary_name(Boundary b) { return b == Boundary::Periodic ? "periodic" : "open"; }
inline const char* shape_name(RampShape s) { return s == RampShape::Linear ? "linear" : "smoothstep"; }
inline const char* bool_name(bool b) { return b ? "true" : "false"; }

inline void add_protocol_meta(ResultTable& t, const std::string& prefix,
                              const DetuningProtocol& pr) {
  t.add_meta(prefix + ".initial_dom", format_double(pr.initial_dom));
  t.add_meta(prefix + ".final_dom", format_double(pr.final_dom));
  t.add_meta(prefix + ".t_hold_pre", format_double(pr.t_hold_pre));
  t.add_meta(prefix + ".t_ramp", format_double(pr.t_ramp));
  t.add_meta(prefix + ".t_hold_post", format_double(pr.t_hold_post));
  t.add_meta(prefix + ".shape", shape_name(pr.shape));
}

// Every output embeds the fully resolved configuration (defaults included)
// so a result file documents the exact run that produced it.
inline ResultTable make_table(const RunConfig& cfg, bool with_timestamp) {
  ResultTable t;
  t.add_meta("tool_version", kToolVersion);
  t.add_meta("units", kUnitsDecl);
  if (with_timestamp) t.add_meta("timestamp", iso_utc_now());

  t.add_meta("config.command", command_name(cfg.command));
  t.add_meta("config.output", cfg.output);
  t.add_meta("config.format", format_name(cfg.format));
  t.add_meta("config.params.n_sites", std::to_string(cfg.params.n_sites));
  t.add_meta("config.params.spacing", format_double(cfg.params.spacing));
  t.add_meta("config.params.omega_m", format_double(cfg.params.omega_m));
  t.add_meta("config.params.g_eff", format_double(cfg.params.g_eff));
  t.add_meta("config.params.hopping", format_double(cfg.params.hopping));
  t.add_meta("config.params.detuning_om", format_double(cfg.params.detuning_om));

  switch (cfg.command) {
    case Command::Bands:
      t.add_meta("config.n_k", std::to_string(cfg.n_k));
      break;
    case Command::VelocitySweep:
    case Command::MixingSweep:
      t.add_meta("config.k_fixed", format_double(cfg.k_fixed));
      [[fallthrough]];
    case Command::BandwidthSweep:
    case Command::GapSweep:
      t.add_meta("config.sweep.variable", cfg.sweep.variable);
      t.add_meta("config.sweep.start", format_double(cfg.sweep.start));
      t.add_meta("config.sweep.stop", format_double(cfg.sweep.stop));
      t.add_meta("config.sweep.points", std::to_string(cfg.sweep.points));
      break;
    case Command::Propagate:
    case Command::StopRelease:
      t.add_meta("config.dt", format_double(cfg.dt));
      t.add_meta("config.sample_every", std::to_string(cfg.sample_every));
      t.add_meta("config.corotating", bool_name(cfg.corotating));
      t.add_meta("config.boundary", boundary_name(cfg.boundary));
      t.add_meta("config.pulse.center_site", std::to_string(cfg.pulse.center_site));
      t.add_meta("config.pulse.carrier_kl", format_double(cfg.pulse.carrier_kl));
      t.add_meta("config.pulse.sigma", format_double(cfg.pulse.sigma));
      if (cfg.command == Command::Propagate) {
        if (cfg.has_protocol) add_protocol_meta(t, "config.protocol", cfg.protocol);
        t.add_meta("config.t_end", format_double(cfg.t_end));
      } else {
        add_protocol_meta(t, "config.protocol", cfg.protocol);
        add_protocol_meta(t, "config.release", cfg.release);
      }
      break;
  }
  return t;
}

inline std::vector<double> sweep_grid(const SweepSpec& s) {
  std::vector<double> xs;
  xs.reserve(static_cast<size_t>(s.points));
  for (int i = 0; i < s.points; ++i)
    xs.push_back(s.start +
                 (s.stop - s.start) * static_cast<double>(i) / static_cast<double>(s.points - 1));
  return xs;
}

inline void trace_to_rows(const PropagationTrace& trace, ResultTable& t) {
  t.columns = {"t", "norm", "photon_fraction", "phonon_fraction", "centroid", "width", "velocity"};
  t.rows.reserve(trace.samples.size());
  for (const auto& s : trace.samples)
    t.rows.push_back({s.t, s.norm, s.photon_fraction, s.phonon_fraction, s.centroid, s.width,
                      s.velocity});
}

}  // namespace detail

// Executes one command and returns its result table. Dynamic runs that blow
// up raise AbortedRun carrying the rows collected before the failure.
inline ResultTable run_command(const RunConfig& cfg, bool with_timestamp = true) {
  cfg.params.validate();
  ResultTable t = detail::make_table(cfg, with_timestamp);

  switch (cfg.command) {
    case Command::Bands: {
      t.columns = {"kL", "omega_ph", "omega_c", "omega_d", "u", "v", "vg_c", "vg_d", "gap"};
      for (const auto& bp : band_table(cfg.params, cfg.n_k))
        t.rows.push_back({bp.k * cfg.params.spacing, bp.omega_ph, bp.omega_c, bp.omega_d, bp.u,
                          bp.v, bp.vg_c, bp.vg_d, bp.gap});
      break;
    }
    case Command::BandwidthSweep: {
      t.columns = {"detuning_om", "width_c", "width_d", "delta_shift", "min_gap"};
      for (const double x : detail::sweep_grid(cfg.sweep)) {
        ArrayParams p = cfg.params;
        p.detuning_om = x;
        const BandSummary bw = bandwidths(p);
        t.rows.push_back({x, bw.width_lower, bw.width_upper, bw.delta_shift, bw.min_gap});
      }
      break;
    }
    case Command::VelocitySweep: {
      t.columns = {"detuning_om", "v_c_analytic", "v_c_fd", "v_d_analytic"};
      const double k = cfg.k_fixed / cfg.params.spacing;
      for (const double x : detail::sweep_grid(cfg.sweep)) {
        ArrayParams p = cfg.params;
        p.detuning_om = x;
        t.rows.push_back({x, group_velocity(Branch::Lower, k, p),
                          finite_difference_velocity(Branch::Lower, k, p),
                          group_velocity(Branch::Upper, k, p)});
      }
      break;
    }
    case Command::MixingSweep: {
      // Columns carry the mixing amplitudes |u|, |v| (plus their squares);
      // the signed pair is available from bogoliubov_coefficients directly.
      t.columns = {"detuning_om", "u", "v", "u_sq", "v_sq"};
      const double k = cfg.k_fixed / cfg.params.spacing;
      for (const double x : detail::sweep_grid(cfg.sweep)) {
        ArrayParams p = cfg.params;
        p.detuning_om = x;
        const MixingPair uv = bogoliubov_coefficients(k, p);
        t.rows.push_back({x, std::abs(uv.u), std::abs(uv.v), uv.u * uv.u, uv.v * uv.v});
      }
      break;
    }
    case Command::GapSweep: {
      t.add_meta("min_gap_note",
                 "the gap minimum equals 2*g_eff (set by the photon-phonon coupling, not by the "
                 "hopping G); casual readings that quote it as a multiple of G conflate the two "
                 "scales");
      t.columns = {"detuning_om", "min_gap", "argmin_kl"};
      for (const double x : detail::sweep_grid(cfg.sweep)) {
        ArrayParams p = cfg.params;
        p.detuning_om = x;
        const double c = std::max(-1.0, std::min(1.0, x / (2.0 * p.hopping)));
        t.rows.push_back({x, bandwidths(p).min_gap, std::acos(c)});
      }
      break;
    }
    case Command::Propagate: {
      LatticeState state = init_gaussian_pulse(cfg.params, cfg.pulse.center_site,
                                               cfg.pulse.carrier_kl, cfg.pulse.sigma);
      DetuningProtocol protocol;
      if (cfg.has_protocol) {
        protocol = cfg.protocol;
      } else {
        protocol.initial_dom = cfg.params.detuning_om;
        protocol.final_dom = cfg.params.detuning_om;
      }
      EvolveOptions opts;
      opts.dt = cfg.dt;
      opts.sample_every = static_cast<int>(cfg.sample_every);
      opts.corotating = cfg.corotating;
      opts.boundary = cfg.boundary;
      opts.t_end = (cfg.has_protocol && !cfg.t_end_set) ? protocol.total_time() : cfg.t_end;

      PropagationTrace trace;
      try {
        evolve(state, protocol, cfg.params, opts, trace);
      } catch (const NumericalError& e) {
        detail::trace_to_rows(trace, t);
        t.add_meta("aborted", e.what());
        throw AbortedRun(e.what(), std::move(t));
      }
      detail::trace_to_rows(trace, t);
      break;
    }
    case Command::StopRelease: {
      PropagationTrace trace;
      StopReleaseReport rep;
      try {
        rep = run_stop_release(cfg.params, cfg.pulse, cfg.protocol, cfg.release, cfg.dt,
                               static_cast<int>(cfg.sample_every), cfg.corotating, &trace);
      } catch (const NumericalError& e) {
        detail::trace_to_rows(trace, t);
        t.add_meta("aborted", e.what());
        throw AbortedRun(e.what(), std::move(t));
      }
      detail::trace_to_rows(trace, t);
      t.report = {{"v_initial", rep.v_initial},
                  {"v_held", rep.v_held},
                  {"v_released", rep.v_released},
                  {"phonon_fraction_held", rep.phonon_fraction_held},
                  {"release_fidelity", rep.release_fidelity},
                  {"adiabaticity_metric", rep.adiabaticity_metric},
                  {"rate_over_gap", rep.rate_over_gap},
                  {"max_norm_drift", rep.max_norm_drift}};
      break;
    }
  }
  return t;
}

inline std::string serialize(const ResultTable& t, OutputFormat format) {
  return format == OutputFormat::Csv ? to_csv(t) : to_json(t);
}

}  // namespace omcrow
