#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "model.hpp"
#include "spectral.hpp"

namespace omcrow {

// Thrown when an evolution produces non-finite amplitudes. Distinct from
// std::invalid_argument so callers can separate bad input from blow-up.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LatticeState {
  double time = 0.0;
  std::vector<std::complex<double>> photon;
  std::vector<std::complex<double>> phonon;

  int n() const { return static_cast<int>(photon.size()); }

  double norm() const {
    double s = 0.0;
    for (const auto& z : photon) s += std::norm(z);
    for (const auto& z : phonon) s += std::norm(z);
    return s;
  }
};

enum class RampShape { Linear, Smoothstep };

// Piecewise detuning schedule: hold, ramp, hold. Times are protocol-local,
// starting at zero.
struct DetuningProtocol {
  double initial_dom = 0.0;
  double final_dom = 0.0;
  double t_hold_pre = 0.0;
  double t_ramp = 0.0;
  double t_hold_post = 0.0;
  RampShape shape = RampShape::Linear;

  void validate() const {
    if (!(t_hold_pre >= 0.0) || !(t_ramp >= 0.0) || !(t_hold_post >= 0.0))
      throw std::invalid_argument("DetuningProtocol: durations must be >= 0");
    if (!std::isfinite(initial_dom) || !std::isfinite(final_dom))
      throw std::invalid_argument("DetuningProtocol: detunings must be finite");
  }

  double total_time() const { return t_hold_pre + t_ramp + t_hold_post; }

  double dom_at(double t) const {
    if (t <= t_hold_pre) return initial_dom;
    if (t >= t_hold_pre + t_ramp) return final_dom;
    const double s = (t - t_hold_pre) / t_ramp;
    const double f = (shape == RampShape::Linear) ? s : s * s * (3.0 - 2.0 * s);
    return initial_dom + (final_dom - initial_dom) * f;
  }

  double rate_at(double t) const {
    if (t_ramp <= 0.0 || t < t_hold_pre || t > t_hold_pre + t_ramp) return 0.0;
    const double span = final_dom - initial_dom;
    if (shape == RampShape::Linear) return span / t_ramp;
    const double s = (t - t_hold_pre) / t_ramp;
    return span * 6.0 * s * (1.0 - s) / t_ramp;
  }
};

// Photon-only Gaussian wave packet with a plane-wave carrier, total norm 1.
// sigma is the std dev of the site-occupation profile; sigma = 0 collapses to
// a single-site excitation.
inline LatticeState init_gaussian_pulse(const ArrayParams& p, int center_site, double carrier_kl,
                                        double sigma) {
  p.validate();
  const int n = p.n_sites;
  if (center_site < 0 || center_site >= n)
    throw std::invalid_argument("init_gaussian_pulse: center_site outside [0, n_sites)");
  if (!(sigma >= 0.0))
    throw std::invalid_argument("init_gaussian_pulse: sigma must be >= 0");
  if (6.0 * sigma >= static_cast<double>(n))
    throw std::invalid_argument("init_gaussian_pulse: pulse too wide for lattice (need 3*sigma < n/2)");
  if (!(carrier_kl >= -M_PI && carrier_kl <= M_PI))
    throw std::invalid_argument("init_gaussian_pulse: carrier_kl outside first Brillouin zone [-pi, pi]");

  LatticeState st;
  st.photon.assign(static_cast<size_t>(n), {0.0, 0.0});
  st.phonon.assign(static_cast<size_t>(n), {0.0, 0.0});
  if (sigma == 0.0) {
    st.photon[static_cast<size_t>(center_site)] =
        std::polar(1.0, carrier_kl * static_cast<double>(center_site));
    return st;
  }
  double w = 0.0;
  for (int j = 0; j < n; ++j) {
    const double d = static_cast<double>(j - center_site);
    const double env = std::exp(-d * d / (4.0 * sigma * sigma));
    st.photon[static_cast<size_t>(j)] = std::polar(env, carrier_kl * static_cast<double>(j));
    w += env * env;
  }
  const double inv = 1.0 / std::sqrt(w);
  for (auto& z : st.photon) z *= inv;
  return st;
}

namespace detail {

// dy/dt for the coupled amplitude equations, with the on-site frequencies
// passed in already frame-shifted: da_j/dt = -i(diag_a a_j + g b_j - G(a_{j-1}+a_{j+1})),
// db_j/dt = -i(diag_b b_j + g a_j). Interior sites run branch-free.
inline void rhs(const std::complex<double>* a, const std::complex<double>* b,
                std::complex<double>* da, std::complex<double>* db, int n, double diag_a,
                double diag_b, double g, double hop, bool periodic) {
  auto site = [&](int j, double sr, double si) {
    const double ar = a[j].real(), ai = a[j].imag();
    const double br = b[j].real(), bi = b[j].imag();
    const double hr = diag_a * ar + g * br - hop * sr;
    const double hi = diag_a * ai + g * bi - hop * si;
    da[j] = {hi, -hr};
    const double pr = diag_b * br + g * ar;
    const double pi = diag_b * bi + g * ai;
    db[j] = {pi, -pr};
  };
  for (int j = 1; j + 1 < n; ++j)
    site(j, a[j - 1].real() + a[j + 1].real(), a[j - 1].imag() + a[j + 1].imag());
  if (n == 1) {
    site(0, 0.0, 0.0);
    return;
  }
  if (periodic) {
    site(0, a[n - 1].real() + a[1].real(), a[n - 1].imag() + a[1].imag());
    site(n - 1, a[n - 2].real() + a[0].real(), a[n - 2].imag() + a[0].imag());
  } else {
    site(0, a[1].real(), a[1].imag());
    site(n - 1, a[n - 2].real(), a[n - 2].imag());
  }
}

}  // namespace detail

// Time derivative of a state under the instantaneous detuning dom. The
// co-rotating flag removes the fast e^{-i omega_m t} rotation from both
// species; it shifts both bands equally and no reported observable changes.
inline LatticeState equations_of_motion(const LatticeState& state, double dom,
                                        const ArrayParams& p, bool corotating = true,
                                        Boundary boundary = Boundary::Periodic) {
  p.validate();
  if (state.n() != p.n_sites || static_cast<int>(state.phonon.size()) != p.n_sites)
    throw std::invalid_argument("equations_of_motion: state dimension does not match n_sites");
  if (boundary == Boundary::Periodic && p.n_sites < 3)
    throw std::invalid_argument("equations_of_motion: periodic chain needs n_sites >= 3");
  const double diag_a = corotating ? dom : dom + p.omega_m;
  const double diag_b = corotating ? 0.0 : p.omega_m;
  LatticeState d;
  d.time = state.time;
  d.photon.resize(state.photon.size());
  d.phonon.resize(state.phonon.size());
  detail::rhs(state.photon.data(), state.phonon.data(), d.photon.data(), d.phonon.data(),
              state.n(), diag_a, diag_b, p.g_eff, p.hopping, boundary == Boundary::Periodic);
  return d;
}

struct TraceSample {
  double t = 0.0;
  double norm = 0.0;
  double photon_fraction = 0.0;
  double phonon_fraction = 0.0;
  double centroid = 0.0;
  double width = 0.0;
  double velocity = 0.0;
};

struct PropagationTrace {
  std::vector<TraceSample> samples;
  double max_norm_drift = 0.0;  // max |norm - 1| over samples
};

struct EvolveOptions {
  double dt = 1e-3;
  double t_end = -1.0;  // < 0: evolve to protocol.total_time()
  int sample_every = 1;
  bool corotating = true;
  Boundary boundary = Boundary::Periodic;
};

inline std::pair<double, double> mode_fractions(const LatticeState& state, const ArrayParams& p) {
  if (state.n() != p.n_sites)
    throw std::invalid_argument("mode_fractions: state dimension does not match n_sites");
  double na = 0.0, nb = 0.0;
  for (const auto& z : state.photon) na += std::norm(z);
  for (const auto& z : state.phonon) nb += std::norm(z);
  const double w = na + nb;
  if (w <= 0.0) throw std::invalid_argument("mode_fractions: zero-norm state");
  return {na / w, nb / w};
}

namespace detail {

// Pulse position on the ring via the circular mean of the site distribution;
// width from the circular variance. Falls back to plain moments for open
// chains, where site index is an ordinary coordinate.
inline void pulse_moments(const LatticeState& state, Boundary boundary, double& centroid,
                          double& width) {
  const int n = state.n();
  const double two_pi = 2.0 * M_PI;
  if (boundary == Boundary::Periodic) {
    double zr = 0.0, zi = 0.0, w = 0.0;
    for (int j = 0; j < n; ++j) {
      const double wj = std::norm(state.photon[static_cast<size_t>(j)]) +
                        std::norm(state.phonon[static_cast<size_t>(j)]);
      const double th = two_pi * static_cast<double>(j) / static_cast<double>(n);
      zr += wj * std::cos(th);
      zi += wj * std::sin(th);
      w += wj;
    }
    if (w <= 0.0) {
      centroid = 0.0;
      width = 0.0;
      return;
    }
    double ang = std::atan2(zi, zr);
    if (ang < 0.0) ang += two_pi;
    centroid = ang * static_cast<double>(n) / two_pi;
    const double r = std::hypot(zr, zi) / w;
    width = (r >= 1.0) ? 0.0 : std::sqrt(-2.0 * std::log(std::max(r, 1e-300))) *
                                   static_cast<double>(n) / two_pi;
  } else {
    double m1 = 0.0, w = 0.0;
    for (int j = 0; j < n; ++j) {
      const double wj = std::norm(state.photon[static_cast<size_t>(j)]) +
                        std::norm(state.phonon[static_cast<size_t>(j)]);
      m1 += wj * static_cast<double>(j);
      w += wj;
    }
    if (w <= 0.0) {
      centroid = 0.0;
      width = 0.0;
      return;
    }
    m1 /= w;
    double m2 = 0.0;
    for (int j = 0; j < n; ++j) {
      const double wj = std::norm(state.photon[static_cast<size_t>(j)]) +
                        std::norm(state.phonon[static_cast<size_t>(j)]);
      const double d = static_cast<double>(j) - m1;
      m2 += wj * d * d;
    }
    centroid = m1;
    width = std::sqrt(m2 / w);
  }
}

inline double wrap_delta(double d, int n, Boundary boundary) {
  if (boundary != Boundary::Periodic) return d;
  const double nn = static_cast<double>(n);
  d = std::fmod(d, nn);
  if (d > 0.5 * nn) d -= nn;
  if (d <= -0.5 * nn) d += nn;
  return d;
}

}  // namespace detail

// Fixed-step RK4 over equations_of_motion with the detuning schedule sampled
// inside each step. The dt precondition uses a Gershgorin bound on the
// instantaneous Hamiltonian over the whole schedule, so an accepted dt is
// safe for every step. Samples are appended to trace (which is left holding
// whatever was collected if the run aborts on non-finite amplitudes).
inline void evolve(LatticeState& state, const DetuningProtocol& protocol, const ArrayParams& p,
                   const EvolveOptions& opts, PropagationTrace& trace) {
  p.validate();
  protocol.validate();
  if (state.n() != p.n_sites || static_cast<int>(state.phonon.size()) != p.n_sites)
    throw std::invalid_argument("evolve: state dimension does not match n_sites");
  if (opts.boundary == Boundary::Periodic && p.n_sites < 3)
    throw std::invalid_argument("evolve: periodic chain needs n_sites >= 3");
  if (!(opts.dt > 0.0)) throw std::invalid_argument("evolve: dt must be > 0");
  if (opts.sample_every < 1) throw std::invalid_argument("evolve: sample_every must be >= 1");

  const double dmax = std::max(std::abs(protocol.initial_dom), std::abs(protocol.final_dom));
  const double shift = opts.corotating ? 0.0 : p.omega_m;
  const double omega_max = std::max(dmax + shift + 2.0 * p.hopping + p.g_eff, shift + p.g_eff);
  if (opts.dt * omega_max > 0.05 + 1e-12)
    throw std::invalid_argument("evolve: dt too large for spectral radius (need dt*omega_max <= 0.05)");

  const double t0 = state.time;
  const double t_end = (opts.t_end >= 0.0) ? opts.t_end : protocol.total_time();
  if (t_end < t0) throw std::invalid_argument("evolve: t_end precedes state.time");

  const double span = t_end - t0;
  long n_full = static_cast<long>(std::floor(span / opts.dt + 1e-9));
  double tail = span - static_cast<double>(n_full) * opts.dt;
  if (tail < 1e-9 * std::max(1.0, std::abs(t_end))) tail = 0.0;
  const long n_steps = n_full + (tail > 0.0 ? 1 : 0);

  const size_t n = state.photon.size();
  const double diag_b = opts.corotating ? 0.0 : p.omega_m;
  const bool periodic = (opts.boundary == Boundary::Periodic);

  std::vector<std::complex<double>> ka1(n), kb1(n), ka2(n), kb2(n), ka3(n), kb3(n), ka4(n),
      kb4(n), ta(n), tb(n);

  double prev_centroid = 0.0, prev_t = 0.0;
  bool have_prev = false;
  auto take_sample = [&](double t) {
    TraceSample s;
    s.t = t;
    double na = 0.0, nb = 0.0;
    for (const auto& z : state.photon) na += std::norm(z);
    for (const auto& z : state.phonon) nb += std::norm(z);
    s.norm = na + nb;
    if (!std::isfinite(s.norm))
      throw NumericalError("evolve: non-finite amplitudes at t = " + std::to_string(t));
    if (s.norm > 0.0) {
      s.photon_fraction = na / s.norm;
      s.phonon_fraction = nb / s.norm;
    }
    detail::pulse_moments(state, opts.boundary, s.centroid, s.width);
    if (have_prev && t > prev_t) {
      const double d = detail::wrap_delta(s.centroid - prev_centroid, static_cast<int>(n),
                                          opts.boundary);
      s.velocity = d / (t - prev_t);
    }
    prev_centroid = s.centroid;
    prev_t = t;
    have_prev = true;
    trace.max_norm_drift = std::max(trace.max_norm_drift, std::abs(s.norm - 1.0));
    trace.samples.push_back(s);
  };

  take_sample(t0);

  auto stage = [&](double t, const std::complex<double>* a, const std::complex<double>* b,
                   std::complex<double>* da, std::complex<double>* db) {
    const double dom = protocol.dom_at(t - t0);
    const double diag_a = opts.corotating ? dom : dom + p.omega_m;
    detail::rhs(a, b, da, db, static_cast<int>(n), diag_a, diag_b, p.g_eff, p.hopping, periodic);
  };

  for (long step = 0; step < n_steps; ++step) {
    const double h = (step < n_full) ? opts.dt : tail;
    const double t = t0 + static_cast<double>(step) * opts.dt;

    stage(t, state.photon.data(), state.phonon.data(), ka1.data(), kb1.data());
    const double h2 = 0.5 * h;
    for (size_t i = 0; i < n; ++i) {
      ta[i] = state.photon[i] + h2 * ka1[i];
      tb[i] = state.phonon[i] + h2 * kb1[i];
    }
    stage(t + h2, ta.data(), tb.data(), ka2.data(), kb2.data());
    for (size_t i = 0; i < n; ++i) {
      ta[i] = state.photon[i] + h2 * ka2[i];
      tb[i] = state.phonon[i] + h2 * kb2[i];
    }
    stage(t + h2, ta.data(), tb.data(), ka3.data(), kb3.data());
    for (size_t i = 0; i < n; ++i) {
      ta[i] = state.photon[i] + h * ka3[i];
      tb[i] = state.phonon[i] + h * kb3[i];
    }
    stage(t + h, ta.data(), tb.data(), ka4.data(), kb4.data());
    const double h6 = h / 6.0;
    for (size_t i = 0; i < n; ++i) {
      state.photon[i] += h6 * (ka1[i] + 2.0 * ka2[i] + 2.0 * ka3[i] + ka4[i]);
      state.phonon[i] += h6 * (kb1[i] + 2.0 * kb2[i] + 2.0 * kb3[i] + kb4[i]);
    }
    state.time = (step + 1 < n_steps) ? t0 + static_cast<double>(step + 1) * opts.dt : t_end;

    if ((step + 1) % opts.sample_every == 0 || step + 1 == n_steps) take_sample(state.time);
  }
}

inline PropagationTrace evolve(LatticeState& state, const DetuningProtocol& protocol,
                               const ArrayParams& p, const EvolveOptions& opts) {
  PropagationTrace trace;
  evolve(state, protocol, p, opts, trace);
  return trace;
}

// Worst-case ramp speed against the square of the instantaneous band gap
// minimized over k: a Landau-Zener-style smallness parameter. The k minimum
// of the gap hypot(2g, dom - 2G cos kL) has the closed form used below, so no
// k grid is needed; the ramp is sampled on a 513-point grid.
namespace detail {
inline double min_gap_over_k(double dom, const ArrayParams& p) {
  const double edge = std::abs(dom) - 2.0 * p.hopping;
  return (edge <= 0.0) ? 2.0 * p.g_eff : std::hypot(2.0 * p.g_eff, edge);
}
}  // namespace detail

inline double adiabaticity_metric(const DetuningProtocol& protocol, const ArrayParams& p) {
  p.validate();
  protocol.validate();
  if (!(protocol.t_ramp > 0.0)) throw std::invalid_argument("adiabaticity_metric: t_ramp must be > 0");
  double worst = 0.0;
  for (int i = 0; i <= 512; ++i) {
    const double t = protocol.t_hold_pre + protocol.t_ramp * static_cast<double>(i) / 512.0;
    const double rate = std::abs(protocol.rate_at(t));
    const double gap = detail::min_gap_over_k(protocol.dom_at(t), p);
    worst = std::max(worst, (gap > 0.0) ? rate / (gap * gap)
                                        : (rate > 0.0 ? INFINITY : 0.0));
  }
  return worst;
}

// The literal rate-to-gap ratio (first power), recorded alongside the
// quadratic metric for reference.
inline double ramp_rate_over_gap(const DetuningProtocol& protocol, const ArrayParams& p) {
  p.validate();
  protocol.validate();
  if (!(protocol.t_ramp > 0.0)) throw std::invalid_argument("ramp_rate_over_gap: t_ramp must be > 0");
  double worst = 0.0;
  for (int i = 0; i <= 512; ++i) {
    const double t = protocol.t_hold_pre + protocol.t_ramp * static_cast<double>(i) / 512.0;
    const double rate = std::abs(protocol.rate_at(t));
    const double gap = detail::min_gap_over_k(protocol.dom_at(t), p);
    worst = std::max(worst, (gap > 0.0) ? rate / gap : (rate > 0.0 ? INFINITY : 0.0));
  }
  return worst;
}

namespace detail {

// Exact propagation at constant detuning: Fourier transform, rotate each
// 2x2 Bloch block through its eigenbasis, transform back. O(N^2) transforms;
// only used for references and cross-checks.
inline void bloch_advance(LatticeState& state, const ArrayParams& p, bool corotating, double t) {
  p.validate();
  const int n = state.n();
  if (n != p.n_sites || static_cast<int>(state.phonon.size()) != n)
    throw std::invalid_argument("bloch_advance: state dimension does not match n_sites");
  const double two_pi = 2.0 * M_PI;

  std::vector<std::complex<double>> w(static_cast<size_t>(n));
  for (int r = 0; r < n; ++r)
    w[static_cast<size_t>(r)] = std::polar(1.0, -two_pi * static_cast<double>(r) / n);

  std::vector<std::complex<double>> am(static_cast<size_t>(n)), bm(static_cast<size_t>(n));
  for (int m = 0; m < n; ++m) {
    std::complex<double> sa{0.0, 0.0}, sb{0.0, 0.0};
    for (int j = 0; j < n; ++j) {
      const auto ph = w[static_cast<size_t>((static_cast<long>(m) * j) % n)];
      sa += state.photon[static_cast<size_t>(j)] * ph;
      sb += state.phonon[static_cast<size_t>(j)] * ph;
    }
    am[static_cast<size_t>(m)] = sa;
    bm[static_cast<size_t>(m)] = sb;
  }

  const double frame = corotating ? p.omega_m : 0.0;
  for (int m = 0; m < n; ++m) {
    const double k = two_pi * static_cast<double>(m) / (n * p.spacing);
    const auto uv = bogoliubov_coefficients(k, p);
    const auto f = polariton_frequencies(k, p);
    const std::complex<double> pc = std::polar(1.0, -(f.lower - frame) * t);
    const std::complex<double> pd = std::polar(1.0, -(f.upper - frame) * t);
    const std::complex<double> a = am[static_cast<size_t>(m)], b = bm[static_cast<size_t>(m)];
    const std::complex<double> c = (uv.u * a + uv.v * b) * pc;
    const std::complex<double> d = (-uv.v * a + uv.u * b) * pd;
    am[static_cast<size_t>(m)] = uv.u * c - uv.v * d;
    bm[static_cast<size_t>(m)] = uv.v * c + uv.u * d;
  }

  const double inv = 1.0 / static_cast<double>(n);
  std::vector<std::complex<double>> a2(static_cast<size_t>(n)), b2(static_cast<size_t>(n));
  for (int j = 0; j < n; ++j) {
    std::complex<double> sa{0.0, 0.0}, sb{0.0, 0.0};
    for (int m = 0; m < n; ++m) {
      const auto ph = std::conj(w[static_cast<size_t>((static_cast<long>(m) * j) % n)]);
      sa += am[static_cast<size_t>(m)] * ph;
      sb += bm[static_cast<size_t>(m)] * ph;
    }
    a2[static_cast<size_t>(j)] = sa * inv;
    b2[static_cast<size_t>(j)] = sb * inv;
  }
  state.photon = std::move(a2);
  state.phonon = std::move(b2);
  state.time += t;
}

// Least-squares slope of the (circularly unwrapped) centroid over the trace
// samples falling in [t_lo, t_hi]. Returns 0 if fewer than two samples land
// in the window.
inline double window_slope(const PropagationTrace& trace, double t_lo, double t_hi, int n,
                           Boundary boundary) {
  std::vector<double> ts, cs;
  for (const auto& s : trace.samples) {
    if (s.t < t_lo - 1e-9 || s.t > t_hi + 1e-9) continue;
    if (!ts.empty() && s.t <= ts.back()) continue;
    double c = s.centroid;
    if (!cs.empty()) c = cs.back() + wrap_delta(c - cs.back(), n, boundary);
    ts.push_back(s.t);
    cs.push_back(c);
  }
  if (ts.size() < 2) return 0.0;
  double tm = 0.0, cm = 0.0;
  for (size_t i = 0; i < ts.size(); ++i) {
    tm += ts[i];
    cm += cs[i];
  }
  tm /= static_cast<double>(ts.size());
  cm /= static_cast<double>(ts.size());
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < ts.size(); ++i) {
    num += (ts[i] - tm) * (cs[i] - cm);
    den += (ts[i] - tm) * (ts[i] - tm);
  }
  return (den > 0.0) ? num / den : 0.0;
}

}  // namespace detail

struct PulseSpec {
  int center_site = 0;
  double carrier_kl = M_PI / 2.0;
  double sigma = 0.0;
};

struct StopReleaseReport {
  double v_initial = 0.0;
  double v_held = 0.0;
  double v_released = 0.0;
  double phonon_fraction_held = 0.0;
  double release_fidelity = 0.0;
  double adiabaticity_metric = 0.0;
  double rate_over_gap = 0.0;
  double max_norm_drift = 0.0;
};

// Ramp-rate budget above which run_stop_release prints a (non-fatal) warning.
inline constexpr double kAdiabaticWarnThreshold = 0.02;

// Full slow/stop/release sequence: transport at the initial detuning, ramp to
// the stopped value, hold, ramp back, measure. The fidelity reference is the
// same pulse advanced exactly (constant initial detuning) for the protocol's
// transport-weighted duration: time at the initial detuning counts in full,
// ramps count half, time at the stopped value counts zero. Overlap is then
// maximized over integer ring shifts, which also absorbs global phase.
inline StopReleaseReport run_stop_release(const ArrayParams& p, const PulseSpec& pulse,
                                          const DetuningProtocol& stop,
                                          const DetuningProtocol& release, double dt,
                                          int sample_every, bool corotating = true,
                                          PropagationTrace* trace_out = nullptr) {
  p.validate();
  stop.validate();
  release.validate();
  if (stop.initial_dom != -p.omega_m)
    throw std::invalid_argument("run_stop_release: stop protocol must start at detuning_om = -omega_m");
  if (release.initial_dom != stop.final_dom || release.final_dom != stop.initial_dom)
    throw std::invalid_argument("run_stop_release: release protocol must reverse the stop protocol");

  ArrayParams p_init = p;
  p_init.detuning_om = stop.initial_dom;

  double t_eff;
  if (stop.initial_dom == stop.final_dom) {
    t_eff = stop.total_time() + release.total_time();
  } else {
    t_eff = stop.t_hold_pre + 0.5 * (stop.t_ramp + release.t_ramp) + release.t_hold_post;
  }

  const double vg0 = group_velocity(Branch::Lower, pulse.carrier_kl / p.spacing, p_init);
  if (std::abs(vg0) / p.spacing * t_eff + 3.0 * pulse.sigma >= static_cast<double>(p.n_sites))
    throw std::invalid_argument("run_stop_release: pulse would wrap the ring during the protocol");

  StopReleaseReport rep;
  rep.adiabaticity_metric = (stop.t_ramp > 0.0) ? adiabaticity_metric(stop, p) : 0.0;
  rep.rate_over_gap = (stop.t_ramp > 0.0) ? ramp_rate_over_gap(stop, p) : 0.0;
  if (rep.adiabaticity_metric > kAdiabaticWarnThreshold)
    std::cerr << "warning: adiabaticity metric " << rep.adiabaticity_metric << " exceeds "
              << kAdiabaticWarnThreshold << "; ramp may be too fast for clean transfer\n";

  LatticeState state = init_gaussian_pulse(p, pulse.center_site, pulse.carrier_kl, pulse.sigma);
  LatticeState reference = state;

  EvolveOptions opts;
  opts.dt = dt;
  opts.sample_every = sample_every;
  opts.corotating = corotating;
  opts.boundary = Boundary::Periodic;

  // Work directly in the caller's trace when given one, so an aborted run
  // still leaves the samples collected so far.
  PropagationTrace local;
  PropagationTrace& trace = trace_out ? *trace_out : local;
  trace = {};
  evolve(state, stop, p, opts, trace);
  rep.phonon_fraction_held = mode_fractions(state, p).second;

  const double t_stop = stop.total_time();
  state.time = 0.0;
  PropagationTrace trace2;
  auto merge_release_leg = [&trace, &trace2, t_stop]() {
    for (size_t i = 1; i < trace2.samples.size(); ++i) {
      TraceSample s = trace2.samples[i];
      s.t += t_stop;
      trace.samples.push_back(s);
    }
    trace.max_norm_drift = std::max(trace.max_norm_drift, trace2.max_norm_drift);
  };
  try {
    evolve(state, release, p, opts, trace2);
  } catch (const NumericalError&) {
    merge_release_leg();
    throw;
  }
  merge_release_leg();
  rep.max_norm_drift = trace.max_norm_drift;

  const double t_total = t_stop + release.total_time();
  rep.v_initial = detail::window_slope(trace, 0.0, stop.t_hold_pre, p.n_sites, opts.boundary);
  rep.v_held = detail::window_slope(trace, stop.t_hold_pre + stop.t_ramp, t_stop, p.n_sites,
                                    opts.boundary);
  rep.v_released = detail::window_slope(trace, t_total - release.t_hold_post, t_total, p.n_sites,
                                        opts.boundary);

  detail::bloch_advance(reference, p_init, corotating, t_eff);
  const double nr = reference.norm(), ns = state.norm();
  if (nr > 0.0 && ns > 0.0) {
    const int n = p.n_sites;
    double best = 0.0;
    for (int r = 0; r < n; ++r) {
      std::complex<double> ov{0.0, 0.0};
      for (int j = 0; j < n; ++j) {
        const int js = (j - r % n + n) % n;
        ov += std::conj(reference.photon[static_cast<size_t>(j)]) *
                  state.photon[static_cast<size_t>(js)] +
              std::conj(reference.phonon[static_cast<size_t>(j)]) *
                  state.phonon[static_cast<size_t>(js)];
      }
      best = std::max(best, std::norm(ov));
    }
    rep.release_fidelity = best / (nr * ns);
  }
  return rep;
}

}  // namespace omcrow
