#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

namespace omcrow {

// Parameters of the coupled cavity/mechanical lattice. Frequencies are
// quoted in units of the inter-cavity hopping and lengths in units of the
// cavity spacing; nothing below depends on that choice.
//
// detuning_om = delta_eff - omega_m is the photon-phonon detuning, the knob
// every sweep and protocol moves. delta_eff() recovers the pump-shifted
// cavity detuning that enters the Hamiltonian diagonal.
struct ArrayParams {
  int n_sites = 256;
  double spacing = 1.0;      // L
  double omega_m = 100.0;    // mechanical frequency
  double g_eff = 5.0;        // linearized photon-phonon coupling, >= 0
  double hopping = 1.0;      // G
  double detuning_om = 0.0;  // Delta_OM

  double delta_eff() const { return detuning_om + omega_m; }

  void validate() const {
    if (n_sites < 2) throw std::invalid_argument("ArrayParams: n_sites must be >= 2");
    if (!(spacing > 0.0)) throw std::invalid_argument("ArrayParams: spacing must be > 0");
    if (!(omega_m > 0.0)) throw std::invalid_argument("ArrayParams: omega_m must be > 0");
    if (!(g_eff >= 0.0)) throw std::invalid_argument("ArrayParams: g_eff must be >= 0");
    if (!(hopping > 0.0)) throw std::invalid_argument("ArrayParams: hopping must be > 0");
  }
};

// Pump-level inputs of the linearization: bare cavity detuning, single-photon
// coupling and the steady-state amplitudes the fluctuations ride on.
struct BareParams {
  double coupling_g = 0.0;
  double detuning_delta = 0.0;
  std::complex<double> mean_a{0.0, 0.0};
  std::complex<double> mean_b{0.0, 0.0};
};

struct EffectiveParams {
  double g_eff = 0.0;
  double delta_eff = 0.0;
};

// The static mechanical displacement shifts the cavity detuning by g*Re<b>;
// the beam-splitter coupling strength is |g<a>|, its phase absorbed into the
// photon operators so g_eff is real and non-negative.
inline EffectiveParams derive_effective_params(const BareParams& bp) {
  return {std::abs(bp.coupling_g * bp.mean_a),
          bp.detuning_delta + bp.coupling_g * bp.mean_b.real()};
}

enum class Branch { Lower, Upper };

// Bare photon band of the resonator chain, omega_ph(k) = delta_eff - 2G cos(kL).
inline double photon_dispersion(double k, const ArrayParams& p) {
  return p.delta_eff() - 2.0 * p.hopping * std::cos(k * p.spacing);
}

namespace detail {

// Two-level splitting sqrt(4 g^2 + x^2) for x = omega_ph - omega_m.
inline double splitting(double x, double g_eff) { return std::hypot(2.0 * g_eff, x); }

}  // namespace detail

struct BranchPair {
  double lower = 0.0;
  double upper = 0.0;
};

// Polariton bands omega_{C,D}(k) = (omega_m + omega_ph -/+ sqrt(4g^2 + x^2)) / 2.
inline BranchPair polariton_frequencies(double k, const ArrayParams& p) {
  const double wph = photon_dispersion(k, p);
  const double s = detail::splitting(wph - p.omega_m, p.g_eff);
  return {0.5 * (p.omega_m + wph - s), 0.5 * (p.omega_m + wph + s)};
}

inline double polariton_frequency(Branch br, double k, const ArrayParams& p) {
  const BranchPair f = polariton_frequencies(k, p);
  return br == Branch::Lower ? f.lower : f.upper;
}

struct MixingPair {
  double u = 1.0;  // photon component
  double v = 0.0;  // phonon component
};

// Normalized lower-branch eigenvector of [[omega_ph, g], [g, omega_m]] with
// u >= 0. For g > 0 the components have opposite signs (v <= 0); the mixing
// weights are u^2 and v^2. The small diagonal difference is recovered from
// (wC - wph)(wC - wm) = g^2 so neither component loses digits to cancellation.
inline MixingPair bogoliubov_coefficients(double k, const ArrayParams& p) {
  if (p.g_eff == 0.0) return {1.0, 0.0};
  const double g = p.g_eff;
  const double x = photon_dispersion(k, p) - p.omega_m;
  const double s = detail::splitting(x, g);
  if (x <= 0.0) {
    // wC - wph = -(s + x)/2 is the small difference here
    const double dm = -0.5 * (s - x);
    const double dph = (g * g) / dm;
    const double n = std::hypot(g, dph);
    return {g / n, dph / n};
  }
  const double dph = -0.5 * (s + x);
  const double dm = (g * g) / dph;
  const double n = std::hypot(dm, g);
  return {-dm / n, -g / n};
}

// d omega_{C,D} / dk = G L sin(kL) (1 -/+ x / sqrt(4g^2 + x^2)).
inline double group_velocity(Branch br, double k, const ArrayParams& p) {
  const double x = photon_dispersion(k, p) - p.omega_m;
  const double s = detail::splitting(x, p.g_eff);
  const double dwph = 2.0 * p.hopping * p.spacing * std::sin(k * p.spacing);
  const double ratio = s > 0.0 ? x / s : 0.0;
  return 0.5 * dwph * (br == Branch::Lower ? 1.0 - ratio : 1.0 + ratio);
}

// Local gap omega_D(k) - omega_C(k) = sqrt(4g^2 + x^2) >= 2g.
inline double band_gap(double k, const ArrayParams& p) {
  return detail::splitting(photon_dispersion(k, p) - p.omega_m, p.g_eff);
}

struct BandSummary {
  double width_lower = 0.0;  // lower-branch bandwidth, 2G + delta_shift
  double width_upper = 0.0;  // upper-branch bandwidth, 2G - delta_shift
  double delta_shift = 0.0;  // bandwidth transfer between the branches
  double min_gap = 0.0;      // min over k of the local gap
};

inline BandSummary bandwidths(const ArrayParams& p) {
  p.validate();
  const double g = p.g_eff;
  const double G = p.hopping;
  const double half = 0.5 * p.detuning_om;
  const double shift = std::hypot(g, half - G) - std::hypot(g, half + G);
  BandSummary bs;
  bs.delta_shift = shift;
  bs.width_lower = 2.0 * G + shift;
  bs.width_upper = 2.0 * G - shift;
  // dense grid over half the zone (the gap depends on k through cos kL only)
  // plus the interior stationary point cos kL = detuning_om / 2G when it exists
  const int n_grid = 4096;
  double m = band_gap(0.0, p);
  for (int i = 1; i <= n_grid; ++i) {
    const double k = M_PI * static_cast<double>(i) / n_grid / p.spacing;
    m = std::min(m, band_gap(k, p));
  }
  const double c = half / G;
  if (std::abs(c) <= 1.0) m = std::min(m, band_gap(std::acos(c) / p.spacing, p));
  bs.min_gap = m;
  return bs;
}

struct BandPoint {
  double k = 0.0;
  double omega_ph = 0.0;
  double omega_c = 0.0;
  double omega_d = 0.0;
  double u = 1.0;
  double v = 0.0;
  double vg_c = 0.0;
  double vg_d = 0.0;
  double gap = 0.0;
};

// Uniform sampling of the Brillouin zone k in [0, 2pi/L), n_k points.
inline std::vector<BandPoint> band_table(const ArrayParams& p, int n_k) {
  p.validate();
  if (n_k < 2) throw std::invalid_argument("band_table: n_k must be >= 2");
  std::vector<BandPoint> table(static_cast<size_t>(n_k));
  for (int i = 0; i < n_k; ++i) {
    const double k = 2.0 * M_PI * static_cast<double>(i) / n_k / p.spacing;
    BandPoint& b = table[static_cast<size_t>(i)];
    b.k = k;
    b.omega_ph = photon_dispersion(k, p);
    const BranchPair f = polariton_frequencies(k, p);
    b.omega_c = f.lower;
    b.omega_d = f.upper;
    const MixingPair mix = bogoliubov_coefficients(k, p);
    b.u = mix.u;
    b.v = mix.v;
    b.vg_c = group_velocity(Branch::Lower, k, p);
    b.vg_d = group_velocity(Branch::Upper, k, p);
    b.gap = band_gap(k, p);
  }
  return table;
}

// Fractional optical frequency shift omega_m / omega_c between the running and
// stopped configurations; the fractional refractive-index change needed to
// mimic it is the same number. Units cancel, any consistent pair works.
inline double refractive_index_shift(double omega_c, double omega_m) {
  if (!(omega_c > 0.0) || !(omega_m > 0.0))
    throw std::invalid_argument("refractive_index_shift: frequencies must be > 0");
  return omega_m / omega_c;
}

}  // namespace omcrow
