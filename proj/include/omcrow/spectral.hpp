#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "model.hpp"

namespace omcrow {

// Dense Hermitian matrix, row-major complex storage. set() mirrors the
// conjugate entry so normally-built matrices are Hermitian by construction;
// at() exposes raw storage for callers that fill both triangles themselves.
class HermitianMatrix {
 public:
  explicit HermitianMatrix(int dim)
      : dim_(dim), a_(static_cast<size_t>(dim) * static_cast<size_t>(dim)) {
    if (dim < 1) throw std::invalid_argument("HermitianMatrix: dim must be >= 1");
  }

  int dim() const { return dim_; }

  std::complex<double> operator()(int i, int j) const { return a_[idx(i, j)]; }
  std::complex<double>& at(int i, int j) { return a_[idx(i, j)]; }

  void set(int i, int j, std::complex<double> value) {
    if (i == j && value.imag() != 0.0)
      throw std::invalid_argument("HermitianMatrix: diagonal entries must be real");
    a_[idx(i, j)] = value;
    a_[idx(j, i)] = std::conj(value);
  }

  bool is_hermitian(double tol = 1e-14) const {
    for (int i = 0; i < dim_; ++i)
      for (int j = i; j < dim_; ++j)
        if (std::abs(a_[idx(i, j)] - std::conj(a_[idx(j, i)])) > tol) return false;
    return true;
  }

 private:
  size_t idx(int i, int j) const {
    if (i < 0 || i >= dim_ || j < 0 || j >= dim_)
      throw std::out_of_range("HermitianMatrix: index out of range");
    return static_cast<size_t>(i) * static_cast<size_t>(dim_) + static_cast<size_t>(j);
  }

  int dim_;
  std::vector<std::complex<double>> a_;
};

struct EigenDecomposition {
  std::vector<double> values;                              // ascending
  std::vector<std::vector<std::complex<double>>> vectors;  // vectors[j] pairs with values[j]
};

namespace detail {

// Cyclic Jacobi on a real symmetric matrix (row-major, overwritten with the
// diagonal form). v accumulates the rotations; columns of v are eigenvectors.
// Returns false if the off-diagonal mass has not vanished within max_sweeps.
inline bool jacobi_real(std::vector<double>& a, std::vector<double>& v, int n, int max_sweeps) {
  v.assign(static_cast<size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) v[static_cast<size_t>(i) * n + i] = 1.0;
  if (n == 1) return true;

  double norm = 0.0;
  for (double x : a) norm += x * x;
  norm = std::sqrt(norm);
  if (norm == 0.0) return true;
  const double tol = 1e-14 * norm;

  auto ae = [&a, n](int i, int j) -> double& { return a[static_cast<size_t>(i) * n + j]; };
  auto ve = [&v, n](int i, int j) -> double& { return v[static_cast<size_t>(i) * n + j]; };

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) off += 2.0 * ae(i, j) * ae(i, j);
    if (std::sqrt(off) <= tol) return true;

    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = ae(p, q);
        if (apq == 0.0) continue;
        const double tau = (ae(q, q) - ae(p, p)) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::hypot(1.0, tau));
        const double c = 1.0 / std::hypot(1.0, t);
        const double s = t * c;

        ae(p, p) -= t * apq;
        ae(q, q) += t * apq;
        ae(p, q) = 0.0;
        ae(q, p) = 0.0;
        for (int i = 0; i < n; ++i) {
          if (i == p || i == q) continue;
          const double aip = ae(i, p), aiq = ae(i, q);
          ae(i, p) = c * aip - s * aiq;
          ae(p, i) = ae(i, p);
          ae(i, q) = s * aip + c * aiq;
          ae(q, i) = ae(i, q);
        }
        for (int i = 0; i < n; ++i) {
          const double vip = ve(i, p), viq = ve(i, q);
          ve(i, p) = c * vip - s * viq;
          ve(i, q) = s * vip + c * viq;
        }
      }
    }
  }
  // one more convergence check after the final sweep
  double off = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) off += 2.0 * ae(i, j) * ae(i, j);
  return std::sqrt(off) <= tol;
}

}  // namespace detail

// Eigendecomposition of a Hermitian matrix by cyclic Jacobi, eigenvalues
// ascending. Exactly-real input is diagonalized directly; complex input goes
// through the real-symmetric embedding [[X, -Y], [Y, X]] of M = X + iY, whose
// spectrum doubles that of M. The embedding commutes with J = [[0,-I],[I,0]]
// and (p; q) -> p + iq is a norm-preserving C-linear map on each J-invariant
// eigenspace, so complex eigenvectors are recovered by Gram-Schmidt over the
// images of each degenerate group (images from distinct eigenvalues are
// orthogonal already).
inline EigenDecomposition eigen_hermitian(const HermitianMatrix& m, int max_sweeps = 50) {
  if (!m.is_hermitian()) throw std::invalid_argument("eigen_hermitian: matrix is not Hermitian");
  const int n = m.dim();

  double max_imag = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) max_imag = std::max(max_imag, std::abs(m(i, j).imag()));

  EigenDecomposition out;
  if (max_imag == 0.0) {
    std::vector<double> a(static_cast<size_t>(n) * n), v;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) a[static_cast<size_t>(i) * n + j] = m(i, j).real();
    if (!detail::jacobi_real(a, v, n, max_sweeps))
      throw std::runtime_error("eigen_hermitian: Jacobi sweep budget exhausted");
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int i, int j) {
      return a[static_cast<size_t>(i) * n + i] < a[static_cast<size_t>(j) * n + j];
    });
    out.values.resize(static_cast<size_t>(n));
    out.vectors.assign(static_cast<size_t>(n), std::vector<std::complex<double>>(static_cast<size_t>(n)));
    for (int c = 0; c < n; ++c) {
      const int src = order[static_cast<size_t>(c)];
      out.values[static_cast<size_t>(c)] = a[static_cast<size_t>(src) * n + src];
      for (int i = 0; i < n; ++i)
        out.vectors[static_cast<size_t>(c)][static_cast<size_t>(i)] =
            v[static_cast<size_t>(i) * n + src];
    }
    return out;
  }

  const int N = 2 * n;
  std::vector<double> e(static_cast<size_t>(N) * N), v;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const std::complex<double> z = m(i, j);
      e[static_cast<size_t>(i) * N + j] = z.real();
      e[static_cast<size_t>(i + n) * N + (j + n)] = z.real();
      e[static_cast<size_t>(i) * N + (j + n)] = -z.imag();
      e[static_cast<size_t>(i + n) * N + j] = z.imag();
    }
  }
  if (!detail::jacobi_real(e, v, N, max_sweeps))
    throw std::runtime_error("eigen_hermitian: Jacobi sweep budget exhausted");

  std::vector<int> order(static_cast<size_t>(N));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int i, int j) {
    return e[static_cast<size_t>(i) * N + i] < e[static_cast<size_t>(j) * N + j];
  });

  double scale = 0.0;
  for (int i = 0; i < N; ++i) scale = std::max(scale, std::abs(e[static_cast<size_t>(i) * N + i]));
  const double group_tol = std::max(1e-10, 1e-10 * scale);

  out.values.reserve(static_cast<size_t>(n));
  out.vectors.reserve(static_cast<size_t>(n));
  size_t g0 = 0;
  while (g0 < order.size()) {
    size_t g1 = g0 + 1;
    const auto mu = [&](size_t r) { return e[static_cast<size_t>(order[r]) * N + order[r]]; };
    while (g1 < order.size() && mu(g1) - mu(g1 - 1) <= group_tol) ++g1;
    const size_t count = g1 - g0;
    if (count % 2 != 0)
      throw std::runtime_error("eigen_hermitian: embedding produced an odd degenerate group");

    // candidate complex images of the group's real eigenvectors
    std::vector<std::vector<std::complex<double>>> cand(count,
        std::vector<std::complex<double>>(static_cast<size_t>(n)));
    for (size_t r = 0; r < count; ++r) {
      const int col = order[g0 + r];
      for (int i = 0; i < n; ++i)
        cand[r][static_cast<size_t>(i)] = {v[static_cast<size_t>(i) * N + col],
                                           v[static_cast<size_t>(i + n) * N + col]};
    }
    double mu_mean = 0.0;
    for (size_t r = 0; r < count; ++r) mu_mean += mu(g0 + r);
    mu_mean /= static_cast<double>(count);

    std::vector<std::vector<std::complex<double>>> picked;
    while (picked.size() < count / 2) {
      double best = -1.0;
      size_t best_r = 0;
      std::vector<std::complex<double>> best_vec;
      for (size_t r = 0; r < cand.size(); ++r) {
        std::vector<std::complex<double>> w = cand[r];
        for (const auto& z : picked) {
          std::complex<double> proj{0.0, 0.0};
          for (int i = 0; i < n; ++i) proj += std::conj(z[static_cast<size_t>(i)]) * w[static_cast<size_t>(i)];
          for (int i = 0; i < n; ++i) w[static_cast<size_t>(i)] -= proj * z[static_cast<size_t>(i)];
        }
        double nrm = 0.0;
        for (const auto& c : w) nrm += std::norm(c);
        if (nrm > best) {
          best = nrm;
          best_r = r;
          best_vec = std::move(w);
        }
      }
      if (best <= 1e-12)
        throw std::runtime_error("eigen_hermitian: failed to pair embedded eigenvectors");
      const double inv = 1.0 / std::sqrt(best);
      for (auto& c : best_vec) c *= inv;
      picked.push_back(std::move(best_vec));
      cand.erase(cand.begin() + static_cast<std::ptrdiff_t>(best_r));
    }
    for (auto& z : picked) {
      out.values.push_back(mu_mean);
      out.vectors.push_back(std::move(z));
    }
    g0 = g1;
  }
  return out;
}

// Bloch block of the translation-invariant chain in the (A_k, B_k) basis.
inline HermitianMatrix kspace_block(double k, const ArrayParams& p) {
  p.validate();
  HermitianMatrix m(2);
  m.set(0, 0, photon_dispersion(k, p));
  m.set(0, 1, p.g_eff);
  m.set(1, 1, p.omega_m);
  return m;
}

enum class Boundary { Periodic, Open };

// Single-excitation Hamiltonian on the 2N-dimensional basis
// (a_1..a_N, b_1..b_N): photon diagonal delta_eff, phonon diagonal omega_m,
// hopping -G between neighboring cavities, on-site coupling g.
// A 2-site ring is rejected: the wrap bond would double the single bond.
inline HermitianMatrix realspace_hamiltonian(const ArrayParams& p, Boundary boundary) {
  p.validate();
  const int n = p.n_sites;
  if (boundary == Boundary::Periodic && n < 3)
    throw std::invalid_argument("realspace_hamiltonian: periodic chain needs n_sites >= 3");
  HermitianMatrix h(2 * n);
  const double de = p.delta_eff();
  for (int j = 0; j < n; ++j) {
    h.set(j, j, de);
    h.set(n + j, n + j, p.omega_m);
    h.set(j, n + j, p.g_eff);
  }
  for (int j = 0; j + 1 < n; ++j) h.set(j, j + 1, -p.hopping);
  if (boundary == Boundary::Periodic) h.set(n - 1, 0, -p.hopping);
  return h;
}

// Central-difference check value for the analytic group velocity.
inline double finite_difference_velocity(Branch br, double k, const ArrayParams& p,
                                         double h = 1e-5) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_difference_velocity: h must be > 0");
  return (polariton_frequency(br, k + h, p) - polariton_frequency(br, k - h, p)) / (2.0 * h);
}

}  // namespace omcrow
