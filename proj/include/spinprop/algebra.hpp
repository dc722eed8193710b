#pragma once

// Fixed-size complex linear algebra for two- and three-level systems, plus the
// spin and quadrupole operator constants.

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>

namespace spinprop {

using Complex = std::complex<double>;

enum class Spin { half, one };

/// Number of levels for a spin quantum number.
constexpr int dimension_of(Spin spin) { return spin == Spin::half ? 2 : 3; }

template <int N>
constexpr Spin spin_of() {
  static_assert(N == 2 || N == 3, "only spin-half and spin-one are supported");
  return N == 2 ? Spin::half : Spin::one;
}

/// Dense N x N complex matrix, row-major.
template <int N>
struct SquareOperator {
  static_assert(N == 2 || N == 3, "only 2x2 and 3x3 operators are supported");
  static constexpr int dim = N;

  std::array<Complex, N * N> entries{};

  constexpr Complex& operator()(int row, int col) { return entries[row * N + col]; }
  constexpr const Complex& operator()(int row, int col) const { return entries[row * N + col]; }

  static constexpr SquareOperator zero() { return {}; }

  static constexpr SquareOperator identity() {
    SquareOperator out{};
    for (int i = 0; i < N; ++i) out(i, i) = 1.0;
    return out;
  }

  static constexpr SquareOperator diagonal(const std::array<Complex, N>& diag) {
    SquareOperator out{};
    for (int i = 0; i < N; ++i) out(i, i) = diag[i];
    return out;
  }

  SquareOperator& operator+=(const SquareOperator& other) {
    for (std::size_t i = 0; i < entries.size(); ++i) entries[i] += other.entries[i];
    return *this;
  }
  SquareOperator& operator-=(const SquareOperator& other) {
    for (std::size_t i = 0; i < entries.size(); ++i) entries[i] -= other.entries[i];
    return *this;
  }
  SquareOperator& operator*=(Complex scale) {
    for (auto& e : entries) e *= scale;
    return *this;
  }

  friend SquareOperator operator+(SquareOperator a, const SquareOperator& b) { return a += b; }
  friend SquareOperator operator-(SquareOperator a, const SquareOperator& b) { return a -= b; }
  friend SquareOperator operator*(Complex s, SquareOperator a) { return a *= s; }
  friend SquareOperator operator*(SquareOperator a, Complex s) { return a *= s; }
  friend bool operator==(const SquareOperator&, const SquareOperator&) = default;
};

using Operator2 = SquareOperator<2>;
using Operator3 = SquareOperator<3>;

/// Complex amplitudes of a pure state.
template <int N>
struct StateVector {
  static_assert(N == 2 || N == 3, "only 2- and 3-level states are supported");
  static constexpr int dim = N;

  std::array<Complex, N> amplitudes{};

  constexpr Complex& operator[](int i) { return amplitudes[i]; }
  constexpr const Complex& operator[](int i) const { return amplitudes[i]; }

  double norm() const {
    double sum = 0.0;
    for (const auto& a : amplitudes) sum += std::norm(a);
    return std::sqrt(sum);
  }

  friend bool operator==(const StateVector&, const StateVector&) = default;
};

template <int N>
SquareOperator<N> mat_mul(const SquareOperator<N>& a, const SquareOperator<N>& b) {
  SquareOperator<N> out{};
  for (int i = 0; i < N; ++i) {
    for (int k = 0; k < N; ++k) {
      const Complex aik = a(i, k);
      for (int j = 0; j < N; ++j) out(i, j) += aik * b(k, j);
    }
  }
  return out;
}

template <int N>
SquareOperator<N> operator*(const SquareOperator<N>& a, const SquareOperator<N>& b) {
  return mat_mul(a, b);
}

template <int N>
SquareOperator<N> adjoint(const SquareOperator<N>& a) {
  SquareOperator<N> out{};
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) out(i, j) = std::conj(a(j, i));
  return out;
}

/// [A, B] = AB - BA
template <int N>
SquareOperator<N> commutator(const SquareOperator<N>& a, const SquareOperator<N>& b) {
  return mat_mul(a, b) - mat_mul(b, a);
}

template <int N>
StateVector<N> apply(const SquareOperator<N>& a, const StateVector<N>& psi) {
  StateVector<N> out{};
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) out[i] += a(i, j) * psi[j];
  return out;
}

template <int N>
StateVector<N> operator*(const SquareOperator<N>& a, const StateVector<N>& psi) {
  return apply(a, psi);
}

template <int N>
Complex trace(const SquareOperator<N>& a) {
  Complex sum = 0.0;
  for (int i = 0; i < N; ++i) sum += a(i, i);
  return sum;
}

/// psi^dagger A psi, including its (round-off sized) imaginary part.
template <int N>
Complex expectation_complex(const SquareOperator<N>& a, const StateVector<N>& psi) {
  const auto a_psi = apply(a, psi);
  Complex sum = 0.0;
  for (int i = 0; i < N; ++i) sum += std::conj(psi[i]) * a_psi[i];
  return sum;
}

/// Re(psi^dagger A psi) for Hermitian A.
template <int N>
double expectation(const SquareOperator<N>& a, const StateVector<N>& psi) {
  return expectation_complex(a, psi).real();
}

/// Largest elementwise modulus of A - B.
template <int N>
double max_abs_diff(const SquareOperator<N>& a, const SquareOperator<N>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.entries.size(); ++i)
    worst = std::max(worst, std::abs(a.entries[i] - b.entries[i]));
  return worst;
}

template <int N>
double max_abs_diff(const StateVector<N>& a, const StateVector<N>& b) {
  double worst = 0.0;
  for (int i = 0; i < N; ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

/// max |(U^dagger U - I)_ij|
template <int N>
double unitarity_defect(const SquareOperator<N>& u) {
  return max_abs_diff(mat_mul(adjoint(u), u), SquareOperator<N>::identity());
}

template <int N>
Complex determinant(const SquareOperator<N>& a) {
  if constexpr (N == 2) {
    return a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
  } else {
    return a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) -
           a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0)) +
           a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
  }
}

/// Dimensionless spin operators. For spin-half Q is the zero matrix so that
/// every code path can treat the four field components uniformly.
template <int N>
struct SpinOperators {
  SquareOperator<N> jx, jy, jz, q;
};

template <int N>
SpinOperators<N> spin_operators() {
  constexpr Complex i{0.0, 1.0};
  SpinOperators<N> ops{};
  if constexpr (N == 2) {
    ops.jx(0, 1) = 0.5;
    ops.jx(1, 0) = 0.5;
    ops.jy(0, 1) = -0.5 * i;
    ops.jy(1, 0) = 0.5 * i;
    ops.jz(0, 0) = 0.5;
    ops.jz(1, 1) = -0.5;
  } else {
    const double r = 1.0 / std::sqrt(2.0);
    ops.jx(0, 1) = r;
    ops.jx(1, 0) = r;
    ops.jx(1, 2) = r;
    ops.jx(2, 1) = r;
    ops.jy(0, 1) = -r * i;
    ops.jy(1, 0) = r * i;
    ops.jy(1, 2) = -r * i;
    ops.jy(2, 1) = r * i;
    ops.jz(0, 0) = 1.0;
    ops.jz(2, 2) = -1.0;
    ops.q(0, 0) = 1.0 / 3.0;
    ops.q(1, 1) = -2.0 / 3.0;
    ops.q(2, 2) = 1.0 / 3.0;
  }
  return ops;
}

/// Magnetic quantum number m of basis level `level` (ordered m = j, j-1, ..., -j).
template <int N>
constexpr double magnetic_number(int level) {
  return N == 2 ? 0.5 - level : 1.0 - level;
}

}  // namespace spinprop
