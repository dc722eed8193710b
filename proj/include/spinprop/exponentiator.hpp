#pragma once

// Structured exponentials exp(-i (ax Jx + ay Jy + az Jz + aq Q)).
//
// Spin-half uses the closed Rodrigues form. Spin-one uses a symmetric
// (leapfrog) Lie-Trotter factor
//
//   T = exp(-i D/2) exp(-i Phi J_phi) exp(-i D/2),  D = z Jz + q Q,
//
// on arguments scaled by 1/2^tau, then squares T tau times. Squaring is done
// on the residual a = T - I via (a + 2I) a, and the diagonal of T - I is built
// from expm1-style kernels, so the near-identity factor keeps full relative
// precision.

#include <cmath>
#include <numbers>

#include "spinprop/algebra.hpp"
#include "spinprop/fields.hpp"

namespace spinprop {

/// Dimensionless exponent coefficients (field x time step, in rad).
struct ExponentArgs {
  double ax = 0.0;
  double ay = 0.0;
  double az = 0.0;
  double aq = 0.0;

  static ExponentArgs from_field(const FieldSample& f, double dt) {
    return {f.wx * dt, f.wy * dt, f.wz * dt, f.wq * dt};
  }
  ExponentArgs operator-() const { return {-ax, -ay, -az, -aq}; }
};

inline constexpr int default_tau = 24;

/// Radius bound for convergence of the Magnus series.
inline constexpr double magnus_convergence_radius = 1.08686870;

namespace detail {

/// e^{i theta} - 1 without cancellation.
inline Complex expm1_i(double theta) {
  const double s = std::sin(0.5 * theta);
  return {-2.0 * s * s, std::sin(theta)};
}

inline Complex cis(double theta) { return {std::cos(theta), std::sin(theta)}; }

}  // namespace detail

/// Closed-form SU(2) exponential exp(-i (ax Jx + ay Jy + az Jz)); aq ignored.
inline Operator2 expm_su2(const ExponentArgs& args) {
  const double r = std::hypot(args.ax, args.ay, args.az);
  if (r == 0.0) return Operator2::identity();
  const double c = std::cos(0.5 * r);
  const double s = std::sin(0.5 * r) / r;
  // -i s (ax sx + ay sy + az sz)
  Operator2 u;
  u(0, 0) = {c, -s * args.az};
  u(1, 1) = {c, s * args.az};
  u(0, 1) = {-s * args.ay, -s * args.ax};
  u(1, 0) = {s * args.ay, -s * args.ax};
  return u;
}

/// T - I for the leapfrog factor with already-scaled arguments.
/// `amplitude` >= 0 and `phase` describe the transverse part amplitude * J_phi.
inline Operator3 trotter_factor_residual(double amplitude, double phase, double z, double q) {
  const double s_half = std::sin(0.5 * amplitude);
  const double sin_sq_half = s_half * s_half;
  const double sin_full = std::sin(amplitude);
  const double r = std::numbers::sqrt2 / 2.0;

  // Diagonal phases of exp(-i D): D = diag(z + q/3, -2q/3, -z + q/3).
  const double theta_up = z + q / 3.0;
  const double theta_mid = 2.0 * q / 3.0;
  const double theta_down = -z + q / 3.0;

  Operator3 a;
  // cos^2(P/2) e^{-i theta} - 1 = -sin^2(P/2) e^{-i theta} + expm1(-i theta)
  a(0, 0) = -sin_sq_half * detail::cis(-theta_up) + detail::expm1_i(-theta_up);
  // cos(P) e^{i theta} - 1 = -2 sin^2(P/2) e^{i theta} + expm1(i theta)
  a(1, 1) = -2.0 * sin_sq_half * detail::cis(theta_mid) + detail::expm1_i(theta_mid);
  a(2, 2) = -sin_sq_half * detail::cis(-theta_down) + detail::expm1_i(-theta_down);

  const Complex minus_i{0.0, -1.0};
  const double half_z = 0.5 * z;
  const double sixth_q = q / 6.0;
  a(0, 1) = minus_i * r * sin_full * detail::cis(-half_z + sixth_q - phase);
  a(1, 0) = minus_i * r * sin_full * detail::cis(-half_z + sixth_q + phase);
  a(1, 2) = minus_i * r * sin_full * detail::cis(half_z + sixth_q - phase);
  a(2, 1) = minus_i * r * sin_full * detail::cis(half_z + sixth_q + phase);
  a(0, 2) = -sin_sq_half * detail::cis(-2.0 * sixth_q - 2.0 * phase);
  a(2, 0) = -sin_sq_half * detail::cis(-2.0 * sixth_q + 2.0 * phase);
  return a;
}

/// Given a = M - I, returns M^2 - I = (a + 2I) a.
template <int N>
SquareOperator<N> residual_square(const SquareOperator<N>& a) {
  auto shifted = a;
  for (int i = 0; i < N; ++i) shifted(i, i) += 2.0;
  return mat_mul(shifted, a);
}

/// Lie-Trotter exponential exp(-i (ax Jx + ay Jy + az Jz + aq Q)) with n = 2^tau.
inline Operator3 expm_su3(const ExponentArgs& args, int tau = default_tau) {
  const double n = std::ldexp(1.0, tau);
  const double amplitude = std::hypot(args.ax, args.ay) / n;
  const double phase = (args.ax == 0.0 && args.ay == 0.0) ? 0.0 : std::atan2(args.ay, args.ax);
  auto residual = trotter_factor_residual(amplitude, phase, args.az / n, args.aq / n);
  for (int i = 0; i < tau; ++i) residual = residual_square(residual);
  for (int i = 0; i < 3; ++i) residual(i, i) += 1.0;
  return residual;
}

/// Structured exponential for either dimension.
template <int N>
SquareOperator<N> exponentiate(const ExponentArgs& args, int tau = default_tau) {
  if constexpr (N == 2) {
    return expm_su2(args);
  } else {
    return expm_su3(args, tau);
  }
}

/// exp(-i angle Jz), exactly diagonal.
template <int N>
SquareOperator<N> z_rotation(double angle) {
  std::array<Complex, N> diag{};
  for (int i = 0; i < N; ++i) diag[i] = detail::cis(-angle * magnetic_number<N>(i));
  return SquareOperator<N>::diagonal(diag);
}

/// Advisory check that a single Magnus step lies within the convergence radius.
inline bool magnus_convergence_check(double field_norm_bound, double dt) {
  return field_norm_bound * dt < magnus_convergence_radius;
}

}  // namespace spinprop
