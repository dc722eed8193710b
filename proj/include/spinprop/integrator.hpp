#pragma once

// Single fine-step propagators u(t + dt, t).

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

#include "spinprop/exponentiator.hpp"
#include "spinprop/fields.hpp"

namespace spinprop {

enum class StepMethod { cf4, midpoint_euler, heun_euler };

inline std::string_view to_string(StepMethod m) {
  switch (m) {
    case StepMethod::cf4: return "cf4";
    case StepMethod::midpoint_euler: return "midpoint";
    case StepMethod::heun_euler: return "heun";
  }
  return "?";
}

inline StepMethod parse_step_method(std::string_view name) {
  if (name == "cf4") return StepMethod::cf4;
  if (name == "midpoint" || name == "midpoint_euler") return StepMethod::midpoint_euler;
  if (name == "heun" || name == "heun_euler") return StepMethod::heun_euler;
  throw std::invalid_argument("unknown method '" + std::string(name) + "'");
}

/// Frame rotating about z at omega_r. Local time is measured from `origin`,
/// the start of the enclosing coarse interval.
struct RotatingFrame {
  bool enabled = false;
  double omega_r = 0.0;
  double origin = 0.0;
};

/// Express a lab-frame sample in the frame R(t) = exp(i omega_r Jz t):
/// H_r = R (wx Jx + wy Jy) R^dagger + (wz - omega_r) Jz + wq Q.
inline FieldSample to_rotating_frame(const FieldSample& sample, double t_local, double omega_r) {
  const double angle = omega_r * t_local;
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * sample.wx + s * sample.wy, -s * sample.wx + c * sample.wy, sample.wz - omega_r,
          sample.wq};
}

/// Two-point Gauss-Legendre nodes on [t, t + dt].
inline std::pair<double, double> gauss_legendre_times(double t, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
  const double offset = 0.5 / std::sqrt(3.0);
  return {t + (0.5 - offset) * dt, t + (0.5 + offset) * dt};
}

/// Commutator-free fourth order weights: h1 = w+ f1 + w- f2, h2 = w- f1 + w+ f2.
inline std::pair<FieldSample, FieldSample> cf4_weights(const FieldSample& f1,
                                                       const FieldSample& f2) {
  const double root3 = std::sqrt(3.0);
  const double major = (3.0 + 2.0 * root3) / 12.0;
  const double minor = (3.0 - 2.0 * root3) / 12.0;
  return {major * f1 + minor * f2, minor * f1 + major * f2};
}

namespace detail {

template <FieldSampler Sampler>
FieldSample sample_in_frame(const Sampler& sampler, std::span<const double> sweep, double t,
                            const RotatingFrame& frame) {
  FieldSample f = sampler(t, sweep);
  if (!f.finite()) throw std::domain_error("non-finite field sample at t = " + std::to_string(t));
  if (frame.enabled) f = to_rotating_frame(f, t - frame.origin, frame.omega_r);
  return f;
}

}  // namespace detail

template <int N, FieldSampler Sampler>
SquareOperator<N> step_cf4(const Sampler& sampler, std::span<const double> sweep, double t,
                           double dt, const RotatingFrame& frame, int tau = default_tau) {
  const auto [t1, t2] = gauss_legendre_times(t, dt);
  const auto f1 = detail::sample_in_frame(sampler, sweep, t1, frame);
  const auto f2 = detail::sample_in_frame(sampler, sweep, t2, frame);
  const auto [h1, h2] = cf4_weights(f1, f2);
  return mat_mul(exponentiate<N>(ExponentArgs::from_field(h2, dt), tau),
                 exponentiate<N>(ExponentArgs::from_field(h1, dt), tau));
}

template <int N, FieldSampler Sampler>
SquareOperator<N> step_midpoint_euler(const Sampler& sampler, std::span<const double> sweep,
                                      double t, double dt, const RotatingFrame& frame,
                                      int tau = default_tau) {
  if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
  const auto f = detail::sample_in_frame(sampler, sweep, t + 0.5 * dt, frame);
  return exponentiate<N>(ExponentArgs::from_field(f, dt), tau);
}

/// Trapezoidal sampling mapped to one exponential of the averaged field.
template <int N, FieldSampler Sampler>
SquareOperator<N> step_heun_euler(const Sampler& sampler, std::span<const double> sweep,
                                  double t, double dt, const RotatingFrame& frame,
                                  int tau = default_tau) {
  if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
  const auto f0 = detail::sample_in_frame(sampler, sweep, t, frame);
  const auto f1 = detail::sample_in_frame(sampler, sweep, t + dt, frame);
  return exponentiate<N>(ExponentArgs::from_field(0.5 * (f0 + f1), dt), tau);
}

template <int N, FieldSampler Sampler>
SquareOperator<N> step(StepMethod method, const Sampler& sampler, std::span<const double> sweep,
                       double t, double dt, const RotatingFrame& frame, int tau = default_tau) {
  switch (method) {
    case StepMethod::cf4: return step_cf4<N>(sampler, sweep, t, dt, frame, tau);
    case StepMethod::midpoint_euler:
      return step_midpoint_euler<N>(sampler, sweep, t, dt, frame, tau);
    case StepMethod::heun_euler: return step_heun_euler<N>(sampler, sweep, t, dt, frame, tau);
  }
  throw std::invalid_argument("unknown step method");
}

}  // namespace spinprop
