#pragma once

// Field functions: pure samplers of the Hamiltonian coefficients
// H(t) = wx Jx + wy Jy + wz Jz + wq Q (angular frequency units, hbar = 1).

#include <cmath>
#include <concepts>
#include <functional>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "spinprop/algebra.hpp"

namespace spinprop {

/// Field coefficients in rad/s at one instant.
struct FieldSample {
  double wx = 0.0;
  double wy = 0.0;
  double wz = 0.0;
  double wq = 0.0;

  FieldSample& operator+=(const FieldSample& o) {
    wx += o.wx;
    wy += o.wy;
    wz += o.wz;
    wq += o.wq;
    return *this;
  }
  FieldSample& operator*=(double s) {
    wx *= s;
    wy *= s;
    wz *= s;
    wq *= s;
    return *this;
  }
  friend FieldSample operator+(FieldSample a, const FieldSample& b) { return a += b; }
  friend FieldSample operator*(double s, FieldSample a) { return a *= s; }
  friend FieldSample operator*(FieldSample a, double s) { return a *= s; }
  friend bool operator==(const FieldSample&, const FieldSample&) = default;

  bool finite() const {
    return std::isfinite(wx) && std::isfinite(wy) && std::isfinite(wz) && std::isfinite(wq);
  }
};

/// Anything callable as `sampler(t, sweep) -> FieldSample`. Samplers must be
/// pure and safe to call from several threads at once.
template <class F>
concept FieldSampler = std::invocable<const F&, double, std::span<const double>> &&
    std::convertible_to<std::invoke_result_t<const F&, double, std::span<const double>>,
                        FieldSample>;

/// Type-erased sampler for runtime-selected scenarios.
using FieldFunction = std::function<FieldSample(double, std::span<const double>)>;

/// Assemble wx Jx + wy Jy + wz Jz + wq Q. wq is dropped for spin-half.
template <int N>
SquareOperator<N> hamiltonian(const FieldSample& f) {
  static const auto ops = spin_operators<N>();
  SquareOperator<N> h = f.wx * ops.jx + f.wy * ops.jy + f.wz * ops.jz;
  if constexpr (N == 3) h += f.wq * ops.q;
  return h;
}

namespace fields {

/// A single cycle of a sine wave: sin(x) on [0, 2 pi], zero elsewhere.
inline double sinp(double x) {
  if (x < 0.0 || x > 2.0 * std::numbers::pi) return 0.0;
  return std::sin(x);
}

inline double sweep_or(std::span<const double> sweep, std::size_t index, double fallback) {
  return index < sweep.size() ? sweep[index] : fallback;
}

/// Defaults for the dressed-spin sensing benchmark.
struct BenchmarkDefaults {
  static constexpr double bias = 2.0 * std::numbers::pi * 700e3;   // omega
  static constexpr double dressing = 2.0 * std::numbers::pi * 1e3;  // Omega
  static constexpr double pulse = 2.0 * std::numbers::pi * 70.0;    // Omega_p
  static constexpr double pulse_time = 23.3e-3;                     // t_p
};

/// wz = omega + Omega_p sinp(Omega (t - t_p)), wx = 2 Omega cos(omega t).
/// sweep = [omega, Omega, Omega_p, t_p]; missing entries take the defaults.
inline FieldSample benchmark_field(double t, std::span<const double> sweep) {
  const double bias = sweep_or(sweep, 0, BenchmarkDefaults::bias);
  const double dressing = sweep_or(sweep, 1, BenchmarkDefaults::dressing);
  const double pulse = sweep_or(sweep, 2, BenchmarkDefaults::pulse);
  const double pulse_time = sweep_or(sweep, 3, BenchmarkDefaults::pulse_time);
  FieldSample f;
  f.wx = 2.0 * dressing * std::cos(bias * t);
  f.wz = bias + pulse * sinp(dressing * (t - pulse_time));
  return f;
}

/// Linearly polarised resonant drive: wz = w0, wx = 2 Omega cos(w0 t).
/// sweep = [w0, Omega].
inline FieldSample rabi_field(double t, std::span<const double> sweep) {
  const double bias = sweep_or(sweep, 0, 2.0 * std::numbers::pi * 1e6);
  const double rabi = sweep_or(sweep, 1, 2.0 * std::numbers::pi * 1e3);
  FieldSample f;
  f.wx = 2.0 * rabi * std::cos(bias * t);
  f.wz = bias;
  return f;
}

/// Circularly polarised drive, exactly co-rotating with the bias:
/// wx = Omega cos(w0 t), wy = Omega sin(w0 t), wz = w0. sweep = [w0, Omega].
inline FieldSample circular_rabi_field(double t, std::span<const double> sweep) {
  const double bias = sweep_or(sweep, 0, 2.0 * std::numbers::pi * 1e6);
  const double rabi = sweep_or(sweep, 1, 2.0 * std::numbers::pi * 1e3);
  FieldSample f;
  f.wx = rabi * std::cos(bias * t);
  f.wy = rabi * std::sin(bias * t);
  f.wz = bias;
  return f;
}

/// sweep = [wx, wy, wz, wq], passed straight through.
inline FieldSample constant_field(double, std::span<const double> sweep) {
  return {sweep_or(sweep, 0, 0.0), sweep_or(sweep, 1, 0.0), sweep_or(sweep, 2, 0.0),
          sweep_or(sweep, 3, 0.0)};
}

/// Position-dependent bias in a field gradient: wz = x - 2 y, plus a constant
/// transverse drive wx. sweep = [x, y, wx].
inline FieldSample gradient_field(double, std::span<const double> sweep) {
  FieldSample f;
  f.wz = sweep_or(sweep, 0, 0.0) - 2.0 * sweep_or(sweep, 1, 0.0);
  f.wx = sweep_or(sweep, 2, 0.0);
  return f;
}

struct Scenario {
  std::string_view name;
  FieldSample (*function)(double, std::span<const double>);
  std::vector<std::string_view> parameter_names;
  std::vector<double> defaults;
  std::string_view description;
};

inline const std::vector<Scenario>& scenarios() {
  static const std::vector<Scenario> registry = {
      {"benchmark",
       benchmark_field,
       {"omega", "Omega", "Omega_p", "t_p"},
       {BenchmarkDefaults::bias, BenchmarkDefaults::dressing, BenchmarkDefaults::pulse,
        BenchmarkDefaults::pulse_time},
       "dressed spin with a single-cycle sensing pulse"},
      {"rabi",
       rabi_field,
       {"w0", "Omega"},
       {2.0 * std::numbers::pi * 1e6, 2.0 * std::numbers::pi * 1e3},
       "linearly polarised resonant drive"},
      {"circular_rabi",
       circular_rabi_field,
       {"w0", "Omega"},
       {2.0 * std::numbers::pi * 1e6, 2.0 * std::numbers::pi * 1e3},
       "circularly polarised resonant drive"},
      {"constant", constant_field, {"wx", "wy", "wz", "wq"}, {0.0, 0.0, 0.0, 0.0},
       "time-independent field"},
      {"gradient", gradient_field, {"x", "y", "wx"}, {0.0, 0.0, 0.0},
       "bias wz = x - 2y from a field gradient"},
  };
  return registry;
}

inline const Scenario& find_scenario(std::string_view name) {
  for (const auto& s : scenarios())
    if (s.name == name) return s;
  throw std::invalid_argument("unknown scenario '" + std::string(name) + "'");
}

}  // namespace fields
}  // namespace spinprop
