#pragma once

// Independent reference machinery: an adaptive Dormand-Prince 8(5,3) integrator
// applied directly to i dpsi/dt = H(t) psi, a general scaling-and-squaring
// matrix exponential, and the RMS error metric used to score simulations.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "spinprop/algebra.hpp"
#include "spinprop/fields.hpp"
#include "spinprop/propagator.hpp"

namespace spinprop {

template <int N>
using StateSeries = std::vector<StateVector<N>>;

struct OracleConfig {
  double rel_tol = 1e-12;
  double abs_tol = 1e-12;
  std::size_t max_steps = 500'000'000;
};

class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// exp(-i s H) by Taylor series on a scaled copy followed by repeated squaring.
template <int N>
SquareOperator<N> dense_expm(const SquareOperator<N>& h, double s) {
  const auto a = Complex{0.0, -s} * h;

  double norm = 0.0;  // induced 1-norm
  for (int j = 0; j < N; ++j) {
    double column = 0.0;
    for (int i = 0; i < N; ++i) column += std::abs(a(i, j));
    norm = std::max(norm, column);
  }
  int squarings = 0;
  if (norm > 0.0) squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm))) + 5);
  const auto scaled = std::ldexp(1.0, -squarings) * a;

  constexpr int order = 18;
  auto result = SquareOperator<N>::identity();
  for (int k = order; k >= 1; --k) {
    result = (1.0 / k) * mat_mul(scaled, result);
    for (int i = 0; i < N; ++i) result(i, i) += 1.0;
  }
  for (int i = 0; i < squarings; ++i) result = mat_mul(result, result);
  return result;
}

/// eps = (1/K) sqrt( sum_k sum_m |psi_km - baseline_km|^2 ), K = number of samples.
template <int N>
double rms_error(std::span<const StateVector<N>> series, std::span<const StateVector<N>> baseline) {
  if (series.size() != baseline.size())
    throw std::invalid_argument("rms_error: series lengths differ (" +
                                std::to_string(series.size()) + " vs " +
                                std::to_string(baseline.size()) + ")");
  if (series.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t k = 0; k < series.size(); ++k)
    for (int m = 0; m < N; ++m) sum += std::norm(series[k][m] - baseline[k][m]);
  return std::sqrt(sum) / static_cast<double>(series.size());
}

namespace detail {

template <int N>
using Vec = std::array<Complex, N>;

template <int N, FieldSampler Sampler>
Vec<N> schroedinger_rhs(const Sampler& sampler, std::span<const double> sweep, double t,
                        const Vec<N>& y) {
  const auto h = hamiltonian<N>(sampler(t, sweep));
  Vec<N> out{};
  for (int i = 0; i < N; ++i) {
    Complex acc = 0.0;
    for (int j = 0; j < N; ++j) acc += h(i, j) * y[j];
    out[i] = Complex{acc.imag(), -acc.real()};  // -i * acc
  }
  return out;
}

// Dormand-Prince 8(5,3) tableau (Hairer, Norsett & Wanner).
struct DormandPrince853 {
  static constexpr int stages = 12;
  static constexpr std::array<double, stages> c = {
      0.0,
      0.05260015195876773187856,
      0.07890022793815159781784,
      0.11835034190722739672676,
      0.28164965809277260327324,
      0.33333333333333333333333,
      0.25,
      0.30769230769230769230769,
      0.65128205128205128205128,
      0.6,
      0.85714285714285714285714,
      1.0};
  // a[i][j], j < i
  static constexpr std::array<std::array<double, stages>, stages> a = {{
      {},
      {0.05260015195876773187856},
      {0.01972505698453789945446, 0.05917517095361369836338},
      {0.02958758547680684918169, 0.0, 0.08876275643042054754507},
      {0.24136513415926668550237, 0.0, -0.88454947932828608534486, 0.92483400326179200311574},
      {0.03703703703703703703704, 0.0, 0.0, 0.17082860872947387127960,
       0.12546768756682242501669},
      {0.03710937500000000000000, 0.0, 0.0, 0.17025221101954403931498,
       0.06021653898045596068502, -0.01757812500000000000000},
      {0.03709200011850479271088, 0.0, 0.0, 0.17038392571223999381021,
       0.10726203044637328465181, -0.01531943774862440175279, 0.00827378916381402288758},
      {0.62411095871607571711443, 0.0, 0.0, -3.36089262944694129406857,
       -0.86821934684172600681819, 27.5920996994467083049416, 20.1540675504778934086187,
       -43.4898841810699588477366},
      {0.47766253643826436589043, 0.0, 0.0, -2.48811461997166764192642,
       -0.59029082683684299637145, 21.2300514481811942347289, 15.2792336328824235832597,
       -33.2882109689848629194453, -0.02033120170850862613582},
      {-0.93714243008598732571704, 0.0, 0.0, 5.18637242884406370830024,
       1.09143734899672957818500, -8.14978701074692612513997, -18.5200656599969598641566,
       22.7394870993505042818970, 2.49360555267965238987089, -3.04676447189821950038237},
      {2.27331014751653820792360, 0.0, 0.0, -10.5344954667372501984067,
       -2.00087205822486249909676, -17.9589318631187989172766, 27.9488845294199600508500,
       -2.85899827713502369474066, -8.87285693353062954433549, 12.3605671757943030647266,
       0.64339274601576353035597},
  }};
  static constexpr std::array<double, stages> b = {
      0.05429373411656876223805, 0.0, 0.0, 0.0, 0.0,
      4.45031289275240888144114, 1.89151789931450038304282, -5.80120396001058478146721,
      0.31116436695781989440892, -0.15216094966251607855618, 0.20136540080403034837478,
      0.04471061572777259051769};
  // Fifth order error weights.
  static constexpr std::array<double, stages> e5 = {
      0.01312004499419488073250, 0.0, 0.0, 0.0, 0.0,
      -1.22515644637620444072057, -0.49575894965725019152141, 1.66437718245498653696153,
      -0.35032884874997368168865, 0.33417911871301747902973, 0.08192320648511571246571,
      -0.02235530786388629525884};
  // Third order error estimate: b - (bhh1 k1 + bhh2 k9 + bhh3 k12).
  static constexpr double bhh1 = 0.24409448818897637795276;
  static constexpr double bhh2 = 0.73384668828161185734136;
  static constexpr double bhh3 = 0.02205882352941176470588;
};

}  // namespace detail

/// Reference solution at the coarse sample times of `config`, from an
/// adaptive Dormand-Prince 8(5,3) integrator with PI step control. The
/// integrator lands exactly on each sample time and never renormalises.
template <int N, FieldSampler Sampler>
StateSeries<N> reference_solve(const Sampler& sampler, std::span<const double> sweep,
                               const SimulationConfig<N>& config, const OracleConfig& oc = {}) {
  using Tab = detail::DormandPrince853;
  using V = detail::Vec<N>;
  if (!(oc.rel_tol > 0.0) || !(oc.abs_tol > 0.0))
    throw std::invalid_argument("oracle tolerances must be positive");
  config.validate();

  const auto rhs = [&](double t, const V& y) {
    return detail::schroedinger_rhs<N>(sampler, sweep, t, y);
  };

  const std::size_t count = config.interval_count();
  StateSeries<N> out;
  out.reserve(count + 1);
  out.push_back(config.initial_state);

  V y = config.initial_state.amplitudes;
  double t = config.t0;
  std::array<V, Tab::stages> k{};
  k[0] = rhs(t, y);

  double f_norm = 0.0;
  for (const auto& v : k[0]) f_norm = std::max(f_norm, std::abs(v));
  double h = f_norm > 0.0 ? 0.1 / f_norm : config.coarse_step;
  double err_old = 1e-4;
  std::size_t steps = 0;

  constexpr double safety = 0.9, beta = 0.04, expo = 1.0 / 8.0 - beta * 0.2;
  constexpr double fac_min = 0.333, fac_max = 6.0;
  constexpr int components = 2 * N;

  for (std::size_t sample = 1; sample <= count; ++sample) {
    const double target = config.sample_time(sample);
    while (t < target) {
      if (++steps > oc.max_steps)
        throw OracleError("reference_solve: step budget exhausted at t = " + std::to_string(t));
      bool last = false;
      double step = h;
      if (t + step >= target) {
        step = target - t;
        last = true;
      }
      if (!(step > 0.0) || t + step == t)
        throw OracleError("reference_solve: step size underflow at t = " + std::to_string(t));

      for (int s = 1; s < Tab::stages; ++s) {
        V stage = y;
        for (int j = 0; j < s; ++j) {
          const double w = Tab::a[s][j];
          if (w == 0.0) continue;
          for (int i = 0; i < N; ++i) stage[i] += (step * w) * k[j][i];
        }
        k[s] = rhs(t + Tab::c[s] * step, stage);
      }

      V increment{};
      for (int s = 0; s < Tab::stages; ++s)
        if (Tab::b[s] != 0.0)
          for (int i = 0; i < N; ++i) increment[i] += Tab::b[s] * k[s][i];
      V y_new = y;
      for (int i = 0; i < N; ++i) y_new[i] += step * increment[i];

      double err5 = 0.0, err3 = 0.0;
      for (int i = 0; i < N; ++i) {
        Complex e5 = 0.0;
        for (int s = 0; s < Tab::stages; ++s) e5 += Tab::e5[s] * k[s][i];
        const Complex e3 =
            increment[i] - Tab::bhh1 * k[0][i] - Tab::bhh2 * k[8][i] - Tab::bhh3 * k[11][i];
        const double scale_re =
            oc.abs_tol + oc.rel_tol * std::max(std::abs(y[i].real()), std::abs(y_new[i].real()));
        const double scale_im =
            oc.abs_tol + oc.rel_tol * std::max(std::abs(y[i].imag()), std::abs(y_new[i].imag()));
        err5 += std::pow(e5.real() / scale_re, 2) + std::pow(e5.imag() / scale_im, 2);
        err3 += std::pow(e3.real() / scale_re, 2) + std::pow(e3.imag() / scale_im, 2);
      }
      const double denominator = std::sqrt(components * (err5 + 0.01 * err3));
      const double err = denominator > 0.0 ? err5 * step / denominator : 0.0;
      if (!std::isfinite(err)) throw OracleError("reference_solve: non-finite error estimate");

      const double fac11 = std::pow(std::max(err, 1e-300), expo);
      if (err <= 1.0) {
        const double fac =
            std::clamp(fac11 / std::pow(err_old, beta) / safety, 1.0 / fac_max, 1.0 / fac_min);
        err_old = std::max(err, 1e-4);
        t = last ? target : t + step;
        y = y_new;
        k[0] = rhs(t, y);
        // A step truncated to land on a sample time says little about the
        // natural step size, so the previous proposal is kept.
        if (!last) h = step / fac;
      } else {
        h = step / std::min(1.0 / fac_min, fac11 / safety);
      }
    }
    out.push_back(StateVector<N>{y});
  }
  return out;
}

}  // namespace spinprop
