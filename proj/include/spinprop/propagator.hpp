#pragma once

// Coarse/fine time discretisation. Each coarse interval operator U_k is an
// independent product of fine steps, so the U_k are computed in parallel and
// then applied to the initial state in order: psi_k = U_k psi_{k-1}.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <exception>
#include <limits>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "spinprop/algebra.hpp"
#include "spinprop/exponentiator.hpp"
#include "spinprop/fields.hpp"
#include "spinprop/integrator.hpp"

namespace spinprop {

template <int N>
struct SimulationConfig {
  double t0 = 0.0;
  double t_end = 1.0;
  double coarse_step = 1.0;       // Delta t, output sampling interval
  std::size_t fine_steps = 1;     // L, fine steps per coarse interval
  StepMethod method = StepMethod::cf4;
  bool rotating_frame = true;
  int tau = default_tau;
  StateVector<N> initial_state = {{Complex{1.0, 0.0}}};

  static constexpr Spin spin = spin_of<N>();

  double fine_step() const { return coarse_step / static_cast<double>(fine_steps); }

  /// Throws std::invalid_argument naming the offending field.
  void validate() const {
    if (!std::isfinite(t0)) throw std::invalid_argument("t0: must be finite");
    if (!(t_end > t0) || !std::isfinite(t_end))
      throw std::invalid_argument("t_end: must be finite and greater than t0");
    if (!(coarse_step > 0.0) || !std::isfinite(coarse_step))
      throw std::invalid_argument("dt_coarse: must be positive");
    if (fine_steps < 1) throw std::invalid_argument("fine_steps: must be at least 1");
    if (tau < 0 || tau > 30) throw std::invalid_argument("tau: must lie in [0, 30]");
    if (std::abs(initial_state.norm() - 1.0) > 1e-9)
      throw std::invalid_argument("initial_state: must be normalised");
  }

  /// Number of coarse intervals K. A trailing partial interval counts as one.
  std::size_t interval_count() const {
    const double ratio = (t_end - t0) / coarse_step;
    const double nearest = std::round(ratio);
    if (nearest >= 1.0 && std::abs(ratio - nearest) <= 1e-9 * ratio)
      return static_cast<std::size_t>(nearest);
    return static_cast<std::size_t>(std::ceil(ratio));
  }

  bool ragged() const {
    const double ratio = (t_end - t0) / coarse_step;
    const double nearest = std::round(ratio);
    return !(nearest >= 1.0 && std::abs(ratio - nearest) <= 1e-9 * ratio);
  }

  /// Sample time t_k, k in [0, K].
  double sample_time(std::size_t k) const {
    if (k == interval_count() && ragged()) return t_end;
    return t0 + static_cast<double>(k) * coarse_step;
  }

  /// Length of interval k; only a ragged final interval differs from coarse_step.
  double interval_length(std::size_t k) const {
    if (k + 1 == interval_count() && ragged()) return t_end - sample_time(k);
    return coarse_step;
  }

  /// Rough memory footprint of the results in bytes.
  std::size_t memory_estimate() const {
    const std::size_t k = interval_count();
    return k * (N * N + N) * sizeof(Complex);
  }
};

/// Raised when evaluating interval `interval` fails.
class IntervalError : public std::runtime_error {
 public:
  IntervalError(std::size_t interval, const std::string& what)
      : std::runtime_error("interval " + std::to_string(interval) + ": " + what),
        interval_(interval) {}
  std::size_t interval() const { return interval_; }

 private:
  std::size_t interval_;
};

using SpinProjection = std::array<double, 3>;

template <int N>
std::vector<SpinProjection> spin_projection(std::span<const StateVector<N>> states) {
  static const auto ops = spin_operators<N>();
  std::vector<SpinProjection> out;
  out.reserve(states.size());
  for (const auto& psi : states)
    out.push_back({expectation(ops.jx, psi), expectation(ops.jy, psi), expectation(ops.jz, psi)});
  return out;
}

template <int N>
class Results {
 public:
  Results() = default;
  Results(std::vector<double> times, std::vector<StateVector<N>> states,
          std::vector<SquareOperator<N>> operators)
      : times_(std::move(times)), states_(std::move(states)), operators_(std::move(operators)) {}

  const std::vector<double>& times() const { return times_; }
  const std::vector<StateVector<N>>& states() const { return states_; }
  const std::vector<SquareOperator<N>>& interval_operators() const { return operators_; }

  /// <Jx>, <Jy>, <Jz> at every sample time; computed on first request.
  const std::vector<SpinProjection>& spin_projection() const {
    std::call_once(projection_->once, [this] {
      projection_->rows = spinprop::spin_projection<N>(std::span(states_));
    });
    return projection_->rows;
  }

 private:
  struct Projection {
    std::once_flag once;
    std::vector<SpinProjection> rows;
  };

  std::vector<double> times_;
  std::vector<StateVector<N>> states_;
  std::vector<SquareOperator<N>> operators_;
  std::shared_ptr<Projection> projection_ = std::make_shared<Projection>();
};

/// Lab-frame time-evolution operator over coarse interval k.
template <int N, FieldSampler Sampler>
SquareOperator<N> interval_operator(std::size_t k, const SimulationConfig<N>& config,
                                    const Sampler& sampler, std::span<const double> sweep) {
  try {
    const double start = config.sample_time(k);
    const double length = config.interval_length(k);
    const double dt = length / static_cast<double>(config.fine_steps);

    RotatingFrame frame;
    frame.enabled = config.rotating_frame;
    frame.origin = start;
    if (frame.enabled) {
      frame.omega_r = FieldSample(sampler(start + 0.5 * length, sweep)).wz;
      if (!std::isfinite(frame.omega_r)) throw std::domain_error("non-finite frame rate");
    }

    auto u = SquareOperator<N>::identity();
    for (std::size_t l = 0; l < config.fine_steps; ++l) {
      const double t = start + static_cast<double>(l) * dt;
      u = mat_mul(step<N>(config.method, sampler, sweep, t, dt, frame, config.tau), u);
    }
    if (frame.enabled) u = mat_mul(z_rotation<N>(frame.omega_r * length), u);
    return u;
  } catch (const IntervalError&) {
    throw;
  } catch (const std::exception& e) {
    throw IntervalError(k, e.what());
  }
}

/// Resolves a requested worker count; 0 means one per hardware thread.
inline std::size_t resolve_threads(std::size_t requested) {
  if (requested != 0) return requested;
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// All interval operators. Each slot is written by exactly one task, so the
/// output does not depend on the number of threads.
template <int N, FieldSampler Sampler>
std::vector<SquareOperator<N>> compute_all_operators(const SimulationConfig<N>& config,
                                                     const Sampler& sampler,
                                                     std::span<const double> sweep,
                                                     std::size_t threads = 0) {
  config.validate();
  const std::size_t count = config.interval_count();
  std::vector<SquareOperator<N>> out(count);
  const std::size_t workers = std::min(resolve_threads(threads), std::max<std::size_t>(count, 1));

  if (workers <= 1) {
    for (std::size_t k = 0; k < count; ++k) out[k] = interval_operator(k, config, sampler, sweep);
    return out;
  }

  constexpr std::size_t chunk = 32;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex error_mutex;
  std::size_t error_index = std::numeric_limits<std::size_t>::max();
  std::exception_ptr error;

  auto work = [&] {
    while (!failed.load(std::memory_order_relaxed)) {
      const std::size_t begin = next.fetch_add(chunk, std::memory_order_relaxed);
      if (begin >= count) return;
      const std::size_t end = std::min(count, begin + chunk);
      for (std::size_t k = begin; k < end; ++k) {
        try {
          out[k] = interval_operator(k, config, sampler, sweep);
        } catch (const IntervalError& e) {
          std::lock_guard lock(error_mutex);
          if (e.interval() < error_index) {
            error_index = e.interval();
            error = std::current_exception();
          }
          failed.store(true, std::memory_order_relaxed);
          return;
        }
      }
    }
  };

  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (error) std::rethrow_exception(error);
  return out;
}

/// psi_0 = initial, psi_k = U_k psi_{k-1}.
template <int N>
std::vector<StateVector<N>> accumulate_states(std::span<const SquareOperator<N>> operators,
                                              const StateVector<N>& initial) {
  std::vector<StateVector<N>> states;
  states.reserve(operators.size() + 1);
  states.push_back(initial);
  for (const auto& u : operators) states.push_back(apply(u, states.back()));
  return states;
}

template <int N, FieldSampler Sampler>
Results<N> evaluate(const SimulationConfig<N>& config, const Sampler& sampler,
                    std::span<const double> sweep, std::size_t threads = 0) {
  auto operators = compute_all_operators(config, sampler, sweep, threads);
  auto states = accumulate_states<N>(operators, config.initial_state);
  std::vector<double> times(operators.size() + 1);
  for (std::size_t k = 0; k < times.size(); ++k) times[k] = config.sample_time(k);
  return Results<N>(std::move(times), std::move(states), std::move(operators));
}

/// A configured simulation that can be evaluated repeatedly for different
/// sweep parameters.
template <int N, FieldSampler Sampler>
class Simulator {
 public:
  Simulator(SimulationConfig<N> config, Sampler sampler, std::size_t threads = 0)
      : config_(std::move(config)), sampler_(std::move(sampler)), threads_(threads) {
    config_.validate();
  }

  Results<N> evaluate(std::span<const double> sweep) const {
    return spinprop::evaluate(config_, sampler_, sweep, threads_);
  }

  const SimulationConfig<N>& config() const { return config_; }

 private:
  SimulationConfig<N> config_;
  Sampler sampler_;
  std::size_t threads_;
};

}  // namespace spinprop
