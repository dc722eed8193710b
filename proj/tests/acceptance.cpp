// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "spinprop/spinprop.hpp"

using namespace spinprop;

namespace {

constexpr double pi = std::numbers::pi;

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(const char* format, double v) {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, format, v);
  return buffer;
}
std::string sci(double v) { return fmt("%.3e", v); }

int failures = 0;

void report(int id, const char* title, bool ok, const std::string& detail) {
  std::printf("%s  criterion %d  %s: %s\n", ok ? "PASS" : "FAIL", id, title, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

void note(const std::string& text) {
  std::printf("      %s\n", text.c_str());
  std::fflush(stdout);
}

// Desk-scale benchmark: 10 ms window, 8 us output sampling, pulse at 5 ms.
constexpr double window = 10e-3;
constexpr double coarse = 8e-6;
const std::vector<double> benchmark_params{fields::BenchmarkDefaults::bias, fields::BenchmarkDefaults::dressing,
                                           fields::BenchmarkDefaults::pulse, 5e-3};
const std::vector<double> ladder{800e-9, 400e-9, 200e-9, 100e-9};
constexpr double failure_threshold = 1e-3;
constexpr double error_floor = 1e-11;

template <int N>
SimulationConfig<N> desk_config(double dt_fine, StepMethod method = StepMethod::cf4, bool frame = true) {
  SimulationConfig<N> c;
  c.t0 = 0.0;
  c.t_end = window;
  c.coarse_step = coarse;
  c.fine_steps = static_cast<std::size_t>(std::llround(coarse / dt_fine));
  c.method = method;
  c.rotating_frame = frame;
  return c;
}

template <int N>
struct DeskStudy {
  StateSeries<N> baseline;
  double baseline_seconds = 0.0;
  // (method, frame) -> errors along the ladder
  std::map<std::pair<StepMethod, bool>, std::vector<double>> errors;
  double seconds = 0.0;
};

template <int N>
DeskStudy<N> run_desk_study() {
  DeskStudy<N> study;
  const auto start = Clock::now();
  study.baseline = reference_solve<N>(fields::benchmark_field, benchmark_params, desk_config<N>(coarse));
  study.baseline_seconds = seconds_since(start);
  for (const auto method : {StepMethod::cf4, StepMethod::midpoint_euler, StepMethod::heun_euler}) {
    for (const bool frame : {true, false}) {
      auto& row = study.errors[{method, frame}];
      for (const double dt : ladder) {
        const auto r = evaluate(desk_config<N>(dt, method, frame), fields::benchmark_field, benchmark_params);
        row.push_back(rms_error<N>(r.states(), study.baseline));
      }
    }
  }
  study.seconds = seconds_since(start);
  return study;
}

bool usable(double e) { return std::isfinite(e) && e <= failure_threshold && e >= error_floor; }

std::string join(const std::vector<double>& v, const char* format) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(format, v[i]);
  return s;
}

// ------------------------------------------------------------------ 1

void criterion_1() {
  const auto start = Clock::now();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<ExponentArgs> samples(10000);
  std::vector<Operator3> dense(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    samples[i] = {u(rng), u(rng), u(rng), u(rng)};
    const auto& a = samples[i];
    dense[i] = dense_expm(hamiltonian<3>({a.ax, a.ay, a.az, a.aq}), 1.0);
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i)
    worst = std::max(worst, max_abs_diff(expm_su3(samples[i], 24), dense[i]));

  std::vector<double> curve;
  int best_tau = 0;
  double best = INFINITY;
  for (int tau = 4; tau <= 28; tau += 4) {
    double e = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) e = std::max(e, max_abs_diff(expm_su3(samples[i], tau), dense[i]));
    curve.push_back(e);
    if (e < best) {
      best = e;
      best_tau = tau;
    }
  }
  const double seconds = seconds_since(start);
  const bool ok = worst <= 1e-10 && best_tau >= 20 && best_tau <= 28 && seconds <= 60.0;
  report(1, "exponentiator equivalence", ok,
         "max deviation " + sci(worst) + " (<= 1e-10), tau argmin " + std::to_string(best_tau) +
             " (in [20, 28]), " + fmt("%.1f", seconds) + " s (<= 60 s)");
  note("tau 4..28 errors: " + join(curve, "%.2e"));
}

// ------------------------------------------------------------------ 2

template <int N>
std::pair<double, double> conservation(double& seconds) {
  const auto start = Clock::now();
  const auto c = desk_config<N>(10e-9);  // 1250 intervals x 800 fine steps = 10^6
  const auto r = evaluate(c, fields::benchmark_field, benchmark_params);
  double norm = 0.0, unitary = 0.0;
  for (const auto& psi : r.states()) norm = std::max(norm, std::abs(psi.norm() - 1.0));
  for (const auto& op : r.interval_operators()) unitary = std::max(unitary, unitarity_defect(op));
  seconds += seconds_since(start);
  return {norm, unitary};
}

void criterion_2() {
  double seconds = 0.0;
  const auto [n2, u2] = conservation<2>(seconds);
  const auto [n3, u3] = conservation<3>(seconds);
  const bool ok = std::max(n2, n3) <= 1e-9 && std::max(u2, u3) <= 1e-11 && seconds <= 120.0;
  report(2, "unitarity and norm conservation over 10^6 fine steps", ok,
         "norm drift " + sci(n2) + " / " + sci(n3) + " (<= 1e-9), operator defect " + sci(u2) + " / " + sci(u3) +
             " (<= 1e-11) for spin half / one, " + fmt("%.1f", seconds) + " s (<= 120 s)");
}

// ------------------------------------------------------------------ 3

std::vector<double> halving_ratios(const std::vector<double>& errors) {
  std::vector<double> ratios;
  for (std::size_t i = 0; i + 1 < errors.size(); ++i)
    if (usable(errors[i]) && usable(errors[i + 1])) ratios.push_back(errors[i] / errors[i + 1]);
  return ratios;
}

bool all_within(const std::vector<double>& v, double lo, double hi) {
  return !v.empty() && std::all_of(v.begin(), v.end(), [&](double x) { return x >= lo && x <= hi; });
}

template <int N>
bool convergence_order(const DeskStudy<N>& study, const char* label) {
  const auto cf4 = halving_ratios(study.errors.at({StepMethod::cf4, true}));
  const auto mid = halving_ratios(study.errors.at({StepMethod::midpoint_euler, true}));
  const bool ok = all_within(cf4, 10.0, 24.0) && all_within(mid, 3.0, 6.0);
  note(std::string(label) + " cf4 errors: " + join(study.errors.at({StepMethod::cf4, true}), "%.3e"));
  note(std::string(label) + " cf4 halving ratios: " + join(cf4, "%.1f") + " (each in [10, 24])");
  note(std::string(label) + " midpoint errors: " + join(study.errors.at({StepMethod::midpoint_euler, true}), "%.3e"));
  note(std::string(label) + " midpoint halving ratios: " + join(mid, "%.1f") + " (each in [3, 6])");
  return ok;
}

// One extra rung below the ladder, reported for context only.
template <int N>
void asymptotic_context(const DeskStudy<N>& study, const char* label) {
  std::vector<double> extra;
  for (const auto method : {StepMethod::cf4, StepMethod::midpoint_euler}) {
    const auto r = evaluate(desk_config<N>(50e-9, method, true), fields::benchmark_field, benchmark_params);
    extra.push_back(study.errors.at({method, true}).back() / rms_error<N>(r.states(), study.baseline));
  }
  note(std::string(label) + " context, 100 -> 50 ns: cf4 ratio " + fmt("%.1f", extra[0]) + ", midpoint ratio " +
       fmt("%.1f", extra[1]));
}

void criterion_3(const DeskStudy<2>& half, const DeskStudy<3>& one) {
  const double seconds = half.seconds + one.seconds;
  std::printf("      rotating frame on, 10 ms window, dt in {800, 400, 200, 100} ns\n");
  const bool ok_half = convergence_order(half, "spin half");
  const bool ok_one = convergence_order(one, "spin one");
  asymptotic_context(half, "spin half");
  asymptotic_context(one, "spin one");
  report(3, "order of convergence", ok_half && ok_one && seconds <= 600.0,
         std::string("spin half ") + (ok_half ? "within" : "outside") + " bounds, spin one " +
             (ok_one ? "within" : "outside") + " bounds, study " + fmt("%.1f", seconds) + " s incl. baselines " +
             fmt("%.1f", half.baseline_seconds + one.baseline_seconds) + " s (<= 600 s)");
}

// ------------------------------------------------------------------ 4

template <int N>
double frame_ratio(const DeskStudy<N>& study) {
  return study.errors.at({StepMethod::cf4, true}).back() / study.errors.at({StepMethod::cf4, false}).back();
}

void criterion_4(const DeskStudy<2>& half, const DeskStudy<3>& one) {
  const double r2 = frame_ratio(half), r3 = frame_ratio(one);
  report(4, "rotating frame benefit at 100 ns", r2 <= 1e-2 && r3 <= 1e-2,
         "error ratio with/without frame " + sci(r2) + " (spin half), " + sci(r3) +
             " (spin one), each <= 1e-2; improvement " + fmt("%.0f", 1.0 / r2) + "x / " + fmt("%.0f", 1.0 / r3) + "x");
}

// ------------------------------------------------------------------ 5

template <int N>
bool ranking(const DeskStudy<N>& study, const char* label, std::string& detail) {
  bool ok = true;
  int compared = 0;
  for (const bool frame : {true, false}) {
    const auto& cf4 = study.errors.at({StepMethod::cf4, frame});
    const auto& heun = study.errors.at({StepMethod::heun_euler, frame});
    const auto& mid = study.errors.at({StepMethod::midpoint_euler, frame});
    for (std::size_t i = 0; i < ladder.size(); ++i) {
      if (!usable(cf4[i]) || !usable(heun[i]) || !usable(mid[i])) continue;
      ++compared;
      if (!(cf4[i] < heun[i] && heun[i] < 10.0 * mid[i])) {
        ok = false;
        note(std::string(label) + " ordering violated at " + fmt("%.0f", ladder[i] * 1e9) + " ns, frame " +
             (frame ? "on" : "off"));
      }
    }
  }
  const double advantage = study.errors.at({StepMethod::midpoint_euler, true})[1] / study.errors.at({StepMethod::cf4, true})[1];
  ok = ok && compared > 0 && advantage >= 10.0;
  detail += std::string(label) + ": " + std::to_string(compared) + " rungs ordered, cf4 advantage at 400 ns " +
            fmt("%.1f", advantage) + "x (>= 10x)";
  return ok;
}

void criterion_5(const DeskStudy<2>& half, const DeskStudy<3>& one) {
  std::string detail;
  const bool a = ranking(half, "spin half", detail);
  detail += "; ";
  const bool b = ranking(one, "spin one", detail);
  report(5, "method ranking", a && b, detail);
}

// ------------------------------------------------------------------ 6

void criterion_6() {
  SimulationConfig<3> c;
  c.t_end = 10e-3;
  c.coarse_step = 1e-6;  // K = 10^4
  c.fine_steps = 10;
  const unsigned hardware = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t wide = std::max<std::size_t>(hardware, 4);

  auto t = Clock::now();
  const auto serial = compute_all_operators(c, fields::benchmark_field, benchmark_params, 1);
  const double serial_s = seconds_since(t);
  t = Clock::now();
  const auto parallel = compute_all_operators(c, fields::benchmark_field, benchmark_params, hardware);
  const double parallel_s = seconds_since(t);
  const auto oversubscribed = compute_all_operators(c, fields::benchmark_field, benchmark_params, wide);

  const bool identical = serial == parallel && serial == oversubscribed;
  const double speedup = serial_s / parallel_s;
  std::string detail = "K = " + std::to_string(serial.size()) + ", operators bitwise identical for 1, " +
                       std::to_string(hardware) + " and " + std::to_string(wide) + " threads: " +
                       (identical ? "yes" : "no") + "; ";
  bool ok = identical;
  if (hardware >= 4) {
    ok = ok && speedup >= 2.0;
    detail += "speedup " + fmt("%.2f", speedup) + "x on " + std::to_string(hardware) + " threads (>= 2x)";
  } else {
    detail += "speedup not applicable, machine has " + std::to_string(hardware) +
              " hardware thread(s) (requirement covers >= 4 cores)";
  }
  report(6, "parallel determinism and speedup", ok, detail);
}

// ------------------------------------------------------------------ 7

template <int N>
double frame_nulling(double wz) {
  SimulationConfig<N> c;
  c.t_end = 1e-3;
  c.coarse_step = 1e-5;
  c.fine_steps = 100;
  std::mt19937_64 rng(N);
  std::normal_distribution<double> g;
  double norm2 = 0.0;
  for (int m = 0; m < N; ++m) {
    c.initial_state[m] = {g(rng), g(rng)};
    norm2 += std::norm(c.initial_state[m]);
  }
  for (int m = 0; m < N; ++m) c.initial_state[m] /= std::sqrt(norm2);
  const std::vector<double> params{0.0, 0.0, wz, 0.0};
  const auto r = evaluate(c, fields::constant_field, params);
  double worst = 0.0;
  for (std::size_t k = 0; k < r.states().size(); ++k) {
    StateVector<N> exact;
    for (int m = 0; m < N; ++m)
      exact[m] = std::polar(1.0, -wz * r.times()[k] * magnetic_number<N>(m)) * c.initial_state[m];
    worst = std::max(worst, max_abs_diff(r.states()[k], exact));
  }
  return worst;
}

void criterion_7() {
  const double w0 = 2 * pi * 700e3, rabi = 2 * pi * 1e3;
  SimulationConfig<2> c;
  c.t_end = pi / rabi;
  c.coarse_step = c.t_end / 100;
  c.fine_steps = 50;
  const std::vector<double> params{w0, rabi};
  const auto r = evaluate(c, fields::circular_rabi_field, params);
  double worst = 0.0;
  for (std::size_t k = 0; k < r.states().size(); ++k) {
    const double t = r.times()[k];
    // Exact solution: a Rabi rotation about x in the co-rotating frame, then the frame rotation.
    const double half_angle = 0.5 * rabi * t;
    const StateVector<2> rotating{{Complex{std::cos(half_angle), 0.0}, Complex{0.0, -std::sin(half_angle)}}};
    const StateVector<2> exact{{std::polar(1.0, -0.5 * w0 * t) * rotating[0],
                                std::polar(1.0, 0.5 * w0 * t) * rotating[1]}};
    worst = std::max(worst, max_abs_diff(r.states()[k], exact));
  }
  const double inversion = std::norm(r.states().back()[1]);
  const double null2 = frame_nulling<2>(2 * pi * 700e3), null3 = frame_nulling<3>(2 * pi * 700e3);
  const bool ok = std::abs(inversion - 1.0) <= 1e-6 && worst <= 1e-6 && std::max(null2, null3) <= 1e-12;
  report(7, "analytic end-to-end checks", ok,
         "population inversion at pi/Omega off by " + sci(std::abs(inversion - 1.0)) + ", state deviation " +
             sci(worst) + " (<= 1e-6); constant-bias frame nulling " + sci(null2) + " / " + sci(null3) +
             " (<= 1e-12)");
}

// ------------------------------------------------------------------ 8

void criterion_8() {
  const std::vector<StateVector<2>> up{{{1.0, 0.0}}}, down{{{0.0, 1.0}}};
  const std::vector<StateVector<2>> ups(4, up[0]), downs(4, down[0]);
  const double one = rms_error<2>(up, down), four = rms_error<2>(ups, downs);
  const bool ok = one == std::numbers::sqrt2 && four == std::numbers::sqrt2 / 2.0;
  report(8, "error metric fidelity", ok,
         "K = 1 orthogonal pair " + fmt("%.17g", one) + " (sqrt 2 exactly), K = 4 " + fmt("%.17g", four) +
             " (sqrt 2 / 2 exactly)");
}

// ------------------------------------------------------------------ 9

template <int N>
double self_consistency(const DeskStudy<N>& study) {
  const auto tight = reference_solve<N>(fields::benchmark_field, benchmark_params, desk_config<N>(coarse),
                                        OracleConfig{1e-13, 1e-13});
  return rms_error<N>(study.baseline, tight);
}

void criterion_9(const DeskStudy<2>& half, const DeskStudy<3>& one) {
  const double e2 = self_consistency(half), e3 = self_consistency(one);
  report(9, "reference self-consistency", std::max(e2, e3) <= 1e-10,
         "rms between tolerance 1e-12 and 1e-13 baselines " + sci(e2) + " (spin half), " + sci(e3) +
             " (spin one), each <= 1e-10");
}

}  // namespace

int main() {
  std::printf("spinprop acceptance suite\n");
  criterion_1();
  criterion_2();
  const auto half = run_desk_study<2>();
  const auto one = run_desk_study<3>();
  criterion_3(half, one);
  criterion_4(half, one);
  criterion_5(half, one);
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9(half, one);
  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
