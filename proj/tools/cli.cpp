#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <system_error>

namespace spinprop::cli {

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> items;
  std::string current;
  for (const char c : text) {
    if (c == ',' || c == ' ' || c == '\t') {
      if (!current.empty()) items.push_back(current);
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) items.push_back(current);
  return items;
}

double parse_double(std::string_view field, std::string_view text) {
  const auto s = trim(text);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(value))
    throw ConfigError(std::string(field), "expected a finite number, got '" + std::string(text) + "'");
  return value;
}

long long parse_integer(std::string_view field, std::string_view text) {
  const auto s = trim(text);
  long long value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size())
    throw ConfigError(std::string(field), "expected an integer, got '" + std::string(text) + "'");
  return value;
}

bool parse_bool(std::string_view field, std::string_view text) {
  const auto s = trim(text);
  if (s == "on" || s == "true" || s == "yes" || s == "1") return true;
  if (s == "off" || s == "false" || s == "no" || s == "0") return false;
  throw ConfigError(std::string(field), "expected on or off, got '" + std::string(text) + "'");
}

Spin parse_spin(std::string_view field, std::string_view text) {
  const auto s = trim(text);
  if (s == "half" || s == "1/2" || s == "0.5") return Spin::half;
  if (s == "one" || s == "1") return Spin::one;
  throw ConfigError(std::string(field), "expected half or one, got '" + std::string(text) + "'");
}

StepMethod parse_method(std::string_view field, std::string_view text) {
  try {
    return parse_step_method(trim(text));
  } catch (const std::invalid_argument&) {
    throw ConfigError(std::string(field),
                      "expected cf4, midpoint or heun, got '" + std::string(text) + "'");
  }
}

// Components are `re` or `re:im`.
std::vector<Complex> parse_state(std::string_view field, std::string_view text) {
  std::vector<Complex> state;
  for (const auto& item : split_list(text)) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) {
      state.emplace_back(parse_double(field, item), 0.0);
    } else {
      state.emplace_back(parse_double(field, std::string_view(item).substr(0, colon)),
                         parse_double(field, std::string_view(item).substr(colon + 1)));
    }
  }
  if (state.empty()) throw ConfigError(std::string(field), "no components given");
  return state;
}

std::string_view spin_name(Spin s) { return s == Spin::half ? "half" : "one"; }

std::size_t parameter_index(const fields::Scenario& scenario, const std::string& field,
                            std::string_view key) {
  for (std::size_t i = 0; i < scenario.parameter_names.size(); ++i)
    if (scenario.parameter_names[i] == key) return i;
  const auto s = trim(key);
  std::size_t index = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), index);
  if (!s.empty() && ec == std::errc{} && ptr == s.data() + s.size() &&
      index < scenario.parameter_names.size())
    return index;
  std::string known;
  for (const auto& n : scenario.parameter_names) known += (known.empty() ? "" : ", ") + std::string(n);
  throw ConfigError(field, "scenario '" + std::string(scenario.name) +
                               "' has no parameter '" + std::string(key) + "' (known: " + known + ")");
}

std::size_t checked_fine_steps(const std::string& field, double dt_coarse, double dt_fine) {
  if (!(dt_fine > 0.0)) throw ConfigError(field, "fine time step must be positive");
  const double ratio = dt_coarse / dt_fine;
  const double nearest = std::round(ratio);
  if (nearest < 1.0 || std::abs(ratio - nearest) > 1e-6 * ratio)
    throw ConfigError(field, "dt_coarse / " + format_double(dt_fine) +
                                 " must be a positive integer (got " + format_double(ratio) + ")");
  return static_cast<std::size_t>(nearest);
}

template <int N>
StateVector<N> initial_state_for(const RunSpec& spec) {
  StateVector<N> psi{};
  if (spec.initial_state.empty()) {
    psi[0] = 1.0;
    return psi;
  }
  double norm2 = 0.0;
  for (const auto& c : spec.initial_state) norm2 += std::norm(c);
  const double scale = 1.0 / std::sqrt(norm2);
  for (int m = 0; m < N; ++m) psi[m] = spec.initial_state[m] * scale;
  return psi;
}

template <int N>
SimulationConfig<N> make_config(const RunSpec& spec, double dt_fine, StepMethod method,
                                bool frame) {
  SimulationConfig<N> c;
  c.t0 = spec.t0;
  c.t_end = spec.t_end;
  c.coarse_step = spec.dt_coarse;
  c.fine_steps = spec.fine_steps(dt_fine);
  c.method = method;
  c.rotating_frame = frame;
  c.tau = spec.tau;
  c.initial_state = initial_state_for<N>(spec);
  return c;
}

const fields::Scenario& scenario_of(const RunSpec& spec) { return fields::find_scenario(spec.scenario); }

// Largest spectral-norm bound of the stepped Hamiltonian, sampled at the ends
// and middle of every coarse interval.
template <int N>
double field_norm_bound(const SimulationConfig<N>& c, const fields::Scenario& scenario,
                        std::span<const double> params) {
  const double j = N == 2 ? 0.5 : 1.0;
  double bound = 0.0;
  const std::size_t k_count = c.interval_count();
  for (std::size_t k = 0; k < k_count; ++k) {
    const double start = c.sample_time(k), len = c.interval_length(k);
    const double omega_r = c.rotating_frame ? scenario.function(start + 0.5 * len, params).wz : 0.0;
    for (const double s : {0.0, 0.5, 1.0}) {
      const auto f = scenario.function(start + s * len, params);
      const double wz = f.wz - omega_r;
      double b = j * std::sqrt(f.wx * f.wx + f.wy * f.wy + wz * wz);
      if (N == 3) b += (2.0 / 3.0) * std::abs(f.wq);
      bound = std::max(bound, b);
    }
  }
  return bound;
}

template <int N>
void magnus_warning(const SimulationConfig<N>& c, const fields::Scenario& scenario,
                    std::span<const double> params, std::ostream& log) {
  const double bound = field_norm_bound(c, scenario, params);
  if (!magnus_convergence_check(bound, c.fine_step()))
    log << "warning: field norm x dt_fine = " << format_double(bound * c.fine_step())
        << " exceeds the Magnus convergence radius " << format_double(magnus_convergence_radius)
        << "; results may be inaccurate\n";
}

std::ofstream open_output(const fs::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::out | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out.imbue(std::locale::classic());
  return out;
}

template <int N>
std::string state_header() {
  std::string h;
  for (int m = 0; m < N; ++m) h += ",re_psi_" + std::to_string(m);
  for (int m = 0; m < N; ++m) h += ",im_psi_" + std::to_string(m);
  return h;
}

template <int N>
std::string state_fields(const StateVector<N>& psi) {
  std::string row;
  for (int m = 0; m < N; ++m) row += "," + format_double(psi[m].real());
  for (int m = 0; m < N; ++m) row += "," + format_double(psi[m].imag());
  return row;
}

template <int N>
double max_norm_deviation(const std::vector<StateVector<N>>& states) {
  double worst = 0.0;
  for (const auto& psi : states) worst = std::max(worst, std::abs(psi.norm() - 1.0));
  return worst;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string parameter_list(const fields::Scenario& scenario, std::span<const double> params) {
  std::string s;
  for (std::size_t i = 0; i < params.size(); ++i)
    s += (i ? "," : "") + std::string(scenario.parameter_names[i]) + "=" + format_double(params[i]);
  return s;
}

// Runs `body` and maps failures onto exit codes.
template <class Body>
int guarded(std::ostream& log, Body&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << "\n";
    return exit_config_error;
  } catch (const std::invalid_argument& e) {
    log << "config error: " << e.what() << "\n";
    return exit_config_error;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return exit_runtime_error;
  }
}

// ---------------------------------------------------------------- run

template <int N>
int run_impl(const RunSpec& spec, std::ostream& log) {
  const auto& scenario = scenario_of(spec);
  const auto config = make_config<N>(spec, spec.dt_fine, spec.method, spec.rotating_frame);
  config.validate();
  magnus_warning(config, scenario, spec.params, log);

  const auto start = Clock::now();
  const auto results = evaluate(config, scenario.function, spec.params, spec.threads);
  const double wall = seconds_since(start);

  const fs::path dir(spec.out);
  {
    auto csv = open_output(dir / "timeseries.csv");
    csv << "t" << state_header<N>() << (spec.projection ? ",jx,jy,jz" : "") << "\n";
    const auto& times = results.times();
    const auto& states = results.states();
    const std::vector<SpinProjection>* proj = spec.projection ? &results.spin_projection() : nullptr;
    for (std::size_t k = 0; k < times.size(); ++k) {
      csv << format_double(times[k]) << state_fields<N>(states[k]);
      if (proj)
        for (const double v : (*proj)[k]) csv << "," << format_double(v);
      csv << "\n";
    }
    if (!csv) throw std::runtime_error("failed writing timeseries.csv");
  }
  {
    auto summary = open_output(dir / "summary.txt");
    summary << "command: run\n"
            << "scenario: " << scenario.name << "\n"
            << "parameters: " << parameter_list(scenario, spec.params) << "\n"
            << "spin: " << spin_name(spec.spin) << "\n"
            << "method: " << to_string(spec.method) << "\n"
            << "rotating_frame: " << (spec.rotating_frame ? "on" : "off") << "\n"
            << "t0: " << format_double(config.t0) << "\n"
            << "t_end: " << format_double(config.t_end) << "\n"
            << "dt_coarse: " << format_double(config.coarse_step) << "\n"
            << "dt_fine: " << format_double(config.fine_step()) << "\n"
            << "K: " << config.interval_count() << "\n"
            << "L: " << config.fine_steps << "\n"
            << "tau: " << config.tau << "\n"
            << "threads: " << resolve_threads(spec.threads) << "\n"
            << "max_norm_deviation: " << format_double(max_norm_deviation(results.states())) << "\n"
            << "wall_time_s: " << format_double(wall) << "\n";
  }
  log << "run: K=" << config.interval_count() << " L=" << config.fine_steps
      << " wall_time_s=" << format_double(wall) << " -> " << (dir / "timeseries.csv").string() << "\n";
  return exit_ok;
}

// ---------------------------------------------------------- benchmark

template <int N>
std::string baseline_key(const RunSpec& spec, const SimulationConfig<N>& c) {
  std::string key = "scenario=" + spec.scenario + ";params=";
  for (const double p : spec.params) key += format_double(p) + ",";
  key += ";spin=" + std::string(spin_name(spin_of<N>()));
  key += ";t0=" + format_double(c.t0) + ";t_end=" + format_double(c.t_end);
  key += ";dt_coarse=" + format_double(c.coarse_step) + ";initial=";
  for (int m = 0; m < N; ++m)
    key += format_double(c.initial_state[m].real()) + ":" + format_double(c.initial_state[m].imag()) + ",";
  key += ";rel_tol=" + format_double(spec.baseline_rel_tol);
  key += ";abs_tol=" + format_double(spec.baseline_abs_tol) + ";solver=dop853";
  return key;
}

template <int N>
std::optional<StateSeries<N>> load_baseline(const fs::path& path, const SimulationConfig<N>& c) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  std::string line;
  if (!std::getline(in, line) || line != "t" + state_header<N>()) return std::nullopt;
  StateSeries<N> series;
  const std::size_t expected = c.interval_count() + 1;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto cells = split_list(line);
    if (cells.size() != 1 + 2 * N) return std::nullopt;
    try {
      if (format_double(parse_double("baseline", cells[0])) != format_double(c.sample_time(series.size())))
        return std::nullopt;
      StateVector<N> psi;
      for (int m = 0; m < N; ++m)
        psi[m] = {parse_double("baseline", cells[1 + m]), parse_double("baseline", cells[1 + N + m])};
      series.push_back(psi);
    } catch (const ConfigError&) {
      return std::nullopt;
    }
    if (series.size() > expected) return std::nullopt;
  }
  if (series.size() != expected) return std::nullopt;
  return series;
}

template <int N>
void save_baseline(const fs::path& path, const SimulationConfig<N>& c, const StateSeries<N>& series) {
  auto out = open_output(path);
  out << "t" << state_header<N>() << "\n";
  for (std::size_t k = 0; k < series.size(); ++k)
    out << format_double(c.sample_time(k)) << state_fields<N>(series[k]) << "\n";
  if (!out) throw std::runtime_error("failed writing baseline '" + path.string() + "'");
}

template <int N>
int benchmark_impl(const RunSpec& spec, std::ostream& log) {
  const auto& scenario = scenario_of(spec);
  const auto base = make_config<N>(spec, spec.dt_coarse, StepMethod::cf4, true);
  base.validate();

  const fs::path dir(spec.out);
  const auto key = baseline_key(spec, base);
  const fs::path baseline_path =
      dir / ("baseline_" + std::string(spin_name(spin_of<N>())) + "_" + content_hash(key) + ".csv");
  auto baseline = load_baseline<N>(baseline_path, base);
  if (baseline) {
    log << "benchmark: loaded baseline " << baseline_path.string() << "\n";
  } else {
    log << "benchmark: computing baseline (" << base.interval_count() << " samples)\n";
    OracleConfig oc;
    oc.rel_tol = spec.baseline_rel_tol;
    oc.abs_tol = spec.baseline_abs_tol;
    baseline = reference_solve<N>(scenario.function, spec.params, base, oc);
    save_baseline(baseline_path, base, *baseline);
  }

  const std::vector<double> ladder = spec.ladder.empty() ? std::vector<double>{spec.dt_fine} : spec.ladder;
  const std::vector<StepMethod> methods =
      spec.methods.empty() ? std::vector<StepMethod>{spec.method} : spec.methods;
  const std::vector<bool> frames = spec.frames.empty() ? std::vector<bool>{spec.rotating_frame} : spec.frames;

  auto csv = open_output(dir / ("benchmark_" + std::string(spin_name(spin_of<N>())) + ".csv"));
  csv << "method,rotating_frame,dt_s,rms_error,wall_time_s,status\n";
  for (const auto method : methods) {
    for (const bool frame : frames) {
      for (const double dt : ladder) {
        const auto config = make_config<N>(spec, dt, method, frame);
        // The first run warms caches and the thread pool; only the second is timed.
        (void)evaluate(config, scenario.function, spec.params, spec.threads);
        const auto start = Clock::now();
        const auto results = evaluate(config, scenario.function, spec.params, spec.threads);
        const double wall = seconds_since(start);
        const double error = rms_error<N>(results.states(), *baseline);
        const auto status = classify_error(error, spec.failure_threshold, spec.error_floor);
        csv << to_string(method) << "," << (frame ? "on" : "off") << "," << format_double(config.fine_step())
            << "," << format_double(error) << "," << format_double(wall) << "," << status << "\n";
        log << "benchmark " << spin_name(spin_of<N>()) << " " << to_string(method) << " frame="
            << (frame ? "on" : "off") << " dt=" << format_double(config.fine_step())
            << " rms=" << format_double(error) << " [" << status << "]\n";
      }
    }
  }
  if (!csv) throw std::runtime_error("failed writing benchmark CSV");
  return exit_ok;
}

// -------------------------------------------------------------- sweep

template <int N>
int sweep_impl(const RunSpec& spec, std::ostream& log) {
  if (spec.sweep_axes.empty()) throw ConfigError("sweep", "no sweep axis given (use sweep.NAME = v1, v2, ...)");
  const auto& scenario = scenario_of(spec);
  const auto config = make_config<N>(spec, spec.dt_fine, spec.method, spec.rotating_frame);
  const Simulator<N, decltype(scenario.function)> simulator(config, scenario.function, spec.threads);
  magnus_warning(config, scenario, spec.params, log);

  const fs::path dir(spec.out);
  auto csv = open_output(dir / "sweep.csv");
  for (const auto& axis : spec.sweep_axes) csv << scenario.parameter_names[axis.parameter] << ",";
  csv << "t_end";
  {
    std::string h = state_header<N>();
    for (int m = 0; m < N; ++m) {
      const auto pos = h.find("re_psi_" + std::to_string(m));
      h.replace(pos, 3, "final_re_");
    }
    for (int m = 0; m < N; ++m) {
      const auto pos = h.find("im_psi_" + std::to_string(m));
      h.replace(pos, 3, "final_im_");
    }
    csv << h;
  }
  csv << ",jx,jy,jz,max_norm_deviation\n";

  std::size_t total = 1;
  for (const auto& axis : spec.sweep_axes) total *= axis.values.size();
  std::vector<std::size_t> index(spec.sweep_axes.size(), 0);
  std::vector<double> params = spec.params;
  const auto start = Clock::now();
  for (std::size_t point = 0; point < total; ++point) {
    // Last axis varies fastest.
    std::size_t rest = point;
    for (std::size_t a = spec.sweep_axes.size(); a-- > 0;) {
      index[a] = rest % spec.sweep_axes[a].values.size();
      rest /= spec.sweep_axes[a].values.size();
    }
    for (std::size_t a = 0; a < spec.sweep_axes.size(); ++a) {
      const auto& axis = spec.sweep_axes[a];
      params[axis.parameter] = axis.values[index[a]];
      csv << format_double(axis.values[index[a]]) << ",";
    }
    const auto results = simulator.evaluate(params);
    const auto& final_state = results.states().back();
    const auto projection = spin_projection<N>(std::span(&final_state, 1)).front();
    csv << format_double(results.times().back()) << state_fields<N>(final_state);
    for (const double v : projection) csv << "," << format_double(v);
    csv << "," << format_double(max_norm_deviation(results.states())) << "\n";
  }
  const double wall = seconds_since(start);
  if (!csv) throw std::runtime_error("failed writing sweep.csv");

  auto summary = open_output(dir / "sweep_summary.txt");
  summary << "command: sweep\n"
          << "scenario: " << scenario.name << "\n"
          << "points: " << total << "\n"
          << "K: " << config.interval_count() << "\n"
          << "L: " << config.fine_steps << "\n"
          << "wall_time_s: " << format_double(wall) << "\n"
          << "mean_wall_time_s: " << format_double(wall / static_cast<double>(total)) << "\n";
  log << "sweep: " << total << " points, wall_time_s=" << format_double(wall) << "\n";
  return exit_ok;
}

template <template <int> class Impl>
int dispatch(const RunSpec& spec, std::ostream& log) {
  return spec.spin == Spin::half ? Impl<2>::call(spec, log) : Impl<3>::call(spec, log);
}

template <int N> struct RunCall { static int call(const RunSpec& s, std::ostream& l) { return run_impl<N>(s, l); } };
template <int N> struct SweepCall { static int call(const RunSpec& s, std::ostream& l) { return sweep_impl<N>(s, l); } };

// ------------------------------------------------------------ selftest

struct SelfTest {
  std::ostream& log;
  int failures = 0;
  void check(std::string_view name, bool ok, double measured, double bound) {
    log << (ok ? "PASS " : "FAIL ") << name << " (" << format_double(measured) << " <= "
        << format_double(bound) << ")\n";
    if (!ok) ++failures;
  }
};

template <int N>
double commutator_defect() {
  const auto s = spin_operators<N>();
  const Complex i{0.0, 1.0};
  return std::max({max_abs_diff(commutator(s.jx, s.jy), i * s.jz),
                   max_abs_diff(commutator(s.jy, s.jz), i * s.jx),
                   max_abs_diff(commutator(s.jz, s.jx), i * s.jy)});
}

template <int N>
double exponential_defect(std::mt19937_64& rng, int samples) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  for (int n = 0; n < samples; ++n) {
    const ExponentArgs a{u(rng), u(rng), u(rng), N == 3 ? u(rng) : 0.0};
    worst = std::max(worst, max_abs_diff(exponentiate<N>(a), dense_expm(hamiltonian<N>({a.ax, a.ay, a.az, a.aq}), 1.0)));
  }
  return worst;
}

template <int N>
double benchmark_norm_drift(std::size_t threads) {
  SimulationConfig<N> c;
  c.t_end = 1e-3;
  c.coarse_step = 1e-5;
  c.fine_steps = 100;
  const std::vector<double> params{fields::BenchmarkDefaults::bias, fields::BenchmarkDefaults::dressing,
                                   fields::BenchmarkDefaults::pulse, 2e-4};
  return max_norm_deviation(evaluate(c, fields::benchmark_field, params, threads).states());
}

}  // namespace

// ---------------------------------------------------------------- public

std::size_t RunSpec::fine_steps(double dt_fine_override) const {
  const double dt = dt_fine_override > 0.0 ? dt_fine_override : dt_fine;
  return checked_fine_steps("dt_fine", dt_coarse, dt);
}

KeyValues parse_config_text(std::string_view text) {
  KeyValues pairs;
  std::size_t line_number = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_number;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("line " + std::to_string(line_number), "expected 'key = value'");
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_number), "empty key");
    pairs.emplace_back(std::string(key), std::string(trim(line.substr(eq + 1))));
  }
  return pairs;
}

KeyValues read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot read '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

RunSpec build_spec(const KeyValues& pairs) {
  RunSpec spec;
  std::vector<std::pair<std::string, std::string>> param_overrides, sweep_entries;

  for (const auto& [key, value] : pairs) {
    if (key == "scenario") {
      spec.scenario = std::string(trim(value));
    } else if (key == "spin") {
      spec.spin = parse_spin(key, value);
    } else if (key == "method") {
      spec.method = parse_method(key, value);
    } else if (key == "rotating_frame") {
      spec.rotating_frame = parse_bool(key, value);
    } else if (key == "t0") {
      spec.t0 = parse_double(key, value);
    } else if (key == "t_end") {
      spec.t_end = parse_double(key, value);
    } else if (key == "dt_coarse") {
      spec.dt_coarse = parse_double(key, value);
    } else if (key == "dt_fine") {
      spec.dt_fine = parse_double(key, value);
    } else if (key == "tau") {
      spec.tau = static_cast<int>(parse_integer(key, value));
    } else if (key == "initial_state") {
      spec.initial_state = parse_state(key, value);
    } else if (key == "threads") {
      const auto n = parse_integer(key, value);
      if (n < 0) throw ConfigError(key, "must be 0 (auto) or positive");
      spec.threads = static_cast<std::size_t>(n);
    } else if (key == "out") {
      spec.out = std::string(trim(value));
      if (spec.out.empty()) throw ConfigError(key, "empty output directory");
    } else if (key == "projection") {
      spec.projection = parse_bool(key, value);
    } else if (key == "ladder") {
      spec.ladder.clear();
      for (const auto& item : split_list(value)) spec.ladder.push_back(parse_double(key, item));
    } else if (key == "methods") {
      spec.methods.clear();
      for (const auto& item : split_list(value)) spec.methods.push_back(parse_method(key, item));
    } else if (key == "rotating_frames") {
      spec.frames.clear();
      for (const auto& item : split_list(value)) spec.frames.push_back(parse_bool(key, item));
    } else if (key == "spins") {
      spec.spins.clear();
      for (const auto& item : split_list(value)) spec.spins.push_back(parse_spin(key, item));
    } else if (key == "baseline_rel_tol") {
      spec.baseline_rel_tol = parse_double(key, value);
    } else if (key == "baseline_abs_tol") {
      spec.baseline_abs_tol = parse_double(key, value);
    } else if (key == "failure_threshold") {
      spec.failure_threshold = parse_double(key, value);
    } else if (key == "error_floor") {
      spec.error_floor = parse_double(key, value);
    } else if (key.rfind("param.", 0) == 0) {
      param_overrides.emplace_back(key, value);
    } else if (key.rfind("sweep.", 0) == 0) {
      sweep_entries.emplace_back(key, value);
    } else {
      throw ConfigError(key, "unknown key");
    }
  }

  const fields::Scenario* scenario = nullptr;
  try {
    scenario = &fields::find_scenario(spec.scenario);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("scenario", e.what());
  }
  spec.params = scenario->defaults;
  for (const auto& [key, value] : param_overrides)
    spec.params[parameter_index(*scenario, key, std::string_view(key).substr(6))] = parse_double(key, value);

  std::map<std::size_t, std::size_t> seen_axes;
  for (const auto& [key, value] : sweep_entries) {
    SweepAxis axis;
    axis.parameter = parameter_index(*scenario, key, std::string_view(key).substr(6));
    for (const auto& item : split_list(value)) axis.values.push_back(parse_double(key, item));
    if (axis.values.empty()) throw ConfigError(key, "no sweep values given");
    if (const auto it = seen_axes.find(axis.parameter); it != seen_axes.end()) {
      spec.sweep_axes[it->second] = axis;
    } else {
      seen_axes[axis.parameter] = spec.sweep_axes.size();
      spec.sweep_axes.push_back(axis);
    }
  }

  if (!(spec.dt_coarse > 0.0)) throw ConfigError("dt_coarse", "must be positive");
  if (!(spec.t_end > spec.t0)) throw ConfigError("t_end", "must be greater than t0");
  if (!(spec.dt_fine > 0.0)) throw ConfigError("dt_fine", "must be positive");
  (void)checked_fine_steps("dt_fine", spec.dt_coarse, spec.dt_fine);
  for (const double dt : spec.ladder) (void)checked_fine_steps("ladder", spec.dt_coarse, dt);
  if (spec.tau < 0 || spec.tau > 30) throw ConfigError("tau", "must lie in [0, 30]");
  if (!(spec.baseline_rel_tol > 0.0)) throw ConfigError("baseline_rel_tol", "must be positive");
  if (!(spec.baseline_abs_tol > 0.0)) throw ConfigError("baseline_abs_tol", "must be positive");
  if (!spec.initial_state.empty()) {
    double norm2 = 0.0;
    for (const auto& c : spec.initial_state) norm2 += std::norm(c);
    if (!(norm2 > 0.0)) throw ConfigError("initial_state", "must not be the zero vector");
    std::vector<Spin> spins = spec.spins;
    spins.push_back(spec.spin);
    for (const auto s : spins)
      if (spec.initial_state.size() != static_cast<std::size_t>(dimension_of(s)))
        throw ConfigError("initial_state", "needs " + std::to_string(dimension_of(s)) +
                                               " components for spin " + std::string(spin_name(s)));
  }
  return spec;
}

std::string format_double(double value) {
  std::array<char, 64> buffer{};
  const auto [ptr, ec] =
      std::to_chars(buffer.data(), buffer.data() + buffer.size(), value, std::chars_format::general, 17);
  if (ec != std::errc{}) return "nan";
  return std::string(buffer.data(), ptr);
}

std::string classify_error(double rms, double failure_threshold, double floor) {
  if (!std::isfinite(rms) || rms > failure_threshold) return "failed";
  if (rms < floor) return "at_floor";
  return "ok";
}

std::string content_hash(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static constexpr char digits[] = "0123456789abcdef";
  std::string hex(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) hex[static_cast<std::size_t>(i)] = digits[h & 0xF];
  return hex;
}

int cmd_run(const RunSpec& spec, std::ostream& log) {
  return guarded(log, [&] { return dispatch<RunCall>(spec, log); });
}

int cmd_sweep(const RunSpec& spec, std::ostream& log) {
  return guarded(log, [&] { return dispatch<SweepCall>(spec, log); });
}

int cmd_benchmark(const RunSpec& spec, std::ostream& log) {
  return guarded(log, [&] {
    const std::vector<Spin> spins = spec.spins.empty() ? std::vector<Spin>{spec.spin} : spec.spins;
    for (const auto s : spins) {
      const int code = s == Spin::half ? benchmark_impl<2>(spec, log) : benchmark_impl<3>(spec, log);
      if (code != exit_ok) return code;
    }
    return static_cast<int>(exit_ok);
  });
}

int cmd_selftest(std::ostream& log) {
  return guarded(log, [&] {
    SelfTest t{log};
    std::mt19937_64 rng(20211020);
    t.check("spin-half commutation relations", commutator_defect<2>() <= 1e-14, commutator_defect<2>(), 1e-14);
    t.check("spin-one commutation relations", commutator_defect<3>() <= 1e-14, commutator_defect<3>(), 1e-14);
    const double e2 = exponential_defect<2>(rng, 1000);
    t.check("spin-half exponential vs dense", e2 <= 1e-12, e2, 1e-12);
    const double e3 = exponential_defect<3>(rng, 1000);
    t.check("spin-one exponential vs dense", e3 <= 1e-10, e3, 1e-10);

    const std::vector<StateVector<2>> up{{{1.0, 0.0}}}, down{{{0.0, 1.0}}};
    const double r = rms_error<2>(up, down);
    t.check("rms error of an orthogonal pair", r == std::sqrt(2.0), std::abs(r - std::sqrt(2.0)), 0.0);

    const double d2 = benchmark_norm_drift<2>(0), d3 = benchmark_norm_drift<3>(0);
    t.check("spin-half norm conservation", d2 <= 1e-9, d2, 1e-9);
    t.check("spin-one norm conservation", d3 <= 1e-9, d3, 1e-9);

    SimulationConfig<3> c;
    c.t_end = 2e-4;
    c.coarse_step = 1e-6;
    c.fine_steps = 10;
    const std::vector<double> params{fields::BenchmarkDefaults::bias, fields::BenchmarkDefaults::dressing,
                                     fields::BenchmarkDefaults::pulse, 0.0};
    const auto serial = compute_all_operators(c, fields::benchmark_field, params, 1);
    const auto parallel = compute_all_operators(c, fields::benchmark_field, params, 4);
    const bool same = serial == parallel;
    t.check("thread count does not change operators", same, same ? 0.0 : 1.0, 0.0);

    log << (t.failures == 0 ? "selftest passed\n" : "selftest FAILED\n");
    return t.failures == 0 ? static_cast<int>(exit_ok) : static_cast<int>(exit_runtime_error);
  });
}

int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"spinprop: spin-half and spin-one time evolution"};
  app.require_subcommand(1);

  struct Flags {
    std::string config, threads, out, method, frame, dt_fine, dt_coarse, t0, t_end, spin, scenario, ladder;
    std::vector<std::string> params, sweeps;
    bool projection = false;
  };
  Flags flags;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config, "key = value configuration file");
    sub->add_option("--threads", flags.threads, "worker threads (0 = all cores)");
    sub->add_option("--out", flags.out, "output directory");
    sub->add_option("--method", flags.method, "cf4, midpoint or heun");
    sub->add_option("--rotating-frame", flags.frame, "on or off");
    sub->add_option("--dt-fine", flags.dt_fine, "fine time step in seconds");
    sub->add_option("--dt-coarse", flags.dt_coarse, "output sampling interval in seconds");
    sub->add_option("--t0", flags.t0, "start time in seconds");
    sub->add_option("--t-end", flags.t_end, "end time in seconds");
    sub->add_option("--spin", flags.spin, "half or one");
    sub->add_option("--scenario", flags.scenario, "builtin field scenario");
    sub->add_option("--param", flags.params, "scenario parameter NAME=VALUE (repeatable)");
  };
  auto* run = app.add_subcommand("run", "simulate once and write the time series");
  add_common(run);
  run->add_flag("--projection", flags.projection, "add jx, jy, jz columns");
  auto* bench = app.add_subcommand("benchmark", "accuracy and timing study against the reference solver");
  add_common(bench);
  bench->add_option("--ladder", flags.ladder, "comma separated fine time steps");
  auto* sweep = app.add_subcommand("sweep", "one simulation per parameter grid point");
  add_common(sweep);
  sweep->add_option("--sweep", flags.sweeps, "NAME=V1,V2,... sweep axis (repeatable)");
  auto* selftest = app.add_subcommand("selftest", "check numerical invariants");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return exit_ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return exit_ok;
  } catch (const CLI::ParseError& e) {
    err << "config error: " << e.what() << "\n";
    return exit_config_error;
  }

  if (selftest->parsed()) return cmd_selftest(out);

  RunSpec spec;
  try {
    KeyValues pairs;
    if (!flags.config.empty()) pairs = read_config_file(flags.config);
    auto set = [&](const char* key, const std::string& value) {
      if (!value.empty()) pairs.emplace_back(key, value);
    };
    set("threads", flags.threads);
    set("out", flags.out);
    set("method", flags.method);
    set("rotating_frame", flags.frame);
    set("dt_fine", flags.dt_fine);
    set("dt_coarse", flags.dt_coarse);
    set("t0", flags.t0);
    set("t_end", flags.t_end);
    set("spin", flags.spin);
    set("scenario", flags.scenario);
    set("ladder", flags.ladder);
    if (flags.projection) pairs.emplace_back("projection", "on");
    for (const auto& [prefix, list] : {std::pair<std::string, const std::vector<std::string>*>{"param.", &flags.params},
                                       {"sweep.", &flags.sweeps}}) {
      for (const auto& item : *list) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0)
          throw ConfigError("--" + prefix.substr(0, prefix.size() - 1), "expected NAME=VALUE, got '" + item + "'");
        pairs.emplace_back(prefix + item.substr(0, eq), item.substr(eq + 1));
      }
    }
    spec = build_spec(pairs);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return exit_config_error;
  }

  if (run->parsed()) return cmd_run(spec, err);
  if (bench->parsed()) return cmd_benchmark(spec, err);
  return cmd_sweep(spec, err);
}

}  // namespace spinprop::cli
