#pragma once

// Command-line front end: flat key = value run specifications, the run,
// benchmark, sweep and selftest subcommands, and CSV output.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "spinprop/spinprop.hpp"

namespace spinprop::cli {

enum ExitCode : int { exit_ok = 0, exit_config_error = 2, exit_runtime_error = 3 };

/// Invalid run specification. `field()` names the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

using KeyValues = std::vector<std::pair<std::string, std::string>>;

struct SweepAxis {
  std::size_t parameter = 0;
  std::vector<double> values;
};

struct RunSpec {
  std::string scenario = "benchmark";
  std::vector<double> params;  // complete parameter list of the scenario
  Spin spin = Spin::half;
  StepMethod method = StepMethod::cf4;
  bool rotating_frame = true;
  double t0 = 0.0;
  double t_end = 1e-3;
  double dt_coarse = 1e-5;
  double dt_fine = 1e-7;
  int tau = default_tau;
  std::vector<Complex> initial_state;  // empty: the m = +j state
  std::size_t threads = 0;
  std::string out = "spinprop_out";
  bool projection = false;

  // benchmark
  std::vector<double> ladder;
  std::vector<StepMethod> methods;
  std::vector<bool> frames;
  std::vector<Spin> spins;
  double baseline_rel_tol = 1e-12;
  double baseline_abs_tol = 1e-12;
  double failure_threshold = 1e-3;
  double error_floor = 1e-11;

  // sweep
  std::vector<SweepAxis> sweep_axes;

  /// Fine steps per coarse interval implied by dt_coarse / dt_fine.
  std::size_t fine_steps(double dt_fine_override = 0.0) const;
};

/// Parses `key = value` lines; '#' starts a comment.
KeyValues parse_config_text(std::string_view text);
KeyValues read_config_file(const std::string& path);

/// Applies key/value pairs in order (later pairs win) and validates the result.
RunSpec build_spec(const KeyValues& pairs);

/// Shortest round-tripping decimal with 17 significant digits, locale-free.
std::string format_double(double value);

/// Status label of a benchmark row.
std::string classify_error(double rms, double failure_threshold, double floor);

/// Stable 64-bit FNV-1a hash, hex encoded.
std::string content_hash(std::string_view text);

int cmd_run(const RunSpec& spec, std::ostream& log);
int cmd_benchmark(const RunSpec& spec, std::ostream& log);
int cmd_sweep(const RunSpec& spec, std::ostream& log);
int cmd_selftest(std::ostream& log);

/// Full command-line entry point.
int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace spinprop::cli
