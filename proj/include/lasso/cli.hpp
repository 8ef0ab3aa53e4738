#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "lasso/core.hpp"
#include "lasso/loop_state.hpp"

namespace lasso {

inline constexpr const char* kVersion = "1.0.0";

enum class Quantity { reflection, phase, bound, poles, trajectory, decay, graph_smatrix };

/// Subcommand name for a quantity ("scatter", "phase", ...).
const char* command_name(Quantity q);

struct GridSpec {
  double from = 0.0;
  double to = 0.0;
  int steps = 1;

  /// steps points from `from` to `to` inclusive (a single point for steps = 1).
  std::vector<double> points() const;
};

/// Outer parameter sweep, `--sweep <param:from:to:steps>`.
struct ParamSweep {
  std::string param;  ///< flux, flux-quanta, alpha, mu, omega or L
  GridSpec grid;
};

/// Fully resolved command line.
struct SweepConfig {
  Quantity quantity = Quantity::reflection;
  LassoParams params;
  GridSpec k{0.1, 10.0, 100};
  GridSpec t{0.0, 5.0, 101};
  std::optional<ParamSweep> sweep;
  std::string graph_path;
  std::string state = "sine:1";  ///< decay initial state
  int n_max = 10;                ///< highest embedded index listed by bound-states
  std::string format = "csv";
  std::string out = "-";
  std::optional<double> tol;

  /// Throws InputError on empty ranges, bad counts or nonpositive tolerances.
  void validate() const;
};

/// Parses `param:from:to:steps`.
ParamSweep parse_param_sweep(const std::string& text);

/// Applies a sweep parameter value to a parameter set.
LassoParams with_param(LassoParams p, const std::string& param, double value);

/// Loop state from `sine:n`, `winding:n` and sums such as `sine:1+sine:2`, normalized.
LoopState parse_state(const std::string& text, double L);

using Cell = std::variant<double, std::int64_t, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
  std::string metadata_json = "{}";  ///< command-specific metadata (JSON object text)
};

/// Computes the table for a configuration. Exceptions propagate.
Table run_command(const SweepConfig& cfg);

/// CSV with a header row; reals in 17-significant-digit scientific notation.
std::string to_csv(const Table& t);
/// JSON document with metadata (parameters, version, tolerances), columns and rows.
std::string to_json(const Table& t, const SweepConfig& cfg);

/// Entry point behind the `lasso` executable. `args` excludes the program
/// name. Returns 0 on success, 1 on input errors, 2 on numerical failures.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lasso
