#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "rill/runtime.hpp"

namespace rill {

inline constexpr const char* bench_csv_header = "mode,ops,values,variant,behavior,rep,elapsed_ms";

/// One measured cell: elapsed_ms is the median over `reps` repetitions.
struct bench_row {
  std::string mode;
  std::int64_t ops = 0;
  std::int64_t values = 0;
  std::string variant;   // "meta" | "fast"
  std::string behavior;  // "identity" | "none"
  int reps = 0;
  double elapsed_ms = 0.0;
};

struct bench_config {
  std::string mode = "load";  // "dagsize" sweeps ops, "load" sweeps values
  std::vector<std::int64_t> ops_points;
  std::vector<std::int64_t> values_points;
  int reps = 5;
  run_mode runtime_mode = run_mode::concurrent;
  std::uint64_t seed = 0;
};

/// Runs every (point, variant) cell: a chain of pass-through maps between a
/// range source and a discarding sink, once through the identity behavior
/// and once through the fast path.
std::vector<bench_row> run_bench(const bench_config& cfg, std::ostream* progress = nullptr);

std::string bench_csv(const std::vector<bench_row>& rows);

/// "N", "A..B" (6 points) or "A..B:STEP".
std::vector<std::int64_t> parse_sweep(const std::string& text);

struct linear_fit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

linear_fit fit_line(const std::vector<double>& xs, const std::vector<double>& ys);

}  // namespace rill
