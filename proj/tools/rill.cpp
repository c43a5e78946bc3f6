#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "rill/bench.hpp"
#include "rill/behaviors.hpp"
#include "rill/compile.hpp"
#include "rill/pipeline.hpp"
#include "rill/runtime.hpp"

namespace {

constexpr int exit_ok = 0;
constexpr int exit_user_error = 1;
constexpr int exit_stream_error = 2;

struct run_flags {
  std::string behavior = "none";
  std::string structural = "none";
  std::string trace_path;
  bool deterministic = false;
  std::uint64_t seed = 0;
};

rill::deploy_options options_for(const run_flags& f) {
  rill::deploy_options opt;
  opt.mode = f.deterministic ? rill::run_mode::deterministic : rill::run_mode::concurrent;
  opt.seed = f.seed;
  opt.record_trace = !f.trace_path.empty();
  return opt;
}

void write_trace(const rill::stream_handle& h, const std::string& path) {
  std::ofstream out(path);
  out << rill::format_trace(h.trace(), h.units());
}

int cmd_run(const std::string& expr_text, const run_flags& flags) {
  auto expr = rill::parse_pipeline(expr_text);
  auto lowered = rill::lower_pipeline(expr);
  if (auto structural = rill::structural_by_name(flags.structural))
    lowered.graph = rill::run_compile(lowered.graph, *structural);

  auto log = std::make_shared<rill::stream_log>();
  auto b = rill::behavior_by_name(flags.behavior, log);
  rill::stream_handle h = b ? rill::deploy(lowered.graph, lowered.bindings, *b, options_for(flags))
                            : rill::deploy_fast(lowered.graph, lowered.bindings, options_for(flags));
  const auto& outcomes = h.wait();
  if (!flags.trace_path.empty()) write_trace(h, flags.trace_path);
  if (flags.behavior == "logging") {
    for (const auto& r : log->snapshot_records())
      std::cerr << "log " << h.units()[r.unit].name << " " << rill::event_tag_name(r.tag) << " "
                << r.v.to_string() << "\n";
  }

  int status = exit_ok;
  for (const auto& [label, o] : outcomes) {
    std::string prefix = outcomes.size() > 1 ? label + ": " : "";
    if (!o.ok) {
      std::cout << prefix << "error: " << o.error << "\n";
      status = exit_stream_error;
    } else if (o.result.is_tuple()) {
      const auto& vs = o.result.as_tuple();
      std::cout << prefix << "[";
      for (std::size_t i = 0; i < vs.size(); ++i) {
        if (i) std::cout << ", ";
        std::cout << vs[i].to_string();
      }
      std::cout << "]\n";
    } else {
      std::cout << prefix << "done\n";
    }
  }
  return status;
}

int cmd_compile(const std::string& expr_text, const std::string& structural_name) {
  auto expr = rill::parse_pipeline(expr_text);
  auto lowered = rill::lower_pipeline(expr);
  auto instrs = rill::emit_instructions(lowered.graph);
  std::cout << "instructions:\n";
  for (const auto& i : instrs) std::cout << "  " << rill::instruction_to_string(i) << "\n";
  rill::dag compiled = lowered.graph;
  if (auto structural = rill::structural_by_name(structural_name))
    compiled = rill::run_compile(instrs, *structural);
  std::cout << "dag:\n" << rill::serialize_dag(compiled);
  return exit_ok;
}

int cmd_validate(const std::string& expr_text, const std::string& file) {
  rill::dag d;
  if (!file.empty()) {
    std::ifstream in(file);
    if (!in) {
      std::cerr << "cannot open " << file << "\n";
      return exit_user_error;
    }
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    d = rill::parse_dag(text);
  } else {
    d = rill::lower_pipeline(rill::parse_pipeline(expr_text)).graph;
  }
  auto bad = rill::validate(d);
  if (bad.empty()) {
    std::cout << "ok\n";
    return exit_ok;
  }
  for (const auto& v : bad) std::cout << v.message << "\n";
  return exit_user_error;
}

int cmd_bench(const std::string& mode, const std::string& ops_text, const std::string& values_text,
              int reps, const std::string& csv_path, bool deterministic, bool full) {
  rill::bench_config cfg;
  cfg.mode = mode;
  cfg.reps = reps;
  cfg.runtime_mode = deterministic ? rill::run_mode::deterministic : rill::run_mode::concurrent;
  cfg.ops_points = ops_text.empty()
                       ? (mode == "dagsize" ? rill::parse_sweep(full ? "0..2000:250" : "0..500:100")
                                            : rill::parse_sweep("250"))
                       : rill::parse_sweep(ops_text);
  cfg.values_points = values_text.empty()
                          ? (mode == "load" ? rill::parse_sweep("0..10000") : rill::parse_sweep("1000"))
                          : rill::parse_sweep(values_text);
  auto rows = rill::run_bench(cfg, &std::cerr);
  std::string csv = rill::bench_csv(rows);
  if (!csv_path.empty()) {
    std::ofstream out(csv_path);
    out << csv;
    std::cerr << "wrote " << csv_path << "\n";
  } else {
    std::cout << csv;
  }
  // Per-cell overhead of the meta runtime over the stripped one.
  std::map<std::pair<std::int64_t, std::int64_t>, std::pair<double, double>> cells;
  for (const auto& r : rows) {
    auto& c = cells[{r.ops, r.values}];
    (r.variant == "meta" ? c.first : c.second) = r.elapsed_ms;
  }
  for (const auto& [key, c] : cells)
    if (c.second > 0)
      std::cerr << "overhead ops=" << key.first << " values=" << key.second << ": "
                << c.first / c.second << "x\n";
  return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stream pipeline runner with compile-time and run-time meta layers"};
  app.require_subcommand(1);

  run_flags flags;
  std::string expr_text;

  auto* run = app.add_subcommand("run", "deploy a pipeline and print the sink result");
  run->add_option("expr", expr_text, "pipeline expression")->required();
  run->add_option("--behavior", flags.behavior,
                  "run-time behavior: none|identity|logging|pull|smartpull|encrypt:<hexkey>");
  run->add_option("--structural", flags.structural,
                  "compile-time rewrite: none|fusion|parallel:n|timestamp");
  run->add_option("--trace", flags.trace_path, "write the message trace to a file");
  run->add_flag("--deterministic", flags.deterministic, "single-threaded reproducible scheduling");
  run->add_option("--seed", flags.seed, "scheduling permutation seed (deterministic mode)");

  std::string compile_structural = "none";
  auto* compile = app.add_subcommand("compile", "print the instruction sequence and compiled dag");
  compile->add_option("expr", expr_text, "pipeline expression")->required();
  compile->add_option("--structural", compile_structural,
                      "compile-time rewrite: none|fusion|parallel:n|timestamp");
  compile->add_option("--behavior", compile_structural,
                      "alias for --structural on this subcommand");

  std::string validate_file;
  auto* validate = app.add_subcommand("validate", "check the deployability constraints");
  validate->add_option("expr", expr_text, "pipeline expression");
  validate->add_option("--file", validate_file, "read a serialized dag instead");

  std::string bench_mode = "load", bench_ops, bench_values, bench_csv_path;
  int bench_reps = 5;
  bool bench_det = false, bench_full = false;
  auto* bench = app.add_subcommand("bench", "compare the meta runtime against the fast path");
  bench->add_option("--mode", bench_mode, "dagsize (sweep operators) or load (sweep values)");
  bench->add_option("--ops", bench_ops, "operator count: N or A..B[:step]");
  bench->add_option("--values", bench_values, "value count: N or A..B[:step]");
  bench->add_option("--reps", bench_reps, "repetitions per cell (median reported)");
  bench->add_option("--csv", bench_csv_path, "write rows to a CSV file");
  bench->add_flag("--deterministic", bench_det, "time the deterministic scheduler instead");
  bench->add_flag("--full", bench_full, "paper-scale dagsize sweep (0..2000)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(expr_text, flags);
    if (compile->parsed()) return cmd_compile(expr_text, compile_structural);
    if (validate->parsed()) {
      if (expr_text.empty() && validate_file.empty()) {
        std::cerr << "validate needs an expression or --file\n";
        return exit_user_error;
      }
      return cmd_validate(expr_text, validate_file);
    }
    if (bench->parsed())
      return cmd_bench(bench_mode, bench_ops, bench_values, bench_reps, bench_csv_path, bench_det,
                       bench_full);
  } catch (const rill::stream_error& e) {
    std::cerr << "stream error: " << e.what() << "\n";
    return exit_stream_error;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_user_error;
  }
  return exit_user_error;
}
