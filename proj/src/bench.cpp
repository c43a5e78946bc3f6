#include "rill/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "rill/behaviors.hpp"

namespace rill {

namespace {

struct chain_pipeline {
  dag graph;
  std::vector<binding> bindings;
};

// ops pass-through maps between a range source and a discarding sink.
chain_pipeline make_chain(std::int64_t ops, std::int64_t values) {
  chain_pipeline p;
  fn_ref id = registry_fn("identity");
  node_id src = p.graph.add_socket_node(socket_spec{"in", socket_dir::source_socket});
  node_id prev = src;
  for (std::int64_t i = 0; i < ops; ++i) {
    node_id m = p.graph.add_operator_node(ops::map(id));
    p.graph.add_edge({prev, 0, port_dir::output}, {m, 0, port_dir::input});
    prev = m;
  }
  node_id snk = p.graph.add_socket_node(socket_spec{"out", socket_dir::sink_socket});
  p.graph.add_edge({prev, 0, port_dir::output}, {snk, 0, port_dir::input});
  p.bindings.push_back(bind("in", sources::range(1, values)));
  p.bindings.push_back(bind("out", sinks::for_each([](const value&) {})));
  return p;
}

double run_once(const chain_pipeline& p, const behavior* b, const bench_config& cfg) {
  deploy_options opt;
  opt.mode = cfg.runtime_mode;
  opt.seed = cfg.seed;
  auto t0 = std::chrono::steady_clock::now();
  stream_handle h = b ? deploy(p.graph, p.bindings, *b, opt) : deploy_fast(p.graph, p.bindings, opt);
  const auto& outcomes = h.wait();
  auto t1 = std::chrono::steady_clock::now();
  const auto& o = outcomes.begin()->second;
  if (!o.ok) throw stream_error("benchmark stream failed: " + o.error);
  return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

double median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  std::size_t n = xs.size();
  return n % 2 ? xs[n / 2] : (xs[n / 2 - 1] + xs[n / 2]) / 2.0;
}

}  // namespace

std::vector<bench_row> run_bench(const bench_config& cfg, std::ostream* progress) {
  behavior identity = identity_behavior();
  std::vector<bench_row> rows;
  std::vector<std::pair<std::int64_t, std::int64_t>> cells;
  if (cfg.mode == "dagsize") {
    for (auto ops : cfg.ops_points) cells.emplace_back(ops, cfg.values_points.at(0));
  } else if (cfg.mode == "load") {
    for (auto values : cfg.values_points) cells.emplace_back(cfg.ops_points.at(0), values);
  } else {
    throw std::invalid_argument("bench mode must be 'dagsize' or 'load', got '" + cfg.mode + "'");
  }

  for (auto [ops, values] : cells) {
    chain_pipeline p = make_chain(ops, values);
    for (bool meta : {false, true}) {
      std::vector<double> times;
      for (int r = 0; r < cfg.reps; ++r)
        times.push_back(run_once(p, meta ? &identity : nullptr, cfg));
      bench_row row{cfg.mode,
                    ops,
                    values,
                    meta ? "meta" : "fast",
                    meta ? "identity" : "none",
                    cfg.reps,
                    median(std::move(times))};
      if (progress)
        (*progress) << row.mode << " ops=" << row.ops << " values=" << row.values << " "
                    << row.variant << ": " << row.elapsed_ms << " ms (median of " << row.reps
                    << ")\n";
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::string bench_csv(const std::vector<bench_row>& rows) {
  std::ostringstream os;
  os << bench_csv_header << "\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.3f", r.elapsed_ms);
    os << r.mode << "," << r.ops << "," << r.values << "," << r.variant << "," << r.behavior << ","
       << r.reps << "," << buf << "\n";
  }
  return os.str();
}

std::vector<std::int64_t> parse_sweep(const std::string& text) {
  auto dots = text.find("..");
  if (dots == std::string::npos) return {std::stoll(text)};
  std::int64_t lo = std::stoll(text.substr(0, dots));
  std::string rest = text.substr(dots + 2);
  std::int64_t step = 0;
  auto colon = rest.find(':');
  if (colon != std::string::npos) {
    step = std::stoll(rest.substr(colon + 1));
    rest = rest.substr(0, colon);
  }
  std::int64_t hi = std::stoll(rest);
  if (hi < lo) throw std::invalid_argument("sweep upper bound below lower bound: " + text);
  if (step <= 0) step = std::max<std::int64_t>(1, (hi - lo) / 5);  // default: 6 points
  std::vector<std::int64_t> out;
  for (std::int64_t v = lo; v < hi; v += step) out.push_back(v);
  out.push_back(hi);
  return out;
}

linear_fit fit_line(const std::vector<double>& xs, const std::vector<double>& ys) {
  std::size_t n = xs.size();
  if (n < 2 || ys.size() != n) throw std::invalid_argument("fit_line needs >= 2 points");
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += xs[i];
    sy += ys[i];
  }
  double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  linear_fit f;
  f.slope = sxx == 0 ? 0 : sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (syy == 0) {
    f.r2 = 1.0;  // constant data is fit perfectly by the constant line
  } else {
    double ss_res = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double e = ys[i] - (f.intercept + f.slope * xs[i]);
      ss_res += e * e;
    }
    f.r2 = 1.0 - ss_res / syy;
  }
  return f;
}

}  // namespace rill
