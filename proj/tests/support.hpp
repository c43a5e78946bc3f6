#pragma once

// Shared test helpers: independent oracles for stream results, a random
// pipeline generator, and structural dag fingerprints. The oracles stay
// deliberately naive (plain list folds) so they cannot share bugs with the
// engine they check.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "rill/behaviors.hpp"
#include "rill/compile.hpp"
#include "rill/graph.hpp"
#include "rill/operators.hpp"
#include "rill/runtime.hpp"

namespace testkit {

// -- linear-pipeline oracle ----------------------------------------------

struct oracle_stage {
  enum class kind { map, filter, scan };
  kind k = kind::map;
  std::string fn;       // registry name
  std::int64_t seed = 0;  // scan
};

// Sequential list fold applying each stage in composition order.
inline std::vector<std::int64_t> oracle_run(const std::vector<oracle_stage>& stages,
                                            std::vector<std::int64_t> input) {
  std::vector<std::int64_t> cur = std::move(input);
  for (const auto& st : stages) {
    std::vector<std::int64_t> next;
    std::int64_t acc = st.seed;
    for (std::int64_t x : cur) {
      switch (st.k) {
        case oracle_stage::kind::map: {
          if (st.fn == "square") next.push_back(x * x);
          else if (st.fn == "inc") next.push_back(x + 1);
          else if (st.fn == "double") next.push_back(2 * x);
          else next.push_back(x);  // identity
          break;
        }
        case oracle_stage::kind::filter: {
          bool keep = st.fn == "even" ? x % 2 == 0 : st.fn == "odd" ? x % 2 != 0 : x > 0;
          if (keep) next.push_back(x);
          break;
        }
        case oracle_stage::kind::scan: {
          acc = acc + x;  // only "sum" is used in generated pipelines
          next.push_back(acc);
          break;
        }
      }
    }
    cur = std::move(next);
  }
  return cur;
}

// -- random linear pipelines ----------------------------------------------

struct random_pipeline {
  std::vector<oracle_stage> stages;
  std::vector<std::int64_t> input;
};

inline random_pipeline make_random_pipeline(std::mt19937_64& rng, std::size_t max_depth = 8,
                                            std::size_t max_len = 1000) {
  static const char* maps[] = {"square", "inc", "double", "identity"};
  static const char* filters[] = {"even", "odd", "gt0"};
  random_pipeline p;
  std::uniform_int_distribution<std::size_t> depth(1, max_depth);
  std::uniform_int_distribution<std::size_t> len(0, max_len);
  std::uniform_int_distribution<int> st(0, 2);
  std::uniform_int_distribution<std::int64_t> val(-50, 50);
  std::size_t d = depth(rng);
  for (std::size_t i = 0; i < d; ++i) {
    oracle_stage s;
    int k = st(rng);
    if (k == 0) {
      s.k = oracle_stage::kind::map;
      s.fn = maps[rng() % 4];
    } else if (k == 1) {
      s.k = oracle_stage::kind::filter;
      s.fn = filters[rng() % 3];
    } else {
      s.k = oracle_stage::kind::scan;
      s.fn = "sum";
      s.seed = val(rng);
    }
    p.stages.push_back(s);
  }
  std::size_t n = len(rng);
  for (std::size_t i = 0; i < n; ++i) p.input.push_back(val(rng));
  return p;
}

// Lowers a random pipeline to an open operator dag (no sockets).
inline rill::dag stages_to_dag(const std::vector<oracle_stage>& stages) {
  rill::dag d;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const auto& st = stages[i];
    rill::operator_spec spec =
        st.k == oracle_stage::kind::map      ? rill::ops::map(rill::registry_fn(st.fn))
        : st.k == oracle_stage::kind::filter ? rill::ops::filter(rill::registry_fn(st.fn))
            : rill::ops::scan(rill::registry_fn("sum"), rill::value(st.seed));
    rill::dag stage = rill::single(std::move(spec));
    d = i == 0 ? stage : d >> stage;
  }
  return d;
}

// Closed dag + bindings for a linear pipeline over an explicit input list.
struct deployable {
  rill::dag graph;
  std::vector<rill::binding> bindings;
};

inline deployable make_deployable(const random_pipeline& p) {
  deployable out;
  std::vector<rill::value> input;
  for (auto v : p.input) input.push_back(rill::value(v));
  if (p.stages.empty()) {
    rill::node_id s = out.graph.add_socket_node({"in", rill::socket_dir::source_socket});
    rill::node_id k = out.graph.add_socket_node({"out", rill::socket_dir::sink_socket});
    out.graph.add_edge({s, 0, rill::port_dir::output}, {k, 0, rill::port_dir::input});
  } else {
    out.graph = rill::close(stages_to_dag(p.stages), {"in", "out"});
  }
  out.bindings.push_back(rill::bind("in", rill::sources::list(std::move(input))));
  out.bindings.push_back(rill::bind("out", rill::sinks::collect()));
  return out;
}

inline std::vector<std::int64_t> ints_of(const rill::value& collected) {
  std::vector<std::int64_t> out;
  for (const auto& v : collected.as_tuple()) out.push_back(v.as_int());
  return out;
}

inline std::vector<std::int64_t> sorted(std::vector<std::int64_t> xs) {
  std::sort(xs.begin(), xs.end());
  return xs;
}

// -- dag fingerprints -------------------------------------------------------

// Canonical structural form via the emitted instruction sequence, with
// aliases normalized to their order of appearance. Two dags built through
// the composition API are isomorphic iff their fingerprints match (function
// arguments compare by identity).
inline std::string dag_fingerprint(const rill::dag& d) {
  std::ostringstream os;
  std::map<std::string, std::size_t> alias_order;
  std::map<const void*, std::size_t> fn_order;
  auto norm_alias = [&](const std::string& a) {
    auto [it, fresh] = alias_order.emplace(a, alias_order.size());
    (void)fresh;
    return it->second;
  };
  auto norm_arg = [&](const rill::op_argument& arg) -> std::string {
    if (std::holds_alternative<std::monostate>(arg)) return "-";
    if (std::holds_alternative<std::int64_t>(arg))
      return std::to_string(std::get<std::int64_t>(arg));
    if (std::holds_alternative<std::string>(arg)) return "'" + std::get<std::string>(arg) + "'";
    const void* key = nullptr;
    std::string extra;
    if (std::holds_alternative<rill::fn_ref>(arg)) {
      key = std::get<rill::fn_ref>(arg).get();
    } else {
      const auto& sa = std::get<rill::scan_arg>(arg);
      key = sa.step.get();
      extra = "+" + sa.seed.to_string();
    }
    auto [it, fresh] = fn_order.emplace(key, fn_order.size());
    (void)fresh;
    return "f" + std::to_string(it->second) + extra;
  };
  for (const auto& instr : rill::emit_instructions(d)) {
    if (const auto* a = std::get_if<rill::add_operator_instr>(&instr)) {
      os << "op(" << a->kind << "," << norm_arg(a->argument) << ");";
    } else if (std::get_if<rill::name_it_instr>(&instr)) {
      os << "name;";
    } else {
      const auto& e = std::get<rill::add_edge_instr>(instr);
      os << "edge(" << norm_alias(std::get<std::string>(e.from)) << "." << e.from_port << ","
         << norm_alias(std::get<std::string>(e.to)) << "." << e.to_port << ");";
    }
  }
  return os.str();
}

inline bool dag_isomorphic(const rill::dag& a, const rill::dag& b) {
  return dag_fingerprint(a) == dag_fingerprint(b);
}

inline std::size_t operator_count(const rill::dag& d) {
  std::size_t n = 0;
  for (const auto& node : d.nodes())
    if (!node.is_socket()) ++n;
  return n;
}

}  // namespace testkit
