#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rill/runtime.hpp"

namespace rill {

struct parse_error : std::invalid_argument {
  std::size_t position;
  parse_error(const std::string& msg, std::size_t pos)
      : std::invalid_argument("parse error at column " + std::to_string(pos + 1) + ": " + msg),
        position(pos) {}
};

/// Abstract syntax of a pipeline expression. Only registry-named functions
/// can appear; arbitrary closures cannot cross the text boundary.
struct pipeline_expr {
  enum class kind {
    source_range,  // range(a,b)
    source_list,   // list([v, ...])
    sink_collect,  // collect
    sink_foreach,  // foreach(print)
    stage,         // map(f) | filter(f) | scan(f,n) | dup(n) | balance(n) | merge(n) | zip
    chain,         // parts joined by ~>
    group          // (p1 ||| p2 ||| ...)
  };
  kind k = kind::chain;
  std::int64_t a = 0;
  std::int64_t b = 0;
  std::vector<std::int64_t> items;
  std::string op_kind;
  std::string fn_name;
  std::int64_t n = 0;
  std::vector<pipeline_expr> parts;

  friend bool operator==(const pipeline_expr&, const pipeline_expr&);
};

pipeline_expr parse_pipeline(const std::string& text);
std::string print_pipeline(const pipeline_expr& e);

/// A pipeline lowered to a deployable form: the closed dag plus the endpoint
/// bindings for its sockets. Lowering fails (with a position-free error)
/// rather than produce a dag that would not validate.
struct lowered_pipeline {
  dag graph;
  std::vector<binding> bindings;
};

lowered_pipeline lower_pipeline(const pipeline_expr& e);

}  // namespace rill
