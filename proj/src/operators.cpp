#include "rill/operators.hpp"

#include <stdexcept>

namespace rill {

namespace {

const fn_ref& fn_of(const operator_spec& spec) { return std::get<fn_ref>(spec.argument); }

std::int64_t count_of(const operator_spec& spec) { return std::get<std::int64_t>(spec.argument); }

// zip keeps one queue per input port, represented as a pair of tuples.
value zip_state(std::vector<value> left, std::vector<value> right) {
  return value::tuple({value::tuple(std::move(left)), value::tuple(std::move(right))});
}

handler_response guard(const value& state, const std::function<handler_response()>& body) {
  try {
    return body();
  } catch (const std::exception& e) {
    return handler_response::failed(state, e.what());
  }
}

}  // namespace

value op_init_state(const operator_spec& spec) {
  if (spec.kind == "scan") return std::get<scan_arg>(spec.argument).seed;
  if (spec.kind == "balance") return value(0);
  if (spec.kind == "zip") return zip_state({}, {});
  return value::unit();
}

handler_response op_on_next(const operator_spec& spec, const value& state, const value& v,
                            std::uint32_t from_port) {
  if (spec.kind == "map") {
    return guard(state, [&] {
      return handler_response::emitted(state, {{0, call1(fn_of(spec), v)}});
    });
  }
  if (spec.kind == "filter") {
    return guard(state, [&] {
      return call1(fn_of(spec), v).truthy() ? handler_response::emitted(state, {{0, v}})
                                            : handler_response::skipped(state);
    });
  }
  if (spec.kind == "scan") {
    return guard(state, [&] {
      value acc = call2(std::get<scan_arg>(spec.argument).step, state, v);
      return handler_response::emitted(acc, {{0, acc}});
    });
  }
  if (spec.kind == "dup") {
    std::vector<emit_route> routes;
    for (std::int64_t p = 0; p < count_of(spec); ++p)
      routes.push_back({static_cast<std::uint32_t>(p), v});
    return handler_response::emitted(state, std::move(routes));
  }
  if (spec.kind == "balance") {
    std::int64_t cursor = state.as_int();
    std::int64_t n = count_of(spec);
    return handler_response::emitted(value((cursor + 1) % n),
                                     {{static_cast<std::uint32_t>(cursor), v}});
  }
  if (spec.kind == "merge") {
    (void)from_port;  // interleaves: every input forwards to the single output
    return handler_response::emitted(state, {{0, v}});
  }
  if (spec.kind == "zip") {
    const auto& queues = state.as_tuple();
    std::vector<value> left = queues[0].as_tuple();
    std::vector<value> right = queues[1].as_tuple();
    (from_port == 0 ? left : right).push_back(v);
    if (left.empty() || right.empty())
      return handler_response::skipped(zip_state(std::move(left), std::move(right)));
    value pair = value::tuple({left.front(), right.front()});
    left.erase(left.begin());
    right.erase(right.begin());
    return handler_response::emitted(zip_state(std::move(left), std::move(right)), {{0, pair}});
  }
  if (spec.kind == "fused") {
    // The step maps a value to a 1-tuple (emit) or unit (skip).
    return guard(state, [&] {
      value r = call1(fn_of(spec), v);
      if (r.is_unit()) return handler_response::skipped(state);
      return handler_response::emitted(state, {{0, r.as_tuple().at(0)}});
    });
  }
  throw std::invalid_argument("no handler for operator kind: " + spec.kind);
}

namespace sources {

source_endpoint range(std::int64_t from, std::int64_t to) {
  source_endpoint s;
  s.describe = "range(" + std::to_string(from) + "," + std::to_string(to) + ")";
  s.init_state = value::tuple({value(from), value(to)});
  s.on_tick = [](const value& state) -> source_response {
    const auto& pair = state.as_tuple();
    std::int64_t next = pair[0].as_int();
    std::int64_t last = pair[1].as_int();
    if (next > last) return {source_response::act::complete, state, {}};
    return {source_response::act::produced, value::tuple({value(next + 1), value(last)}),
            value(next)};
  };
  return s;
}

source_endpoint list(std::vector<value> values) {
  source_endpoint s;
  s.describe = "list(" + std::to_string(values.size()) + " values)";
  s.init_state = value::tuple(std::move(values));
  s.on_tick = [](const value& state) -> source_response {
    const auto& remaining = state.as_tuple();
    if (remaining.empty()) return {source_response::act::complete, state, {}};
    std::vector<value> rest(remaining.begin() + 1, remaining.end());
    return {source_response::act::produced, value::tuple(std::move(rest)), remaining.front()};
  };
  return s;
}

}  // namespace sources

namespace sinks {

sink_endpoint collect() { return {sink_endpoint::kind::collect_all, nullptr, "collect"}; }

sink_endpoint for_each(std::function<void(const value&)> callback) {
  return {sink_endpoint::kind::for_each, std::move(callback), "foreach"};
}

}  // namespace sinks

namespace {

fn_ref unary(const std::string& name, std::function<std::int64_t(std::int64_t)> f) {
  return make_fn(name, [f = std::move(f)](std::span<const value> args) -> value {
    return value(f(args[0].as_int()));
  });
}

fn_ref pred(const std::string& name, std::function<bool(std::int64_t)> f) {
  return make_fn(name, [f = std::move(f)](std::span<const value> args) -> value {
    return value(f(args[0].as_int()));
  });
}

std::map<std::string, registry_entry> build_registry() {
  using k = registry_entry::kind;
  std::map<std::string, registry_entry> r;
  r["even"] = {k::predicate, pred("even", [](std::int64_t x) { return x % 2 == 0; })};
  r["odd"] = {k::predicate, pred("odd", [](std::int64_t x) { return x % 2 != 0; })};
  r["gt0"] = {k::predicate, pred("gt0", [](std::int64_t x) { return x > 0; })};
  r["square"] = {k::unary, unary("square", [](std::int64_t x) { return x * x; })};
  r["inc"] = {k::unary, unary("inc", [](std::int64_t x) { return x + 1; })};
  r["double"] = {k::unary, unary("double", [](std::int64_t x) { return 2 * x; })};
  r["identity"] = {k::unary,
                   make_fn("identity", [](std::span<const value> args) { return args[0]; })};
  r["sum"] = {k::binary, make_fn("sum", [](std::span<const value> args) {
                return value(args[0].as_int() + args[1].as_int());
              })};
  r["pair"] = {k::binary, make_fn("pair", [](std::span<const value> args) {
                 return value::tuple({args[0], args[1]});
               })};
  return r;
}

}  // namespace

const std::map<std::string, registry_entry>& function_registry() {
  static const std::map<std::string, registry_entry> r = build_registry();
  return r;
}

fn_ref registry_fn(const std::string& name) {
  auto it = function_registry().find(name);
  if (it == function_registry().end())
    throw std::invalid_argument("unknown function name: " + name);
  return it->second.fn;
}

}  // namespace rill
