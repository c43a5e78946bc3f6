#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "rill/graph.hpp"
#include "rill/value.hpp"

namespace rill {

/// One emission produced by a handler: which output port, which value.
struct emit_route {
  std::uint32_t port = 0;
  value v;
};

/// Result of running an operator's event handler on one datum: the new user
/// state plus what should happen downstream.
struct handler_response {
  enum class act { emit, skip, complete, fail };
  act action = act::skip;
  value new_state;
  std::vector<emit_route> emits;
  std::string error;

  static handler_response emitted(value state, std::vector<emit_route> routes) {
    return {act::emit, std::move(state), std::move(routes), {}};
  }
  static handler_response skipped(value state) { return {act::skip, std::move(state), {}, {}}; }
  static handler_response completed(value state) { return {act::complete, std::move(state), {}, {}}; }
  static handler_response failed(value state, std::string err) {
    return {act::fail, std::move(state), {}, std::move(err)};
  }
};

/// Initial user state for an operator kind (scan seed, balance cursor, zip
/// queues; unit elsewhere).
value op_init_state(const operator_spec& spec);

/// Pure per-datum handler: dispatches on spec.kind. `from_port` matters only
/// for multi-input kinds.
handler_response op_on_next(const operator_spec& spec, const value& state, const value& v,
                            std::uint32_t from_port);

/// Result of asking a source for its next datum.
struct source_response {
  enum class act { produced, complete };
  act action = act::complete;
  value new_state;
  value produced;
};

/// A data producer bound to a source socket at deployment: initial state plus
/// a pure step function driven by tick events.
struct source_endpoint {
  std::string describe;
  value init_state;
  std::function<source_response(const value& state)> on_tick;
};

namespace sources {
source_endpoint range(std::int64_t from, std::int64_t to);  // inclusive bounds
source_endpoint list(std::vector<value> values);
}  // namespace sources

/// A data consumer bound to a sink socket: either collects everything and
/// delivers the list once on completion, or applies a callback per datum.
struct sink_endpoint {
  enum class kind { collect_all, for_each };
  kind k = kind::collect_all;
  std::function<void(const value&)> callback;  // for_each only
  std::string describe;
};

namespace sinks {
sink_endpoint collect();
sink_endpoint for_each(std::function<void(const value&)> callback);
}  // namespace sinks

/// Named argument values usable from the textual pipeline grammar; arbitrary
/// closures cannot cross the text boundary.
struct registry_entry {
  enum class kind { unary, predicate, binary };
  kind k = kind::unary;
  fn_ref fn;
};

const std::map<std::string, registry_entry>& function_registry();
fn_ref registry_fn(const std::string& name);

}  // namespace rill
