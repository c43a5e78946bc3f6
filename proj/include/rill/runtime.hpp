#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "rill/graph.hpp"
#include "rill/operators.hpp"
#include "rill/value.hpp"

namespace rill {

using unit_ref = std::uint32_t;
inline constexpr unit_ref no_unit = 0xffffffffu;

enum class event_tag { init, next, err, complete, tick, demand };

std::string event_tag_name(event_tag t);

/// A protocol message between deployed units. `from`/`from_port` identify the
/// sending unit and its output port so multi-input operators can route.
struct event {
  event_tag tag = event_tag::init;
  value v;
  std::string error;
  unit_ref from = no_unit;
  std::uint32_t from_port = 0;
};

event ev_init();
event ev_next(value v, unit_ref from, std::uint32_t from_port = 0);
event ev_err(std::string error, unit_ref from);
event ev_complete(unit_ref from);
event ev_tick();
event ev_demand(unit_ref from);

enum class unit_role { op, source, sink };
enum class unit_phase { initial, running, terminal };

/// What a base-level event handler asks the runtime to do.
struct base_result {
  enum class tag { initialized, emit, skip, complete, fail, tick_value };
  tag t = tag::skip;
  value new_state;
  std::uint64_t new_done_inputs = 0;
  std::vector<emit_route> emits;
  value produced;  // tick_value
  std::string error;
};

struct effect_buffer;
using port_map = std::unordered_map<std::uint64_t, std::uint32_t>;

/// The reified operator state handed to a run-time meta stream: who the unit
/// is, its neighbours, and its user/meta state. Copies are cheap; neighbour
/// lists are shared.
struct snapshot {
  unit_ref pid = no_unit;
  std::shared_ptr<const std::vector<unit_ref>> us;
  std::shared_ptr<const std::vector<unit_ref>> ds;
  value state;
  value meta_state;
  std::uint64_t done_inputs = 0;
  bool final_mark = false;

  // Runtime plumbing, valid for the duration of one meta run.
  unit_role role = unit_role::op;
  const operator_spec* spec = nullptr;
  const source_endpoint* source = nullptr;
  const sink_endpoint* sink = nullptr;
  const port_map* ports = nullptr;
  effect_buffer* fx = nullptr;
};

enum class cell_tag { event_in, response, done };

/// The datum flowing through a run-time meta stream: a reified event on the
/// way in, a handler response mid-way, a bare snapshot on the way out.
struct meta_cell {
  snapshot snap;
  cell_tag tag = cell_tag::event_in;
  event evt;
  base_result resp;

  meta_cell(snapshot s, cell_tag t, event e, base_result r);
};

value make_event_cell(snapshot s, event e);
value make_response_cell(snapshot s, base_result r);
value make_done_cell(snapshot s);

/// Effects collected during a meta run and flushed atomically afterwards, so
/// a crashing run emits nothing.
struct effect_buffer {
  struct send {
    unit_ref to = no_unit;
    event ev;
  };
  std::vector<send> sends;
  std::vector<value> callback_values;  // for_each sink deliveries
  bool deliver = false;
  bool deliver_error = false;
  value delivered;
  std::string error;
};

/// A run-time behavior: one closed meta dag per unit role, each with a single
/// `src` and `snk` socket.
struct behavior {
  std::string name;
  dag operator_meta;
  dag source_meta;
  dag sink_meta;
};

struct trace_entry {
  std::uint64_t seq = 0;
  unit_ref from = no_unit;
  unit_ref to = no_unit;
  event_tag tag = event_tag::init;
  value v;
  std::string error;
};

struct unit_info {
  std::string name;
  unit_role role = unit_role::op;
  std::string kind;
  std::string label;  // endpoint label for sources/sinks
};

struct sink_outcome {
  bool ok = false;
  value result;  // collected tuple, or unit for for_each
  std::string error;
};

struct stream_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct deploy_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

enum class run_mode { concurrent, deterministic };

struct deploy_options {
  run_mode mode = run_mode::concurrent;
  std::uint64_t seed = 0;
  bool record_trace = false;
  /// Aborts runaway streams (e.g. a meta bug creating a tick loop).
  std::uint64_t max_messages = 50'000'000;
};

struct binding {
  std::string label;
  std::variant<source_endpoint, sink_endpoint> endpoint;
};

binding bind(std::string label, source_endpoint ep);
binding bind(std::string label, sink_endpoint ep);

struct deployment;

/// Observer for a running stream. wait() drives/awaits the deployment to
/// quiescence and yields one terminal outcome per sink.
class stream_handle {
 public:
  explicit stream_handle(std::shared_ptr<deployment> impl) : impl_(std::move(impl)) {}

  const std::map<std::string, sink_outcome>& wait();
  /// Convenience for single-sink streams; throws stream_error on Err.
  value wait_value();

  const std::vector<trace_entry>& trace() const;
  const std::vector<unit_info>& units() const;
  bool aborted() const;
  std::string abort_reason() const;

 private:
  std::shared_ptr<deployment> impl_;
};

std::string format_trace(const std::vector<trace_entry>& trace, const std::vector<unit_info>& units);

/// Deploys a closed dag with the given endpoint bindings; every unit routes
/// its events through the behavior's meta stream for its role.
stream_handle deploy(const dag& d, const std::vector<binding>& bindings, const behavior& b,
                     deploy_options opt = {});

/// The meta-stripped fast path: identical observable behavior to the identity
/// behavior, with no reification at all.
stream_handle deploy_fast(const dag& d, const std::vector<binding>& bindings,
                          deploy_options opt = {});

/// Primitives available to meta streams (behaviors are built from these).
namespace meta {

/// Calls the unit's base-level event handler; the returned response cell
/// carries the post-handler snapshot.
value call_base(const value& event_cell);

/// Translates a handler response into the default protocol effects (push
/// semantics) and returns the finished snapshot cell.
value default_effects(const value& response_cell);

/// Emits `e` to every downstream / upstream unit, or to the unit itself.
void propagate_down(const value& cell, const event& e);
void propagate_up(const value& cell, const event& e);
void propagate_up_to(const value& cell, const std::vector<unit_ref>& targets, const event& e);
void propagate_self(const value& cell, const event& e);

/// Completion effects only: complete downstream, deliver if a sink, mark
/// terminal.
value complete_effects(const value& cell);

/// Current user state of the operator behind a cell.
value state(const value& cell);

}  // namespace meta

}  // namespace rill
