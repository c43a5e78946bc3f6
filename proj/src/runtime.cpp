#include "rill/runtime.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "rill/counters.hpp"
#include "rill/exec.hpp"

namespace rill {

std::string event_tag_name(event_tag t) {
  switch (t) {
    case event_tag::init: return "init";
    case event_tag::next: return "next";
    case event_tag::err: return "err";
    case event_tag::complete: return "complete";
    case event_tag::tick: return "tick";
    case event_tag::demand: return "demand";
  }
  return "?";
}

event ev_init() { return {event_tag::init, {}, {}, no_unit, 0}; }
event ev_next(value v, unit_ref from, std::uint32_t from_port) {
  return {event_tag::next, std::move(v), {}, from, from_port};
}
event ev_err(std::string error, unit_ref from) {
  return {event_tag::err, {}, std::move(error), from, 0};
}
event ev_complete(unit_ref from) { return {event_tag::complete, {}, {}, from, 0}; }
event ev_tick() { return {event_tag::tick, {}, {}, no_unit, 0}; }
event ev_demand(unit_ref from) { return {event_tag::demand, {}, {}, from, 0}; }

meta_cell::meta_cell(snapshot s, cell_tag t, event e, base_result r)
    : snap(std::move(s)), tag(t), evt(std::move(e)), resp(std::move(r)) {
  counters::meta_cells_allocated().fetch_add(1, std::memory_order_relaxed);
}

value make_event_cell(snapshot s, event e) {
  return value(std::make_shared<const meta_cell>(std::move(s), cell_tag::event_in, std::move(e),
                                                 base_result{}));
}
value make_response_cell(snapshot s, base_result r) {
  return value(
      std::make_shared<const meta_cell>(std::move(s), cell_tag::response, event{}, std::move(r)));
}
value make_done_cell(snapshot s) {
  return value(std::make_shared<const meta_cell>(std::move(s), cell_tag::done, event{}, base_result{}));
}

binding bind(std::string label, source_endpoint ep) { return {std::move(label), std::move(ep)}; }
binding bind(std::string label, sink_endpoint ep) { return {std::move(label), std::move(ep)}; }

namespace {

std::uint64_t port_key(unit_ref from, std::uint32_t from_port) {
  return (static_cast<std::uint64_t>(from) << 32) | from_port;
}

// -- base-level dispatch -------------------------------------------------

struct unit_view {
  unit_role role = unit_role::op;
  const operator_spec* spec = nullptr;
  const source_endpoint* source = nullptr;
  const sink_endpoint* sink = nullptr;
  const value* state = nullptr;
  std::uint64_t done_inputs = 0;
  std::uint32_t in_arity = 0;
  const port_map* ports = nullptr;
};

base_result call_base_on(const unit_view& u, const event& ev) {
  base_result r;
  r.new_state = *u.state;
  r.new_done_inputs = u.done_inputs;
  switch (ev.tag) {
    case event_tag::init:
      r.t = base_result::tag::initialized;
      if (u.role == unit_role::op)
        r.new_state = op_init_state(*u.spec);
      else if (u.role == unit_role::source)
        r.new_state = u.source->init_state;
      else
        r.new_state = u.sink->k == sink_endpoint::kind::collect_all ? value::tuple({}) : value::unit();
      return r;

    case event_tag::next: {
      if (u.role == unit_role::source) return r;  // sources have no upstream
      if (u.role == unit_role::sink) {
        if (u.sink->k == sink_endpoint::kind::collect_all) {
          std::vector<value> collected = u.state->as_tuple();
          collected.push_back(ev.v);
          r.new_state = value::tuple(std::move(collected));
          r.t = base_result::tag::skip;
        } else {
          r.t = base_result::tag::emit;
          r.emits = {{0, ev.v}};
        }
        return r;
      }
      std::uint32_t port = 0;
      if (u.ports) {
        auto it = u.ports->find(port_key(ev.from, ev.from_port));
        if (it != u.ports->end()) port = it->second;
      }
      handler_response h = op_on_next(*u.spec, *u.state, ev.v, port);
      r.new_state = h.new_state;
      switch (h.action) {
        case handler_response::act::emit:
          r.t = base_result::tag::emit;
          r.emits = std::move(h.emits);
          break;
        case handler_response::act::skip: r.t = base_result::tag::skip; break;
        case handler_response::act::complete: r.t = base_result::tag::complete; break;
        case handler_response::act::fail:
          r.t = base_result::tag::fail;
          r.error = h.error;
          break;
      }
      return r;
    }

    case event_tag::complete: {
      if (u.role == unit_role::sink) {
        r.t = base_result::tag::complete;
        return r;
      }
      if (u.role == unit_role::source) return r;
      std::uint32_t port = 0;
      if (u.ports) {
        auto it = u.ports->find(port_key(ev.from, ev.from_port));
        if (it != u.ports->end()) port = it->second;
      }
      r.new_done_inputs = u.done_inputs | (1ull << port);
      // zip can make no further pairs after its first completed input; every
      // other kind waits for all inputs.
      bool all_done = true;
      for (std::uint32_t p = 0; p < u.in_arity; ++p)
        if (!(r.new_done_inputs & (1ull << p))) all_done = false;
      if (u.spec->kind == "zip" || all_done)
        r.t = base_result::tag::complete;
      else
        r.t = base_result::tag::skip;
      return r;
    }

    case event_tag::err:
      // First error wins; the unit goes terminal either way.
      r.t = base_result::tag::fail;
      r.error = ev.error;
      return r;

    case event_tag::tick: {
      if (u.role != unit_role::source) return r;  // tick is a source-only event
      source_response s = u.source->on_tick(*u.state);
      r.new_state = s.new_state;
      if (s.action == source_response::act::produced) {
        r.t = base_result::tag::tick_value;
        r.produced = s.produced;
      } else {
        r.t = base_result::tag::complete;
      }
      return r;
    }

    case event_tag::demand:
      return r;  // demand exists only under pull behaviors, which intercept it
  }
  return r;
}

// -- default effects -----------------------------------------------------

struct effect_target {
  unit_ref pid = no_unit;
  unit_role role = unit_role::op;
  const sink_endpoint* sink = nullptr;
  const std::vector<unit_ref>* ds = nullptr;
  const value* state_after = nullptr;
};

// Push-semantics effects shared by the fast path and the default meta
// stages. Returns true when the unit must go terminal.
bool default_effects_on(const effect_target& t, const base_result& r, effect_buffer& out) {
  switch (r.t) {
    case base_result::tag::initialized:
      if (t.role == unit_role::source) out.sends.push_back({t.pid, ev_tick()});
      return false;
    case base_result::tag::emit:
      if (t.role == unit_role::sink) {
        for (const auto& e : r.emits) out.callback_values.push_back(e.v);
        return false;
      }
      for (const auto& e : r.emits)
        out.sends.push_back({t.ds->at(e.port), ev_next(e.v, t.pid, e.port)});
      return false;
    case base_result::tag::skip: return false;
    case base_result::tag::complete:
      for (std::uint32_t p = 0; p < t.ds->size(); ++p)
        out.sends.push_back({t.ds->at(p), {event_tag::complete, {}, {}, t.pid, p}});
      if (t.role == unit_role::sink) {
        out.deliver = true;
        out.delivered = t.sink->k == sink_endpoint::kind::collect_all ? *t.state_after : value::unit();
      }
      return true;
    case base_result::tag::fail:
      for (std::uint32_t p = 0; p < t.ds->size(); ++p)
        out.sends.push_back({t.ds->at(p), {event_tag::err, {}, r.error, t.pid, p}});
      if (t.role == unit_role::sink) {
        out.deliver = true;
        out.deliver_error = true;
        out.error = r.error;
      }
      return true;
    case base_result::tag::tick_value:
      for (std::uint32_t p = 0; p < t.ds->size(); ++p)
        out.sends.push_back({t.ds->at(p), ev_next(r.produced, t.pid, p)});
      out.sends.push_back({t.pid, ev_tick()});  // push: keep producing
      return false;
  }
  return false;
}

}  // namespace

// -- deployment ----------------------------------------------------------

namespace {

struct unit_state {
  unit_ref id = no_unit;
  std::string name;
  unit_role role = unit_role::op;
  operator_spec spec;
  source_endpoint source;
  sink_endpoint sink;
  std::string label;

  std::shared_ptr<const std::vector<unit_ref>> us;
  std::shared_ptr<const std::vector<unit_ref>> ds;
  std::shared_ptr<const port_map> ports;

  value state;
  value meta_state;
  std::uint64_t done_inputs = 0;
  unit_phase phase = unit_phase::initial;
  bool delivered = false;

  std::unique_ptr<sync_stream> meta;

  std::mutex mb_mutex;
  std::deque<event> mb;
  std::atomic<bool> scheduled{false};
};

}  // namespace

struct deployment {
  deploy_options opt;
  std::vector<std::unique_ptr<unit_state>> units;
  std::vector<unit_info> infos;

  // concurrent scheduling
  std::mutex runq_mutex;
  std::condition_variable runq_cv;
  std::deque<unit_ref> runq;
  std::vector<std::thread> workers;
  std::atomic<bool> stop{false};

  std::atomic<std::uint64_t> in_flight{0};
  std::atomic<std::uint64_t> processed{0};
  std::atomic<bool> abort_flag{false};
  std::mutex abort_mutex;
  std::string abort_why;

  std::mutex done_mutex;
  std::condition_variable done_cv;

  std::mutex result_mutex;
  std::map<std::string, sink_outcome> outcomes;

  std::mutex trace_mutex;
  std::vector<trace_entry> trace;
  std::atomic<std::uint64_t> next_seq{1};

  bool finished = false;
  std::mutex finish_mutex;

  ~deployment() { shutdown_workers(); }

  void abort(const std::string& why) {
    {
      std::lock_guard<std::mutex> g(abort_mutex);
      if (!abort_flag.load()) abort_why = why;
    }
    abort_flag.store(true);
  }

  void send(unit_ref to, event ev) {
    if (abort_flag.load(std::memory_order_relaxed)) return;
    in_flight.fetch_add(1, std::memory_order_relaxed);
    unit_state& u = *units[to];
    {
      std::lock_guard<std::mutex> g(u.mb_mutex);
      u.mb.push_back(std::move(ev));
    }
    if (opt.mode == run_mode::concurrent && !u.scheduled.exchange(true)) {
      std::lock_guard<std::mutex> g(runq_mutex);
      runq.push_back(to);
      runq_cv.notify_one();
    }
  }

  void flush(unit_state& u, effect_buffer& fx) {
    for (auto& s : fx.sends) send(s.to, std::move(s.ev));
    if (!fx.callback_values.empty() && u.sink.callback) {
      try {
        for (const auto& v : fx.callback_values) u.sink.callback(v);
      } catch (const std::exception& e) {
        abort(std::string("sink callback failed: ") + e.what());
      }
    }
    if (fx.deliver && !u.delivered) {
      u.delivered = true;
      std::lock_guard<std::mutex> g(result_mutex);
      outcomes[u.label] =
          fx.deliver_error ? sink_outcome{false, {}, fx.error} : sink_outcome{true, fx.delivered, {}};
    }
  }

  void fault_unit(unit_state& u, const std::string& why) {
    u.phase = unit_phase::terminal;
    effect_buffer fx;
    for (std::uint32_t p = 0; p < u.ds->size(); ++p)
      fx.sends.push_back({u.ds->at(p), {event_tag::err, {}, why, u.id, p}});
    if (u.role == unit_role::sink) {
      fx.deliver = true;
      fx.deliver_error = true;
      fx.error = why;
    }
    flush(u, fx);
  }

  void process(unit_state& u, event ev) {
    if (opt.record_trace) {
      std::lock_guard<std::mutex> g(trace_mutex);
      trace.push_back({next_seq.fetch_add(1), ev.from, u.id, ev.tag, ev.v, ev.error});
    }
    std::uint64_t n = processed.fetch_add(1, std::memory_order_relaxed) + 1;
    if (n > opt.max_messages) {
      abort("message budget exceeded (" + std::to_string(opt.max_messages) + " messages)");
      return;
    }
    if (abort_flag.load(std::memory_order_relaxed)) return;
    if (u.phase == unit_phase::terminal) return;  // terminal units stop processing

    if (!u.meta) {
      // Fast path: no reification, straight to handler and effects.
      unit_view view{u.role,  &u.spec,       &u.source,
                     &u.sink, &u.state,      u.done_inputs,
                     static_cast<std::uint32_t>(u.us->size()), u.ports.get()};
      base_result r = call_base_on(view, ev);
      u.state = r.new_state;
      u.done_inputs = r.new_done_inputs;
      effect_buffer fx;
      effect_target target{u.id, u.role, &u.sink, u.ds.get(), &u.state};
      bool terminal = default_effects_on(target, r, fx);
      if (u.phase == unit_phase::initial) u.phase = unit_phase::running;
      if (terminal) u.phase = unit_phase::terminal;
      flush(u, fx);
      return;
    }

    // Meta path: reify, run the meta stream to completion, install the final
    // snapshot, then release the buffered effects.
    effect_buffer fx;
    snapshot snap;
    snap.pid = u.id;
    snap.us = u.us;
    snap.ds = u.ds;
    snap.state = u.state;
    snap.meta_state = u.meta_state;
    snap.done_inputs = u.done_inputs;
    snap.role = u.role;
    snap.spec = &u.spec;
    snap.source = &u.source;
    snap.sink = &u.sink;
    snap.ports = u.ports.get();
    snap.fx = &fx;
    std::vector<value> outs;
    try {
      outs = u.meta->feed(make_event_cell(std::move(snap), std::move(ev)));
    } catch (const std::exception& e) {
      fault_unit(u, std::string("meta fault: ") + e.what());
      return;
    }
    if (outs.size() != 1 || !outs[0].is_meta_cell()) {
      fault_unit(u, "meta fault: meta stream produced " + std::to_string(outs.size()) +
                        " snapshots, expected exactly 1");
      return;
    }
    const snapshot& result = outs[0].as_meta_cell()->snap;
    u.state = result.state;
    u.meta_state = result.meta_state;
    u.done_inputs = result.done_inputs;
    if (u.phase == unit_phase::initial) u.phase = unit_phase::running;
    if (result.final_mark) u.phase = unit_phase::terminal;
    flush(u, fx);
  }

  void drain_one(unit_ref id) {
    unit_state& u = *units[id];
    for (;;) {
      event ev;
      {
        std::lock_guard<std::mutex> g(u.mb_mutex);
        if (u.mb.empty()) break;
        ev = std::move(u.mb.front());
        u.mb.pop_front();
      }
      process(u, std::move(ev));
      if (in_flight.fetch_sub(1, std::memory_order_acq_rel) == 1) {
        std::lock_guard<std::mutex> g(done_mutex);
        done_cv.notify_all();
      }
    }
  }

  void worker_loop() {
    for (;;) {
      unit_ref id;
      {
        std::unique_lock<std::mutex> l(runq_mutex);
        runq_cv.wait(l, [&] { return stop.load() || !runq.empty(); });
        if (stop.load() && runq.empty()) return;
        id = runq.front();
        runq.pop_front();
      }
      drain_one(id);
      unit_state& u = *units[id];
      u.scheduled.store(false);
      bool more;
      {
        std::lock_guard<std::mutex> g(u.mb_mutex);
        more = !u.mb.empty();
      }
      if (more && !u.scheduled.exchange(true)) {
        std::lock_guard<std::mutex> g(runq_mutex);
        runq.push_back(id);
        runq_cv.notify_one();
      }
    }
  }

  void run_deterministic() {
    std::vector<unit_ref> order(units.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<unit_ref>(i);
    if (opt.seed != 0) {
      std::mt19937_64 rng(opt.seed);
      std::shuffle(order.begin(), order.end(), rng);
    }
    // Round-robin mailbox draining, one message per unit per pass.
    bool any = true;
    while (any) {
      any = false;
      for (unit_ref id : order) {
        unit_state& u = *units[id];
        event ev;
        bool have = false;
        {
          std::lock_guard<std::mutex> g(u.mb_mutex);
          if (!u.mb.empty()) {
            ev = std::move(u.mb.front());
            u.mb.pop_front();
            have = true;
          }
        }
        if (!have) continue;
        any = true;
        process(u, std::move(ev));
        in_flight.fetch_sub(1, std::memory_order_relaxed);
      }
    }
  }

  void start_workers() {
    unsigned n = std::max(1u, std::min(8u, std::thread::hardware_concurrency()));
    for (unsigned i = 0; i < n; ++i) workers.emplace_back([this] { worker_loop(); });
  }

  void shutdown_workers() {
    {
      std::lock_guard<std::mutex> g(runq_mutex);
      stop.store(true);
    }
    runq_cv.notify_all();
    for (auto& w : workers)
      if (w.joinable()) w.join();
    workers.clear();
  }

  void await() {
    std::lock_guard<std::mutex> fin(finish_mutex);
    if (finished) return;
    if (opt.mode == run_mode::deterministic) {
      run_deterministic();
    } else {
      std::unique_lock<std::mutex> l(done_mutex);
      done_cv.wait(l, [&] { return in_flight.load() == 0; });
      l.unlock();
      shutdown_workers();
    }
    // Sinks that never delivered report the reason.
    std::lock_guard<std::mutex> g(result_mutex);
    for (const auto& u : units) {
      if (u->role != unit_role::sink || u->delivered) continue;
      std::string why = abort_flag.load()
                            ? abort_why
                            : "stream ended without a delivery to sink '" + u->label + "'";
      outcomes[u->label] = sink_outcome{false, {}, why};
    }
    finished = true;
  }
};

namespace {

std::string role_kind(const unit_state& u) {
  switch (u.role) {
    case unit_role::op: return u.spec.kind;
    case unit_role::source: return "source";
    case unit_role::sink: return "sink";
  }
  return "?";
}

stream_handle deploy_impl(const dag& d, const std::vector<binding>& bindings, const behavior* b,
                          deploy_options opt) {
  auto bad = validate(d);
  if (!bad.empty()) {
    std::string msg = "deploy: dag fails validation:";
    for (const auto& v : bad) msg += "\n  " + v.message;
    throw deploy_error(msg);
  }

  std::map<std::string, const binding*> by_label;
  for (const auto& bd : bindings)
    if (!by_label.emplace(bd.label, &bd).second)
      throw deploy_error("deploy: label '" + bd.label + "' bound twice");

  auto dep = std::make_shared<deployment>();
  dep->opt = opt;

  // One unit per node, in insertion order.
  std::unordered_map<node_id, unit_ref> unit_of;
  std::size_t bound = 0;
  for (const auto& n : d.nodes()) {
    auto u = std::make_unique<unit_state>();
    u->id = static_cast<unit_ref>(dep->units.size());
    if (n.is_socket()) {
      auto it = by_label.find(n.socket().label);
      if (it == by_label.end())
        throw deploy_error("deploy: no binding for socket '" + n.socket().label + "'");
      ++bound;
      u->label = n.socket().label;
      if (n.socket().dir == socket_dir::source_socket) {
        const auto* src = std::get_if<source_endpoint>(&it->second->endpoint);
        if (!src)
          throw deploy_error("deploy: socket '" + n.socket().label + "' needs a source endpoint");
        u->role = unit_role::source;
        u->source = *src;
      } else {
        const auto* snk = std::get_if<sink_endpoint>(&it->second->endpoint);
        if (!snk)
          throw deploy_error("deploy: socket '" + n.socket().label + "' needs a sink endpoint");
        u->role = unit_role::sink;
        u->sink = *snk;
      }
    } else {
      u->role = unit_role::op;
      u->spec = n.op();
    }
    u->name = "n" + std::to_string(u->id) + ":" + role_kind(*u);
    unit_of[n.id] = u->id;
    dep->units.push_back(std::move(u));
  }
  if (bound != bindings.size())
    throw deploy_error("deploy: " + std::to_string(bindings.size() - bound) +
                       " binding(s) match no socket");

  // Wire neighbours through the edges.
  std::vector<std::vector<unit_ref>> us(dep->units.size()), ds(dep->units.size());
  std::vector<port_map> ports(dep->units.size());
  for (std::size_t i = 0; i < dep->units.size(); ++i) {
    const dag_node& n = d.nodes()[i];
    us[i].assign(n.in_arity(), no_unit);
    ds[i].assign(n.out_arity(), no_unit);
  }
  for (const auto& e : d.edges()) {
    unit_ref from = unit_of.at(e.from.node);
    unit_ref to = unit_of.at(e.to.node);
    ds[from][e.from.index] = to;
    us[to][e.to.index] = from;
    ports[to][port_key(from, e.from.index)] = e.to.index;
  }
  for (std::size_t i = 0; i < dep->units.size(); ++i) {
    auto& u = *dep->units[i];
    u.us = std::make_shared<const std::vector<unit_ref>>(std::move(us[i]));
    u.ds = std::make_shared<const std::vector<unit_ref>>(std::move(ds[i]));
    u.ports = std::make_shared<const port_map>(std::move(ports[i]));
    if (b) {
      const dag& meta_dag = u.role == unit_role::op      ? b->operator_meta
                            : u.role == unit_role::source ? b->source_meta
                                                          : b->sink_meta;
      u.meta = std::make_unique<sync_stream>(meta_dag);
    }
    dep->infos.push_back({u.name, u.role, role_kind(u), u.label});
  }

  for (auto& u : dep->units) dep->send(u->id, ev_init());
  if (opt.mode == run_mode::concurrent) dep->start_workers();
  return stream_handle(dep);
}

}  // namespace

stream_handle deploy(const dag& d, const std::vector<binding>& bindings, const behavior& b,
                     deploy_options opt) {
  return deploy_impl(d, bindings, &b, opt);
}

stream_handle deploy_fast(const dag& d, const std::vector<binding>& bindings, deploy_options opt) {
  return deploy_impl(d, bindings, nullptr, opt);
}

const std::map<std::string, sink_outcome>& stream_handle::wait() {
  impl_->await();
  return impl_->outcomes;
}

value stream_handle::wait_value() {
  const auto& all = wait();
  if (all.size() != 1)
    throw stream_error("wait_value expects exactly one sink, found " + std::to_string(all.size()));
  const sink_outcome& o = all.begin()->second;
  if (!o.ok) throw stream_error(o.error);
  return o.result;
}

const std::vector<trace_entry>& stream_handle::trace() const { return impl_->trace; }
const std::vector<unit_info>& stream_handle::units() const { return impl_->infos; }
bool stream_handle::aborted() const { return impl_->abort_flag.load(); }
std::string stream_handle::abort_reason() const {
  std::lock_guard<std::mutex> g(impl_->abort_mutex);
  return impl_->abort_why;
}

std::string format_trace(const std::vector<trace_entry>& trace,
                         const std::vector<unit_info>& units) {
  std::ostringstream os;
  auto name = [&](unit_ref r) { return r == no_unit ? std::string("rt") : units[r].name; };
  for (const auto& t : trace) {
    os << "seq " << t.seq << " " << name(t.from) << " -> " << name(t.to) << " "
       << event_tag_name(t.tag);
    if (t.tag == event_tag::next) os << "(" << t.v.to_string() << ")";
    if (t.tag == event_tag::err) os << "(" << t.error << ")";
    os << "\n";
  }
  return os.str();
}

// -- meta primitives -----------------------------------------------------

namespace meta {

namespace {
const meta_cell& cell_of(const value& v) { return *v.as_meta_cell(); }
}  // namespace

value call_base(const value& event_cell) {
  const meta_cell& c = cell_of(event_cell);
  unit_view view{c.snap.role,
                 c.snap.spec,
                 c.snap.source,
                 c.snap.sink,
                 &c.snap.state,
                 c.snap.done_inputs,
                 static_cast<std::uint32_t>(c.snap.us ? c.snap.us->size() : 0),
                 c.snap.ports};
  base_result r = call_base_on(view, c.evt);
  snapshot next = c.snap;
  next.state = r.new_state;
  next.done_inputs = r.new_done_inputs;
  return make_response_cell(std::move(next), std::move(r));
}

value default_effects(const value& response_cell) {
  const meta_cell& c = cell_of(response_cell);
  snapshot next = c.snap;
  effect_target target{next.pid, next.role, next.sink, next.ds.get(), &next.state};
  if (default_effects_on(target, c.resp, *next.fx)) next.final_mark = true;
  return make_done_cell(std::move(next));
}

void propagate_down(const value& cell, const event& e) {
  const meta_cell& c = cell_of(cell);
  for (std::uint32_t p = 0; p < c.snap.ds->size(); ++p) {
    event copy = e;
    copy.from = c.snap.pid;
    copy.from_port = p;
    c.snap.fx->sends.push_back({c.snap.ds->at(p), std::move(copy)});
  }
}

void propagate_up(const value& cell, const event& e) {
  const meta_cell& c = cell_of(cell);
  for (unit_ref up : *c.snap.us) {
    event copy = e;
    copy.from = c.snap.pid;
    c.snap.fx->sends.push_back({up, std::move(copy)});
  }
}

void propagate_up_to(const value& cell, const std::vector<unit_ref>& targets, const event& e) {
  const meta_cell& c = cell_of(cell);
  for (unit_ref up : targets) {
    event copy = e;
    copy.from = c.snap.pid;
    c.snap.fx->sends.push_back({up, std::move(copy)});
  }
}

void propagate_self(const value& cell, const event& e) {
  const meta_cell& c = cell_of(cell);
  event copy = e;
  copy.from = c.snap.pid;
  c.snap.fx->sends.push_back({c.snap.pid, std::move(copy)});
}

value complete_effects(const value& cell) {
  const meta_cell& c = cell_of(cell);
  snapshot next = c.snap;
  base_result done;
  done.t = base_result::tag::complete;
  done.new_state = next.state;
  effect_target target{next.pid, next.role, next.sink, next.ds.get(), &next.state};
  if (default_effects_on(target, done, *next.fx)) next.final_mark = true;
  return make_done_cell(std::move(next));
}

value state(const value& cell) { return cell_of(cell).snap.state; }

}  // namespace meta

}  // namespace rill
