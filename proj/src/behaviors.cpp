#include "rill/behaviors.hpp"

#include <algorithm>

#include "rill/compile.hpp"

namespace rill {

namespace {

const meta_cell& cell(const value& v) { return *v.as_meta_cell(); }

fn_ref cell_pred(const std::string& name, std::function<bool(const meta_cell&)> p) {
  return make_fn(name, [p = std::move(p)](std::span<const value> args) {
    return value(p(cell(args[0])));
  });
}

fn_ref cell_map(const std::string& name, std::function<value(const value&)> f) {
  return make_fn(name, [f = std::move(f)](std::span<const value> args) { return f(args[0]); });
}

fn_ref is_tag(event_tag t) {
  return cell_pred("is_" + event_tag_name(t),
                   [t](const meta_cell& c) { return c.evt.tag == t; });
}
fn_ref not_tag(event_tag t) {
  return cell_pred("not_" + event_tag_name(t),
                   [t](const meta_cell& c) { return c.evt.tag != t; });
}

dag base_stage() { return single(ops::map(cell_map("base", meta::call_base))); }
dag effects_stage() { return single(ops::map(cell_map("effects", meta::default_effects))); }

/// src ~> base ~> effects ~> snk, the default handling for one role.
dag default_line() { return close(base_stage() >> effects_stage(), {"src", "snk"}); }

dag fan(std::int64_t n, dag branches) {
  return close(single(ops::dup(n)) >> std::move(branches) >> single(ops::merge(n)), {"src", "snk"});
}

// Pull sources: no tick on init, tick on demand, no re-tick after producing.
dag pull_source_meta() {
  dag init_src = single(ops::filter(is_tag(event_tag::init))) >> base_stage() >>
                 single(ops::map(cell_map("install_only", [](const value& v) {
                   return make_done_cell(cell(v).snap);
                 })));
  dag demand_src =
      single(ops::filter(is_tag(event_tag::demand))) >>
      single(ops::map(cell_map("tick_self", [](const value& v) {
        meta::propagate_self(v, ev_tick());
        return make_done_cell(cell(v).snap);
      })));
  dag tick_src = single(ops::filter(is_tag(event_tag::tick))) >> base_stage() >>
                 single(ops::map(cell_map("emit_without_retick", [](const value& v) {
                   const meta_cell& c = cell(v);
                   if (c.resp.t == base_result::tag::complete) return meta::complete_effects(v);
                   if (c.resp.t == base_result::tag::tick_value)
                     meta::propagate_down(v, ev_next(c.resp.produced, no_unit));
                   return make_done_cell(c.snap);
                 })));
  dag src_default = single(ops::filter(not_tag(event_tag::init))) >>
                    single(ops::filter(not_tag(event_tag::demand))) >>
                    single(ops::filter(not_tag(event_tag::tick))) >> base_stage() >> effects_stage();
  return fan(4, src_default | init_src | demand_src | tick_src);
}

// Pull sinks: demand on init and after every value.
dag pull_sink_meta() {
  dag init_snk = single(ops::filter(is_tag(event_tag::init))) >> base_stage() >>
                 single(ops::map(cell_map("first_demand", [](const value& v) {
                   meta::propagate_up(v, ev_demand(no_unit));
                   return make_done_cell(cell(v).snap);
                 })));
  dag next_snk = single(ops::filter(is_tag(event_tag::next))) >> base_stage() >> effects_stage() >>
                 single(ops::map(cell_map("redemand", [](const value& v) {
                   meta::propagate_up(v, ev_demand(no_unit));
                   return v;
                 })));
  dag snk_default = single(ops::filter(not_tag(event_tag::init))) >>
                    single(ops::filter(not_tag(event_tag::next))) >> base_stage() >> effects_stage();
  return fan(3, init_snk | snk_default | next_snk);
}

// -- meta-state sets for smart pull --------------------------------------

std::vector<unit_ref> set_of(const value& meta_state) {
  std::vector<unit_ref> out;
  if (!meta_state.is_tuple()) return out;
  for (const auto& v : meta_state.as_tuple()) out.push_back(static_cast<unit_ref>(v.as_int()));
  return out;
}

value set_value(const std::vector<unit_ref>& refs) {
  std::vector<value> vs;
  for (unit_ref r : refs) vs.push_back(value(static_cast<std::int64_t>(r)));
  return value::tuple(std::move(vs));
}

std::vector<unit_ref> undemanded_upstreams(const meta_cell& c) {
  std::vector<unit_ref> demanded = set_of(c.snap.meta_state);
  std::vector<unit_ref> out;
  for (unit_ref up : *c.snap.us)
    if (std::find(demanded.begin(), demanded.end(), up) == demanded.end()) out.push_back(up);
  return out;
}

}  // namespace

behavior identity_behavior() {
  // base ~> effects on every role, fused into a single stage.
  dag line = run_compile(default_line(), fusion_meta());
  return behavior{"identity", line, line, line};
}

behavior logging_behavior(std::shared_ptr<stream_log> log) {
  dag tap = single(ops::map(cell_map("tap", [log](const value& v) {
    const meta_cell& c = cell(v);
    if (c.evt.tag == event_tag::next) log->add(c.snap.pid, c.evt.tag, c.evt.v);
    return v;
  })));
  dag line = close(tap >> base_stage() >> effects_stage(), {"src", "snk"});
  return behavior{"logging", line, line, line};
}

behavior pull_behavior() {
  // Operators forward demand upstream and renew it whenever they skip.
  dag forward_demand =
      single(ops::filter(is_tag(event_tag::demand))) >>
      single(ops::map(cell_map("forward_demand", [](const value& v) {
        meta::propagate_up(v, ev_demand(no_unit));
        return make_done_cell(cell(v).snap);
      })));
  dag opr_next = single(ops::filter(is_tag(event_tag::next))) >> base_stage() >>
                 single(ops::map(cell_map("demand_on_skip", [](const value& v) {
                   if (cell(v).resp.t == base_result::tag::skip)
                     meta::propagate_up(v, ev_demand(no_unit));
                   return v;
                 }))) >>
                 effects_stage();
  dag opr_default = single(ops::filter(not_tag(event_tag::demand))) >>
                    single(ops::filter(not_tag(event_tag::next))) >> base_stage() >> effects_stage();
  dag operator_meta = fan(3, opr_default | forward_demand | opr_next);
  return behavior{"pull", operator_meta, pull_source_meta(), pull_sink_meta()};
}

behavior smart_pull_behavior() {
  // meta_state: upstreams with an outstanding demand.
  dag forward_demand =
      single(ops::filter(is_tag(event_tag::demand))) >>
      single(ops::map(cell_map("forward_new_demand", [](const value& v) {
        const meta_cell& c = cell(v);
        meta::propagate_up_to(v, undemanded_upstreams(c), ev_demand(no_unit));
        snapshot next = c.snap;
        next.meta_state = set_value(*c.snap.us);
        return make_done_cell(std::move(next));
      })));
  dag opr_next = single(ops::filter(is_tag(event_tag::next))) >>
                 single(ops::map(cell_map("mark_answered", [](const value& v) {
                   const meta_cell& c = cell(v);
                   std::vector<unit_ref> demanded = set_of(c.snap.meta_state);
                   std::erase(demanded, c.evt.from);
                   snapshot next = c.snap;
                   next.meta_state = set_value(demanded);
                   return make_event_cell(std::move(next), c.evt);
                 }))) >>
                 base_stage() >>
                 single(ops::map(cell_map("demand_on_skip_once", [](const value& v) {
                   const meta_cell& c = cell(v);
                   if (c.resp.t != base_result::tag::skip) return v;
                   auto ask = undemanded_upstreams(c);
                   meta::propagate_up_to(v, ask, ev_demand(no_unit));
                   std::vector<unit_ref> demanded = set_of(c.snap.meta_state);
                   demanded.insert(demanded.end(), ask.begin(), ask.end());
                   snapshot next = c.snap;
                   next.meta_state = set_value(demanded);
                   return make_response_cell(std::move(next), c.resp);
                 }))) >>
                 effects_stage();
  dag init_opr = single(ops::filter(is_tag(event_tag::init))) >> base_stage() >>
                 single(ops::map(cell_map("fresh_demand_set", [](const value& v) {
                   const meta_cell& c = cell(v);
                   snapshot next = c.snap;
                   next.meta_state = set_value({});
                   return make_response_cell(std::move(next), c.resp);
                 }))) >>
                 effects_stage();
  dag opr_default = single(ops::filter(not_tag(event_tag::demand))) >>
                    single(ops::filter(not_tag(event_tag::next))) >>
                    single(ops::filter(not_tag(event_tag::init))) >> base_stage() >> effects_stage();
  dag operator_meta = fan(4, opr_default | forward_demand | opr_next | init_opr);
  return behavior{"smartpull", operator_meta, pull_source_meta(), pull_sink_meta()};
}

behavior encryption_behavior(cipher c) {
  auto enc = c.encrypt;
  auto dec = c.decrypt;
  dag tick_src = single(ops::filter(is_tag(event_tag::tick))) >> base_stage() >>
                 single(ops::map(cell_map("emit_encrypted", [enc](const value& v) {
                   const meta_cell& mc = cell(v);
                   if (mc.resp.t == base_result::tag::complete) return meta::complete_effects(v);
                   if (mc.resp.t == base_result::tag::tick_value) {
                     meta::propagate_down(v, ev_next(enc(mc.resp.produced), no_unit));
                     meta::propagate_self(v, ev_tick());  // stay push-driven
                   }
                   return make_done_cell(mc.snap);
                 })));
  dag src_default = single(ops::filter(not_tag(event_tag::tick))) >> base_stage() >> effects_stage();
  dag source_meta = fan(2, src_default | tick_src);

  dag decrypt_next = single(ops::map(cell_map("decrypt_in", [dec](const value& v) {
    const meta_cell& mc = cell(v);
    event e = mc.evt;
    e.v = dec(e.v);
    return make_event_cell(mc.snap, std::move(e));
  })));
  dag encrypt_out = single(ops::map(cell_map("encrypt_out", [enc](const value& v) {
    const meta_cell& mc = cell(v);
    if (mc.resp.t != base_result::tag::emit) return v;
    base_result r = mc.resp;
    for (auto& route : r.emits) route.v = enc(route.v);
    return make_response_cell(mc.snap, std::move(r));
  })));
  dag opr_next = single(ops::filter(is_tag(event_tag::next))) >> decrypt_next >> base_stage() >>
                 encrypt_out >> effects_stage();
  dag opr_default = single(ops::filter(not_tag(event_tag::next))) >> base_stage() >> effects_stage();
  dag operator_meta = fan(2, opr_default | opr_next);

  dag snk_next = single(ops::filter(is_tag(event_tag::next))) >>
                 single(ops::map(cell_map("decrypt_in", [dec](const value& v) {
                   const meta_cell& mc = cell(v);
                   event e = mc.evt;
                   e.v = dec(e.v);
                   return make_event_cell(mc.snap, std::move(e));
                 }))) >>
                 base_stage() >> effects_stage();
  dag snk_default = single(ops::filter(not_tag(event_tag::next))) >> base_stage() >> effects_stage();
  dag sink_meta = fan(2, snk_default | snk_next);

  return behavior{"encrypt(" + c.name + ")", operator_meta, source_meta, sink_meta};
}

namespace {

value xor_apply(const value& v, std::uint64_t key) {
  if (v.is_int()) return value(static_cast<std::int64_t>(v.as_int() ^ static_cast<std::int64_t>(key)));
  if (v.is_tuple()) {
    std::vector<value> parts;
    for (const auto& p : v.as_tuple()) parts.push_back(xor_apply(p, key));
    return value::tuple(std::move(parts));
  }
  return v;
}

}  // namespace

cipher xor_cipher(std::uint64_t key) {
  auto apply = [key](const value& v) { return xor_apply(v, key); };
  char buf[32];
  std::snprintf(buf, sizeof buf, "xor:%llx", static_cast<unsigned long long>(key));
  return cipher{buf, apply, apply};
}

cipher identity_cipher() {
  auto id = [](const value& v) { return v; };
  return cipher{"identity", id, id};
}

std::optional<behavior> behavior_by_name(const std::string& name, std::shared_ptr<stream_log> log) {
  if (name == "none" || name.empty()) return std::nullopt;
  if (name == "identity") return identity_behavior();
  if (name == "logging") return logging_behavior(log ? log : std::make_shared<stream_log>());
  if (name == "pull") return pull_behavior();
  if (name == "smartpull") return smart_pull_behavior();
  if (name.rfind("encrypt:", 0) == 0)
    return encryption_behavior(xor_cipher(std::stoull(name.substr(8), nullptr, 16)));
  throw std::invalid_argument("unknown behavior: " + name +
                              " (expected none|identity|logging|pull|smartpull|encrypt:<hexkey>)");
}

}  // namespace rill
