#include "rill/compile.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "rill/counters.hpp"
#include "rill/exec.hpp"

namespace rill {

meta_item::meta_item(instruction i, dag g, instr_env e)
    : instr(std::move(i)), graph(std::move(g)), env(std::move(e)) {
  counters::meta_items_allocated().fetch_add(1, std::memory_order_relaxed);
}

value make_item(instruction i, dag g, instr_env e) {
  return value(std::make_shared<const meta_item>(std::move(i), std::move(g), std::move(e)));
}

compile_rejected::compile_rejected(std::vector<violation> v)
    : std::runtime_error([&v] {
        std::string msg = "compile rejected:";
        for (const auto& x : v) msg += "\n  " + x.message;
        return msg;
      }()),
      violations(std::move(v)) {}

std::string instruction_to_string(const instruction& i) {
  std::ostringstream os;
  if (const auto* a = std::get_if<add_operator_instr>(&i)) {
    os << "operator " << a->kind << " " << argument_to_string(a->argument);
  } else if (const auto* n = std::get_if<name_it_instr>(&i)) {
    os << "name_it " << n->alias;
  } else {
    const auto& e = std::get<add_edge_instr>(i);
    auto ep = [&](const instr_endpoint& p) {
      return std::holds_alternative<std::string>(p) ? std::get<std::string>(p)
                                                    : "#" + std::to_string(std::get<node_id>(p));
    };
    os << "edge " << ep(e.from) << "." << e.from_port << " -> " << ep(e.to) << "." << e.to_port;
  }
  return os.str();
}

std::vector<instruction> emit_instructions(const dag& d) {
  std::vector<instruction> out;
  auto order = topological_order(d);
  const auto& nodes = d.nodes();

  // Unique alias per node: the declared alias or socket label when possible,
  // a generated one otherwise.
  std::unordered_map<node_id, std::string> alias_of;
  std::unordered_set<std::string> used;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const dag_node& n = nodes[order[k]];
    std::string want;
    if (n.is_socket())
      want = n.socket().label;
    else if (n.op().alias)
      want = *n.op().alias;
    if (want.empty() || !used.insert(want).second) {
      want = "_op" + std::to_string(k);
      while (!used.insert(want).second) want += "_";
    }
    alias_of[n.id] = want;
  }

  std::unordered_map<node_id, std::size_t> topo_pos;
  for (std::size_t k = 0; k < order.size(); ++k) topo_pos[nodes[order[k]].id] = k;

  for (std::size_t k = 0; k < order.size(); ++k) {
    const dag_node& n = nodes[order[k]];
    if (n.is_socket()) {
      out.push_back(add_operator_instr{n.kind(), op_argument{n.socket().label}});
    } else {
      out.push_back(add_operator_instr{n.op().kind, n.op().argument});
    }
    out.push_back(name_it_instr{alias_of.at(n.id)});
  }

  std::vector<dag_edge> edges = d.edges();
  std::sort(edges.begin(), edges.end(), [&](const dag_edge& a, const dag_edge& b) {
    auto ka = std::tuple(topo_pos.at(a.from.node), a.from.index, topo_pos.at(a.to.node), a.to.index);
    auto kb = std::tuple(topo_pos.at(b.from.node), b.from.index, topo_pos.at(b.to.node), b.to.index);
    return ka < kb;
  });
  for (const auto& e : edges)
    out.push_back(add_edge_instr{alias_of.at(e.from.node), e.from.index, alias_of.at(e.to.node),
                                 e.to.index});
  return out;
}

node_id resolve_endpoint(const dag& d, const instr_env& env, const instr_endpoint& e) {
  if (const auto* alias = std::get_if<std::string>(&e)) {
    auto it = env.aliases.find(*alias);
    if (it == env.aliases.end()) throw compile_error("unresolved alias '" + *alias + "'");
    if (!d.contains(it->second))
      throw compile_error("alias '" + *alias + "' refers to a deleted node");
    return it->second;
  }
  node_id id = std::get<node_id>(e);
  if (!d.contains(id)) throw compile_error("unknown node reference " + std::to_string(id));
  return id;
}

std::pair<dag, instr_env> apply_instruction(const meta_item& item) {
  dag d = item.graph;
  instr_env env = item.env;
  if (const auto* a = std::get_if<add_operator_instr>(&item.instr)) {
    if (a->kind == "source_socket" || a->kind == "sink_socket") {
      std::string label =
          std::holds_alternative<std::string>(a->argument) ? std::get<std::string>(a->argument) : "";
      env.last_added = d.add_socket_node(socket_spec{
          label,
          a->kind == "source_socket" ? socket_dir::source_socket : socket_dir::sink_socket});
    } else {
      try {
        env.last_added = d.add_operator_node(ops::make(a->kind, a->argument));
      } catch (const std::invalid_argument& e) {
        throw compile_error(e.what());
      }
    }
  } else if (const auto* n = std::get_if<name_it_instr>(&item.instr)) {
    if (!env.last_added) throw compile_error("name_it '" + n->alias + "' without an operator");
    env.aliases[n->alias] = *env.last_added;
    if (!d.at(*env.last_added).is_socket()) d.set_alias(*env.last_added, n->alias);
  } else {
    const auto& e = std::get<add_edge_instr>(item.instr);
    node_id from = resolve_endpoint(d, env, e.from);
    node_id to = resolve_endpoint(d, env, e.to);
    try {
      d.add_edge({from, e.from_port, port_dir::output}, {to, e.to_port, port_dir::input});
    } catch (const std::invalid_argument& ex) {
      throw compile_error(ex.what());
    }
  }
  return {std::move(d), std::move(env)};
}

dag run_compile(const std::vector<instruction>& instrs, const dag& meta) {
  sync_stream engine(meta);
  dag acc;
  instr_env env;
  for (const auto& instr : instrs) {
    for (const value& out : engine.feed(make_item(instr, acc, env))) {
      auto [d2, e2] = apply_instruction(*out.as_meta_item());
      acc = std::move(d2);
      env = std::move(e2);
    }
  }
  auto violations = validate(acc);
  if (!violations.empty()) throw compile_rejected(std::move(violations));
  return acc;
}

dag run_compile(const dag& d, const dag& meta) { return run_compile(emit_instructions(d), meta); }

reified_operator fetch(const dag& d, const instr_env& env, const instr_endpoint& name_or_ref) {
  node_id id = resolve_endpoint(d, env, name_or_ref);
  const dag_node& n = d.at(id);
  if (n.is_socket()) return {id, n.kind(), op_argument{n.socket().label}};
  return {id, n.op().kind, n.op().argument};
}

bool fusable(const std::string& a, const std::string& b) {
  auto stage = [](const std::string& k) { return k == "map" || k == "filter" || k == "fused"; };
  return stage(a) && stage(b);
}

namespace {

// A stage step maps a value to a 1-tuple (emit) or unit (skip).
std::function<value(const value&)> step_of(const reified_operator& op) {
  fn_ref f = std::get<fn_ref>(op.argument);
  if (op.kind == "map")
    return [f](const value& v) { return value::tuple({call1(f, v)}); };
  if (op.kind == "filter")
    return [f](const value& v) { return call1(f, v).truthy() ? value::tuple({v}) : value::unit(); };
  return [f](const value& v) { return call1(f, v); };  // fused
}

}  // namespace

operator_spec fuse(const reified_operator& a, const reified_operator& b) {
  if (!fusable(a.kind, b.kind))
    throw compile_error("cannot fuse " + a.kind + " with " + b.kind);
  std::string fname =
      "fused(" + argument_to_string(a.argument) + "," + argument_to_string(b.argument) + ")";
  if (a.kind == "map" && b.kind == "map") {
    fn_ref f = std::get<fn_ref>(a.argument);
    fn_ref g = std::get<fn_ref>(b.argument);
    operator_spec spec = ops::map(make_fn(fname, [f, g](std::span<const value> args) {
      return call1(g, call1(f, args[0]));
    }));
    spec.alias = fname;
    return spec;
  }
  if (a.kind == "filter" && b.kind == "filter") {
    fn_ref f = std::get<fn_ref>(a.argument);
    fn_ref g = std::get<fn_ref>(b.argument);
    operator_spec spec = ops::filter(make_fn(fname, [f, g](std::span<const value> args) {
      return value(call1(f, args[0]).truthy() && call1(g, args[0]).truthy());
    }));
    spec.alias = fname;
    return spec;
  }
  auto s1 = step_of(a);
  auto s2 = step_of(b);
  operator_spec spec = ops::fused(make_fn(fname, [s1, s2](std::span<const value> args) -> value {
    value r = s1(args[0]);
    if (r.is_unit()) return r;
    return s2(r.as_tuple().at(0));
  }));
  spec.alias = fname;
  return spec;
}

void swap_ops(dag& d, node_id a, node_id b) {
  try {
    d.swap_payloads(a, b);
  } catch (const std::invalid_argument& e) {
    throw compile_error(e.what());
  }
}

std::vector<reified_operator> inputs_of(const dag& d, node_id op) {
  const dag_node& n = d.at(op);
  std::vector<reified_operator> out;
  for (std::uint32_t p = 0; p < n.in_arity(); ++p) {
    for (const auto& e : d.edges()) {
      if (e.to.node == op && e.to.index == p) {
        const dag_node& src = d.at(e.from.node);
        if (src.is_socket())
          out.push_back({src.id, src.kind(), op_argument{src.socket().label}});
        else
          out.push_back({src.id, src.op().kind, src.op().argument});
      }
    }
  }
  return out;
}

node_id add_op(dag& d, operator_spec spec) { return d.add_operator_node(std::move(spec)); }

void delete_op(dag& d, node_id op) {
  try {
    d.remove_node(op);
  } catch (const std::invalid_argument& e) {
    throw compile_error(e.what());
  }
}

void connect_ports(dag& d, node_id from, std::uint32_t fidx, node_id to, std::uint32_t tidx) {
  try {
    d.add_edge({from, fidx, port_dir::output}, {to, tidx, port_dir::input});
  } catch (const std::invalid_argument& e) {
    throw compile_error(e.what());
  }
}

void disconnect_ports(dag& d, node_id from, std::uint32_t fidx, node_id to, std::uint32_t tidx) {
  try {
    d.remove_edge({from, fidx, port_dir::output}, {to, tidx, port_dir::input});
  } catch (const std::invalid_argument& e) {
    throw compile_error(e.what());
  }
}

namespace {

std::atomic<std::uint64_t> g_logical_clock{1};

bool item_is_edge(const value& v) {
  return std::holds_alternative<add_edge_instr>(v.as_meta_item()->instr);
}
bool item_is_operator(const value& v) {
  return std::holds_alternative<add_operator_instr>(v.as_meta_item()->instr);
}
bool item_is_name(const value& v) {
  return std::holds_alternative<name_it_instr>(v.as_meta_item()->instr);
}

fn_ref item_pred(const std::string& name, bool (*p)(const value&)) {
  return make_fn(name, [p](std::span<const value> args) { return value(p(args[0])); });
}

// Points every alias that resolved to `from` (and the last-added register)
// at `to`, so later instructions follow the rewrite.
void rebind(instr_env& env, node_id from, node_id to) {
  for (auto& [alias, id] : env.aliases)
    if (id == from) id = to;
  if (env.last_added == from) env.last_added = to;
}

/// Standard meta pipeline: the three instruction families split over
/// branches, merged back, then handed to the compiler unchanged.
dag meta_pipeline(dag edge_branch, dag operator_branch, dag name_branch) {
  dag proceed = single(ops::map(make_fn("proceed", [](std::span<const value> args) { return args[0]; })));
  dag body = single(ops::dup(3)) >>
             (std::move(edge_branch) | std::move(operator_branch) | std::move(name_branch)) >>
             single(ops::merge(3)) >> proceed;
  return close(body, {"src", "snk"});
}

}  // namespace

dag proceed_meta() {
  dag pass = single(
      ops::map(make_fn("proceed", [](std::span<const value> args) { return args[0]; })));
  return close(pass, {"src", "snk"});
}

dag fusion_meta(bool maps_only) {
  auto transform = make_fn("fuse_edges", [maps_only](std::span<const value> args) -> value {
    const meta_item& item = *args[0].as_meta_item();
    const auto& e = std::get<add_edge_instr>(item.instr);
    dag d = item.graph;
    instr_env env = item.env;
    reified_operator a = fetch(d, env, e.from);
    reified_operator b = fetch(d, env, e.to);
    bool want = maps_only ? (a.kind == "map" && b.kind == "map") : fusable(a.kind, b.kind);
    if (!want) return args[0];

    auto feeders = inputs_of(d, a.ref);
    if (feeders.size() != 1) return args[0];
    // `b` must still be unconnected: its only edge is the one streaming by.
    for (const auto& de : d.edges())
      if (de.from.node == b.ref || de.to.node == b.ref) return args[0];
    // Port the upstream used to reach `a`; re-drawn towards the fused node.
    std::uint32_t upstream_port = 0;
    for (const auto& de : d.edges())
      if (de.to.node == a.ref) upstream_port = de.from.index;

    operator_spec fused_spec = fuse(a, b);
    delete_op(d, a.ref);
    delete_op(d, b.ref);
    node_id c = add_op(d, std::move(fused_spec));
    rebind(env, a.ref, c);
    rebind(env, b.ref, c);
    return make_item(add_edge_instr{feeders[0].ref, upstream_port, c, 0}, std::move(d),
                     std::move(env));
  });
  dag edge_branch = single(ops::filter(item_pred("is_edge", item_is_edge))) >>
                    single(ops::map(std::move(transform)));
  return meta_pipeline(std::move(edge_branch),
                       single(ops::filter(item_pred("is_operator", item_is_operator))),
                       single(ops::filter(item_pred("is_name", item_is_name))));
}

dag parallel_meta(std::int64_t n) {
  if (n <= 0) throw compile_error("parallel meta requires n > 0");
  auto transform = make_fn("parallelize_maps", [n](std::span<const value> args) -> value {
    const meta_item& item = *args[0].as_meta_item();
    const auto& e = std::get<add_edge_instr>(item.instr);
    dag d = item.graph;
    instr_env env = item.env;
    reified_operator target = fetch(d, env, e.to);
    if (target.kind != "map") return args[0];

    node_id spread = add_op(d, ops::balance(n));
    node_id gather = add_op(d, ops::merge(n));
    for (std::int64_t i = 0; i < n; ++i) {
      node_id copy = add_op(d, ops::map(std::get<fn_ref>(target.argument)));
      connect_ports(d, spread, static_cast<std::uint32_t>(i), copy, 0);
      connect_ports(d, copy, 0, gather, static_cast<std::uint32_t>(i));
    }
    delete_op(d, target.ref);
    rebind(env, target.ref, gather);
    return make_item(add_edge_instr{e.from, e.from_port, spread, 0}, std::move(d), std::move(env));
  });
  dag edge_branch = single(ops::filter(item_pred("is_edge", item_is_edge))) >>
                    single(ops::map(std::move(transform)));
  return meta_pipeline(std::move(edge_branch),
                       single(ops::filter(item_pred("is_operator", item_is_operator))),
                       single(ops::filter(item_pred("is_name", item_is_name))));
}

namespace {

value unboxed(const value& v) { return v.is_box() ? v.as_box().payload : v; }

fn_ref wrap_for_boxes(const std::string& kind, const fn_ref& f) {
  if (kind == "map") {
    return make_fn("boxed(" + f->name + ")", [f](std::span<const value> args) {
      const boxed& b = args[0].as_box();
      return value::box(call1(f, b.payload), b.stamps);
    });
  }
  if (kind == "filter") {
    return make_fn("boxed(" + f->name + ")", [f](std::span<const value> args) {
      return call1(f, unboxed(args[0]));
    });
  }
  if (kind == "fused") {
    return make_fn("boxed(" + f->name + ")", [f](std::span<const value> args) -> value {
      const boxed& b = args[0].as_box();
      value r = call1(f, b.payload);
      if (r.is_unit()) return r;
      return value::tuple({value::box(r.as_tuple().at(0), b.stamps)});
    });
  }
  throw compile_error("cannot box-wrap " + kind);
}

}  // namespace

dag timestamp_meta() {
  auto wrap_ops = make_fn("box_arguments", [](std::span<const value> args) -> value {
    const meta_item& item = *args[0].as_meta_item();
    const auto& a = std::get<add_operator_instr>(item.instr);
    if (a.kind == "map" || a.kind == "filter" || a.kind == "fused") {
      return make_item(add_operator_instr{a.kind, wrap_for_boxes(a.kind, std::get<fn_ref>(a.argument))},
                       item.graph, item.env);
    }
    if (a.kind == "scan") {
      const auto& sa = std::get<scan_arg>(a.argument);
      fn_ref step = sa.step;
      fn_ref wrapped = make_fn("boxed(" + step->name + ")", [step](std::span<const value> args2) {
        const boxed& b = args2[1].as_box();
        return value::box(call2(step, unboxed(args2[0]), b.payload), b.stamps);
      });
      return make_item(add_operator_instr{a.kind, scan_arg{wrapped, sa.seed}}, item.graph, item.env);
    }
    return args[0];
  });
  auto stamp_edges = make_fn("stamp_before_operators", [](std::span<const value> args) -> value {
    const meta_item& item = *args[0].as_meta_item();
    const auto& e = std::get<add_edge_instr>(item.instr);
    dag d = item.graph;
    instr_env env = item.env;
    node_id to = resolve_endpoint(d, env, e.to);
    if (d.at(to).is_socket()) return args[0];

    fn_ref stamper = make_fn("stamp(n" + std::to_string(to) + ")",
                             [to](std::span<const value> args2) -> value {
                               stamp s{to, g_logical_clock.fetch_add(1)};
                               if (args2[0].is_box()) {
                                 const boxed& b = args2[0].as_box();
                                 std::vector<stamp> stamps = b.stamps;
                                 stamps.push_back(s);
                                 return value::box(b.payload, std::move(stamps));
                               }
                               return value::box(args2[0], {s});
                             });
    node_id marker = add_op(d, ops::map(std::move(stamper)));
    connect_ports(d, marker, 0, to, e.to_port);
    return make_item(add_edge_instr{e.from, e.from_port, marker, 0}, std::move(d), std::move(env));
  });
  dag edge_branch = single(ops::filter(item_pred("is_edge", item_is_edge))) >>
                    single(ops::map(std::move(stamp_edges)));
  dag op_branch = single(ops::filter(item_pred("is_operator", item_is_operator))) >>
                  single(ops::map(std::move(wrap_ops)));
  return meta_pipeline(std::move(edge_branch), std::move(op_branch),
                       single(ops::filter(item_pred("is_name", item_is_name))));
}

std::optional<dag> structural_by_name(const std::string& name) {
  if (name == "none" || name.empty()) return std::nullopt;
  if (name == "fusion") return fusion_meta();
  if (name == "timestamp") return timestamp_meta();
  if (name.rfind("parallel:", 0) == 0) return parallel_meta(std::stoll(name.substr(9)));
  throw std::invalid_argument("unknown structural behavior: " + name +
                              " (expected none|fusion|parallel:n|timestamp)");
}

}  // namespace rill
