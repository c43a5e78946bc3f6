#include "rill/graph.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace rill {

namespace {

std::atomic<node_id> g_next_node_id{1};

node_id fresh_id() { return g_next_node_id.fetch_add(1); }

}  // namespace

bool argument_identity_equal(const op_argument& a, const op_argument& b) {
  if (a.index() != b.index()) return false;
  if (std::holds_alternative<std::monostate>(a)) return true;
  if (std::holds_alternative<std::int64_t>(a))
    return std::get<std::int64_t>(a) == std::get<std::int64_t>(b);
  if (std::holds_alternative<fn_ref>(a)) return std::get<fn_ref>(a) == std::get<fn_ref>(b);
  if (std::holds_alternative<scan_arg>(a)) {
    const auto& x = std::get<scan_arg>(a);
    const auto& y = std::get<scan_arg>(b);
    return x.step == y.step && x.seed == y.seed;
  }
  return std::get<std::string>(a) == std::get<std::string>(b);
}

std::string argument_to_string(const op_argument& a) {
  if (std::holds_alternative<std::monostate>(a)) return "-";
  if (std::holds_alternative<std::int64_t>(a)) return std::to_string(std::get<std::int64_t>(a));
  if (std::holds_alternative<fn_ref>(a)) return std::get<fn_ref>(a)->name;
  if (std::holds_alternative<scan_arg>(a)) {
    const auto& s = std::get<scan_arg>(a);
    return s.step->name + "," + s.seed.to_string();
  }
  return std::get<std::string>(a);
}

std::uint32_t dag_node::in_arity() const {
  if (is_socket()) return socket().dir == socket_dir::sink_socket ? 1 : 0;
  return op().in_arity;
}

std::uint32_t dag_node::out_arity() const {
  if (is_socket()) return socket().dir == socket_dir::source_socket ? 1 : 0;
  return op().out_arity;
}

std::string dag_node::kind() const {
  if (is_socket())
    return socket().dir == socket_dir::source_socket ? "source_socket" : "sink_socket";
  return op().kind;
}

const dag_node* dag::find(node_id id) const {
  for (const auto& n : nodes_)
    if (n.id == id) return &n;
  return nullptr;
}

const dag_node& dag::at(node_id id) const {
  const dag_node* n = find(id);
  if (!n) throw std::invalid_argument("unknown node " + std::to_string(id));
  return *n;
}

bool dag::port_connected(const port_ref& p) const {
  for (const auto& e : edges_)
    if (e.from == p || e.to == p) return true;
  return false;
}

std::vector<port_ref> dag::exposed_inputs() const {
  std::vector<port_ref> out;
  for (const auto& n : nodes_)
    for (std::uint32_t i = 0; i < n.in_arity(); ++i) {
      port_ref p{n.id, i, port_dir::input};
      if (!port_connected(p)) out.push_back(p);
    }
  return out;
}

std::vector<port_ref> dag::exposed_outputs() const {
  std::vector<port_ref> out;
  for (const auto& n : nodes_)
    for (std::uint32_t i = 0; i < n.out_arity(); ++i) {
      port_ref p{n.id, i, port_dir::output};
      if (!port_connected(p)) out.push_back(p);
    }
  return out;
}

bool dag::is_open() const {
  for (const auto& n : nodes_) {
    if (n.is_socket()) continue;
    for (std::uint32_t i = 0; i < n.in_arity(); ++i)
      if (!port_connected({n.id, i, port_dir::input})) return true;
    for (std::uint32_t i = 0; i < n.out_arity(); ++i)
      if (!port_connected({n.id, i, port_dir::output})) return true;
  }
  return false;
}

node_id dag::add_operator_node(operator_spec spec) {
  node_id id = fresh_id();
  nodes_.push_back(dag_node{id, std::move(spec)});
  return id;
}

node_id dag::add_socket_node(socket_spec socket) {
  node_id id = fresh_id();
  nodes_.push_back(dag_node{id, std::move(socket)});
  return id;
}

void dag::remove_node(node_id id) {
  auto it = std::find_if(nodes_.begin(), nodes_.end(), [&](const dag_node& n) { return n.id == id; });
  if (it == nodes_.end()) throw std::invalid_argument("delete: unknown node " + std::to_string(id));
  nodes_.erase(it);
  std::erase_if(edges_, [&](const dag_edge& e) { return e.from.node == id || e.to.node == id; });
}

void dag::add_edge(port_ref from, port_ref to) {
  from.dir = port_dir::output;
  to.dir = port_dir::input;
  if (port_connected(from))
    throw std::invalid_argument("output port already connected: node " + std::to_string(from.node) +
                                " port " + std::to_string(from.index));
  if (port_connected(to))
    throw std::invalid_argument("input port already connected: node " + std::to_string(to.node) +
                                " port " + std::to_string(to.index));
  force_edge(from, to);
}

void dag::force_edge(port_ref from, port_ref to) {
  from.dir = port_dir::output;
  to.dir = port_dir::input;
  const dag_node& a = at(from.node);
  const dag_node& b = at(to.node);
  if (from.index >= a.out_arity())
    throw std::invalid_argument("edge from missing output port " + std::to_string(from.index) +
                                " of node " + std::to_string(from.node));
  if (to.index >= b.in_arity())
    throw std::invalid_argument("edge to missing input port " + std::to_string(to.index) +
                                " of node " + std::to_string(to.node));
  edges_.push_back(dag_edge{from, to});
}

void dag::remove_edge(port_ref from, port_ref to) {
  from.dir = port_dir::output;
  to.dir = port_dir::input;
  auto it = std::find_if(edges_.begin(), edges_.end(),
                         [&](const dag_edge& e) { return e.from == from && e.to == to; });
  if (it == edges_.end()) throw std::invalid_argument("disconnect: no such edge");
  edges_.erase(it);
}

void dag::set_alias(node_id id, std::string alias) {
  for (auto& n : nodes_)
    if (n.id == id) {
      if (n.is_socket())
        throw std::invalid_argument("cannot alias a socket");
      std::get<operator_spec>(n.payload).alias = std::move(alias);
      return;
    }
  throw std::invalid_argument("alias: unknown node " + std::to_string(id));
}

void dag::swap_payloads(node_id a, node_id b) {
  dag_node* na = nullptr;
  dag_node* nb = nullptr;
  for (auto& n : nodes_) {
    if (n.id == a) na = &n;
    if (n.id == b) nb = &n;
  }
  if (!na || !nb) throw std::invalid_argument("swap: unknown node");
  if (na->is_socket() || nb->is_socket()) throw std::invalid_argument("swap: sockets cannot be swapped");
  if (na->in_arity() != nb->in_arity() || na->out_arity() != nb->out_arity())
    throw std::invalid_argument("swap: arity mismatch between " + na->kind() + " and " + nb->kind());
  if (a == b) return;
  std::swap(na->payload, nb->payload);
}

void dag::absorb(dag other) {
  for (auto& n : other.nodes_) nodes_.push_back(std::move(n));
  for (auto& e : other.edges_) edges_.push_back(e);
}

namespace ops {

namespace {
operator_spec counted(const std::string& kind, std::int64_t n, std::uint32_t in, std::uint32_t out) {
  if (n <= 0) throw std::invalid_argument(kind + " requires n > 0, got " + std::to_string(n));
  return operator_spec{kind, in, out, op_argument{n}, std::nullopt};
}
}  // namespace

operator_spec map(fn_ref f) { return {"map", 1, 1, op_argument{std::move(f)}, std::nullopt}; }

operator_spec filter(fn_ref pred) { return {"filter", 1, 1, op_argument{std::move(pred)}, std::nullopt}; }

operator_spec scan(fn_ref step, value seed) {
  return {"scan", 1, 1, op_argument{scan_arg{std::move(step), std::move(seed)}}, std::nullopt};
}

operator_spec dup(std::int64_t n) { return counted("dup", n, 1, static_cast<std::uint32_t>(n)); }

operator_spec balance(std::int64_t n) { return counted("balance", n, 1, static_cast<std::uint32_t>(n)); }

operator_spec merge(std::int64_t n) { return counted("merge", n, static_cast<std::uint32_t>(n), 1); }

operator_spec zip() { return {"zip", 2, 1, op_argument{}, std::nullopt}; }

operator_spec fused(fn_ref step) { return {"fused", 1, 1, op_argument{std::move(step)}, std::nullopt}; }

operator_spec make(const std::string& kind, op_argument argument) {
  if (kind == "map" || kind == "filter" || kind == "fused") {
    if (!std::holds_alternative<fn_ref>(argument))
      throw std::invalid_argument(kind + " requires a function argument");
    return kind == "map"      ? map(std::get<fn_ref>(argument))
           : kind == "filter" ? filter(std::get<fn_ref>(argument))
                              : fused(std::get<fn_ref>(argument));
  }
  if (kind == "scan") {
    if (!std::holds_alternative<scan_arg>(argument))
      throw std::invalid_argument("scan requires a step function and a seed");
    auto s = std::get<scan_arg>(argument);
    return scan(s.step, s.seed);
  }
  if (kind == "dup" || kind == "balance" || kind == "merge") {
    if (!std::holds_alternative<std::int64_t>(argument))
      throw std::invalid_argument(kind + " requires an integer argument");
    std::int64_t n = std::get<std::int64_t>(argument);
    return kind == "dup" ? dup(n) : kind == "balance" ? balance(n) : merge(n);
  }
  if (kind == "zip") return zip();
  throw std::invalid_argument("unknown operator kind: " + kind);
}

}  // namespace ops

dag single(operator_spec spec) {
  dag d;
  d.add_operator_node(std::move(spec));
  return d;
}

namespace {

// Copies d with every node re-identified; edge and port references follow.
dag reidentify(const dag& d) {
  dag out;
  std::unordered_map<node_id, node_id> remap;
  for (const auto& n : d.nodes()) {
    node_id id = n.is_socket() ? out.add_socket_node(n.socket())
                               : out.add_operator_node(n.op());
    remap[n.id] = id;
  }
  for (const auto& e : d.edges()) {
    port_ref f = e.from;
    port_ref t = e.to;
    f.node = remap.at(f.node);
    t.node = remap.at(t.node);
    out.add_edge(f, t);
  }
  return out;
}

}  // namespace

namespace {

void reject_closed_operand(const dag& d) {
  for (const auto& n : d.nodes())
    if (n.is_socket())
      throw composition_error("closed dags cannot be composed into larger dags");
}

}  // namespace

dag compose_vertical(const dag& a, const dag& b) {
  reject_closed_operand(a);
  reject_closed_operand(b);
  dag left = reidentify(a);
  dag right = reidentify(b);
  auto outs = left.exposed_outputs();
  auto ins = right.exposed_inputs();
  if (outs.size() != ins.size())
    throw composition_error("vertical composition requires " + std::to_string(outs.size()) +
                            " inputs on the right, found " + std::to_string(ins.size()));
  left.absorb(std::move(right));
  for (std::size_t k = 0; k < outs.size(); ++k) left.add_edge(outs[k], ins[k]);
  return left;
}

dag compose_horizontal(const dag& a, const dag& b) {
  reject_closed_operand(a);
  reject_closed_operand(b);
  dag left = reidentify(a);
  left.absorb(reidentify(b));
  return left;
}

dag close(const dag& d, const std::vector<std::string>& socket_labels) {
  dag out = d;
  auto ins = out.exposed_inputs();
  auto outs = out.exposed_outputs();
  if (ins.size() + outs.size() != socket_labels.size())
    throw std::invalid_argument("close: " + std::to_string(ins.size() + outs.size()) +
                                " exposed ports but " + std::to_string(socket_labels.size()) +
                                " labels");
  std::unordered_set<std::string> seen;
  for (const auto& l : socket_labels)
    if (!seen.insert(l).second) throw std::invalid_argument("close: duplicate label '" + l + "'");
  std::size_t k = 0;
  for (const auto& p : ins) {
    node_id s = out.add_socket_node(socket_spec{socket_labels[k++], socket_dir::source_socket});
    out.add_edge({s, 0, port_dir::output}, p);
  }
  for (const auto& p : outs) {
    node_id s = out.add_socket_node(socket_spec{socket_labels[k++], socket_dir::sink_socket});
    out.add_edge(p, {s, 0, port_dir::input});
  }
  return out;
}

std::vector<std::size_t> topological_order(const dag& d) {
  const auto& nodes = d.nodes();
  std::unordered_map<node_id, std::size_t> index;
  for (std::size_t i = 0; i < nodes.size(); ++i) index[nodes[i].id] = i;
  std::vector<std::size_t> indegree(nodes.size(), 0);
  for (const auto& e : d.edges()) ++indegree[index.at(e.to.node)];

  std::vector<std::size_t> order;
  std::vector<bool> done(nodes.size(), false);
  for (;;) {
    bool progressed = false;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (done[i] || indegree[i] != 0) continue;
      done[i] = true;
      order.push_back(i);
      progressed = true;
      for (const auto& e : d.edges())
        if (e.from.node == nodes[i].id) --indegree[index.at(e.to.node)];
    }
    if (!progressed) break;
  }
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (!done[i]) order.push_back(i);  // cycle members
  return order;
}

std::vector<violation> validate(const dag& d) {
  std::vector<violation> out;
  // Connection counts per port.
  auto count = [&](const port_ref& p) {
    int c = 0;
    for (const auto& e : d.edges())
      if (e.from == p || e.to == p) ++c;
    return c;
  };
  for (const auto& n : d.nodes()) {
    if (n.is_socket()) {
      int total = 0;
      for (std::uint32_t i = 0; i < n.in_arity(); ++i) total += count({n.id, i, port_dir::input});
      for (std::uint32_t i = 0; i < n.out_arity(); ++i) total += count({n.id, i, port_dir::output});
      if (total != 1)
        out.push_back({3, n.id, std::nullopt,
                       "constraint 3: socket '" + n.socket().label + "' (node " +
                           std::to_string(n.id) + ") has " + std::to_string(total) +
                           " connections, expected 1"});
      continue;
    }
    auto check = [&](std::uint32_t idx, port_dir dir) {
      int c = count({n.id, idx, dir});
      const char* what = dir == port_dir::input ? "input" : "output";
      if (c == 0)
        out.push_back({1, n.id, idx,
                       "constraint 1: " + n.kind() + " node " + std::to_string(n.id) + " " + what +
                           " port " + std::to_string(idx) + " is not connected"});
      else if (c > 1)
        out.push_back({2, n.id, idx,
                       "constraint 2: " + n.kind() + " node " + std::to_string(n.id) + " " + what +
                           " port " + std::to_string(idx) + " has " + std::to_string(c) +
                           " connections"});
    };
    for (std::uint32_t i = 0; i < n.in_arity(); ++i) check(i, port_dir::input);
    for (std::uint32_t i = 0; i < n.out_arity(); ++i) check(i, port_dir::output);
  }
  // Acyclicity: nodes Kahn's algorithm cannot order sit on (or behind) a cycle.
  const auto& nodes = d.nodes();
  std::unordered_map<node_id, std::size_t> index;
  for (std::size_t i = 0; i < nodes.size(); ++i) index[nodes[i].id] = i;
  std::vector<std::size_t> indegree(nodes.size(), 0);
  for (const auto& e : d.edges()) ++indegree[index.at(e.to.node)];
  std::vector<bool> done(nodes.size(), false);
  bool progressed = true;
  while (progressed) {
    progressed = false;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (done[i] || indegree[i] != 0) continue;
      done[i] = true;
      progressed = true;
      for (const auto& e : d.edges())
        if (e.from.node == nodes[i].id) --indegree[index.at(e.to.node)];
    }
  }
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (!done[i])
      out.push_back({4, nodes[i].id, std::nullopt,
                     "constraint 4: node " + std::to_string(nodes[i].id) + " is on a cycle"});
  return out;
}

namespace {

std::string render_kind(const dag_node& n) {
  if (n.is_socket()) return n.kind();
  const auto& op = n.op();
  if (op.kind == "dup" || op.kind == "balance" || op.kind == "merge") {
    std::int64_t c = op.kind == "merge" ? op.in_arity : op.out_arity;
    return op.kind + "(" + std::to_string(c) + ")";
  }
  return op.kind;
}

}  // namespace

std::string serialize_dag(const dag& d) {
  std::unordered_map<node_id, std::size_t> norm;
  for (std::size_t i = 0; i < d.nodes().size(); ++i) norm[d.nodes()[i].id] = i;
  std::ostringstream os;
  for (std::size_t i = 0; i < d.nodes().size(); ++i) {
    const auto& n = d.nodes()[i];
    os << "node n" << i << " " << render_kind(n);
    if (n.is_socket())
      os << " " << n.socket().label;
    else if (n.op().alias)
      os << " " << *n.op().alias;
    os << "\n";
  }
  std::vector<dag_edge> edges = d.edges();
  std::sort(edges.begin(), edges.end(), [&](const dag_edge& a, const dag_edge& b) {
    auto ka = std::tuple(norm.at(a.from.node), a.from.index, norm.at(a.to.node), a.to.index);
    auto kb = std::tuple(norm.at(b.from.node), b.from.index, norm.at(b.to.node), b.to.index);
    return ka < kb;
  });
  for (const auto& e : edges)
    os << "edge n" << norm.at(e.from.node) << "." << e.from.index << " -> n" << norm.at(e.to.node)
       << "." << e.to.index << "\n";
  return os.str();
}

dag parse_dag(const std::string& text) {
  dag out;
  std::vector<node_id> by_index;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& why) {
    throw std::invalid_argument("dag text line " + std::to_string(lineno) + ": " + why);
  };
  auto placeholder = [](const std::string& name) {
    return make_fn(name, [](std::span<const value>) -> value {
      throw std::runtime_error("placeholder function from a parsed dag file");
    });
  };
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "node") {
      std::string id, kind, alias;
      ls >> id >> kind;
      std::getline(ls, alias);
      while (!alias.empty() && alias.front() == ' ') alias.erase(alias.begin());
      if (id != "n" + std::to_string(by_index.size())) fail("node ids must be dense: got " + id);
      if (kind == "source_socket" || kind == "sink_socket") {
        by_index.push_back(out.add_socket_node(socket_spec{
            alias, kind == "source_socket" ? socket_dir::source_socket : socket_dir::sink_socket}));
        continue;
      }
      std::int64_t n = 0;
      std::string base = kind;
      if (auto paren = kind.find('('); paren != std::string::npos) {
        base = kind.substr(0, paren);
        n = std::stoll(kind.substr(paren + 1));
      }
      operator_spec spec;
      if (base == "dup" || base == "balance" || base == "merge")
        spec = ops::make(base, op_argument{n});
      else if (base == "zip")
        spec = ops::zip();
      else if (base == "scan")
        spec = ops::scan(placeholder("scan_step"), value(0));
      else if (base == "map" || base == "filter" || base == "fused")
        spec = ops::make(base, op_argument{placeholder(base + "_fn")});
      else
        fail("unknown kind " + kind);
      if (!alias.empty()) spec.alias = alias;
      by_index.push_back(out.add_operator_node(std::move(spec)));
    } else if (tag == "edge") {
      std::string from, arrow, to;
      ls >> from >> arrow >> to;
      if (arrow != "->") fail("expected '->'");
      auto split = [&](const std::string& s) -> std::pair<std::size_t, std::uint32_t> {
        auto dot = s.find('.');
        if (dot == std::string::npos || s.front() != 'n') fail("bad port reference " + s);
        return {std::stoull(s.substr(1, dot - 1)), static_cast<std::uint32_t>(std::stoul(s.substr(dot + 1)))};
      };
      auto [fi, fp] = split(from);
      auto [ti, tp] = split(to);
      if (fi >= by_index.size() || ti >= by_index.size()) fail("edge references unknown node");
      out.force_edge({by_index[fi], fp, port_dir::output}, {by_index[ti], tp, port_dir::input});
    } else {
      fail("expected 'node' or 'edge', got '" + tag + "'");
    }
  }
  return out;
}

}  // namespace rill
