#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "rill/value.hpp"

namespace rill {

using node_id = std::uint64_t;

enum class port_dir { input, output };
enum class socket_dir { source_socket, sink_socket };

/// A specific port of a specific node.
struct port_ref {
  node_id node = 0;
  std::uint32_t index = 0;
  port_dir dir = port_dir::input;
  friend bool operator==(const port_ref&, const port_ref&) = default;
};

/// Argument an operator is instantiated with: nothing, a branch count, a
/// function, a scan step + seed, or a label (sockets reified as instructions).
struct scan_arg {
  fn_ref step;
  value seed;
};
using op_argument = std::variant<std::monostate, std::int64_t, fn_ref, scan_arg, std::string>;

bool argument_identity_equal(const op_argument& a, const op_argument& b);
std::string argument_to_string(const op_argument& a);

/// An operator node: kind, arities, argument, optional alias for reference
/// from instruction streams.
struct operator_spec {
  std::string kind;
  std::uint32_t in_arity = 0;
  std::uint32_t out_arity = 0;
  op_argument argument;
  std::optional<std::string> alias;
};

/// A placeholder for a data endpoint, bound to a real source or sink at
/// deployment. A source socket has exactly one output port, a sink socket
/// exactly one input port.
struct socket_spec {
  std::string label;
  socket_dir dir = socket_dir::source_socket;
};

struct dag_node {
  node_id id = 0;
  std::variant<operator_spec, socket_spec> payload;

  bool is_socket() const { return std::holds_alternative<socket_spec>(payload); }
  const operator_spec& op() const { return std::get<operator_spec>(payload); }
  const socket_spec& socket() const { return std::get<socket_spec>(payload); }
  std::uint32_t in_arity() const;
  std::uint32_t out_arity() const;
  std::string kind() const;
};

struct dag_edge {
  port_ref from;  // an output port
  port_ref to;    // an input port
  friend bool operator==(const dag_edge&, const dag_edge&) = default;
};

struct composition_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// One validation failure; `constraint` is 1..4 matching the deployability
/// rules (ports connected / connection counts / socket connections / acyclic).
struct violation {
  int constraint = 0;
  node_id node = 0;
  std::optional<std::uint32_t> port;
  std::string message;
};

/// Directed acyclic multigraph of operators and sockets. Values are cheap to
/// copy; node identifiers are unique across all dags in a process, and the
/// composition functions re-identify nodes so one open dag can be used twice
/// inside a larger one.
class dag {
 public:
  dag() = default;

  const std::vector<dag_node>& nodes() const { return nodes_; }
  const std::vector<dag_edge>& edges() const { return edges_; }
  bool empty() const { return nodes_.empty(); }

  const dag_node* find(node_id id) const;
  const dag_node& at(node_id id) const;
  bool contains(node_id id) const { return find(id) != nullptr; }

  /// Unconnected ports in canonical order: node insertion order, then port
  /// index.
  std::vector<port_ref> exposed_inputs() const;
  std::vector<port_ref> exposed_outputs() const;

  /// Open iff some operator (non-socket) port is unconnected.
  bool is_open() const;
  bool is_closed() const { return !is_open(); }

  bool port_connected(const port_ref& p) const;

  // Low-level mutation, used by close(), instruction application and the
  // compile-time rewrite primitives. add_edge rejects occupied or
  // out-of-range ports but does not check for cycles; validate() does.
  node_id add_operator_node(operator_spec spec);
  node_id add_socket_node(socket_spec socket);
  void remove_node(node_id id);  // also removes incident edges
  void add_edge(port_ref from, port_ref to);
  /// add_edge without the one-edge-per-port rule. Deserialization uses this
  /// so validate() can diagnose malformed files instead of refusing to load
  /// them.
  void force_edge(port_ref from, port_ref to);
  void remove_edge(port_ref from, port_ref to);
  void set_alias(node_id id, std::string alias);
  /// Exchanges the operator payloads of two nodes; ids and edges stay put.
  /// Arities must match or existing edges would dangle.
  void swap_payloads(node_id a, node_id b);

  /// Merges another dag's nodes and edges verbatim. Node id sets must be
  /// disjoint (always true for dags built through the public API).
  void absorb(dag other);

 private:
  std::vector<dag_node> nodes_;
  std::vector<dag_edge> edges_;
};

/// Factories for Table-style operators; each checks the kind/arity rules
/// (dup/balance/merge require n > 0).
namespace ops {
operator_spec map(fn_ref f);
operator_spec filter(fn_ref pred);
operator_spec scan(fn_ref step, value seed);
operator_spec dup(std::int64_t n);
operator_spec balance(std::int64_t n);
operator_spec merge(std::int64_t n);
operator_spec zip();
/// A fused single-in single-out stage; its function maps a value to either a
/// 1-tuple (emit) or unit (skip).
operator_spec fused(fn_ref step);
operator_spec make(const std::string& kind, op_argument argument);
}  // namespace ops

/// The smallest possible dag: one operator, all ports exposed.
dag single(operator_spec spec);

/// Connects a's exposed outputs to b's exposed inputs positionally. Requires
/// equal counts, otherwise the composition is invalid.
dag compose_vertical(const dag& a, const dag& b);

/// Disjoint union; exposed ports are a's then b's.
dag compose_horizontal(const dag& a, const dag& b);

inline dag operator>>(const dag& a, const dag& b) { return compose_vertical(a, b); }
inline dag operator|(const dag& a, const dag& b) { return compose_horizontal(a, b); }

/// Plugs every exposed port into a fresh socket: labels are consumed by the
/// exposed inputs first (canonical order), then the exposed outputs.
dag close(const dag& d, const std::vector<std::string>& socket_labels);

/// Checks the four deployability constraints and returns every failure:
/// (1) every operator port connected, (2) exactly one connection per port,
/// (3) each socket has exactly one connection, (4) no cycles.
std::vector<violation> validate(const dag& d);

/// Topological order of node indices (insertion order breaks ties). Nodes on
/// cycles are appended at the end.
std::vector<std::size_t> topological_order(const dag& d);

/// Textual form: `node <id> <kind> <alias?>` then `edge <id>.<p> -> <id>.<p>`,
/// with identifiers normalized to n0, n1, ... in insertion order.
std::string serialize_dag(const dag& d);

/// Parses the serialize_dag format. Function arguments are restored as named
/// placeholders; the result is suitable for validation and inspection, not
/// for deployment.
dag parse_dag(const std::string& text);

}  // namespace rill
