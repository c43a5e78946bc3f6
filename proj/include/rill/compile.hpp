#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "rill/graph.hpp"
#include "rill/value.hpp"

namespace rill {

/// Instruction stream reifying dag construction: insert an operator, alias
/// the last inserted one, or draw an edge between named/identified nodes.
struct add_operator_instr {
  std::string kind;
  op_argument argument;
};
struct name_it_instr {
  std::string alias;
};
using instr_endpoint = std::variant<std::string, node_id>;
struct add_edge_instr {
  instr_endpoint from;
  std::uint32_t from_port = 0;
  instr_endpoint to;
  std::uint32_t to_port = 0;
};
using instruction = std::variant<add_operator_instr, name_it_instr, add_edge_instr>;

std::string instruction_to_string(const instruction& i);

/// Alias environment threaded through instruction application; a later
/// binding of the same alias shadows the earlier one.
struct instr_env {
  std::map<std::string, node_id> aliases;
  std::optional<node_id> last_added;
};

/// The datum flowing through a compile-time meta stream: the instruction
/// about to be applied, the dag built so far, and the alias environment.
struct meta_item {
  instruction instr;
  dag graph;
  instr_env env;

  meta_item(instruction i, dag g, instr_env e);
};

value make_item(instruction i, dag g, instr_env e);

struct compile_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Compile rejection carrying the constraint violations found after replay.
struct compile_rejected : std::runtime_error {
  std::vector<violation> violations;
  explicit compile_rejected(std::vector<violation> v);
};

/// Reifies a dag as an instruction sequence; replaying it through
/// apply_instruction reproduces an isomorphic dag. Emission order is
/// topological node order, each operator followed by its alias, then all
/// edges.
std::vector<instruction> emit_instructions(const dag& d);

/// Applies item.instr to item.graph/item.env, returning the next state.
std::pair<dag, instr_env> apply_instruction(const meta_item& item);

/// Streams each instruction, paired with the evolving dag, through the meta
/// dag, applies whatever comes out, and validates the final dag. Throws
/// compile_rejected when the result breaks a deployability constraint.
dag run_compile(const std::vector<instruction>& instrs, const dag& meta);
dag run_compile(const dag& d, const dag& meta);

// -- rewrite primitives ------------------------------------------------

/// An operator pulled out of the compile-time dag for inspection.
struct reified_operator {
  node_id ref = 0;
  std::string kind;
  op_argument argument;
};

node_id resolve_endpoint(const dag& d, const instr_env& env, const instr_endpoint& e);
reified_operator fetch(const dag& d, const instr_env& env, const instr_endpoint& name_or_ref);

/// Fuses two single-in single-out stages into a fresh operator (not yet
/// inserted). map+map stays a map, filter+filter a filter, mixed pairs
/// become a fused stage whose handler runs both steps.
operator_spec fuse(const reified_operator& a, const reified_operator& b);

bool fusable(const std::string& kind_a, const std::string& kind_b);

/// Exchanges the payloads of two nodes with identical arities, leaving every
/// edge in place.
void swap_ops(dag& d, node_id a, node_id b);

/// Operators (or sockets) directly feeding op's input ports.
std::vector<reified_operator> inputs_of(const dag& d, node_id op);

node_id add_op(dag& d, operator_spec spec);
void delete_op(dag& d, node_id op);  // incident edges go with it
void connect_ports(dag& d, node_id from, std::uint32_t fidx, node_id to, std::uint32_t tidx);
void disconnect_ports(dag& d, node_id from, std::uint32_t fidx, node_id to, std::uint32_t tidx);

// -- built-in structural behaviors --------------------------------------

/// Identity meta: every instruction passes through unchanged.
dag proceed_meta();

/// Fuses consecutive fusable stages while edges stream by. With
/// `maps_only`, only map-map pairs are considered.
dag fusion_meta(bool maps_only = false);

/// Replaces every map with balance(n) feeding n copies of the map into a
/// merge(n). Loses data ordering.
dag parallel_meta(std::int64_t n);

/// Boxes every datum with a (node, time) trail: inserts a stamping map in
/// front of each operator and rewrites function arguments to work on the
/// boxed payload.
dag timestamp_meta();

/// Looks up a structural behavior by CLI name: none | fusion | parallel:n |
/// timestamp. Returns nothing for "none".
std::optional<dag> structural_by_name(const std::string& name);

}  // namespace rill
