#include "rill/exec.hpp"

namespace rill {

sync_stream::sync_stream(const dag& d) {
  // Node index map: operators get their slot, the source socket -2 and the
  // sink socket -3.
  std::unordered_map<node_id, std::int32_t> index;
  bool have_source = false;
  bool have_sink = false;
  for (const auto& n : d.nodes()) {
    if (n.is_socket()) {
      bool is_source = n.socket().dir == socket_dir::source_socket;
      bool& have = is_source ? have_source : have_sink;
      if (have) throw sync_error("sync_stream wants exactly one socket per direction");
      have = true;
      index[n.id] = is_source ? -2 : -3;
      continue;
    }
    index[n.id] = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(node_rt{n.op(), op_init_state(n.op()), {}});
    nodes_.back().out.resize(n.op().out_arity, {-1, 0});
  }
  if (!have_source || !have_sink)
    throw sync_error("sync_stream requires a closed dag with one source and one sink socket");

  for (const auto& e : d.edges()) {
    std::int32_t from = index.at(e.from.node);
    std::int32_t to = index.at(e.to.node);
    if (from == -2) {  // source socket feeds this port
      if (to == -3) {
        source_to_sink_ = true;
        continue;
      }
      entry_node_ = to;
      entry_port_ = e.to.index;
      continue;
    }
    if (to == -3) {
      nodes_[from].out[e.from.index] = {-1, 0};
      continue;
    }
    nodes_[from].out[e.from.index] = {to, e.to.index};
  }
}

std::vector<value> sync_stream::feed(const value& v) {
  std::vector<value> collected;
  if (source_to_sink_) {
    collected.push_back(v);
    return collected;
  }
  if (entry_node_ < 0) throw sync_error("sync_stream has no entry edge");
  std::deque<std::tuple<std::int32_t, std::uint32_t, value>> queue;
  queue.emplace_back(entry_node_, entry_port_, v);
  while (!queue.empty()) {
    auto [ni, port, datum] = std::move(queue.front());
    queue.pop_front();
    node_rt& n = nodes_[ni];
    handler_response r = op_on_next(n.spec, n.state, datum, port);
    n.state = r.new_state;
    switch (r.action) {
      case handler_response::act::emit:
        for (auto& route : r.emits) {
          auto [to, to_port] = n.out.at(route.port);
          if (to == -1)
            collected.push_back(std::move(route.v));
          else
            queue.emplace_back(to, to_port, std::move(route.v));
        }
        break;
      case handler_response::act::skip:
        break;
      case handler_response::act::complete:
        throw sync_error("operator completed inside a synchronous stream");
      case handler_response::act::fail:
        throw sync_error(n.spec.kind + " stage failed: " + r.error);
    }
  }
  return collected;
}

}  // namespace rill
