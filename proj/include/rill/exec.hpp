#pragma once

#include <cstdint>
#include <deque>
#include <unordered_map>
#include <vector>

#include "rill/graph.hpp"
#include "rill/operators.hpp"

namespace rill {

struct sync_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Synchronous executor for a closed dag with exactly one source socket and
/// one sink socket. Values are pushed in one at a time; whatever reaches the
/// sink is returned. Operator state persists across feeds, so the instance
/// behaves like a long-lived deployment driven to quiescence per datum.
class sync_stream {
 public:
  explicit sync_stream(const dag& d);

  std::vector<value> feed(const value& v);

 private:
  struct node_rt {
    operator_spec spec;
    value state;
    // per output port: (target node index, target input port); -1 = sink
    std::vector<std::pair<std::int32_t, std::uint32_t>> out;
  };
  std::vector<node_rt> nodes_;
  std::int32_t entry_node_ = -1;  // fed by the source socket
  std::uint32_t entry_port_ = 0;
  bool source_to_sink_ = false;   // degenerate dag with no operators
};

}  // namespace rill
