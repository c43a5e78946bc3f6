#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "rill/runtime.hpp"

namespace rill {

/// Shared log written by the logging behavior: one record per Next event a
/// unit's meta stream sees.
struct stream_log {
  struct record {
    unit_ref unit = no_unit;
    event_tag tag = event_tag::next;
    value v;
  };
  std::mutex m;
  std::vector<record> records;

  void add(unit_ref u, event_tag t, value v) {
    std::lock_guard<std::mutex> g(m);
    records.push_back({u, t, std::move(v)});
  }
  std::vector<record> snapshot_records() {
    std::lock_guard<std::mutex> g(m);
    return records;
  }
};

/// A reversible value transformer for the encryption behavior.
struct cipher {
  std::string name;
  std::function<value(const value&)> encrypt;
  std::function<value(const value&)> decrypt;
};

/// Involutory integer cipher (xor with a key), applied through tuples.
cipher xor_cipher(std::uint64_t key);
cipher identity_cipher();

/// Default meta stream on every role: call the handler, run the effects.
/// The two stages are fused into one at construction time.
behavior identity_behavior();

/// Identity plus a tap recording every Next that reaches a unit.
behavior logging_behavior(std::shared_ptr<stream_log> log);

/// Consumer-driven propagation: sinks demand, sources tick only on demand,
/// operators forward demand upstream (again whenever they skip).
behavior pull_behavior();

/// Pull variant that tracks outstanding demands per upstream so no upstream
/// is asked twice before answering.
behavior smart_pull_behavior();

/// Values are encrypted on the wire: sources encrypt after producing,
/// operators decrypt before and re-encrypt after their handler, sinks
/// decrypt before delivery.
behavior encryption_behavior(cipher c);

/// Behavior lookup for the CLI: none (empty result) | identity | logging |
/// pull | smartpull | encrypt:<hexkey>.
std::optional<behavior> behavior_by_name(const std::string& name,
                                         std::shared_ptr<stream_log> log = nullptr);

}  // namespace rill
