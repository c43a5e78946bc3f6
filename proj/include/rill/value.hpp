#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace rill {

class value;

/// A named, type-erased function over values. Functions are compared by
/// identity (the shared_ptr), never structurally.
struct fn_def {
  std::string name;
  std::function<value(std::span<const value>)> call;
};
using fn_ref = std::shared_ptr<const fn_def>;

fn_ref make_fn(std::string name, std::function<value(std::span<const value>)> call);

/// One timestamp entry attached to a boxed value: which node stamped it and
/// the logical time at which it did.
struct stamp {
  std::uint64_t node = 0;
  std::uint64_t time = 0;
  friend bool operator==(const stamp&, const stamp&) = default;
};

struct boxed;
struct meta_item;
struct meta_cell;

using tuple_ref = std::shared_ptr<const std::vector<value>>;
using box_ref = std::shared_ptr<const boxed>;
using meta_item_ref = std::shared_ptr<const meta_item>;
using meta_cell_ref = std::shared_ptr<const meta_cell>;

/// Dynamic value flowing through a stream. Ints, bools and strings cover the
/// user-facing data; tuples come from zip, boxes from timestamping, and the
/// meta_* cases carry reified compiler/runtime state through meta streams.
class value {
 public:
  value() = default;
  value(std::int64_t v) : repr_(v) {}
  value(int v) : repr_(static_cast<std::int64_t>(v)) {}
  value(bool v) : repr_(v) {}
  value(std::string v) : repr_(std::move(v)) {}
  value(const char* v) : repr_(std::string(v)) {}
  value(meta_item_ref v) : repr_(std::move(v)) {}
  value(meta_cell_ref v) : repr_(std::move(v)) {}

  static value unit() { return value(); }
  static value tuple(std::vector<value> parts);
  static value box(value payload, std::vector<stamp> stamps);

  bool is_unit() const { return std::holds_alternative<std::monostate>(repr_); }
  bool is_int() const { return std::holds_alternative<std::int64_t>(repr_); }
  bool is_bool() const { return std::holds_alternative<bool>(repr_); }
  bool is_string() const { return std::holds_alternative<std::string>(repr_); }
  bool is_tuple() const { return std::holds_alternative<tuple_ref>(repr_); }
  bool is_box() const { return std::holds_alternative<box_ref>(repr_); }
  bool is_meta_item() const { return std::holds_alternative<meta_item_ref>(repr_); }
  bool is_meta_cell() const { return std::holds_alternative<meta_cell_ref>(repr_); }

  std::int64_t as_int() const;
  bool as_bool() const;
  const std::string& as_string() const;
  const std::vector<value>& as_tuple() const;
  const boxed& as_box() const;
  const meta_item_ref& as_meta_item() const;
  const meta_cell_ref& as_meta_cell() const;

  /// Truthiness for filter predicates: false/0/unit are false, the rest true.
  bool truthy() const;

  std::string to_string() const;

  friend bool operator==(const value& a, const value& b);
  friend bool operator!=(const value& a, const value& b) { return !(a == b); }

 private:
  std::variant<std::monostate, std::int64_t, bool, std::string, tuple_ref,
               box_ref, meta_item_ref, meta_cell_ref>
      repr_;
};

/// Payload plus the trail of stamps it has collected so far.
struct boxed {
  value payload;
  std::vector<stamp> stamps;
};

value call1(const fn_ref& f, const value& a);
value call2(const fn_ref& f, const value& a, const value& b);

}  // namespace rill
