#include "rill/value.hpp"

#include <sstream>
#include <stdexcept>

#include "rill/counters.hpp"

namespace rill {

namespace counters {

std::atomic<std::uint64_t>& meta_cells_allocated() {
  static std::atomic<std::uint64_t> n{0};
  return n;
}

std::atomic<std::uint64_t>& meta_items_allocated() {
  static std::atomic<std::uint64_t> n{0};
  return n;
}

void reset() {
  meta_cells_allocated().store(0);
  meta_items_allocated().store(0);
}

}  // namespace counters

fn_ref make_fn(std::string name, std::function<value(std::span<const value>)> call) {
  return std::make_shared<const fn_def>(fn_def{std::move(name), std::move(call)});
}

value value::tuple(std::vector<value> parts) {
  value v;
  v.repr_ = std::make_shared<const std::vector<value>>(std::move(parts));
  return v;
}

value value::box(value payload, std::vector<stamp> stamps) {
  value v;
  v.repr_ = std::make_shared<const boxed>(boxed{std::move(payload), std::move(stamps)});
  return v;
}

std::int64_t value::as_int() const {
  if (!is_int()) throw std::runtime_error("value is not an integer: " + to_string());
  return std::get<std::int64_t>(repr_);
}

bool value::as_bool() const {
  if (!is_bool()) throw std::runtime_error("value is not a boolean: " + to_string());
  return std::get<bool>(repr_);
}

const std::string& value::as_string() const {
  if (!is_string()) throw std::runtime_error("value is not a string: " + to_string());
  return std::get<std::string>(repr_);
}

const std::vector<value>& value::as_tuple() const {
  if (!is_tuple()) throw std::runtime_error("value is not a tuple: " + to_string());
  return *std::get<tuple_ref>(repr_);
}

const boxed& value::as_box() const {
  if (!is_box()) throw std::runtime_error("value is not a box: " + to_string());
  return *std::get<box_ref>(repr_);
}

const meta_item_ref& value::as_meta_item() const {
  if (!is_meta_item()) throw std::runtime_error("value is not a meta item");
  return std::get<meta_item_ref>(repr_);
}

const meta_cell_ref& value::as_meta_cell() const {
  if (!is_meta_cell()) throw std::runtime_error("value is not a meta cell");
  return std::get<meta_cell_ref>(repr_);
}

bool value::truthy() const {
  if (is_unit()) return false;
  if (is_bool()) return std::get<bool>(repr_);
  if (is_int()) return std::get<std::int64_t>(repr_) != 0;
  return true;
}

std::string value::to_string() const {
  std::ostringstream os;
  if (is_unit()) {
    os << "()";
  } else if (is_int()) {
    os << std::get<std::int64_t>(repr_);
  } else if (is_bool()) {
    os << (std::get<bool>(repr_) ? "true" : "false");
  } else if (is_string()) {
    os << std::get<std::string>(repr_);
  } else if (is_tuple()) {
    os << "(";
    const auto& parts = as_tuple();
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (i) os << ", ";
      os << parts[i].to_string();
    }
    os << ")";
  } else if (is_box()) {
    const auto& b = as_box();
    os << "{" << b.payload.to_string() << " |";
    for (const auto& s : b.stamps) os << " n" << s.node << "@" << s.time;
    os << "}";
  } else if (is_meta_item()) {
    os << "<meta-item>";
  } else {
    os << "<meta-cell>";
  }
  return os.str();
}

bool operator==(const value& a, const value& b) {
  if (a.repr_.index() != b.repr_.index()) return false;
  if (a.is_unit()) return true;
  if (a.is_int()) return a.as_int() == b.as_int();
  if (a.is_bool()) return a.as_bool() == b.as_bool();
  if (a.is_string()) return a.as_string() == b.as_string();
  if (a.is_tuple()) return a.as_tuple() == b.as_tuple();
  if (a.is_box()) {
    const auto& x = a.as_box();
    const auto& y = b.as_box();
    return x.payload == y.payload && x.stamps == y.stamps;
  }
  // Meta values compare by identity.
  if (a.is_meta_item()) return a.as_meta_item() == b.as_meta_item();
  return a.as_meta_cell() == b.as_meta_cell();
}

value call1(const fn_ref& f, const value& a) {
  const value args[1] = {a};
  return f->call(std::span<const value>(args, 1));
}

value call2(const fn_ref& f, const value& a, const value& b) {
  const value args[2] = {a, b};
  return f->call(std::span<const value>(args, 2));
}

}  // namespace rill
