#include "rill/pipeline.hpp"

#include <cctype>
#include <iostream>
#include <sstream>

namespace rill {

bool operator==(const pipeline_expr& x, const pipeline_expr& y) {
  return x.k == y.k && x.a == y.a && x.b == y.b && x.items == y.items && x.op_kind == y.op_kind &&
         x.fn_name == y.fn_name && x.n == y.n && x.parts == y.parts;
}

namespace {

struct token {
  enum class type { ident, number, lparen, rparen, lbracket, rbracket, comma, arrow, par, end };
  type t = type::end;
  std::string text;
  std::int64_t num = 0;
  std::size_t pos = 0;
};

class lexer {
 public:
  explicit lexer(const std::string& s) : s_(s) { advance(); }

  const token& peek() const { return tok_; }

  token take() {
    token t = tok_;
    advance();
    return t;
  }

 private:
  void advance() {
    while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
    tok_ = token{};
    tok_.pos = i_;
    if (i_ >= s_.size()) return;
    char c = s_[i_];
    if (c == '(') { tok_.t = token::type::lparen; ++i_; return; }
    if (c == ')') { tok_.t = token::type::rparen; ++i_; return; }
    if (c == '[') { tok_.t = token::type::lbracket; ++i_; return; }
    if (c == ']') { tok_.t = token::type::rbracket; ++i_; return; }
    if (c == ',') { tok_.t = token::type::comma; ++i_; return; }
    if (s_.compare(i_, 2, "~>") == 0) { tok_.t = token::type::arrow; i_ += 2; return; }
    if (s_.compare(i_, 3, "|||") == 0) { tok_.t = token::type::par; i_ += 3; return; }
    if (c == '-' || std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i_ + 1;
      while (j < s_.size() && std::isdigit(static_cast<unsigned char>(s_[j]))) ++j;
      if (c == '-' && j == i_ + 1) throw parse_error("stray '-'", i_);
      tok_.t = token::type::number;
      tok_.num = std::stoll(s_.substr(i_, j - i_));
      i_ = j;
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i_;
      while (j < s_.size() &&
             (std::isalnum(static_cast<unsigned char>(s_[j])) || s_[j] == '_'))
        ++j;
      tok_.t = token::type::ident;
      tok_.text = s_.substr(i_, j - i_);
      i_ = j;
      return;
    }
    throw parse_error(std::string("unexpected character '") + c + "'", i_);
  }

  const std::string& s_;
  std::size_t i_ = 0;
  token tok_;
};

class parser {
 public:
  explicit parser(const std::string& s) : lex_(s) {}

  pipeline_expr parse() {
    pipeline_expr e = parse_chain();
    if (lex_.peek().t != token::type::end)
      throw parse_error("trailing input", lex_.peek().pos);
    return e;
  }

 private:
  pipeline_expr parse_chain() {
    std::vector<pipeline_expr> parts;
    parts.push_back(parse_term());
    while (lex_.peek().t == token::type::arrow) {
      lex_.take();
      parts.push_back(parse_term());
    }
    if (parts.size() == 1) return parts[0];
    pipeline_expr e;
    e.k = pipeline_expr::kind::chain;
    e.parts = std::move(parts);
    return e;
  }

  pipeline_expr parse_term() {
    if (lex_.peek().t == token::type::lparen) {
      std::size_t open = lex_.peek().pos;
      lex_.take();
      std::vector<pipeline_expr> branches;
      branches.push_back(parse_chain());
      while (lex_.peek().t == token::type::par) {
        lex_.take();
        branches.push_back(parse_chain());
      }
      expect(token::type::rparen, "')'");
      if (branches.size() < 2) throw parse_error("parallel group needs at least two branches", open);
      pipeline_expr e;
      e.k = pipeline_expr::kind::group;
      e.parts = std::move(branches);
      return e;
    }
    return parse_atom();
  }

  pipeline_expr parse_atom() {
    token t = lex_.take();
    if (t.t != token::type::ident) throw parse_error("expected a pipeline element", t.pos);
    pipeline_expr e;
    if (t.text == "range") {
      e.k = pipeline_expr::kind::source_range;
      expect(token::type::lparen, "'('");
      e.a = expect_number();
      expect(token::type::comma, "','");
      e.b = expect_number();
      expect(token::type::rparen, "')'");
      return e;
    }
    if (t.text == "list") {
      e.k = pipeline_expr::kind::source_list;
      expect(token::type::lparen, "'('");
      expect(token::type::lbracket, "'['");
      if (lex_.peek().t != token::type::rbracket) {
        e.items.push_back(expect_number());
        while (lex_.peek().t == token::type::comma) {
          lex_.take();
          e.items.push_back(expect_number());
        }
      }
      expect(token::type::rbracket, "']'");
      expect(token::type::rparen, "')'");
      return e;
    }
    if (t.text == "collect") {
      e.k = pipeline_expr::kind::sink_collect;
      return e;
    }
    if (t.text == "foreach") {
      e.k = pipeline_expr::kind::sink_foreach;
      expect(token::type::lparen, "'('");
      token what = lex_.take();
      if (what.t != token::type::ident || what.text != "print")
        throw parse_error("foreach supports only 'print'", what.pos);
      expect(token::type::rparen, "')'");
      return e;
    }
    if (t.text == "zip") {
      e.k = pipeline_expr::kind::stage;
      e.op_kind = "zip";
      return e;
    }
    if (t.text == "map" || t.text == "filter") {
      e.k = pipeline_expr::kind::stage;
      e.op_kind = t.text;
      expect(token::type::lparen, "'('");
      e.fn_name = expect_ident();
      expect(token::type::rparen, "')'");
      return e;
    }
    if (t.text == "scan") {
      e.k = pipeline_expr::kind::stage;
      e.op_kind = "scan";
      expect(token::type::lparen, "'('");
      e.fn_name = expect_ident();
      expect(token::type::comma, "','");
      e.n = expect_number();
      expect(token::type::rparen, "')'");
      return e;
    }
    if (t.text == "dup" || t.text == "balance" || t.text == "merge") {
      e.k = pipeline_expr::kind::stage;
      e.op_kind = t.text;
      expect(token::type::lparen, "'('");
      e.n = expect_number();
      expect(token::type::rparen, "')'");
      return e;
    }
    throw parse_error("unknown pipeline element '" + t.text + "'", t.pos);
  }

  void expect(token::type t, const std::string& what) {
    token got = lex_.take();
    if (got.t != t) throw parse_error("expected " + what, got.pos);
  }

  std::int64_t expect_number() {
    token got = lex_.take();
    if (got.t != token::type::number) throw parse_error("expected a number", got.pos);
    return got.num;
  }

  std::string expect_ident() {
    token got = lex_.take();
    if (got.t != token::type::ident) throw parse_error("expected a name", got.pos);
    return got.text;
  }

  lexer lex_;
};

}  // namespace

pipeline_expr parse_pipeline(const std::string& text) { return parser(text).parse(); }

std::string print_pipeline(const pipeline_expr& e) {
  using k = pipeline_expr::kind;
  std::ostringstream os;
  switch (e.k) {
    case k::source_range: os << "range(" << e.a << "," << e.b << ")"; break;
    case k::source_list: {
      os << "list([";
      for (std::size_t i = 0; i < e.items.size(); ++i) {
        if (i) os << ", ";
        os << e.items[i];
      }
      os << "])";
      break;
    }
    case k::sink_collect: os << "collect"; break;
    case k::sink_foreach: os << "foreach(print)"; break;
    case k::stage:
      if (e.op_kind == "zip")
        os << "zip";
      else if (e.op_kind == "scan")
        os << "scan(" << e.fn_name << "," << e.n << ")";
      else if (e.op_kind == "map" || e.op_kind == "filter")
        os << e.op_kind << "(" << e.fn_name << ")";
      else
        os << e.op_kind << "(" << e.n << ")";
      break;
    case k::chain:
      for (std::size_t i = 0; i < e.parts.size(); ++i) {
        if (i) os << " ~> ";
        os << print_pipeline(e.parts[i]);
      }
      break;
    case k::group:
      os << "(";
      for (std::size_t i = 0; i < e.parts.size(); ++i) {
        if (i) os << " ||| ";
        os << print_pipeline(e.parts[i]);
      }
      os << ")";
      break;
  }
  return os.str();
}

namespace {

// Intermediate lowering state: an operator dag plus virtual ports for the
// sources and sinks that will only become sockets at the end.
struct lowering {
  dag d;
  std::vector<source_endpoint> sources;
  std::vector<sink_endpoint> sinks;
  struct vout {
    bool from_source = false;
    std::size_t src = 0;
    port_ref port;
  };
  struct vin {
    bool to_sink = false;
    std::size_t snk = 0;
    port_ref port;
  };
  std::vector<vout> outs;
  std::vector<vin> ins;
  std::vector<std::pair<port_ref, std::size_t>> source_caps;  // operator input <- source
  std::vector<std::pair<port_ref, std::size_t>> sink_caps;    // operator output -> sink
  std::vector<std::pair<std::size_t, std::size_t>> direct;    // source -> sink
};

fn_ref stage_fn(const std::string& op_kind, const std::string& name) {
  auto it = function_registry().find(name);
  if (it == function_registry().end())
    throw std::invalid_argument("unknown function name '" + name + "' in " + op_kind);
  if (op_kind == "scan") {
    if (it->second.k != registry_entry::kind::binary)
      throw std::invalid_argument("scan needs a binary function, '" + name + "' is not");
  } else if (it->second.k == registry_entry::kind::binary) {
    throw std::invalid_argument(op_kind + " needs a unary function, '" + name + "' is binary");
  }
  return it->second.fn;
}

lowering merge_parallel(std::vector<lowering> branches) {
  lowering out;
  for (auto& b : branches) {
    std::size_t src_off = out.sources.size();
    std::size_t snk_off = out.sinks.size();
    out.d.absorb(std::move(b.d));
    for (auto& s : b.sources) out.sources.push_back(std::move(s));
    for (auto& s : b.sinks) out.sinks.push_back(std::move(s));
    for (auto v : b.outs) {
      if (v.from_source) v.src += src_off;
      out.outs.push_back(v);
    }
    for (auto v : b.ins) {
      if (v.to_sink) v.snk += snk_off;
      out.ins.push_back(v);
    }
    for (auto c : b.source_caps) out.source_caps.emplace_back(c.first, c.second + src_off);
    for (auto c : b.sink_caps) out.sink_caps.emplace_back(c.first, c.second + snk_off);
    for (auto c : b.direct) out.direct.emplace_back(c.first + src_off, c.second + snk_off);
  }
  return out;
}

lowering compose_seq(lowering left, lowering right) {
  if (left.outs.size() != right.ins.size())
    throw std::invalid_argument("composition mismatch: left side provides " +
                                std::to_string(left.outs.size()) + " stream(s), right side expects " +
                                std::to_string(right.ins.size()));
  std::size_t src_off = left.sources.size();
  std::size_t snk_off = left.sinks.size();
  lowering out;
  out.d = std::move(left.d);
  out.d.absorb(std::move(right.d));
  out.sources = std::move(left.sources);
  for (auto& s : right.sources) out.sources.push_back(std::move(s));
  out.sinks = std::move(left.sinks);
  for (auto& s : right.sinks) out.sinks.push_back(std::move(s));
  out.source_caps = std::move(left.source_caps);
  for (auto c : right.source_caps) out.source_caps.emplace_back(c.first, c.second + src_off);
  out.sink_caps = std::move(left.sink_caps);
  for (auto c : right.sink_caps) out.sink_caps.emplace_back(c.first, c.second + snk_off);
  out.direct = std::move(left.direct);
  for (auto c : right.direct) out.direct.emplace_back(c.first + src_off, c.second + snk_off);

  for (std::size_t k = 0; k < left.outs.size(); ++k) {
    auto lo = left.outs[k];
    auto ri = right.ins[k];
    if (ri.to_sink) ri.snk += snk_off;
    if (!lo.from_source && !ri.to_sink)
      out.d.add_edge(lo.port, ri.port);
    else if (lo.from_source && !ri.to_sink)
      out.source_caps.emplace_back(ri.port, lo.src);
    else if (!lo.from_source && ri.to_sink)
      out.sink_caps.emplace_back(lo.port, ri.snk);
    else
      out.direct.emplace_back(lo.src, ri.snk);
  }
  out.ins = std::move(left.ins);
  out.outs.clear();
  for (auto v : right.outs) {
    if (v.from_source) v.src += src_off;
    out.outs.push_back(v);
  }
  return out;
}

lowering lower(const pipeline_expr& e) {
  using k = pipeline_expr::kind;
  lowering out;
  switch (e.k) {
    case k::source_range:
      out.sources.push_back(sources::range(e.a, e.b));
      out.outs.push_back({true, 0, {}});
      return out;
    case k::source_list: {
      std::vector<value> vs;
      for (auto i : e.items) vs.push_back(value(i));
      out.sources.push_back(sources::list(std::move(vs)));
      out.outs.push_back({true, 0, {}});
      return out;
    }
    case k::sink_collect:
      out.sinks.push_back(sinks::collect());
      out.ins.push_back({true, 0, {}});
      return out;
    case k::sink_foreach:
      out.sinks.push_back(sinks::for_each([](const value& v) { std::cout << v.to_string() << "\n"; }));
      out.ins.push_back({true, 0, {}});
      return out;
    case k::stage: {
      operator_spec spec;
      if (e.op_kind == "zip")
        spec = ops::zip();
      else if (e.op_kind == "scan")
        spec = ops::scan(stage_fn("scan", e.fn_name), value(e.n));
      else if (e.op_kind == "map")
        spec = ops::map(stage_fn("map", e.fn_name));
      else if (e.op_kind == "filter")
        spec = ops::filter(stage_fn("filter", e.fn_name));
      else
        spec = ops::make(e.op_kind, op_argument{e.n});
      out.d = single(std::move(spec));
      for (const auto& p : out.d.exposed_inputs()) out.ins.push_back({false, 0, p});
      for (const auto& p : out.d.exposed_outputs()) out.outs.push_back({false, 0, p});
      return out;
    }
    case k::chain: {
      lowering acc = lower(e.parts.front());
      for (std::size_t i = 1; i < e.parts.size(); ++i) acc = compose_seq(std::move(acc), lower(e.parts[i]));
      return acc;
    }
    case k::group: {
      std::vector<lowering> branches;
      for (const auto& p : e.parts) branches.push_back(lower(p));
      return merge_parallel(std::move(branches));
    }
  }
  return out;
}

}  // namespace

lowered_pipeline lower_pipeline(const pipeline_expr& e) {
  lowering l = lower(e);
  if (!l.ins.empty())
    throw std::invalid_argument("pipeline has " + std::to_string(l.ins.size()) +
                                " unconnected input(s); every chain must start at a source");
  if (!l.outs.empty())
    throw std::invalid_argument("pipeline has " + std::to_string(l.outs.size()) +
                                " unconnected output(s); every chain must end at a sink");
  lowered_pipeline out;
  out.graph = std::move(l.d);
  for (const auto& [port, idx] : l.source_caps) {
    std::string label = "in" + std::to_string(idx);
    node_id s = out.graph.add_socket_node(socket_spec{label, socket_dir::source_socket});
    out.graph.add_edge({s, 0, port_dir::output}, port);
    out.bindings.push_back(bind(label, l.sources[idx]));
  }
  for (const auto& [port, idx] : l.sink_caps) {
    std::string label = "out" + std::to_string(idx);
    node_id s = out.graph.add_socket_node(socket_spec{label, socket_dir::sink_socket});
    out.graph.add_edge(port, {s, 0, port_dir::input});
    out.bindings.push_back(bind(label, l.sinks[idx]));
  }
  for (const auto& [si, ki] : l.direct) {
    std::string in_label = "in" + std::to_string(si);
    std::string out_label = "out" + std::to_string(ki);
    node_id a = out.graph.add_socket_node(socket_spec{in_label, socket_dir::source_socket});
    node_id b = out.graph.add_socket_node(socket_spec{out_label, socket_dir::sink_socket});
    out.graph.add_edge({a, 0, port_dir::output}, {b, 0, port_dir::input});
    out.bindings.push_back(bind(in_label, l.sources[si]));
    out.bindings.push_back(bind(out_label, l.sinks[ki]));
  }
  auto bad = validate(out.graph);
  if (!bad.empty()) {
    std::string msg = "pipeline does not form a deployable stream:";
    for (const auto& v : bad) msg += "\n  " + v.message;
    throw std::invalid_argument(msg);
  }
  return out;
}

}  // namespace rill
