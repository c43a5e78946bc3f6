#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "rill/compile.hpp"
#include "rill/counters.hpp"
#include "rill/runtime.hpp"
#include "support.hpp"

using namespace rill;

namespace {

dag listing_pipeline() {
  // square then plus-one between two sockets
  return close(single(ops::map(registry_fn("square"))) >> single(ops::map(registry_fn("inc"))),
               {"src", "snk"});
}

std::vector<std::int64_t> run_list(const dag& closed, std::vector<std::int64_t> input,
                                   const char* in_label = "src", const char* out_label = "snk") {
  std::vector<value> vs;
  for (auto i : input) vs.push_back(value(i));
  deploy_options opt;
  opt.mode = run_mode::deterministic;
  auto h = deploy_fast(closed,
                       {bind(in_label, sources::list(std::move(vs))), bind(out_label, sinks::collect())},
                       opt);
  return testkit::ints_of(h.wait_value());
}

}  // namespace

TEST_CASE("emit_instructions shapes") {
  dag m = single(ops::map(registry_fn("inc")));
  auto instrs = emit_instructions(m);
  REQUIRE(instrs.size() == 2);  // operator + its name
  CHECK(std::holds_alternative<add_operator_instr>(instrs[0]));
  CHECK(std::get<add_operator_instr>(instrs[0]).kind == "map");
  CHECK(std::holds_alternative<name_it_instr>(instrs[1]));

  dag mm = single(ops::map(registry_fn("inc"))) >> single(ops::map(registry_fn("square")));
  auto seq = emit_instructions(mm);
  REQUIRE(seq.size() == 5);
  CHECK(std::holds_alternative<add_operator_instr>(seq[0]));
  CHECK(std::holds_alternative<name_it_instr>(seq[1]));
  CHECK(std::holds_alternative<add_operator_instr>(seq[2]));
  CHECK(std::holds_alternative<name_it_instr>(seq[3]));
  CHECK(std::holds_alternative<add_edge_instr>(seq[4]));
}

TEST_CASE("replay through the pass-through meta reproduces the dag") {
  std::mt19937_64 rng(5);
  for (int iter = 0; iter < 50; ++iter) {
    auto p = testkit::make_random_pipeline(rng, 6, 0);
    dag original = close(testkit::stages_to_dag(p.stages), {"in", "out"});
    dag replayed = run_compile(original, proceed_meta());
    CHECK(validate(replayed).empty());
    CHECK(testkit::dag_isomorphic(original, replayed));
  }
}

TEST_CASE("apply_instruction errors") {
  meta_item first(add_operator_instr{"map", op_argument{registry_fn("inc")}}, dag{}, instr_env{});
  auto [d1, e1] = apply_instruction(first);
  CHECK(d1.nodes().size() == 1);
  REQUIRE(e1.last_added.has_value());

  meta_item named(name_it_instr{"x"}, d1, e1);
  auto [d2, e2] = apply_instruction(named);
  CHECK(e2.aliases.at("x") == *e2.last_added);

  // later NameIt shadows an earlier binding
  meta_item second(add_operator_instr{"map", op_argument{registry_fn("square")}}, d2, e2);
  auto [d3, e3] = apply_instruction(second);
  meta_item renamed(name_it_instr{"x"}, d3, e3);
  auto [d4, e4] = apply_instruction(renamed);
  CHECK(e4.aliases.at("x") == *e4.last_added);
  CHECK(e4.aliases.at("x") != e2.aliases.at("x"));

  // unresolved alias
  meta_item dangling(add_edge_instr{"z", 0, "x", 0}, d4, e4);
  CHECK_THROWS_AS(apply_instruction(dangling), compile_error);

  // invalid operator argument
  meta_item bad(add_operator_instr{"dup", op_argument{std::int64_t(0)}}, dag{}, instr_env{});
  CHECK_THROWS_AS(apply_instruction(bad), compile_error);

  // occupied port
  dag two = d4;
  instr_env env = e4;
  meta_item edge(add_edge_instr{"x", 0, "x", 0}, two, env);  // self-edge is port reuse
  auto applied = apply_instruction(edge);
  meta_item again(add_edge_instr{"x", 0, "x", 0}, applied.first, applied.second);
  CHECK_THROWS_AS(apply_instruction(again), compile_error);
}

TEST_CASE("fetch and primitives") {
  dag d;
  instr_env env;
  node_id a = d.add_operator_node(ops::map(registry_fn("square")));
  node_id b = d.add_operator_node(ops::map(registry_fn("inc")));
  env.aliases["a"] = a;
  env.aliases["b"] = b;
  d.add_edge({a, 0, port_dir::output}, {b, 0, port_dir::input});

  CHECK(fetch(d, env, "a").kind == "map");
  CHECK(fetch(d, env, a).ref == fetch(d, env, "a").ref);
  CHECK_THROWS_AS(fetch(d, env, "nope"), compile_error);

  auto ins = inputs_of(d, b);
  REQUIRE(ins.size() == 1);
  CHECK(ins[0].ref == a);
  CHECK(inputs_of(d, a).empty());

  // both feeders of a merge are reported, in port order
  dag dm;
  node_id m1 = dm.add_operator_node(ops::map(registry_fn("inc")));
  node_id m2 = dm.add_operator_node(ops::map(registry_fn("double")));
  node_id mg = dm.add_operator_node(ops::merge(2));
  dm.add_edge({m1, 0, port_dir::output}, {mg, 0, port_dir::input});
  dm.add_edge({m2, 0, port_dir::output}, {mg, 1, port_dir::input});
  auto feeders = inputs_of(dm, mg);
  REQUIRE(feeders.size() == 2);
  CHECK(feeders[0].ref == m1);
  CHECK(feeders[1].ref == m2);

  // delete removes the incident edge
  dag d2 = d;
  delete_op(d2, a);
  CHECK(d2.edges().empty());
  CHECK_THROWS_AS(fetch(d2, env, "a"), compile_error);

  // disconnect of a missing edge fails; connecting an occupied port fails
  CHECK_THROWS_AS(disconnect_ports(d2, b, 0, b, 0), compile_error);
  dag d3 = d;
  CHECK_THROWS_AS(connect_ports(d3, a, 0, b, 0), compile_error);
}

TEST_CASE("fuse composes stage functions") {
  dag d;
  instr_env env;
  node_id a = d.add_operator_node(ops::map(registry_fn("square")));
  node_id b = d.add_operator_node(ops::map(registry_fn("inc")));
  env.aliases["a"] = a;
  env.aliases["b"] = b;
  operator_spec fused_spec = fuse(fetch(d, env, "a"), fetch(d, env, "b"));
  CHECK(fused_spec.kind == "map");
  value out = call1(std::get<fn_ref>(fused_spec.argument), value(3));
  CHECK(out == value(10));  // inc(square(3)) = 9 + 1

  // identity twice stays identity
  reified_operator id1{0, "map", op_argument{registry_fn("identity")}};
  operator_spec both = fuse(id1, id1);
  for (std::int64_t v : {-3, 0, 12}) CHECK(call1(std::get<fn_ref>(both.argument), value(v)) == value(v));

  reified_operator m{0, "merge", op_argument{std::int64_t(2)}};
  CHECK_THROWS_AS(fuse(m, id1), compile_error);

  // map then filter forms a skippable stage
  reified_operator flt{0, "filter", op_argument{registry_fn("even")}};
  operator_spec mixed = fuse(id1, flt);
  CHECK(mixed.kind == "fused");
  CHECK(call1(std::get<fn_ref>(mixed.argument), value(2)) == value::tuple({value(2)}));
  CHECK(call1(std::get<fn_ref>(mixed.argument), value(3)).is_unit());
}

TEST_CASE("swap exchanges payloads but not edges") {
  fn_ref f = registry_fn("square");
  fn_ref g = registry_fn("inc");
  dag closed = close(single(ops::map(f)) >> single(ops::map(g)), {"src", "snk"});
  node_id a = 0, b = 0;
  for (const auto& n : closed.nodes()) {
    if (n.is_socket()) continue;
    if (std::get<fn_ref>(n.op().argument) == f) a = n.id;
    if (std::get<fn_ref>(n.op().argument) == g) b = n.id;
  }
  std::size_t edges_before = closed.edges().size();
  swap_ops(closed, a, b);
  CHECK(closed.edges().size() == edges_before);
  // swapped pipeline computes g before f: square(inc(x))
  CHECK(run_list(closed, {3}) == std::vector<std::int64_t>{16});

  dag same = closed;
  swap_ops(same, a, a);
  CHECK(testkit::dag_isomorphic(same, closed));

  dag mism = single(ops::map(f)) | single(ops::merge(2));
  node_id mm = mism.nodes()[0].id;
  node_id mg = mism.nodes()[1].id;
  CHECK_THROWS_AS(swap_ops(mism, mm, mg), compile_error);
}

TEST_CASE("fusion collapses the two maps of the example pipeline") {
  dag compiled = run_compile(listing_pipeline(), fusion_meta());
  CHECK(validate(compiled).empty());
  CHECK(testkit::operator_count(compiled) == 1);
  CHECK(run_list(compiled, {1, 2, 3, 4}) == std::vector<std::int64_t>{2, 5, 10, 17});
}

TEST_CASE("fusion over chains of maps leaves one node and the same outputs") {
  std::mt19937_64 rng(29);
  static const char* maps[] = {"square", "inc", "double", "identity"};
  for (int k = 1; k <= 6; ++k) {
    dag chain;
    std::vector<testkit::oracle_stage> stages;
    for (int i = 0; i < k; ++i) {
      const char* fn = maps[rng() % 4];
      stages.push_back({testkit::oracle_stage::kind::map, fn, 0});
      dag stage = single(ops::map(registry_fn(fn)));
      chain = i == 0 ? stage : chain >> stage;
    }
    dag closed = close(chain, {"src", "snk"});
    dag fused = run_compile(closed, fusion_meta());
    CHECK(testkit::operator_count(fused) == 1);
    std::vector<std::int64_t> input = {-2, 0, 1, 5, 9};
    CHECK(run_list(fused, input) == testkit::oracle_run(stages, input));
    CHECK(run_list(fused, input) == run_list(closed, input));
  }
}

TEST_CASE("maps-only fusion leaves alternating stages alone") {
  dag body = single(ops::map(registry_fn("inc"))) >> single(ops::filter(registry_fn("even"))) >>
             single(ops::map(registry_fn("square")));
  dag closed = close(body, {"src", "snk"});
  dag compiled = run_compile(closed, fusion_meta(/*maps_only=*/true));
  CHECK(testkit::operator_count(compiled) == 3);
  CHECK(testkit::dag_isomorphic(compiled, closed));

  // full fusion folds all three into one skippable stage
  dag full = run_compile(closed, fusion_meta());
  CHECK(testkit::operator_count(full) == 1);
  CHECK(run_list(full, {1, 2, 3}) == run_list(closed, {1, 2, 3}));
}

TEST_CASE("fusion soundness on random map and filter pipelines") {
  std::mt19937_64 rng(31);
  static const char* maps[] = {"square", "inc", "double", "identity"};
  static const char* filters[] = {"even", "odd", "gt0"};
  for (int iter = 0; iter < 40; ++iter) {
    std::vector<testkit::oracle_stage> stages;
    dag body;
    std::size_t depth = 1 + rng() % 6;
    for (std::size_t i = 0; i < depth; ++i) {
      bool is_map = rng() % 2 == 0;
      const char* fn = is_map ? maps[rng() % 4] : filters[rng() % 3];
      stages.push_back({is_map ? testkit::oracle_stage::kind::map : testkit::oracle_stage::kind::filter,
                        fn, 0});
      dag stage = is_map ? single(ops::map(registry_fn(fn))) : single(ops::filter(registry_fn(fn)));
      body = i == 0 ? stage : body >> stage;
    }
    dag closed = close(body, {"src", "snk"});
    dag fused = run_compile(closed, fusion_meta());
    CHECK(testkit::operator_count(fused) <= testkit::operator_count(closed));
    CHECK(testkit::operator_count(fused) == 1);
    std::vector<std::int64_t> input;
    for (int i = -10; i <= 10; ++i) input.push_back(i);
    CHECK(run_list(fused, input) == testkit::oracle_run(stages, input));
  }
}

TEST_CASE("a meta that drops edges is rejected with named violations") {
  dag only_ops = close(single(ops::filter(make_fn("is_not_edge", [](std::span<const value> args) {
                          return value(!std::holds_alternative<add_edge_instr>(
                              args[0].as_meta_item()->instr));
                        }))),
                       {"src", "snk"});
  try {
    run_compile(listing_pipeline(), only_ops);
    FAIL("expected a rejection");
  } catch (const compile_rejected& e) {
    CHECK(!e.violations.empty());
    bool constraint1 = false;
    for (const auto& v : e.violations) constraint1 |= v.constraint == 1;
    CHECK(constraint1);
  }
}

TEST_CASE("a meta whose output closes a cycle is rejected") {
  // grafts a detached two-node cycle onto the dag while passing instructions
  bool grafted = false;
  auto graft = make_fn("graft_cycle", [&grafted](std::span<const value> args) -> value {
    const meta_item& item = *args[0].as_meta_item();
    if (grafted || !std::holds_alternative<add_edge_instr>(item.instr)) return args[0];
    grafted = true;
    dag d = item.graph;
    node_id c1 = add_op(d, ops::map(registry_fn("inc")));
    node_id c2 = add_op(d, ops::map(registry_fn("inc")));
    connect_ports(d, c1, 0, c2, 0);
    connect_ports(d, c2, 0, c1, 0);
    return make_item(item.instr, std::move(d), item.env);
  });
  dag meta = close(single(ops::map(graft)), {"src", "snk"});
  dag body = close(single(ops::map(registry_fn("inc"))), {"from", "to"});
  try {
    run_compile(body, meta);
    FAIL("expected a rejection");
  } catch (const compile_rejected& e) {
    bool cycle = false;
    for (const auto& v : e.violations) cycle |= v.constraint == 4;
    CHECK(cycle);
  }
}

TEST_CASE("parallelization spreads maps over n lanes") {
  dag body = close(single(ops::map(registry_fn("square"))), {"src", "snk"});
  for (std::int64_t n : {1, 2, 4}) {
    dag par = run_compile(body, parallel_meta(n));
    CHECK(validate(par).empty());
    // balance + n maps + merge
    CHECK(testkit::operator_count(par) == std::size_t(n) + 2);
    std::vector<std::int64_t> input;
    std::vector<std::int64_t> want;
    for (std::int64_t i = 1; i <= 10; ++i) {
      input.push_back(i);
      want.push_back(i * i);
    }
    CHECK(testkit::sorted(run_list(par, input)) == want);
  }
}

TEST_CASE("timestamping boxes values and stamps each hop") {
  dag body = close(single(ops::map(registry_fn("inc"))) >> single(ops::map(registry_fn("double"))),
                   {"src", "snk"});
  dag stamped = run_compile(body, timestamp_meta());
  CHECK(validate(stamped).empty());
  // one stamping map in front of each of the two operators
  CHECK(testkit::operator_count(stamped) == 4);

  deploy_options opt;
  opt.mode = run_mode::deterministic;
  auto h = deploy_fast(stamped,
                       {bind("src", sources::list({value(1), value(2)})), bind("snk", sinks::collect())},
                       opt);
  const auto& delivered = h.wait_value().as_tuple();
  REQUIRE(delivered.size() == 2);
  std::vector<std::int64_t> payloads;
  for (const auto& v : delivered) {
    REQUIRE(v.is_box());
    const auto& b = v.as_box();
    CHECK(b.stamps.size() == 2);  // depth-2 pipeline: two stamping hops
    for (std::size_t i = 1; i < b.stamps.size(); ++i)
      CHECK(b.stamps[i - 1].time <= b.stamps[i].time);
    payloads.push_back(b.payload.as_int());
  }
  CHECK(payloads == std::vector<std::int64_t>{4, 6});  // double(inc(x))

  // empty stream delivers no boxes
  auto h2 = deploy_fast(stamped, {bind("src", sources::list({})), bind("snk", sinks::collect())}, opt);
  CHECK(h2.wait_value().as_tuple().empty());
}

TEST_CASE("timestamped scan pipelines keep their plain outputs") {
  dag body = close(single(ops::scan(registry_fn("sum"), value(0))) >>
                       single(ops::filter(registry_fn("even"))),
                   {"src", "snk"});
  dag stamped = run_compile(body, timestamp_meta());
  deploy_options opt;
  opt.mode = run_mode::deterministic;
  auto h = deploy_fast(stamped,
                       {bind("src", sources::list({value(1), value(3), value(2), value(5)})),
                        bind("snk", sinks::collect())},
                       opt);
  std::vector<std::int64_t> payloads;
  for (const auto& v : h.wait_value().as_tuple()) payloads.push_back(v.as_box().payload.as_int());
  // plain run: scan sums 1,4,6,11 -> evens 4,6
  CHECK(payloads == std::vector<std::int64_t>{4, 6});
}

TEST_CASE("compiling without a structural behavior builds no meta items") {
  CHECK(!structural_by_name("none").has_value());
  counters::reset();
  dag d = listing_pipeline();
  CHECK(validate(d).empty());  // the no-behavior path: build and check only
  CHECK(counters::meta_items_allocated().load() == 0);

  // streaming the same dag through any meta does reify
  (void)run_compile(d, proceed_meta());
  CHECK(counters::meta_items_allocated().load() > 0);
}
