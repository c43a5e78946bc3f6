#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "rill/behaviors.hpp"
#include "rill/runtime.hpp"
#include "support.hpp"

using namespace rill;

namespace {

dag squares_of_evens() {
  return close(single(ops::filter(registry_fn("even"))) >> single(ops::map(registry_fn("square"))),
               {"input", "output"});
}

std::vector<binding> range_collect(std::int64_t a, std::int64_t b, const char* in = "input",
                                   const char* out = "output") {
  return {bind(in, sources::range(a, b)), bind(out, sinks::collect())};
}

std::vector<std::int64_t> expected_even_squares() {
  std::vector<std::int64_t> want;  // brute force: squares of evens up to 100
  for (std::int64_t i = 1; i <= 100; ++i)
    if (i % 2 == 0) want.push_back(i * i);
  return want;
}

dag branch_dag() {
  // dup -> (inc ||| double) -> merge
  dag body = single(ops::dup(2)) >>
             (single(ops::map(registry_fn("inc"))) | single(ops::map(registry_fn("double")))) >>
             single(ops::merge(2));
  return close(body, {"input", "output"});
}

}  // namespace

TEST_CASE("squares of evens, fast and identity, both schedulers") {
  auto want = expected_even_squares();
  for (run_mode mode : {run_mode::deterministic, run_mode::concurrent}) {
    deploy_options opt;
    opt.mode = mode;
    auto fast = deploy_fast(squares_of_evens(), range_collect(1, 100), opt);
    CHECK(testkit::ints_of(fast.wait_value()) == want);
    auto meta = deploy(squares_of_evens(), range_collect(1, 100), identity_behavior(), opt);
    CHECK(testkit::ints_of(meta.wait_value()) == want);
  }
}

TEST_CASE("deploy rejects bad bindings and open dags") {
  CHECK_THROWS_AS(deploy_fast(squares_of_evens(), {bind("input", sources::range(1, 3))}),
                  deploy_error);
  CHECK_THROWS_AS(deploy_fast(squares_of_evens(),
                              {bind("input", sources::range(1, 3)), bind("output", sinks::collect()),
                               bind("extra", sinks::collect())}),
                  deploy_error);
  CHECK_THROWS_AS(deploy_fast(squares_of_evens(),
                              {bind("input", sources::range(1, 3)),
                               bind("output", sources::range(1, 3))}),
                  deploy_error);  // direction mismatch
  dag open = single(ops::map(registry_fn("inc")));
  CHECK_THROWS_AS(deploy_fast(open, {}), deploy_error);
}

TEST_CASE("per-edge order is preserved on linear pipelines") {
  dag line = close(single(ops::map(registry_fn("inc"))), {"input", "output"});
  deploy_options opt;
  opt.mode = run_mode::concurrent;
  auto got = testkit::ints_of(deploy_fast(line, range_collect(1, 500), opt).wait_value());
  std::vector<std::int64_t> want;
  for (std::int64_t i = 2; i <= 501; ++i) want.push_back(i);
  CHECK(got == want);
}

TEST_CASE("empty streams deliver the empty list") {
  deploy_options opt;
  opt.mode = run_mode::deterministic;
  auto h = deploy_fast(squares_of_evens(), range_collect(2, 1), opt);
  CHECK(h.wait_value().as_tuple().empty());
  auto m = deploy(squares_of_evens(), range_collect(2, 1), identity_behavior(), opt);
  CHECK(m.wait_value().as_tuple().empty());
}

TEST_CASE("handler failures reach the sink as an error") {
  fn_ref boom = make_fn("boom", [](std::span<const value> args) -> value {
    if (args[0].as_int() == 3) throw std::runtime_error("exploded on 3");
    return args[0];
  });
  dag line = close(single(ops::map(boom)), {"input", "output"});
  for (bool meta : {false, true}) {
    deploy_options opt;
    opt.mode = run_mode::deterministic;
    auto h = meta ? deploy(line, range_collect(1, 5), identity_behavior(), opt)
                  : deploy_fast(line, range_collect(1, 5), opt);
    const auto& o = h.wait().at("output");
    CHECK(!o.ok);
    CHECK(o.error == "exploded on 3");
  }
}

TEST_CASE("for_each sinks observe every value in order then finish") {
  std::vector<std::int64_t> seen;
  dag line = close(single(ops::map(registry_fn("double"))), {"input", "output"});
  deploy_options opt;
  opt.mode = run_mode::deterministic;
  auto h = deploy_fast(line,
                       {bind("input", sources::range(1, 4)),
                        bind("output", sinks::for_each([&](const value& v) {
                          seen.push_back(v.as_int());
                        }))},
                       opt);
  const auto& o = h.wait().at("output");
  CHECK(o.ok);
  CHECK(o.result.is_unit());
  CHECK(seen == std::vector<std::int64_t>{2, 4, 6, 8});
}

TEST_CASE("merge waits for every input, dup completes every branch") {
  deploy_options opt;
  opt.mode = run_mode::deterministic;
  auto h = deploy_fast(branch_dag(), {bind("input", sources::list({value(1), value(2)})),
                                      bind("output", sinks::collect())},
                       opt);
  auto got = testkit::sorted(testkit::ints_of(h.wait_value()));
  CHECK(got == std::vector<std::int64_t>{2, 2, 3, 4});  // inc: 2,3  double: 2,4
}

TEST_CASE("branching topologies agree between fast and identity up to multiset") {
  deploy_options opt;
  opt.mode = run_mode::concurrent;
  auto fast = testkit::sorted(
      testkit::ints_of(deploy_fast(branch_dag(), range_collect(1, 50), opt).wait_value()));
  auto meta = testkit::sorted(testkit::ints_of(
      deploy(branch_dag(), range_collect(1, 50), identity_behavior(), opt).wait_value()));
  CHECK(fast == meta);
  CHECK(fast.size() == 100);
}

TEST_CASE("zip completes as soon as one side completes") {
  dag z = single(ops::zip());
  dag closed = close(z, {"left", "right", "out"});
  deploy_options opt;
  opt.mode = run_mode::deterministic;
  auto h = deploy_fast(closed,
                       {bind("left", sources::range(1, 2)), bind("right", sources::range(1, 5)),
                        bind("out", sinks::collect())},
                       opt);
  const auto& pairs = h.wait_value().as_tuple();
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0] == value::tuple({value(1), value(1)}));
  CHECK(pairs[1] == value::tuple({value(2), value(2)}));
}

TEST_CASE("deterministic runs with equal seeds produce equal traces") {
  auto run = [&](std::uint64_t seed) {
    deploy_options opt;
    opt.mode = run_mode::deterministic;
    opt.seed = seed;
    opt.record_trace = true;
    auto h = deploy_fast(squares_of_evens(), range_collect(1, 10), opt);
    h.wait();
    return format_trace(h.trace(), h.units());
  };
  CHECK(run(42) == run(42));
  CHECK(run(0) == run(0));
  // a different schedule still computes the same list
  deploy_options opt;
  opt.mode = run_mode::deterministic;
  opt.seed = 99;
  auto h = deploy_fast(squares_of_evens(), range_collect(1, 10), opt);
  CHECK(testkit::ints_of(h.wait_value()) == std::vector<std::int64_t>{4, 16, 36, 64, 100});
}

TEST_CASE("no unit sends base messages after going terminal") {
  deploy_options opt;
  opt.mode = run_mode::deterministic;
  opt.record_trace = true;
  auto h = deploy_fast(branch_dag(), range_collect(1, 20), opt);
  h.wait();
  // per sender: once complete/err is sent, only complete/err may follow
  std::map<unit_ref, bool> terminal_sent;
  for (const auto& t : h.trace()) {
    if (t.from == no_unit) continue;
    bool is_terminal = t.tag == event_tag::complete || t.tag == event_tag::err;
    if (terminal_sent[t.from]) CHECK(is_terminal);
    if (is_terminal) terminal_sent[t.from] = true;
  }
}

TEST_CASE("push sources tick themselves after init and after each datum") {
  dag d;
  node_id s = d.add_socket_node({"input", socket_dir::source_socket});
  node_id k = d.add_socket_node({"output", socket_dir::sink_socket});
  d.add_edge({s, 0, port_dir::output}, {k, 0, port_dir::input});
  deploy_options opt;
  opt.mode = run_mode::deterministic;
  opt.record_trace = true;
  auto h = deploy_fast(d, range_collect(1, 2), opt);
  CHECK(testkit::ints_of(h.wait_value()) == std::vector<std::int64_t>{1, 2});
  std::size_t ticks = 0, nexts = 0, completes = 0;
  for (const auto& e : h.trace()) {
    ticks += e.tag == event_tag::tick;
    nexts += e.tag == event_tag::next;
    completes += e.tag == event_tag::complete;
  }
  CHECK(ticks == 3);  // init tick, one after each of the two values
  CHECK(nexts == 2);
  CHECK(completes == 1);
}

TEST_CASE("message budget aborts runaway deployments") {
  deploy_options opt;
  opt.mode = run_mode::deterministic;
  opt.max_messages = 50;
  auto h = deploy_fast(squares_of_evens(), range_collect(1, 1000000), opt);
  const auto& o = h.wait().at("output");
  CHECK(!o.ok);
  CHECK(o.error.find("message budget exceeded") != std::string::npos);
  CHECK(h.aborted());
}

TEST_CASE("source to sink with no operators at all") {
  dag d;
  node_id s = d.add_socket_node({"input", socket_dir::source_socket});
  node_id k = d.add_socket_node({"output", socket_dir::sink_socket});
  d.add_edge({s, 0, port_dir::output}, {k, 0, port_dir::input});
  for (run_mode mode : {run_mode::deterministic, run_mode::concurrent}) {
    deploy_options opt;
    opt.mode = mode;
    auto got = testkit::ints_of(deploy_fast(d, range_collect(1, 5), opt).wait_value());
    CHECK(got == std::vector<std::int64_t>{1, 2, 3, 4, 5});
  }
}

TEST_CASE("fast path and identity agree on random pipelines") {
  std::mt19937_64 rng(41);
  behavior ident = identity_behavior();
  for (int iter = 0; iter < 25; ++iter) {
    auto p = testkit::make_random_pipeline(rng, 6, 120);
    auto dep = testkit::make_deployable(p);
    deploy_options opt;
    opt.mode = run_mode::deterministic;
    auto fast = testkit::ints_of(deploy_fast(dep.graph, dep.bindings, opt).wait_value());
    auto meta = testkit::ints_of(deploy(dep.graph, dep.bindings, ident, opt).wait_value());
    CHECK(fast == meta);
    CHECK(fast == testkit::oracle_run(p.stages, p.input));
  }
}
