#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "rill/bench.hpp"

using namespace rill;

TEST_CASE("sweep syntax") {
  CHECK(parse_sweep("250") == std::vector<std::int64_t>{250});
  CHECK(parse_sweep("0..10000") ==
        std::vector<std::int64_t>{0, 2000, 4000, 6000, 8000, 10000});
  CHECK(parse_sweep("0..10:5") == std::vector<std::int64_t>{0, 5, 10});
  CHECK(parse_sweep("3..7:10") == std::vector<std::int64_t>{3, 7});  // step past the end
  CHECK_THROWS(parse_sweep("9..3"));
}

TEST_CASE("a dagsize sweep including the bare source-sink stream completes") {
  bench_config cfg;
  cfg.mode = "dagsize";
  cfg.ops_points = {0, 2, 5};
  cfg.values_points = {50};
  cfg.reps = 1;
  auto rows = run_bench(cfg);
  REQUIRE(rows.size() == 6);  // 3 points x 2 variants
  for (const auto& r : rows) {
    CHECK(r.values == 50);
    CHECK(r.elapsed_ms >= 0.0);
    CHECK((r.variant == "fast" || r.variant == "meta"));
    CHECK(r.behavior == (r.variant == "meta" ? "identity" : "none"));
  }
}

TEST_CASE("a zero-value load cell completes for both variants") {
  bench_config cfg;
  cfg.mode = "load";
  cfg.ops_points = {3};
  cfg.values_points = {0};
  cfg.reps = 1;
  auto rows = run_bench(cfg);
  REQUIRE(rows.size() == 2);
}

TEST_CASE("csv header and shape are pinned") {
  CHECK(std::string(bench_csv_header) == "mode,ops,values,variant,behavior,rep,elapsed_ms");
  bench_row r{"load", 250, 1000, "fast", "none", 5, 12.3456};
  std::string csv = bench_csv({r});
  CHECK(csv == "mode,ops,values,variant,behavior,rep,elapsed_ms\nload,250,1000,fast,none,5,12.346\n");
}

TEST_CASE("fit_line recovers exact lines and rejects junk") {
  auto f = fit_line({0, 1, 2, 3}, {5, 7, 9, 11});
  CHECK(f.slope == doctest::Approx(2.0));
  CHECK(f.intercept == doctest::Approx(5.0));
  CHECK(f.r2 == doctest::Approx(1.0));
  CHECK_THROWS(fit_line({1}, {2}));
  auto noisy = fit_line({0, 1, 2, 3}, {0, 3, 1, 4});
  CHECK(noisy.r2 < 1.0);
}
