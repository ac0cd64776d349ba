#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fingrav/phase.hpp"
#include "fingrav/rng.hpp"
#include "fingrav/sim.hpp"
#include "fingrav/sync.hpp"

using namespace fingrav;
using phase::PhasePlan;
using stitch::StitchedProfile;

namespace {

StitchedProfile flat_profile(double watts, int n, Nanos exec_time) {
  StitchedProfile p;
  p.exec_time_anchor = exec_time;
  for (int i = 0; i < n; ++i)
    p.points.push_back({exec_time * i / n, watts, "run-0"});
  return p;
}

RunRecord run_with_execs(int n) {
  RunRecord run;
  run.run_id = "run-x";
  Nanos t = 0;
  for (int i = 0; i < n; ++i) {
    run.executions.push_back({i, "k", t, t + 100});
    t += 100;
  }
  return run;
}

}  // namespace

TEST_CASE("ssp execution count formula") {
  CHECK(phase::compute_ssp_executions(1'000'000, 250'000, 4) == 4);
  CHECK(phase::compute_ssp_executions(1'000'000, 5'000'000, 4) == 4);
  CHECK(phase::compute_ssp_executions(1'000'000, 62'500, 4) == 16);
  CHECK(phase::compute_ssp_executions(1'000'000, 1'000'000, 4) == 4);  // boundary t = W
  CHECK_THROWS_AS(phase::compute_ssp_executions(1'000'000, 0, 4), std::invalid_argument);

  SUBCASE("non-increasing in exec time, floored at the SSE count") {
    auto stream = rng::Stream::derive(5, "ssp-prop");
    for (int i = 0; i < 200; ++i) {
      Nanos w = stream.uniform_int(10'000, 5'000'000);
      Nanos t = stream.uniform_int(1'000, 8'000'000);
      int got = phase::compute_ssp_executions(w, t, 4);
      CHECK(got == std::max<int>(4, static_cast<int>((w + t - 1) / t)));
      CHECK(phase::compute_ssp_executions(w, t + 1'000, 4) <= got);
      if (t >= w) CHECK(got == 4);
    }
  }
}

TEST_CASE("warm-up detection") {
  CHECK(phase::detect_warmup_count({150'000, 120'000, 105'000, 100'000, 100'000, 101'000}) == 3);
  CHECK(phase::detect_warmup_count({100, 100, 100, 100}) == 0);
  CHECK(phase::detect_warmup_count({200, 150, 110, 100, 100}) == 3);
  CHECK(phase::detect_warmup_count({120, 100}) == 1);
  CHECK_THROWS_AS(phase::detect_warmup_count({}), std::invalid_argument);
  CHECK_THROWS_AS(phase::detect_warmup_count({100}), std::invalid_argument);
}

TEST_CASE("binary search for the SSP execution count") {
  SUBCASE("constant probe returns the lower bound") {
    CHECK(phase::binary_search_ssp([](int) { return 400.0; }, 4, 64) == 4);
  }
  SUBCASE("matches a linear scan of the predicate on a throttle-shaped probe") {
    auto probe = [](int n) {
      // rises, overshoots, then settles from n = 9 on
      if (n < 6) return 300.0 + 40.0 * n;
      if (n < 9) return 560.0 - 30.0 * (n - 6);
      return 420.0;
    };
    auto pred = [&](int n) {
      return std::abs(probe(n + 1) - probe(n)) <= 0.02 * std::abs(probe(n + 1));
    };
    int scan = 4;
    while (!pred(scan)) ++scan;
    CHECK(phase::binary_search_ssp(probe, 4, 64) == scan);
  }
  SUBCASE("simulator-backed throttle probe matches an exhaustive scan") {
    // short kernel that over-draws power during warm-up; probe(N) reads the
    // final trailing-window sample of an N-execution run
    sim::KernelSpec k;
    k.kernel_id = "hot";
    k.nominal_exec_time = 200'000;
    k.curve = {sim::PowerCurve::constant(320), sim::PowerCurve::constant(50),
               sim::PowerCurve::constant(40), sim::PowerCurve::constant(10)};
    k.warmup.mode = sim::WarmupModel::Mode::throttle;
    k.warmup.slowdown = {1.3, 1.15, 1.05};
    k.warmup.power_scale = {1.35, 1.15, 1.05};

    sim::LoggerSpec logger;
    logger.idle_power = {10, 4, 3, 2};

    auto probe = [&](int n) {
      sim::RunConfig rc;
      rc.executions = n;
      rc.kernel_sequence = {{k, 1}};
      rc.pre_delay_range = {2'000'000, 2'000'000};
      auto first = sim::simulate_run(rc, logger, {}, 600, "probe");
      Nanos block =
          first.first.executions.back().end_cpu - first.first.executions.front().start_cpu;
      Nanos boundary = ((2'000'000 + block + 999'999) / 1'000'000) * 1'000'000;
      rc.pre_delay_range = {boundary - block, boundary - block};
      auto [run, truth] = sim::simulate_run(rc, logger, {}, 600, "probe");
      auto sm = sync::sync_from_run(run);
      double v = run.log.front().power.total;
      for (const auto& entry : run.log) {
        if (sync::gpu_to_cpu(sm, entry.gpu_ts) <= run.executions.back().end_cpu)
          v = entry.power.total;
      }
      return v;
    };

    auto pred = [&](int n) {
      return std::abs(probe(n + 1) - probe(n)) <= 0.02 * std::abs(probe(n + 1));
    };
    int scan = 4;
    while (scan < 64 && !pred(scan)) ++scan;
    CHECK(phase::binary_search_ssp(probe, 4, 64) == scan);
    CHECK(scan >= 4);
  }

  SUBCASE("unstable power is an error") {
    int flip = 0;
    auto probe = [&flip](int) { return (flip++ % 2) ? 100.0 : 500.0; };
    CHECK_THROWS_WITH_AS(phase::binary_search_ssp(probe, 4, 16), doctest::Contains("unstable"),
                         std::runtime_error);
  }
  SUBCASE("bad range") {
    CHECK_THROWS_AS(phase::binary_search_ssp([](int) { return 1.0; }, 4, 4),
                    std::invalid_argument);
  }
}

TEST_CASE("phase classification is structural") {
  SUBCASE("long kernel: SSE and SSP are the same execution") {
    PhasePlan plan{3, 4, 4};
    PhaseBoundaries b = phase::classify_phases(plan, run_with_execs(4));
    CHECK(b.warmup_count == 3);
    CHECK(b.sse_index == 3);
    CHECK(b.ssp_index == 3);
  }
  SUBCASE("short kernel: SSP at the last of sixteen executions") {
    PhasePlan plan{3, 4, 16};
    PhaseBoundaries b = phase::classify_phases(plan, run_with_execs(16));
    CHECK(b.sse_index == 3);
    CHECK(b.ssp_index == 15);
  }
  SUBCASE("too few executions") {
    PhasePlan plan{3, 4, 4};
    CHECK_THROWS_AS(phase::classify_phases(plan, run_with_execs(2)), std::invalid_argument);
  }
}

TEST_CASE("sse/ssp error") {
  SUBCASE("identical profiles have zero error") {
    auto p = flat_profile(400, 10, 100'000);
    CHECK(phase::sse_ssp_error(p, p) == 0.0);
  }
  SUBCASE("ratio of TOI-integrated means") {
    auto sse = flat_profile(80, 10, 50'000);
    auto ssp = flat_profile(400, 10, 50'000);
    CHECK(phase::sse_ssp_error(sse, ssp) == doctest::Approx(80.0));
  }
  SUBCASE("component mismatch") {
    auto a = flat_profile(100, 5, 1000);
    auto b = flat_profile(100, 5, 1000);
    b.component = Component::xcd;
    CHECK_THROWS_AS(phase::sse_ssp_error(a, b), std::invalid_argument);
  }
  SUBCASE("empty profile") {
    StitchedProfile empty;
    CHECK_THROWS_AS(phase::sse_ssp_error(empty, flat_profile(1, 3, 10)), std::invalid_argument);
  }
}

TEST_CASE("analytic SSE/SSP spread shrinks as executions lengthen") {
  // Constant-power kernel repeated back to back from idle: a trailing window
  // ending inside execution k covers min(k*t + toi, W) of kernel time. The
  // SSE(4th exec)-to-SSP spread therefore decays as t/W grows.
  const double w = 1'000'000;
  const double power = 410;
  const double idle = 10;
  auto spread = [&](double t) {
    int n = std::max(4, static_cast<int>(std::ceil(w / t)));
    auto mean_at = [&](int k) {
      double covered = std::min(k * t + 0.5 * t, w);
      return (covered * power + (w - covered) * idle) / w;
    };
    double sse = mean_at(3);
    double ssp = mean_at(n - 1);
    return 100.0 * std::abs(sse - ssp) / ssp;
  };
  double prev = 1e9;
  for (double frac : {0.05, 0.1, 0.2, 0.3, 0.5, 1.0}) {
    double s = spread(frac * w);
    CHECK(s <= prev);
    prev = s;
  }
  CHECK(spread(0.05 * w) > 50.0);
  CHECK(spread(1.0 * w) == 0.0);
}
