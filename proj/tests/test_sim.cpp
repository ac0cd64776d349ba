#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fingrav/rng.hpp"
#include "fingrav/sim.hpp"

using namespace fingrav;
using sim::KernelSpec;
using sim::LoggerSpec;
using sim::PowerCurve;
using sim::RunConfig;

namespace {

KernelSpec constant_kernel(const std::string& id, Nanos exec_time, double xcd, double iod,
                           double hbm, double other) {
  KernelSpec k;
  k.kernel_id = id;
  k.nominal_exec_time = exec_time;
  k.curve = {PowerCurve::constant(xcd), PowerCurve::constant(iod), PowerCurve::constant(hbm),
             PowerCurve::constant(other)};
  k.warmup.slowdown = {1.0, 1.0, 1.0};
  k.warmup.power_scale = {1.0, 1.0, 1.0};
  return k;
}

LoggerSpec logger_1ms(double idle_total) {
  LoggerSpec l;
  l.idle_power = {idle_total, idle_total * 0.4, idle_total * 0.3, idle_total * 0.2};
  return l;
}

double rel_err(double got, double want) {
  double denom = std::max(std::abs(want), 1e-12);
  return std::abs(got - want) / denom;
}

void check_close(const ComponentPower& got, const ComponentPower& want, double tol) {
  CHECK(rel_err(got.total, want.total) <= tol);
  CHECK(rel_err(got.xcd, want.xcd) <= tol);
  CHECK(rel_err(got.iod, want.iod) <= tol);
  CHECK(rel_err(got.hbm, want.hbm) <= tol);
}

}  // namespace

TEST_CASE("logged value is the convex mix of kernel and idle power") {
  // 600 W kernel covering 40% of the 1 ms window, 100 W idle for the rest.
  RunConfig rc;
  rc.executions = 1;
  rc.kernel_sequence = {{constant_kernel("k", 400'000, 400, 100, 50, 50), 1}};
  rc.pre_delay_range = {600'000, 600'000};
  auto [run, truth] = sim::simulate_run(rc, logger_1ms(100), {}, 7);

  REQUIRE(!run.log.empty());
  CHECK(run.log.front().power.total == doctest::Approx(0.4 * 600 + 0.6 * 100).epsilon(1e-12));
}

TEST_CASE("piecewise curve matches the 1 ns Riemann oracle") {
  KernelSpec k;
  k.kernel_id = "pw";
  k.nominal_exec_time = 750'000;
  k.curve = {PowerCurve::piecewise({{0.0, 400}, {0.5, 400}, {0.5, 700}, {1.0, 700}}),
             PowerCurve::constant(0), PowerCurve::constant(0), PowerCurve::constant(0)};
  k.warmup.slowdown = {1.0, 1.0, 1.0};
  k.warmup.power_scale = {1.0, 1.0, 1.0};

  RunConfig rc;
  rc.executions = 2;
  rc.kernel_sequence = {{k, 1}};
  rc.pre_delay_range = {137'213, 137'213};  // arbitrary alignment
  auto [run, truth] = sim::simulate_run(rc, logger_1ms(90), {}, 21);

  for (size_t i = 0; i < run.log.size(); ++i) {
    Nanos ts = static_cast<Nanos>(i + 1) * truth.sample_interval;
    ComponentPower want = sim::oracle_logged_average(truth, ts, truth.averaging_window);
    check_close(run.log[i].power, want, 1e-9);
  }

  // the step between the two levels lands mid-execution, not smeared out
  const auto& e0 = truth.executions.front();
  CHECK(truth.window_average(e0.end_gpu, e0.end_gpu - e0.start_gpu).xcd ==
        doctest::Approx(550.0).epsilon(1e-12));
  CHECK(truth.instantaneous(static_cast<double>(e0.start_gpu) + 100.0).xcd ==
        doctest::Approx(400.0));
  CHECK(truth.instantaneous(static_cast<double>(e0.end_gpu) - 100.0).xcd ==
        doctest::Approx(700.0));
}

TEST_CASE("oracle basics") {
  RunConfig rc;
  rc.executions = 2;
  rc.kernel_sequence = {{constant_kernel("k", 300'000, 500, 100, 80, 20), 1}};
  rc.pre_delay_range = {2'000'000, 2'000'000};
  rc.inter_exec_gap_range = {150'000, 150'000};
  LoggerSpec logger = logger_1ms(100);
  logger.sample_interval = 50'000;
  logger.averaging_window = 50'000;
  auto [run, truth] = sim::simulate_run(rc, logger, {}, 3);

  SUBCASE("window entirely idle") {
    ComponentPower p = sim::oracle_logged_average(truth, 1'000'000, 50'000);
    CHECK(p.total == doctest::Approx(100).epsilon(1e-12));
  }
  SUBCASE("window inside a constant-power execution") {
    ComponentPower p = sim::oracle_logged_average(truth, 2'100'000, 50'000);
    CHECK(p.total == doctest::Approx(700).epsilon(1e-12));
  }
  SUBCASE("window straddling two executions and the gap between them") {
    // executions: [2.0, 2.3) ms and [2.45, 2.75) ms; window (2.25, 2.55] ms
    ComponentPower got = sim::oracle_logged_average(truth, 2'550'000, 300'000);
    double want = (50'000.0 * 700 + 150'000.0 * 100 + 100'000.0 * 700) / 300'000.0;
    CHECK(got.total == doctest::Approx(want).epsilon(1e-9));
  }
  SUBCASE("query past the horizon fails") {
    CHECK_THROWS_AS(sim::oracle_logged_average(truth, truth.horizon_end_gpu + 1, 1000),
                    std::out_of_range);
  }
}

TEST_CASE("randomized curves and alignments agree with the oracle") {
  auto master = rng::Stream::derive(0xF00D, "sim-oracle-prop");
  int cases = 0;
  for (int i = 0; i < 60; ++i) {
    KernelSpec k;
    k.kernel_id = "rk";
    k.nominal_exec_time = master.uniform_int(20'000, 120'000);
    auto random_curve = [&]() {
      switch (master.uniform_int(0, 2)) {
        case 0: return PowerCurve::constant(master.uniform01() * 500);
        case 1: return PowerCurve::ramp(master.uniform01() * 400, master.uniform01() * 600);
        default: {
          std::vector<std::pair<double, double>> knots;
          int n = static_cast<int>(master.uniform_int(2, 6));
          double f = 0.0;
          for (int j = 0; j < n; ++j) {
            knots.emplace_back(f, master.uniform01() * 700);
            f = std::min(1.0, f + master.uniform01() * (1.0 / n));
          }
          return PowerCurve::piecewise(knots);
        }
      }
    };
    k.curve = {random_curve(), random_curve(), random_curve(), random_curve()};
    k.warmup.slowdown = {1.2, 1.1, 1.0};
    k.warmup.power_scale = {0.9, 0.95, 1.0};
    k.exec_time_jitter_rel = 0.02;

    LoggerSpec logger;
    logger.sample_interval = master.uniform_int(5'000, 40'000);
    logger.averaging_window = logger.sample_interval;
    logger.idle_power = {30, 10, 10, 5};

    RunConfig rc;
    rc.executions = static_cast<int>(master.uniform_int(2, 5));
    rc.kernel_sequence = {{k, 1}};
    rc.pre_delay_range = {0, 3 * logger.sample_interval};
    rc.inter_exec_gap_range = {0, 2 * logger.sample_interval};

    auto [run, truth] = sim::simulate_run(rc, logger, {}, 5000 + static_cast<std::uint64_t>(i));
    for (size_t pick = 0; pick < 2 && pick < run.log.size(); ++pick) {
      size_t idx = static_cast<size_t>(
          master.uniform_int(0, static_cast<std::int64_t>(run.log.size()) - 1));
      Nanos ts = static_cast<Nanos>(idx + 1) * truth.sample_interval;
      check_close(run.log[idx].power,
                  sim::oracle_logged_average(truth, ts, truth.averaging_window), 1e-9);
      ++cases;
    }
  }
  CHECK(cases >= 100);
}

TEST_CASE("execution time draws") {
  KernelSpec k = constant_kernel("k", 100'000, 100, 0, 0, 0);

  SUBCASE("no jitter, no outliers: exactly nominal") {
    CHECK(sim::draw_exec_time(k, 5, 42) == 100'000);
  }
  SUBCASE("warm-up slowdown multiplies the draw") {
    k.warmup.slowdown = {1.5, 1.2, 1.05};
    CHECK(sim::draw_exec_time(k, 0, 42) == 150'000);
    CHECK(sim::draw_exec_time(k, 1, 42) == 120'000);
    CHECK(sim::draw_exec_time(k, 3, 42) == 100'000);
  }
  SUBCASE("certain outliers scale the nominal time") {
    k.outlier_prob = 0.999999999;
    k.outlier_scale = 3.0;
    CHECK(sim::draw_exec_time(k, 5, 42) == 300'000);
  }
  SUBCASE("draws never collapse below 1 ns") {
    k.nominal_exec_time = 2;
    k.exec_time_jitter_rel = 5.0;
    for (int i = 0; i < 200; ++i) CHECK(sim::draw_exec_time(k, 4, i) >= 1);
  }
}

TEST_CASE("invalid inputs are rejected") {
  KernelSpec k = constant_kernel("k", 100'000, 100, 0, 0, 0);
  RunConfig rc;
  rc.kernel_sequence = {{k, 1}};

  SUBCASE("zero executions") {
    rc.executions = 0;
    CHECK_THROWS_AS(sim::simulate_run(rc, logger_1ms(10), {}, 1), std::invalid_argument);
  }
  SUBCASE("zero-length kernel") {
    rc.executions = 1;
    rc.kernel_sequence[0].first.nominal_exec_time = 0;
    CHECK_THROWS_AS(sim::simulate_run(rc, logger_1ms(10), {}, 1), std::invalid_argument);
  }
  SUBCASE("degenerate logger") {
    rc.executions = 1;
    LoggerSpec bad = logger_1ms(10);
    bad.sample_interval = 0;
    CHECK_THROWS_AS(sim::simulate_run(rc, bad, {}, 1), std::invalid_argument);
    bad = logger_1ms(10);
    bad.averaging_window = 0;
    CHECK_THROWS_AS(sim::simulate_run(rc, bad, {}, 1), std::invalid_argument);
  }
}

TEST_CASE("same seed gives bit-identical runs") {
  KernelSpec k = constant_kernel("k", 80'000, 300, 60, 40, 10);
  k.exec_time_jitter_rel = 0.01;
  RunConfig rc;
  rc.executions = 6;
  rc.kernel_sequence = {{k, 1}};
  rc.pre_delay_range = {0, 999'999};
  sim::ClockSpec clock;
  clock.cpu_gpu_offset = 123'456'789;
  clock.read_delay_mean = 900;
  clock.read_delay_jitter = 80;

  auto a = sim::simulate_run(rc, logger_1ms(10), clock, 77, "run-a");
  auto b = sim::simulate_run(rc, logger_1ms(10), clock, 77, "run-a");
  CHECK(a.first == b.first);

  auto c = sim::simulate_run(rc, logger_1ms(10), clock, 78, "run-a");
  CHECK(a.first != c.first);
}

TEST_CASE("log covers the run with exact sample spacing") {
  KernelSpec k = constant_kernel("k", 130'000, 300, 60, 40, 10);
  k.exec_time_jitter_rel = 0.05;
  RunConfig rc;
  rc.executions = 9;
  rc.kernel_sequence = {{k, 1}};
  rc.pre_delay_range = {0, 2'000'000};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto [run, truth] = sim::simulate_run(rc, logger_1ms(10), {}, seed);
    REQUIRE(!run.log.empty());
    Nanos last_ts = (run.log.back().gpu_ts.ticks - truth.counter_base_ticks) * truth.tick_period;
    CHECK(last_ts >= truth.executions.back().end_gpu);
    const Nanos tick_spacing = truth.sample_interval / truth.tick_period;
    for (size_t i = 1; i < run.log.size(); ++i)
      CHECK(run.log[i].gpu_ts.ticks - run.log[i - 1].gpu_ts.ticks == tick_spacing);
  }
}

TEST_CASE("long kernels log pure kernel power past the first window") {
  // Equal per-execution power and exec_time >= window: once the window has
  // left the pre-delay idle, every sample equals the kernel's constant power.
  KernelSpec k = constant_kernel("k", 1'300'000, 300, 60, 40, 10);
  RunConfig rc;
  rc.executions = 4;
  rc.kernel_sequence = {{k, 1}};
  rc.pre_delay_range = {250'000, 250'000};
  auto [run, truth] = sim::simulate_run(rc, logger_1ms(10), {}, 9);

  const Nanos start = truth.executions.front().start_gpu;
  const Nanos end = truth.executions.back().end_gpu;
  int checked = 0;
  for (const auto& entry : run.log) {
    Nanos ts = (entry.gpu_ts.ticks - truth.counter_base_ticks) * truth.tick_period;
    if (ts - truth.averaging_window >= start && ts <= end) {
      CHECK(entry.power.total == doctest::Approx(410.0).epsilon(1e-12));
      ++checked;
    }
  }
  CHECK(checked >= 3);
}

TEST_CASE("read delay samples follow the configured distribution") {
  sim::ClockSpec clock;
  clock.read_delay_mean = 1'000;
  clock.read_delay_jitter = 120;
  auto samples = sim::sample_read_delays(clock, 1000, 99);
  REQUIRE(samples.size() == 1000);
  for (Nanos s : samples) {
    CHECK(s >= 1'000 - 120);
    CHECK(s <= 1'000 + 120);
  }
}
