#include "fingrav/sim.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "fingrav/rng.hpp"
#include "fingrav/sync.hpp"

namespace fingrav::sim {

namespace {

constexpr int kCalibrationSamples = 4001;

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

Nanos clamp_nonneg(Nanos v) { return v < 0 ? 0 : v; }

Nanos draw_read_delay(const ClockSpec& clock, rng::Stream& s) {
  double z = s.normal();
  z = std::clamp(z, -1.0, 1.0);  // bounded latency tails
  Nanos d = clock.read_delay_mean +
            static_cast<Nanos>(std::llround(z * static_cast<double>(clock.read_delay_jitter)));
  return clamp_nonneg(d);
}

}  // namespace

PowerCurve PowerCurve::constant(double watts) {
  PowerCurve c;
  c.shape = CurveShape::constant;
  c.level = watts;
  return c;
}

PowerCurve PowerCurve::ramp(double from_watts, double to_watts) {
  PowerCurve c;
  c.shape = CurveShape::linear_ramp;
  c.ramp_from = from_watts;
  c.ramp_to = to_watts;
  return c;
}

PowerCurve PowerCurve::piecewise(std::vector<std::pair<double, double>> knots) {
  PowerCurve c;
  c.shape = CurveShape::piecewise;
  c.knots = std::move(knots);
  return c;
}

ComponentPower to_component_power(const QuadPower& q) {
  return {q.xcd + q.iod + q.hbm + q.other, q.xcd, q.iod, q.hbm};
}

QuadPower to_quad(const ComponentPower& p) {
  return {p.xcd, p.iod, p.hbm, p.total - (p.xcd + p.iod + p.hbm)};
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

namespace {

void validate_curve(const PowerCurve& c, const std::string& ctx) {
  switch (c.shape) {
    case CurveShape::constant:
      if (c.level < 0) fail(ctx + ": constant watts must be >= 0");
      break;
    case CurveShape::linear_ramp:
      if (c.ramp_from < 0 || c.ramp_to < 0) fail(ctx + ": ramp watts must be >= 0");
      break;
    case CurveShape::piecewise: {
      if (c.knots.empty()) fail(ctx + ": piecewise curve needs at least one knot");
      double prev = -1.0;
      for (const auto& [f, w] : c.knots) {
        if (f < 0.0 || f > 1.0) fail(ctx + ": knot fraction outside [0,1]");
        if (f < prev) fail(ctx + ": knot fractions must be non-decreasing");
        if (w < 0) fail(ctx + ": knot watts must be >= 0");
        prev = f;
      }
      break;
    }
  }
}

}  // namespace

void validate(const KernelSpec& spec) {
  const std::string ctx = "kernel '" + spec.kernel_id + "'";
  if (spec.kernel_id.empty()) fail("kernel_id must be non-empty");
  if (spec.nominal_exec_time <= 0) fail(ctx + ": nominal_exec_time must be > 0");
  if (spec.exec_time_jitter_rel < 0) fail(ctx + ": exec_time_jitter_rel must be >= 0");
  if (spec.outlier_prob < 0 || spec.outlier_prob >= 1) fail(ctx + ": outlier_prob must be in [0,1)");
  if (spec.outlier_scale <= 1) fail(ctx + ": outlier_scale must be > 1");
  if (spec.warmup.warmup_execs < 0) fail(ctx + ": warmup_execs must be >= 0");
  auto n = static_cast<size_t>(spec.warmup.warmup_execs);
  if (spec.warmup.slowdown.size() != n) fail(ctx + ": slowdown list length must equal warmup_execs");
  if (spec.warmup.power_scale.size() != n)
    fail(ctx + ": power_scale list length must equal warmup_execs");
  for (double s : spec.warmup.slowdown)
    if (s < 1.0) fail(ctx + ": slowdown multipliers must be >= 1");
  for (double s : spec.warmup.power_scale)
    if (s <= 0.0) fail(ctx + ": power_scale multipliers must be > 0");
  validate_curve(spec.curve.xcd, ctx + " xcd curve");
  validate_curve(spec.curve.iod, ctx + " iod curve");
  validate_curve(spec.curve.hbm, ctx + " hbm curve");
  validate_curve(spec.curve.other, ctx + " other curve");
}

void validate(const LoggerSpec& spec) {
  if (spec.sample_interval <= 0) fail("logger: sample_interval must be > 0");
  if (spec.averaging_window <= 0) fail("logger: averaging_window must be > 0");
  require_valid_power(spec.idle_power, "logger idle_power");
}

void validate(const ClockSpec& spec) {
  if (spec.read_delay_mean < 0) fail("clock: read_delay_mean must be >= 0");
  if (spec.read_delay_jitter < 0) fail("clock: read_delay_jitter must be >= 0");
  if (spec.tick_period <= 0) fail("clock: tick_period must be > 0");
}

void validate(const RunConfig& cfg) {
  if (cfg.executions < 1) fail("run config: executions must be >= 1");
  if (cfg.kernel_sequence.empty()) fail("run config: kernel_sequence must be non-empty");
  for (const auto& [k, reps] : cfg.kernel_sequence) {
    validate(k);
    if (reps < 1) fail("run config: kernel repetitions must be >= 1");
  }
  auto check_range = [](std::pair<Nanos, Nanos> r, const char* what) {
    if (r.first < 0 || r.second < r.first) fail(std::string("run config: bad ") + what);
  };
  check_range(cfg.pre_delay_range, "pre_delay_range");
  check_range(cfg.inter_exec_gap_range, "inter_exec_gap_range");
}

// ---------------------------------------------------------------------------
// Curve resolution
// ---------------------------------------------------------------------------

namespace {

using CompPoly = std::vector<std::pair<Nanos, double>>;  // may repeat an offset at a step

// Component polyline as (integer offset, watts) pairs covering [0, duration].
// Knots sharing an offset encode a step; the first entry is the left limit,
// the last the right limit.
CompPoly resolve_component(const PowerCurve& c, Nanos duration, double power_scale) {
  CompPoly pts;
  switch (c.shape) {
    case CurveShape::constant:
      pts = {{0, c.level}, {duration, c.level}};
      break;
    case CurveShape::linear_ramp:
      pts = {{0, c.ramp_from}, {duration, c.ramp_to}};
      break;
    case CurveShape::piecewise: {
      for (const auto& [f, w] : c.knots) {
        Nanos off = std::clamp<Nanos>(std::llround(f * static_cast<double>(duration)), 0, duration);
        if (!pts.empty() && pts.back().first == off && pts.back().second == w) continue;
        pts.emplace_back(off, w);
      }
      // more than two values at one offset: only the outer pair matters
      CompPoly squeezed;
      for (const auto& p : pts) {
        size_t n = squeezed.size();
        if (n >= 2 && squeezed[n - 1].first == p.first && squeezed[n - 2].first == p.first)
          squeezed.back().second = p.second;
        else
          squeezed.push_back(p);
      }
      pts = std::move(squeezed);
      if (pts.front().first > 0) pts.insert(pts.begin(), {0, pts.front().second});
      if (pts.back().first < duration) pts.emplace_back(duration, pts.back().second);
      if (pts.size() == 1) pts.emplace_back(duration, pts.front().second);
      break;
    }
  }
  for (auto& p : pts) p.second *= power_scale;
  return pts;
}

// (left limit, right limit) of a component polyline at offset o.
std::pair<double, double> limits_at(const CompPoly& pts, Nanos o) {
  auto it = std::lower_bound(pts.begin(), pts.end(), o,
                             [](const auto& p, Nanos v) { return p.first < v; });
  if (it == pts.end()) return {pts.back().second, pts.back().second};
  if (it->first > o) {
    if (it == pts.begin()) return {it->second, it->second};
    const auto& lo = *(it - 1);
    double t = static_cast<double>(o - lo.first) / static_cast<double>(it->first - lo.first);
    double v = lo.second + (it->second - lo.second) * t;
    return {v, v};
  }
  auto last = it;
  while (last + 1 != pts.end() && (last + 1)->first == o) ++last;
  return {it->second, last->second};
}

ResolvedCurve resolve_curves(const ComponentCurves& curves, Nanos duration, double power_scale) {
  const CompPoly comps[4] = {resolve_component(curves.xcd, duration, power_scale),
                             resolve_component(curves.iod, duration, power_scale),
                             resolve_component(curves.hbm, duration, power_scale),
                             resolve_component(curves.other, duration, power_scale)};

  std::vector<Nanos> offsets;
  for (const auto& comp : comps)
    for (const auto& p : comp) offsets.push_back(p.first);
  std::sort(offsets.begin(), offsets.end());
  offsets.erase(std::unique(offsets.begin(), offsets.end()), offsets.end());

  ResolvedCurve rc;
  for (Nanos off : offsets) {
    std::pair<double, double> lim[4];
    bool step = false;
    for (int c = 0; c < 4; ++c) {
      lim[c] = limits_at(comps[c], off);
      step |= lim[c].first != lim[c].second;
    }
    rc.offsets.push_back(off);
    rc.values.push_back({lim[0].first, lim[1].first, lim[2].first, lim[3].first});
    if (step) {
      rc.offsets.push_back(off);
      rc.values.push_back({lim[0].second, lim[1].second, lim[2].second, lim[3].second});
    }
  }
  return rc;
}

// Linear interpolation inside a resolved polyline at offset u (nanoseconds).
// At a step offset the right limit applies; zero-length segments are skipped
// by the upper_bound itself.
QuadPower curve_at(const ResolvedCurve& rc, double u) {
  const auto& off = rc.offsets;
  if (u <= static_cast<double>(off.front())) return rc.values.front();
  if (u >= static_cast<double>(off.back())) return rc.values.back();
  auto it = std::upper_bound(off.begin(), off.end(), u, [](double x, Nanos o) {
    return x < static_cast<double>(o);
  });
  size_t i = static_cast<size_t>(it - off.begin());
  double x0 = static_cast<double>(off[i - 1]);
  double x1 = static_cast<double>(off[i]);
  double t = (u - x0) / (x1 - x0);
  const QuadPower& a = rc.values[i - 1];
  const QuadPower& b = rc.values[i];
  return {a.xcd + (b.xcd - a.xcd) * t, a.iod + (b.iod - a.iod) * t,
          a.hbm + (b.hbm - a.hbm) * t, a.other + (b.other - a.other) * t};
}

// Exact integral of the polyline over offset range [u0, u1]: trapezoids per
// linear piece with the piece's own endpoint values, so steps integrate as
// steps. Every kink sits at an integer offset.
QuadPower integrate_curve(const ResolvedCurve& rc, Nanos u0, Nanos u1) {
  QuadPower acc{};
  const auto& off = rc.offsets;
  for (size_t i = 0; i + 1 < off.size(); ++i) {
    Nanos s = std::max(u0, off[i]);
    Nanos e = std::min(u1, off[i + 1]);
    if (s >= e) continue;
    const QuadPower& a = rc.values[i];
    const QuadPower& b = rc.values[i + 1];
    double inv_len = 1.0 / static_cast<double>(off[i + 1] - off[i]);
    double ts = static_cast<double>(s - off[i]) * inv_len;
    double te = static_cast<double>(e - off[i]) * inv_len;
    auto len = static_cast<double>(e - s);
    auto piece = [&](double va, double vb) {
      double fs = va + (vb - va) * ts;
      double fe = va + (vb - va) * te;
      return 0.5 * (fs + fe) * len;
    };
    acc.xcd += piece(a.xcd, b.xcd);
    acc.iod += piece(a.iod, b.iod);
    acc.hbm += piece(a.hbm, b.hbm);
    acc.other += piece(a.other, b.other);
  }
  return acc;
}

QuadPower integrate_timeline(const GroundTruth& truth, Nanos a, Nanos b) {
  QuadPower acc{};
  Nanos cur = a;
  auto idle_upto = [&](Nanos until) {
    if (cur < until) {
      auto len = static_cast<double>(until - cur);
      acc.xcd += truth.idle.xcd * len;
      acc.iod += truth.idle.iod * len;
      acc.hbm += truth.idle.hbm * len;
      acc.other += truth.idle.other * len;
      cur = until;
    }
  };
  auto it = std::upper_bound(truth.executions.begin(), truth.executions.end(), a,
                             [](Nanos t, const TrueExecution& e) { return t < e.end_gpu; });
  for (; it != truth.executions.end() && it->start_gpu < b; ++it) {
    idle_upto(std::min(b, it->start_gpu));
    Nanos x0 = std::max(cur, it->start_gpu);
    Nanos x1 = std::min(b, it->end_gpu);
    if (x0 < x1) {
      acc += integrate_curve(it->curve, x0 - it->start_gpu, x1 - it->start_gpu);
      cur = x1;
    }
  }
  idle_upto(b);
  return acc;
}

}  // namespace

// ---------------------------------------------------------------------------
// GroundTruth
// ---------------------------------------------------------------------------

Nanos GroundTruth::cpu_of(Nanos gpu_ns) const {
  Nanos drift = static_cast<Nanos>(
      std::llround(static_cast<double>(gpu_ns) * drift_ppb * 1e-9));
  return cpu_gpu_offset + gpu_ns + drift;
}

QuadPower GroundTruth::instantaneous(double gpu_ns) const {
  auto it = std::upper_bound(executions.begin(), executions.end(), gpu_ns,
                             [](double t, const TrueExecution& e) {
                               return t < static_cast<double>(e.start_gpu);
                             });
  if (it != executions.begin()) {
    const TrueExecution& e = *(it - 1);
    if (gpu_ns < static_cast<double>(e.end_gpu))
      return curve_at(e.curve, gpu_ns - static_cast<double>(e.start_gpu));
  }
  return idle;
}

ComponentPower GroundTruth::window_average(Nanos window_end_gpu, Nanos window) const {
  if (window <= 0) throw std::invalid_argument("window_average: window must be > 0");
  if (window_end_gpu > horizon_end_gpu)
    throw std::out_of_range("window_average: query past simulated horizon");
  QuadPower integral = integrate_timeline(*this, window_end_gpu - window, window_end_gpu);
  double inv = 1.0 / static_cast<double>(window);
  return to_component_power(
      {integral.xcd * inv, integral.iod * inv, integral.hbm * inv, integral.other * inv});
}

std::optional<std::pair<int, Nanos>> GroundTruth::true_loi(Nanos gpu_ns) const {
  auto it = std::upper_bound(executions.begin(), executions.end(), gpu_ns,
                             [](Nanos t, const TrueExecution& e) { return t < e.start_gpu; });
  if (it == executions.begin()) return std::nullopt;
  const TrueExecution& e = *(it - 1);
  if (gpu_ns >= e.end_gpu) return std::nullopt;
  return std::make_pair(e.exec_index, gpu_ns - e.start_gpu);
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

Nanos draw_exec_time(const KernelSpec& spec, int exec_index, std::uint64_t seed) {
  auto s = rng::Stream::derive(seed, "exec-time", rng::fnv1a(spec.kernel_id),
                               static_cast<std::uint64_t>(exec_index));
  double u = s.uniform01();
  Nanos base;
  if (spec.outlier_prob > 0.0 && u < spec.outlier_prob) {
    base = static_cast<Nanos>(
        std::llround(static_cast<double>(spec.nominal_exec_time) * spec.outlier_scale));
  } else {
    double jitter = spec.exec_time_jitter_rel * s.normal();
    base = static_cast<Nanos>(
        std::llround(static_cast<double>(spec.nominal_exec_time) * (1.0 + jitter)));
  }
  if (exec_index < spec.warmup.warmup_execs) {
    base = static_cast<Nanos>(std::llround(static_cast<double>(base) *
                                           spec.warmup.slowdown[static_cast<size_t>(exec_index)]));
  }
  return std::max<Nanos>(1, base);
}

std::vector<Nanos> sample_read_delays(const ClockSpec& clock, int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample_read_delays: n must be >= 1");
  auto s = rng::Stream::derive(seed, "read-delay-bench");
  std::vector<Nanos> out;
  out.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) out.push_back(draw_read_delay(clock, s));
  return out;
}

std::pair<RunRecord, GroundTruth> simulate_run(const RunConfig& cfg, const LoggerSpec& logger,
                                               const ClockSpec& clock, std::uint64_t seed,
                                               const std::string& run_id) {
  validate(cfg);
  validate(logger);
  validate(clock);

  const std::uint64_t run_seed = rng::mix64(seed ^ rng::fnv1a(run_id));

  GroundTruth truth;
  truth.run_id = run_id;
  truth.tick_period = clock.tick_period;
  truth.drift_ppb = clock.drift_ppb;
  truth.cpu_gpu_offset = clock.cpu_gpu_offset;
  truth.averaging_window = logger.averaging_window;
  truth.sample_interval = logger.sample_interval;
  truth.idle = to_quad(logger.idle_power);

  // Counter value at the run origin; kept well below overflow territory.
  truth.counter_base_ticks = static_cast<std::int64_t>(
      rng::Stream::derive(run_seed, "counter-base").next_u64() >> 24);

  auto pre_stream = rng::Stream::derive(run_seed, "pre-delay");
  Nanos pre_delay = pre_stream.uniform_int(cfg.pre_delay_range.first, cfg.pre_delay_range.second);

  auto t0_stream = rng::Stream::derive(run_seed, "t0-read");
  truth.true_read_delay = draw_read_delay(clock, t0_stream);
  truth.read_delay_est = sync::calibrate_read_delay(
      sample_read_delays(clock, kCalibrationSamples, rng::mix64(run_seed ^ rng::fnv1a("calib"))));

  // Expand the kernel sequence into the flat execution order.
  std::vector<const KernelSpec*> order;
  for (int rep = 0; rep < cfg.executions; ++rep)
    for (const auto& [k, reps] : cfg.kernel_sequence)
      for (int i = 0; i < reps; ++i) order.push_back(&k);

  RunRecord run;
  run.run_id = run_id;
  run.t0_gpu = {truth.counter_base_ticks, clock.tick_period};
  run.tc_cpu = truth.cpu_of(0) + truth.true_read_delay;
  run.read_delay = truth.read_delay_est;
  run.pre_delay = pre_delay;

  auto gap_stream = rng::Stream::derive(run_seed, "inter-exec-gap");
  std::map<std::string, int> occurrence;
  Nanos g = pre_delay;
  for (size_t j = 0; j < order.size(); ++j) {
    const KernelSpec& k = *order[j];
    int occ = occurrence[k.kernel_id]++;
    Nanos dur = draw_exec_time(k, occ, run_seed);
    double power_scale = occ < k.warmup.warmup_execs
                             ? k.warmup.power_scale[static_cast<size_t>(occ)]
                             : 1.0;

    TrueExecution te;
    te.exec_index = static_cast<int>(j);
    te.kernel_id = k.kernel_id;
    te.start_gpu = g;
    te.end_gpu = g + dur;
    te.power_scale = power_scale;
    te.curve = resolve_curves(k.curve, dur, power_scale);
    truth.executions.push_back(std::move(te));

    run.executions.push_back({static_cast<int>(j), k.kernel_id, truth.cpu_of(g),
                              truth.cpu_of(g + dur)});
    g += dur;
    if (j + 1 < order.size())
      g += gap_stream.uniform_int(cfg.inter_exec_gap_range.first, cfg.inter_exec_gap_range.second);
  }

  // Log every sample_interval; one extra sample past the last execution so the
  // log always covers the full run.
  const Nanos si = logger.sample_interval;
  const Nanos last_end = g;
  const std::int64_t samples = (last_end + si - 1) / si + 1;
  truth.horizon_end_gpu = samples * si;
  run.log.reserve(static_cast<size_t>(samples));
  for (std::int64_t k = 1; k <= samples; ++k) {
    Nanos ts = k * si;
    ComponentPower avg = [&] {
      QuadPower integral = integrate_timeline(truth, ts - logger.averaging_window, ts);
      double inv = 1.0 / static_cast<double>(logger.averaging_window);
      return to_component_power(
          {integral.xcd * inv, integral.iod * inv, integral.hbm * inv, integral.other * inv});
    }();
    run.log.push_back({{truth.counter_base_ticks + ts / clock.tick_period, clock.tick_period}, avg});
  }

  return {std::move(run), std::move(truth)};
}

ComponentPower oracle_logged_average(const GroundTruth& truth, Nanos window_end_gpu,
                                     Nanos window) {
  if (window <= 0) throw std::invalid_argument("oracle_logged_average: window must be > 0");
  if (window_end_gpu > truth.horizon_end_gpu)
    throw std::out_of_range("oracle_logged_average: query past simulated horizon");

  // Kahan-compensated sums; one midpoint evaluation per 1 ns step.
  double sum[4] = {0, 0, 0, 0};
  double comp[4] = {0, 0, 0, 0};
  auto add = [&](int i, double v) {
    double y = v - comp[i];
    double t = sum[i] + y;
    comp[i] = (t - sum[i]) - y;
    sum[i] = t;
  };
  const double start = static_cast<double>(window_end_gpu - window);
  for (Nanos i = 0; i < window; ++i) {
    QuadPower q = truth.instantaneous(start + static_cast<double>(i) + 0.5);
    add(0, q.xcd);
    add(1, q.iod);
    add(2, q.hbm);
    add(3, q.other);
  }
  double inv = 1.0 / static_cast<double>(window);
  return to_component_power({sum[0] * inv, sum[1] * inv, sum[2] * inv, sum[3] * inv});
}

}  // namespace fingrav::sim
