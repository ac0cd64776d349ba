#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fingrav/types.hpp"

namespace fingrav::sim {

enum class CurveShape { constant, linear_ramp, piecewise };

/// Instantaneous power shape over one execution, parameterized by the
/// fraction of execution time elapsed.
struct PowerCurve {
  CurveShape shape = CurveShape::constant;
  double level = 0.0;                             // constant
  double ramp_from = 0.0;                         // linear-ramp
  double ramp_to = 0.0;
  std::vector<std::pair<double, double>> knots;   // piecewise: (fraction, watts)

  static PowerCurve constant(double watts);
  static PowerCurve ramp(double from_watts, double to_watts);
  static PowerCurve piecewise(std::vector<std::pair<double, double>> knots);

  bool operator==(const PowerCurve&) const = default;
};

struct ComponentCurves {
  PowerCurve xcd;
  PowerCurve iod;
  PowerCurve hbm;
  PowerCurve other;  // remaining board power; folded into total only

  bool operator==(const ComponentCurves&) const = default;
};

struct WarmupModel {
  enum class Mode { settle, throttle };
  Mode mode = Mode::settle;
  int warmup_execs = 3;
  std::vector<double> slowdown{1.0, 1.0, 1.0};     // execution-time multipliers, >= 1
  std::vector<double> power_scale{1.0, 1.0, 1.0};  // curve multipliers during warm-up

  bool operator==(const WarmupModel&) const = default;
};

struct KernelSpec {
  std::string kernel_id;
  Nanos nominal_exec_time = 0;
  double exec_time_jitter_rel = 0.0;
  double outlier_prob = 0.0;
  double outlier_scale = 3.0;
  ComponentCurves curve;
  WarmupModel warmup;

  bool operator==(const KernelSpec&) const = default;
};

struct LoggerSpec {
  Nanos sample_interval = 1'000'000;    // 1 ms logger
  Nanos averaging_window = 1'000'000;   // trailing window behind every sample
  ComponentPower idle_power;

  bool operator==(const LoggerSpec&) const = default;
};

struct ClockSpec {
  Nanos cpu_gpu_offset = 0;       // hidden from the analysis side
  Nanos read_delay_mean = 0;
  Nanos read_delay_jitter = 0;    // bounded scale: draws are clamped to +/- jitter
  double drift_ppb = 0.0;         // GPU tick period error; the pipeline does not correct it
  Nanos tick_period = kDefaultTickPeriod;

  bool operator==(const ClockSpec&) const = default;
};

struct RunConfig {
  int executions = 1;  // repetitions of the expanded kernel sequence
  std::pair<Nanos, Nanos> pre_delay_range{0, 0};
  std::vector<std::pair<KernelSpec, int>> kernel_sequence;  // (kernel, repetitions)
  std::pair<Nanos, Nanos> inter_exec_gap_range{0, 0};       // idle injected between executions
};

void validate(const KernelSpec& spec);
void validate(const LoggerSpec& spec);
void validate(const ClockSpec& spec);
void validate(const RunConfig& cfg);

// ---------------------------------------------------------------------------
// Sealed ground truth
// ---------------------------------------------------------------------------

struct QuadPower {
  double xcd = 0.0;
  double iod = 0.0;
  double hbm = 0.0;
  double other = 0.0;

  QuadPower& operator+=(const QuadPower& o) {
    xcd += o.xcd; iod += o.iod; hbm += o.hbm; other += o.other;
    return *this;
  }
};

ComponentPower to_component_power(const QuadPower& q);
QuadPower to_quad(const ComponentPower& p);  // other = total - (xcd + iod + hbm)

/// Piecewise-linear power polyline over one execution; knot offsets are
/// integer nanoseconds from execution start, strictly increasing, 0..duration.
struct ResolvedCurve {
  std::vector<Nanos> offsets;
  std::vector<QuadPower> values;
};

struct TrueExecution {
  int exec_index = 0;
  std::string kernel_id;
  Nanos start_gpu = 0;
  Nanos end_gpu = 0;
  double power_scale = 1.0;  // already folded into curve values; kept for inspection
  ResolvedCurve curve;
};

/// Hidden truth for one simulated run: the full instantaneous power function
/// and the clock parameters the analysis side has to estimate.
struct GroundTruth {
  std::string run_id;
  Nanos tick_period = kDefaultTickPeriod;
  std::int64_t counter_base_ticks = 0;  // counter value at run origin (gpu t = 0)
  double drift_ppb = 0.0;
  Nanos cpu_gpu_offset = 0;
  Nanos true_read_delay = 0;   // delay of this run's T0 read
  Nanos read_delay_est = 0;    // calibrated estimate stored in the RunRecord
  Nanos averaging_window = 0;
  Nanos sample_interval = 0;
  Nanos horizon_end_gpu = 0;
  QuadPower idle;
  std::vector<TrueExecution> executions;

  /// CPU time of a GPU-domain instant (offset + drift applied).
  Nanos cpu_of(Nanos gpu_ns) const;

  /// Instantaneous power at an arbitrary (possibly fractional) GPU time.
  /// Idle outside executions; idle before the run origin as well.
  QuadPower instantaneous(double gpu_ns) const;

  /// Exact time-average over the trailing window (analytic integration of the
  /// piecewise-linear power function). Throws past the simulated horizon.
  ComponentPower window_average(Nanos window_end_gpu, Nanos window) const;

  /// (execution index, TOI) of a GPU instant, if it falls inside an execution.
  std::optional<std::pair<int, Nanos>> true_loi(Nanos gpu_ns) const;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Deterministically simulate one run: executions with CPU-domain timestamps,
/// a T0/Tc sync anchor, and an averaged power log every sample_interval.
/// Identical (configs, seed, run_id) give bit-identical results.
std::pair<RunRecord, GroundTruth> simulate_run(const RunConfig& cfg,
                                               const LoggerSpec& logger,
                                               const ClockSpec& clock,
                                               std::uint64_t seed,
                                               const std::string& run_id = "run-0");

/// Brute-force check of the logger model: average of the instantaneous power
/// sampled at the midpoint of every 1 ns step in (window_end - window,
/// window_end]. Independent of the analytic integration in simulate_run.
ComponentPower oracle_logged_average(const GroundTruth& truth, Nanos window_end_gpu,
                                     Nanos window);

/// Execution-time draw for one execution: nominal * (1 + N(0, jitter)),
/// outliers replace the draw with nominal * outlier_scale, warm-up executions
/// are additionally stretched by WarmupModel::slowdown. Clamped to >= 1 ns.
Nanos draw_exec_time(const KernelSpec& spec, int exec_index, std::uint64_t seed);

/// Benchmark draws of the timestamp-read latency (same distribution the
/// simulator uses for the T0 read).
std::vector<Nanos> sample_read_delays(const ClockSpec& clock, int n, std::uint64_t seed);

}  // namespace fingrav::sim
