#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fingrav {

// All time quantities are integer nanoseconds; power is double watts.
using Nanos = std::int64_t;

inline constexpr Nanos kDefaultTickPeriod = 10;  // 100 MHz counter

/// Per-component power sample. Invariant: all fields >= 0 and
/// total >= max(xcd, iod, hbm); simulated data keeps total equal to
/// xcd + iod + hbm + other with other >= 0.
struct ComponentPower {
  double total = 0.0;
  double xcd = 0.0;
  double iod = 0.0;
  double hbm = 0.0;

  bool operator==(const ComponentPower&) const = default;
};

ComponentPower operator+(const ComponentPower& a, const ComponentPower& b);
ComponentPower scale(const ComponentPower& p, double factor);
ComponentPower time_average(const ComponentPower& integral, Nanos duration);

bool valid_power(const ComponentPower& p);
void require_valid_power(const ComponentPower& p, const char* what);

/// Raw GPU counter reading plus its resolution.
struct GpuTimestamp {
  std::int64_t ticks = 0;
  Nanos tick_period = kDefaultTickPeriod;

  bool operator==(const GpuTimestamp&) const = default;
};

struct PowerLogEntry {
  GpuTimestamp gpu_ts;
  ComponentPower power;

  bool operator==(const PowerLogEntry&) const = default;
};

struct ExecutionRecord {
  int exec_index = 0;
  std::string kernel_id;
  Nanos start_cpu = 0;  // CPU domain
  Nanos end_cpu = 0;

  bool operator==(const ExecutionRecord&) const = default;
};

/// One profiling run: sync anchors, CPU-side execution timing and the
/// averaged power log captured on the GPU.
struct RunRecord {
  std::string run_id;
  GpuTimestamp t0_gpu;      // counter value read before the first execution
  Nanos tc_cpu = 0;         // CPU time at which the T0 read completed
  Nanos read_delay = 0;     // calibrated timestamp-read latency
  Nanos pre_delay = 0;      // randomized idle delay before the first execution
  std::vector<ExecutionRecord> executions;
  std::vector<PowerLogEntry> log;

  bool operator==(const RunRecord&) const = default;
};

/// A log entry resolved to (execution, time-of-interest). `mixed` marks
/// samples whose averaging window was not fully contained in the execution.
struct LoiSample {
  std::string run_id;
  int exec_index = 0;
  Nanos toi = 0;  // offset within the execution, [0, duration)
  ComponentPower power;
  bool mixed = false;

  bool operator==(const LoiSample&) const = default;
};

struct PhaseBoundaries {
  int warmup_count = 0;
  int sse_index = 0;
  int ssp_index = 0;

  bool operator==(const PhaseBoundaries&) const = default;
};

enum class Phase { sse, ssp };
enum class Component { total, xcd, iod, hbm };

inline constexpr Component kAllComponents[] = {Component::total, Component::xcd,
                                               Component::iod, Component::hbm};

const char* to_string(Phase p);
const char* to_string(Component c);
double component_value(const ComponentPower& p, Component c);

}  // namespace fingrav
