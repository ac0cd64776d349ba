#pragma once

#include <vector>

#include "fingrav/types.hpp"

namespace fingrav::sync {

/// CPU/GPU time anchor. Convention: the counter value t0_gpu corresponds to
/// CPU instant tc_cpu - read_delay_est (the read completes at tc_cpu).
struct SyncModel {
  Nanos tc_cpu = 0;
  GpuTimestamp t0_gpu;
  Nanos read_delay_est = 0;
};

SyncModel sync_from_run(const RunRecord& run);

/// Lower median of benchmarked read latencies. Throws on an empty list.
Nanos calibrate_read_delay(std::vector<Nanos> samples);

/// Affine, order-preserving GPU->CPU mapping. Throws on tick_period mismatch.
Nanos gpu_to_cpu(const SyncModel& sync, const GpuTimestamp& ts);

enum class LoiMode {
  strict,   // keep only samples whose trailing window lies inside one execution
  lenient,  // keep every sample taken during an execution; tag straddlers mixed
};

/// Resolve log entries to (execution, TOI) pairs. May return an empty list –
/// a run can miss every execution entirely.
std::vector<LoiSample> identify_loi(const RunRecord& run, const SyncModel& sync,
                                    Nanos averaging_window,
                                    LoiMode mode = LoiMode::strict);

}  // namespace fingrav::sync
