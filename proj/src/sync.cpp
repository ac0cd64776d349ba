#include "fingrav/sync.hpp"

#include <algorithm>
#include <stdexcept>

namespace fingrav::sync {

SyncModel sync_from_run(const RunRecord& run) {
  return {run.tc_cpu, run.t0_gpu, run.read_delay};
}

Nanos calibrate_read_delay(std::vector<Nanos> samples) {
  if (samples.empty()) throw std::invalid_argument("calibrate_read_delay: no samples");
  size_t mid = (samples.size() - 1) / 2;  // lower median for even counts
  std::nth_element(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(mid),
                   samples.end());
  return samples[mid];
}

Nanos gpu_to_cpu(const SyncModel& sync, const GpuTimestamp& ts) {
  if (ts.tick_period != sync.t0_gpu.tick_period)
    throw std::invalid_argument("gpu_to_cpu: tick_period mismatch with sync anchor");
  return (sync.tc_cpu - sync.read_delay_est) +
         (ts.ticks - sync.t0_gpu.ticks) * ts.tick_period;
}

std::vector<LoiSample> identify_loi(const RunRecord& run, const SyncModel& sync,
                                    Nanos averaging_window, LoiMode mode) {
  if (averaging_window <= 0)
    throw std::invalid_argument("identify_loi: averaging_window must be > 0");

  const auto& execs = run.executions;
  std::vector<LoiSample> out;
  for (const PowerLogEntry& entry : run.log) {
    Nanos t = gpu_to_cpu(sync, entry.gpu_ts);
    auto it = std::upper_bound(execs.begin(), execs.end(), t,
                               [](Nanos v, const ExecutionRecord& e) { return v < e.start_cpu; });
    if (it == execs.begin()) continue;
    const ExecutionRecord& e = *(it - 1);
    if (t >= e.end_cpu) continue;  // sample fell in an idle gap
    bool contained = (t - averaging_window) >= e.start_cpu;
    if (mode == LoiMode::strict && !contained) continue;
    out.push_back({run.run_id, e.exec_index, t - e.start_cpu, entry.power, !contained});
  }
  return out;
}

}  // namespace fingrav::sync
