#pragma once

#include <functional>
#include <vector>

#include "fingrav/stitch.hpp"
#include "fingrav/types.hpp"

namespace fingrav::phase {

struct PhasePlan {
  int warmup_execs = 3;
  int sse_execs_total = 4;  // warm-ups + one measured execution
  int ssp_execs_total = 4;
};

/// Executions needed before logged power stops changing:
/// max(ceil(averaging_window / exec_time), sse_execs).
int compute_ssp_executions(Nanos averaging_window, Nanos exec_time, int sse_execs);

/// Smallest w such that every execution from w on stays within
/// (1 + eps_rel) * min(exec_times). Needs at least two executions.
int detect_warmup_count(const std::vector<Nanos>& exec_times, double eps_rel = 0.02);

/// Smallest N in [n_lo, n_hi] whose probed power has stabilized:
/// |P(N+1) - P(N)| <= delta_rel * P(N+1). Bisection over the stabilization
/// predicate (assumed monotone in N; the result is re-verified). Throws an
/// unstable-power error when no N in range satisfies it.
int binary_search_ssp(const std::function<double(int)>& probe, int n_lo, int n_hi,
                      double delta_rel = 0.02);

/// Structural phase boundaries for a run executed under the given plan.
PhaseBoundaries classify_phases(const PhasePlan& plan, const RunRecord& run);

/// Percent gap between the TOI-integrated mean powers of the two profiles,
/// relative to the SSP mean.
double sse_ssp_error(const stitch::StitchedProfile& sse_profile,
                     const stitch::StitchedProfile& ssp_profile);

}  // namespace fingrav::phase
