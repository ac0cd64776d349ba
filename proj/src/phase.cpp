#include "fingrav/phase.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace fingrav::phase {

int compute_ssp_executions(Nanos averaging_window, Nanos exec_time, int sse_execs) {
  if (averaging_window <= 0)
    throw std::invalid_argument("compute_ssp_executions: averaging_window must be > 0");
  if (exec_time <= 0) throw std::invalid_argument("compute_ssp_executions: exec_time must be > 0");
  if (sse_execs <= 0) throw std::invalid_argument("compute_ssp_executions: sse_execs must be > 0");
  Nanos fills = (averaging_window + exec_time - 1) / exec_time;
  return std::max(static_cast<int>(fills), sse_execs);
}

int detect_warmup_count(const std::vector<Nanos>& exec_times, double eps_rel) {
  if (exec_times.size() < 2)
    throw std::invalid_argument("detect_warmup_count: need at least two executions");
  Nanos best = *std::min_element(exec_times.begin(), exec_times.end());
  double threshold = (1.0 + eps_rel) * static_cast<double>(best);
  int w = static_cast<int>(exec_times.size()) - 1;
  for (int i = w; i >= 0; --i) {
    if (static_cast<double>(exec_times[static_cast<size_t>(i)]) > threshold) break;
    w = i;
  }
  return w;
}

int binary_search_ssp(const std::function<double(int)>& probe, int n_lo, int n_hi,
                      double delta_rel) {
  if (n_lo >= n_hi) throw std::invalid_argument("binary_search_ssp: need n_lo < n_hi");

  std::map<int, double> cache;
  auto p = [&](int n) {
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    double v = probe(n);
    cache.emplace(n, v);
    return v;
  };
  auto stabilized = [&](int n) {
    double a = p(n);
    double b = p(n + 1);
    return std::abs(b - a) <= delta_rel * std::abs(b);
  };

  int lo = n_lo;
  int hi = n_hi;
  while (lo < hi) {
    int mid = lo + (hi - lo) / 2;
    if (stabilized(mid))
      hi = mid;
    else
      lo = mid + 1;
  }
  if (!stabilized(lo))
    throw std::runtime_error("binary_search_ssp: unstable power, no execution count in [" +
                             std::to_string(n_lo) + "," + std::to_string(n_hi) +
                             "] satisfies the stabilization predicate");
  return lo;
}

PhaseBoundaries classify_phases(const PhasePlan& plan, const RunRecord& run) {
  if (plan.warmup_execs < 0 || plan.sse_execs_total < plan.warmup_execs + 1 ||
      plan.ssp_execs_total < plan.sse_execs_total)
    throw std::invalid_argument("classify_phases: inconsistent phase plan");
  if (static_cast<int>(run.executions.size()) < plan.ssp_execs_total)
    throw std::invalid_argument("classify_phases: run " + run.run_id + " has " +
                                std::to_string(run.executions.size()) +
                                " executions, plan needs " +
                                std::to_string(plan.ssp_execs_total));
  return {plan.warmup_execs, plan.warmup_execs, plan.ssp_execs_total - 1};
}

double sse_ssp_error(const stitch::StitchedProfile& sse_profile,
                     const stitch::StitchedProfile& ssp_profile) {
  if (sse_profile.component != ssp_profile.component)
    throw std::invalid_argument("sse_ssp_error: profiles are for different components");
  double mean_sse = stitch::profile_mean(sse_profile);
  double mean_ssp = stitch::profile_mean(ssp_profile);
  if (mean_ssp == 0.0) throw std::domain_error("sse_ssp_error: SSP mean power is zero");
  return 100.0 * std::abs(mean_sse - mean_ssp) / mean_ssp;
}

}  // namespace fingrav::phase
