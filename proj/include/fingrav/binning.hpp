#pragma once

#include <map>
#include <string>
#include <vector>

#include "fingrav/types.hpp"

namespace fingrav::binning {

/// One row of the empirical profiling guidance table.
struct GuidanceEntry {
  Nanos exec_lo = 0;   // exclusive
  Nanos exec_hi = 0;   // inclusive; kOpenEnd for the last row
  int runs = 0;
  Nanos loi_density = 0;  // aim for one LOI per this many ns of kernel time
  double margin_rel = 0.0;
  bool extrapolated = false;  // exec time below the table's first row

  bool operator==(const GuidanceEntry&) const = default;
};

inline constexpr Nanos kOpenEnd = INT64_MAX;

/// Row covering the given execution time. Times at or below the table floor
/// return the first row tagged extrapolated. Throws on exec_time <= 0.
GuidanceEntry lookup_guidance(Nanos exec_time);

struct Bin {
  Nanos anchor = 0;
  std::vector<std::string> members;  // sorted run ids
  double margin_rel = 0.0;
};

/// One candidate bin per distinct observed time used as anchor; membership is
/// |t - anchor| <= margin_rel * anchor. Sorted by (cardinality desc, anchor asc).
std::vector<Bin> bin_runs(const std::map<std::string, Nanos>& ssp_exec_times, double margin_rel);

/// Members of the top bin (largest cardinality; ties break to smallest anchor).
std::vector<std::string> select_golden_runs(const std::vector<Bin>& bins);

struct LoiSufficiency {
  int target = 0;
  int distinct = 0;  // TOIs in the same density-wide slot count once
  int deficit = 0;
  bool sufficient() const { return deficit == 0; }
};

LoiSufficiency loi_sufficiency(const std::vector<LoiSample>& lois, Nanos exec_time,
                               const GuidanceEntry& guidance);

}  // namespace fingrav::binning
