#include "fingrav/binning.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace fingrav::binning {

namespace {

constexpr GuidanceEntry kGuidanceTable[] = {
    {25'000, 50'000, 400, 5'000, 0.05, false},
    {50'000, 200'000, 200, 10'000, 0.05, false},
    {200'000, 1'000'000, 200, 10'000, 0.02, false},
    {1'000'000, kOpenEnd, 200, 10'000, 0.02, false},
};

}  // namespace

GuidanceEntry lookup_guidance(Nanos exec_time) {
  if (exec_time <= 0) throw std::invalid_argument("lookup_guidance: exec_time must be > 0");
  for (const GuidanceEntry& row : kGuidanceTable) {
    if (exec_time > row.exec_lo && exec_time <= row.exec_hi) return row;
  }
  GuidanceEntry row = kGuidanceTable[0];  // below the table floor
  row.extrapolated = true;
  return row;
}

std::vector<Bin> bin_runs(const std::map<std::string, Nanos>& ssp_exec_times, double margin_rel) {
  if (ssp_exec_times.empty()) throw std::invalid_argument("bin_runs: empty input");
  if (margin_rel <= 0) throw std::invalid_argument("bin_runs: margin_rel must be > 0");

  std::set<Nanos> anchors;
  for (const auto& [id, t] : ssp_exec_times) anchors.insert(t);

  std::vector<Bin> bins;
  bins.reserve(anchors.size());
  for (Nanos anchor : anchors) {
    Bin bin{anchor, {}, margin_rel};
    double tol = margin_rel * static_cast<double>(anchor);
    for (const auto& [id, t] : ssp_exec_times) {
      if (std::abs(static_cast<double>(t - anchor)) <= tol) bin.members.push_back(id);
    }
    bins.push_back(std::move(bin));
  }
  std::sort(bins.begin(), bins.end(), [](const Bin& a, const Bin& b) {
    if (a.members.size() != b.members.size()) return a.members.size() > b.members.size();
    return a.anchor < b.anchor;
  });
  return bins;
}

std::vector<std::string> select_golden_runs(const std::vector<Bin>& bins) {
  if (bins.empty()) throw std::invalid_argument("select_golden_runs: no bins");
  return bins.front().members;
}

LoiSufficiency loi_sufficiency(const std::vector<LoiSample>& lois, Nanos exec_time,
                               const GuidanceEntry& guidance) {
  if (exec_time <= 0) throw std::invalid_argument("loi_sufficiency: exec_time must be > 0");
  const Nanos d = guidance.loi_density;
  std::set<Nanos> slots;
  for (const LoiSample& s : lois) slots.insert(s.toi / d);
  LoiSufficiency r;
  r.target = static_cast<int>((exec_time + d - 1) / d);
  r.distinct = static_cast<int>(slots.size());
  r.deficit = std::max(0, r.target - r.distinct);
  return r;
}

}  // namespace fingrav::binning
