#pragma once

#include <map>
#include <string>
#include <vector>

#include "fingrav/sim.hpp"
#include "fingrav/types.hpp"

namespace fingrav::stitch {

struct ProfilePoint {
  Nanos toi = 0;
  double power = 0.0;
  std::string run_id;

  bool operator==(const ProfilePoint&) const = default;
};

/// Fine-grain per-phase power series for one component, assembled from the
/// LOIs of many runs and sorted by TOI.
struct StitchedProfile {
  std::string kernel_id;
  Phase phase = Phase::ssp;
  Component component = Component::total;
  Nanos exec_time_anchor = 0;
  std::vector<ProfilePoint> points;

  bool operator==(const StitchedProfile&) const = default;
};

/// TOIs colliding within this resolution are averaged into one point.
inline constexpr Nanos kToiCollisionNs = 1'000;

/// Keep the LOIs whose execution matches the requested phase for their run,
/// sort by TOI and merge collisions. Throws if nothing matches.
StitchedProfile build_profile(const std::vector<LoiSample>& lois,
                              const std::map<std::string, PhaseBoundaries>& phase_bounds,
                              Phase phase, Component component, const std::string& kernel_id,
                              Nanos exec_time_anchor);

/// TOI-integrated mean power (trapezoid over the series).
double profile_mean(const StitchedProfile& profile);

struct PolyFit {
  int degree = 4;
  std::vector<double> coefficients;  // ascending powers of toi / exec_time_anchor
  double rms_residual = 0.0;
};

/// Ordinary least-squares polynomial on the TOI domain normalized by the
/// execution-time anchor. Throws when underdetermined.
PolyFit fit_poly(const StitchedProfile& profile, int degree = 4);

double eval_poly(const PolyFit& fit, Nanos toi, Nanos exec_time_anchor);

struct ProfileError {
  double rms = 0.0;      // watts
  double max_abs = 0.0;  // watts
};

/// Compare each stitched point against the true window-average at the same TOI
/// of the given execution (normally the SSP-state execution of a golden run).
ProfileError profile_error(const StitchedProfile& profile, const sim::GroundTruth& truth,
                           int exec_index);

}  // namespace fingrav::stitch
