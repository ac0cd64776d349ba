#include "fingrav/stitch.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fingrav::stitch {

StitchedProfile build_profile(const std::vector<LoiSample>& lois,
                              const std::map<std::string, PhaseBoundaries>& phase_bounds,
                              Phase phase, Component component, const std::string& kernel_id,
                              Nanos exec_time_anchor) {
  if (exec_time_anchor <= 0)
    throw std::invalid_argument("build_profile: exec_time_anchor must be > 0");

  struct Raw {
    Nanos toi;
    double power;
    std::string run_id;
  };
  std::vector<Raw> raw;
  for (const LoiSample& s : lois) {
    auto it = phase_bounds.find(s.run_id);
    if (it == phase_bounds.end())
      throw std::invalid_argument("build_profile: no phase boundaries for run " + s.run_id);
    int want = phase == Phase::sse ? it->second.sse_index : it->second.ssp_index;
    if (s.exec_index != want) continue;
    raw.push_back({s.toi, component_value(s.power, component), s.run_id});
  }
  if (raw.empty())
    throw std::runtime_error("build_profile: empty profile (no LOIs match phase " +
                             std::string(to_string(phase)) + ")");

  // Deterministic regardless of input order: sort, then merge per slot.
  std::sort(raw.begin(), raw.end(), [](const Raw& a, const Raw& b) {
    if (a.toi != b.toi) return a.toi < b.toi;
    if (a.run_id != b.run_id) return a.run_id < b.run_id;
    return a.power < b.power;
  });

  StitchedProfile profile{kernel_id, phase, component, exec_time_anchor, {}};
  size_t i = 0;
  while (i < raw.size()) {
    Nanos slot = raw[i].toi / kToiCollisionNs;
    double toi_sum = 0.0;
    double power_sum = 0.0;
    std::string run_id = raw[i].run_id;
    size_t n = 0;
    while (i < raw.size() && raw[i].toi / kToiCollisionNs == slot) {
      toi_sum += static_cast<double>(raw[i].toi);
      power_sum += raw[i].power;
      run_id = std::min(run_id, raw[i].run_id);
      ++n;
      ++i;
    }
    profile.points.push_back({static_cast<Nanos>(std::llround(toi_sum / static_cast<double>(n))),
                              power_sum / static_cast<double>(n), run_id});
  }
  return profile;
}

double profile_mean(const StitchedProfile& profile) {
  const auto& pts = profile.points;
  if (pts.empty()) throw std::invalid_argument("profile_mean: empty profile");
  if (pts.size() == 1) return pts.front().power;
  double area = 0.0;
  for (size_t i = 0; i + 1 < pts.size(); ++i) {
    area += 0.5 * (pts[i].power + pts[i + 1].power) *
            static_cast<double>(pts[i + 1].toi - pts[i].toi);
  }
  return area / static_cast<double>(pts.back().toi - pts.front().toi);
}

PolyFit fit_poly(const StitchedProfile& profile, int degree) {
  if (degree < 0) throw std::invalid_argument("fit_poly: degree must be >= 0");
  const auto n = static_cast<Eigen::Index>(profile.points.size());
  const auto cols = static_cast<Eigen::Index>(degree) + 1;
  if (n < cols) throw std::invalid_argument("fit_poly: underdetermined (need degree+1 points)");

  Eigen::MatrixXd vand(n, cols);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double x = static_cast<double>(profile.points[static_cast<size_t>(i)].toi) /
               static_cast<double>(profile.exec_time_anchor);
    double p = 1.0;
    for (Eigen::Index j = 0; j < cols; ++j) {
      vand(i, j) = p;
      p *= x;
    }
    y(i) = profile.points[static_cast<size_t>(i)].power;
  }

  Eigen::VectorXd c = vand.colPivHouseholderQr().solve(y);
  double rms = std::sqrt((vand * c - y).squaredNorm() / static_cast<double>(n));

  PolyFit fit;
  fit.degree = degree;
  fit.coefficients.assign(c.data(), c.data() + cols);
  fit.rms_residual = rms;
  return fit;
}

double eval_poly(const PolyFit& fit, Nanos toi, Nanos exec_time_anchor) {
  double x = static_cast<double>(toi) / static_cast<double>(exec_time_anchor);
  double v = 0.0;
  for (auto it = fit.coefficients.rbegin(); it != fit.coefficients.rend(); ++it) v = v * x + *it;
  return v;
}

ProfileError profile_error(const StitchedProfile& profile, const sim::GroundTruth& truth,
                           int exec_index) {
  if (profile.points.empty()) throw std::invalid_argument("profile_error: empty profile");
  if (exec_index < 0 || static_cast<size_t>(exec_index) >= truth.executions.size())
    throw std::out_of_range("profile_error: exec_index outside truth");
  const sim::TrueExecution& e = truth.executions[static_cast<size_t>(exec_index)];

  double sq = 0.0;
  double max_abs = 0.0;
  for (const ProfilePoint& p : profile.points) {
    ComponentPower ref = truth.window_average(e.start_gpu + p.toi, truth.averaging_window);
    double diff = p.power - component_value(ref, profile.component);
    sq += diff * diff;
    max_abs = std::max(max_abs, std::abs(diff));
  }
  return {std::sqrt(sq / static_cast<double>(profile.points.size())), max_abs};
}

}  // namespace fingrav::stitch
