#include "fingrav/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <stdexcept>

#include "fingrav/rng.hpp"

namespace fingrav::pipeline {

namespace {

[[noreturn]] void stage_fail(const std::string& stage, const std::string& msg) {
  throw std::runtime_error("[" + stage + "] " + msg);
}

std::string run_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "run-%04d", i);
  return buf;
}

const sim::KernelSpec& find_kernel(const ExperimentConfig& cfg, const std::string& id) {
  for (const auto& k : cfg.kernels)
    if (k.kernel_id == id) return k;
  throw std::invalid_argument("config: unknown kernel '" + id + "'");
}

void validate_config(const ExperimentConfig& cfg) {
  if (cfg.kernels.empty()) throw std::invalid_argument("config: no kernels");
  std::set<std::string> ids;
  for (const auto& k : cfg.kernels) {
    sim::validate(k);
    if (!ids.insert(k.kernel_id).second)
      throw std::invalid_argument("config: duplicate kernel_id '" + k.kernel_id + "'");
  }
  if (cfg.sequence.empty()) throw std::invalid_argument("config: empty sequence");
  std::set<std::string> seq_ids;
  for (const auto& [id, reps] : cfg.sequence) {
    find_kernel(cfg, id);
    if (reps < 1) throw std::invalid_argument("config: sequence repetitions must be >= 1");
    seq_ids.insert(id);
  }
  if (!cfg.target_kernel.empty()) find_kernel(cfg, cfg.target_kernel);
  if (cfg.mode == RunMode::interleaved && seq_ids.size() < 2)
    throw std::invalid_argument("config: interleaved mode requires at least two kernels");
  if (cfg.mode == RunMode::isolated && cfg.sequence.size() != 1)
    throw std::invalid_argument("config: isolated mode takes a single-kernel sequence");
  if (cfg.mode == RunMode::interleaved && cfg.phase == PhaseSelection::sse)
    throw std::invalid_argument("config: interleaved mode measures the target execution only "
                                "(phase must be ssp)");
  if (cfg.warmup_execs < 0) throw std::invalid_argument("config: warmup_execs must be >= 0");
  if (cfg.sse_execs_total < cfg.warmup_execs + 1)
    throw std::invalid_argument("config: sse_execs_total must exceed warmup_execs");
  if (cfg.runs_override && *cfg.runs_override < 1)
    throw std::invalid_argument("config: runs override must be >= 1");
  if (cfg.margin_override && (*cfg.margin_override <= 0 || *cfg.margin_override >= 1))
    throw std::invalid_argument("config: margin override must be in (0,1)");
  if (cfg.density_override && *cfg.density_override <= 0)
    throw std::invalid_argument("config: loi density override must be > 0");
  sim::validate(cfg.logger);
  sim::validate(cfg.clock);
}

std::string effective_target(const ExperimentConfig& cfg) {
  return cfg.target_kernel.empty() ? cfg.sequence.back().first : cfg.target_kernel;
}

sim::RunConfig isolated_run_config(const ExperimentConfig& cfg, const std::string& kernel_id,
                                   int executions) {
  sim::RunConfig rc;
  rc.executions = executions;
  rc.kernel_sequence = {{find_kernel(cfg, kernel_id), 1}};
  rc.pre_delay_range = cfg.pre_delay_range;
  rc.inter_exec_gap_range = cfg.gap_range;
  return rc;
}

sim::RunConfig sequence_run_config(const ExperimentConfig& cfg) {
  sim::RunConfig rc;
  rc.executions = 1;
  for (const auto& [id, reps] : cfg.sequence)
    rc.kernel_sequence.emplace_back(find_kernel(cfg, id), reps);
  rc.pre_delay_range = cfg.pre_delay_range;
  rc.inter_exec_gap_range = cfg.gap_range;
  return rc;
}

int target_flat_index(const ExperimentConfig& cfg, const std::string& target) {
  int idx = -1;
  int at = 0;
  for (const auto& [id, reps] : cfg.sequence) {
    for (int i = 0; i < reps; ++i) {
      if (id == target) idx = at;
      ++at;
    }
  }
  if (idx < 0) throw std::invalid_argument("config: target kernel not in sequence");
  return idx;
}

Nanos exec_duration(const ExecutionRecord& e) { return e.end_cpu - e.start_cpu; }

std::vector<Nanos> entry_cpu_times(const RunRecord& run) {
  auto sm = sync::sync_from_run(run);
  std::vector<Nanos> out;
  out.reserve(run.log.size());
  for (const auto& e : run.log) out.push_back(sync::gpu_to_cpu(sm, e.gpu_ts));
  return out;
}

// --- step 1: pre-timing -----------------------------------------------------

struct TimingResult {
  std::vector<Nanos> samples;
  Nanos est = 0;
  int detected_warmup = 0;
};

TimingResult time_kernel(const ExperimentConfig& cfg, const std::string& target) {
  sim::RunConfig rc = isolated_run_config(cfg, target, cfg.warmup_execs + 5);
  rc.pre_delay_range = {2 * cfg.logger.sample_interval, 2 * cfg.logger.sample_interval};
  rc.inter_exec_gap_range = {0, 0};
  auto [run, truth] = sim::simulate_run(rc, cfg.logger, cfg.clock,
                                        rng::mix64(cfg.seed ^ rng::fnv1a("timing")), "timing-0");
  std::vector<Nanos> all;
  for (const auto& e : run.executions) all.push_back(exec_duration(e));

  TimingResult t;
  t.samples.assign(all.end() - 5, all.end());
  std::vector<Nanos> sorted = t.samples;
  std::sort(sorted.begin(), sorted.end());
  t.est = sorted[2];
  t.detected_warmup = phase::detect_warmup_count(all);
  return t;
}

// --- step 4: settle probes ----------------------------------------------------

// Probe run whose execution block ends exactly on a sample boundary, so the
// final log entry averages over the block tail, never over trailing idle.
std::pair<RunRecord, sim::GroundTruth> aligned_probe_run(const ExperimentConfig& cfg,
                                                         const std::string& target, int execs) {
  const Nanos si = cfg.logger.sample_interval;
  const std::uint64_t seed = rng::mix64(cfg.seed ^ rng::fnv1a("probe"));

  sim::RunConfig rc = isolated_run_config(cfg, target, execs);
  rc.pre_delay_range = {2 * si, 2 * si};
  rc.inter_exec_gap_range = {0, 0};
  auto first = sim::simulate_run(rc, cfg.logger, cfg.clock, seed, "probe");

  Nanos block = first.first.executions.back().end_cpu - first.first.executions.front().start_cpu;
  Nanos boundary = ((2 * si + block + si - 1) / si) * si;
  rc.pre_delay_range = {boundary - block, boundary - block};
  return sim::simulate_run(rc, cfg.logger, cfg.clock, seed, "probe");
}

// Last log entry at or before the deadline, with half an interval of slack so
// sync-anchor jitter cannot drop an exactly-aligned boundary sample.
double trailing_power(const RunRecord& run, const std::vector<Nanos>& times, Nanos deadline,
                      Nanos sample_interval) {
  double v = run.log.front().power.total;
  for (size_t i = 0; i < times.size(); ++i) {
    if (times[i] <= deadline + sample_interval / 2) v = run.log[i].power.total;
  }
  return v;
}

// Mean logged power at the end state of an N-execution run.
double probe_power(const ExperimentConfig& cfg, const std::string& target, int execs) {
  auto [run, truth] = aligned_probe_run(cfg, target, execs);
  return trailing_power(run, entry_cpu_times(run), run.executions.back().end_cpu,
                        cfg.logger.sample_interval);
}

// Rise followed by a fall across the warm-up executions (throttle signature).
bool warmup_rise_then_fall(const ExperimentConfig& cfg, const std::string& target,
                           const phase::PhasePlan& plan) {
  auto [run, truth] = aligned_probe_run(cfg, target, plan.sse_execs_total);
  auto times = entry_cpu_times(run);
  std::vector<double> series;
  series.push_back(run.log.front().power.total);  // idle window before the block
  for (const auto& e : run.executions)
    series.push_back(trailing_power(run, times, e.end_cpu, cfg.logger.sample_interval));

  size_t peak = 0;
  for (size_t i = 1; i < series.size(); ++i)
    if (series[i] > series[peak]) peak = i;
  return peak > 0 && peak + 1 < series.size() && series[peak] > 1.02 * series.back();
}

// --- steps 6-9: analysis over a set of runs ----------------------------------

struct AnalysisParams {
  Nanos averaging_window = 0;
  sync::LoiMode loi_mode = sync::LoiMode::strict;
  double margin_rel = 0.0;
  binning::GuidanceEntry guidance;
  std::vector<Phase> phases;
  std::string kernel_id;
  std::function<PhaseBoundaries(const RunRecord&)> bounds_of;
};

struct AnalysisResult {
  std::vector<std::string> golden;
  Nanos anchor = 0;
  std::vector<LoiSample> lois;
  std::map<std::string, PhaseBoundaries> bounds;
  std::map<std::string, PhaseLoiStats> loi_stats;
  std::vector<ProfileReport> profiles;
  std::map<std::string, double> sse_ssp;
};

std::vector<LoiSample> lois_for_phase(const std::vector<LoiSample>& lois,
                                      const std::map<std::string, PhaseBoundaries>& bounds,
                                      Phase phase) {
  std::vector<LoiSample> out;
  for (const auto& s : lois) {
    const PhaseBoundaries& b = bounds.at(s.run_id);
    int want = phase == Phase::sse ? b.sse_index : b.ssp_index;
    if (s.exec_index == want) out.push_back(s);
  }
  return out;
}

// Steps 6-8: bin on SSP execution times, sync the golden runs, resolve LOIs
// and take stock of their sufficiency.
void collect_lois(const std::vector<RunRecord>& runs, const AnalysisParams& p,
                  AnalysisResult& r) {
  r = AnalysisResult{};
  try {
    std::map<std::string, Nanos> times;
    std::map<std::string, const RunRecord*> by_id;
    for (const auto& run : runs) {
      PhaseBoundaries b = p.bounds_of(run);
      times[run.run_id] = exec_duration(run.executions.at(static_cast<size_t>(b.ssp_index)));
      by_id[run.run_id] = &run;
    }
    auto bins = binning::bin_runs(times, p.margin_rel);
    r.golden = binning::select_golden_runs(bins);
    r.anchor = bins.front().anchor;

    for (const auto& id : r.golden) {
      const RunRecord& run = *by_id.at(id);
      r.bounds[id] = p.bounds_of(run);
      auto lois = sync::identify_loi(run, sync::sync_from_run(run), p.averaging_window,
                                     p.loi_mode);
      r.lois.insert(r.lois.end(), lois.begin(), lois.end());
    }
  } catch (const std::invalid_argument& e) {
    stage_fail("golden-run selection", e.what());
  }

  for (Phase phase : p.phases) {
    auto pl = lois_for_phase(r.lois, r.bounds, phase);
    auto s = binning::loi_sufficiency(pl, r.anchor, p.guidance);
    r.loi_stats[to_string(phase)] = {static_cast<int>(pl.size()), s.distinct, s.target, s.deficit};
  }
}

// Step 9: stitch per-phase, per-component profiles and fit them.
void build_profiles(const AnalysisParams& p, AnalysisResult& r) {
  for (Phase phase : p.phases) {
    for (Component comp : kAllComponents) {
      ProfileReport pr;
      try {
        pr.profile = stitch::build_profile(r.lois, r.bounds, phase, comp, p.kernel_id, r.anchor);
      } catch (const std::runtime_error& e) {
        stage_fail(std::string("stitch[") + to_string(phase) + "/" + to_string(comp) + "]",
                   e.what());
      }
      pr.mean_power_w = stitch::profile_mean(pr.profile);
      if (pr.profile.points.size() >= 5) pr.fit = stitch::fit_poly(pr.profile, 4);
      r.profiles.push_back(std::move(pr));
    }
  }

  if (p.phases.size() == 2) {
    for (Component comp : kAllComponents) {
      const stitch::StitchedProfile* sse = nullptr;
      const stitch::StitchedProfile* ssp = nullptr;
      for (const auto& pr : r.profiles) {
        if (pr.profile.component != comp) continue;
        (pr.profile.phase == Phase::sse ? sse : ssp) = &pr.profile;
      }
      r.sse_ssp[to_string(comp)] = phase::sse_ssp_error(*sse, *ssp);
    }
  }
}

std::vector<Phase> requested_phases(const ExperimentConfig& cfg) {
  if (cfg.mode == RunMode::interleaved) return {Phase::ssp};
  switch (cfg.phase) {
    case PhaseSelection::sse: return {Phase::sse};
    case PhaseSelection::ssp: return {Phase::ssp};
    case PhaseSelection::both: return {Phase::sse, Phase::ssp};
  }
  return {Phase::ssp};
}

void fill_from_analysis(ExperimentReport& report, AnalysisResult&& a, int total_runs) {
  report.golden_runs = a.golden;
  report.discarded_runs = total_runs - static_cast<int>(a.golden.size());
  report.golden_anchor = a.anchor;
  report.loi = std::move(a.loi_stats);
  report.profiles = std::move(a.profiles);
  report.sse_ssp_error_pct = std::move(a.sse_ssp);
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& cfg, ExperimentArtifacts* artifacts) {
  validate_config(cfg);
  const std::string target = effective_target(cfg);

  ExperimentReport report;
  report.config = cfg;
  report.config.target_kernel = target;

  // step 1: time the kernel five times, look up the guidance row
  TimingResult timing = time_kernel(cfg, target);
  report.timing_samples = timing.samples;
  report.exec_time_est = timing.est;
  report.detected_warmup = timing.detected_warmup;

  binning::GuidanceEntry guidance = binning::lookup_guidance(timing.est);
  if (cfg.margin_override) guidance.margin_rel = *cfg.margin_override;
  if (cfg.density_override) guidance.loi_density = *cfg.density_override;
  report.guidance = guidance;

  // steps 2-4: plan SSE/SSP executions per run
  phase::PhasePlan plan;
  plan.warmup_execs = cfg.warmup_execs;
  plan.sse_execs_total = cfg.sse_execs_total;
  plan.ssp_execs_total = phase::compute_ssp_executions(cfg.logger.averaging_window, timing.est,
                                                       cfg.sse_execs_total);
  if (cfg.mode == RunMode::isolated && warmup_rise_then_fall(cfg, target, plan)) {
    report.binary_search_used = true;
    try {
      report.binary_search_result = phase::binary_search_ssp(
          [&](int n) { return probe_power(cfg, target, n); }, plan.sse_execs_total, 64);
    } catch (const std::runtime_error& e) {
      stage_fail("ssp-planning", e.what());
    }
    plan.ssp_execs_total = std::max(plan.ssp_execs_total, report.binary_search_result);
  }
  report.plan = plan;

  const int tgt_index = cfg.mode == RunMode::interleaved ? target_flat_index(cfg, target) : -1;
  auto bounds_of = [&](const RunRecord& run) -> PhaseBoundaries {
    if (cfg.mode == RunMode::interleaved) return {0, tgt_index, tgt_index};
    return phase::classify_phases(plan, run);
  };

  // step 5: execute the planned runs with randomized pre-delays
  report.runs_planned = cfg.runs_override ? *cfg.runs_override : guidance.runs;
  std::vector<RunRecord> runs;
  std::map<std::string, sim::GroundTruth> truths;
  auto simulate_batch = [&](int count) {
    for (int i = 0; i < count; ++i) {
      int n = static_cast<int>(runs.size());
      sim::RunConfig rc = cfg.mode == RunMode::interleaved
                              ? sequence_run_config(cfg)
                              : isolated_run_config(cfg, target, plan.ssp_execs_total);
      auto [run, truth] = sim::simulate_run(rc, cfg.logger, cfg.clock,
                                            rng::mix64(cfg.seed ^ rng::fnv1a("runs")),
                                            run_name(n));
      truths.emplace(run.run_id, std::move(truth));
      runs.push_back(std::move(run));
    }
  };
  simulate_batch(report.runs_planned);

  AnalysisParams params;
  params.averaging_window = cfg.logger.averaging_window;
  params.loi_mode = cfg.loi_mode;
  params.margin_rel = guidance.margin_rel;
  params.guidance = guidance;
  params.phases = requested_phases(cfg);
  params.kernel_id = target;
  params.bounds_of = bounds_of;

  // steps 6-8, with one top-up round when LOIs fall short of the guidance
  AnalysisResult analysis;
  collect_lois(runs, params, analysis);
  int deficit = 0;
  for (const auto& [name, st] : analysis.loi_stats) deficit = std::max(deficit, st.deficit);
  if (deficit > 0) {
    report.topup_runs = deficit;
    simulate_batch(deficit);
    collect_lois(runs, params, analysis);
  }
  build_profiles(params, analysis);
  report.runs_executed = static_cast<int>(runs.size());
  report.bounds = analysis.bounds.at(analysis.golden.front());

  // reconstruction error against the sealed truth of a reference golden run
  report.reconstruction_available = true;
  report.reference_run = analysis.golden.front();
  const sim::GroundTruth& ref = truths.at(report.reference_run);
  const PhaseBoundaries ref_bounds = analysis.bounds.at(report.reference_run);
  for (const auto& pr : analysis.profiles) {
    int idx = pr.profile.phase == Phase::sse ? ref_bounds.sse_index : ref_bounds.ssp_index;
    auto err = stitch::profile_error(pr.profile, ref, idx);
    report.reconstruction.push_back({pr.profile.phase, pr.profile.component, err.rms, err.max_abs});
  }

  if (artifacts) {
    artifacts->lois = analysis.lois;
    artifacts->bounds_by_run = analysis.bounds;
    artifacts->runs = std::move(runs);
    artifacts->truths = std::move(truths);
  }
  fill_from_analysis(report, std::move(analysis), report.runs_executed);
  return report;
}

ExperimentReport analyze_runs(const std::vector<RunRecord>& runs, const ExperimentConfig& cfg) {
  if (runs.empty()) throw std::invalid_argument("analyze_runs: no runs");
  sim::validate(cfg.logger);

  std::string target = cfg.target_kernel;
  if (target.empty()) target = runs.front().executions.back().kernel_id;

  auto bounds_of = [&](const RunRecord& run) -> PhaseBoundaries {
    int last = -1;
    for (const auto& e : run.executions)
      if (e.kernel_id == target) last = e.exec_index;
    if (last < 0)
      stage_fail("phase-classify", "run " + run.run_id + " has no execution of '" + target + "'");
    int sse = std::min(cfg.warmup_execs, last);
    return {std::min(cfg.warmup_execs, sse), sse, last};
  };

  ExperimentReport report;
  report.config = cfg;
  report.config.target_kernel = target;

  std::vector<Nanos> durations;
  for (const auto& run : runs) {
    PhaseBoundaries b = bounds_of(run);
    durations.push_back(exec_duration(run.executions.at(static_cast<size_t>(b.ssp_index))));
  }
  std::vector<Nanos> sorted = durations;
  std::sort(sorted.begin(), sorted.end());
  report.exec_time_est = sorted[(sorted.size() - 1) / 2];
  if (runs.front().executions.size() >= 2) {
    std::vector<Nanos> first_durs;
    for (const auto& e : runs.front().executions) first_durs.push_back(exec_duration(e));
    report.detected_warmup = phase::detect_warmup_count(first_durs);
  }

  binning::GuidanceEntry guidance = binning::lookup_guidance(report.exec_time_est);
  if (cfg.margin_override) guidance.margin_rel = *cfg.margin_override;
  if (cfg.density_override) guidance.loi_density = *cfg.density_override;
  report.guidance = guidance;

  report.plan = {cfg.warmup_execs, cfg.sse_execs_total,
                 static_cast<int>(runs.front().executions.size())};
  report.runs_planned = static_cast<int>(runs.size());
  report.runs_executed = report.runs_planned;

  AnalysisParams params;
  params.averaging_window = cfg.logger.averaging_window;
  params.loi_mode = cfg.loi_mode;
  params.margin_rel = guidance.margin_rel;
  params.guidance = guidance;
  params.phases = requested_phases(cfg);
  params.kernel_id = target;
  params.bounds_of = bounds_of;

  AnalysisResult analysis;
  collect_lois(runs, params, analysis);
  build_profiles(params, analysis);
  report.bounds = analysis.bounds.at(analysis.golden.front());
  report.reconstruction_available = false;  // no ground truth for imported logs
  fill_from_analysis(report, std::move(analysis), report.runs_executed);
  return report;
}

}  // namespace fingrav::pipeline
