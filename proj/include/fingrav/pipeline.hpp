#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fingrav/binning.hpp"
#include "fingrav/phase.hpp"
#include "fingrav/sim.hpp"
#include "fingrav/stitch.hpp"
#include "fingrav/sync.hpp"
#include "fingrav/types.hpp"

namespace fingrav::pipeline {

inline constexpr const char* kReportVersion = "fingrav-report/1";

enum class RunMode { isolated, interleaved };
enum class PhaseSelection { sse, ssp, both };

struct ExperimentConfig {
  std::string preset;  // name echo when built from a preset
  std::vector<sim::KernelSpec> kernels;
  std::vector<std::pair<std::string, int>> sequence;  // (kernel_id, repetitions)
  std::string target_kernel;                          // defaults to last sequence entry
  RunMode mode = RunMode::isolated;
  PhaseSelection phase = PhaseSelection::both;
  sync::LoiMode loi_mode = sync::LoiMode::strict;
  sim::LoggerSpec logger;
  sim::ClockSpec clock;
  std::uint64_t seed = 1;
  std::pair<Nanos, Nanos> pre_delay_range{0, 999'999};
  std::pair<Nanos, Nanos> gap_range{0, 0};
  int warmup_execs = 3;
  int sse_execs_total = 4;
  std::optional<int> runs_override;
  std::optional<double> margin_override;
  std::optional<Nanos> density_override;
};

std::vector<std::string> preset_names();
ExperimentConfig preset_config(const std::string& name);

/// Parse a config document; unknown keys are errors. "preset" loads the named
/// base config, every other key overrides it.
ExperimentConfig parse_config(const nlohmann::json& doc);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

struct ProfileReport {
  stitch::StitchedProfile profile;
  std::optional<stitch::PolyFit> fit;
  double mean_power_w = 0.0;
};

struct ReconstructionEntry {
  Phase phase = Phase::ssp;
  Component component = Component::total;
  double rms_w = 0.0;
  double max_abs_w = 0.0;
};

struct PhaseLoiStats {
  int count = 0;
  int distinct = 0;
  int target = 0;
  int deficit = 0;
};

struct ExperimentReport {
  ExperimentConfig config;

  std::vector<Nanos> timing_samples;  // five pre-timing executions
  Nanos exec_time_est = 0;
  int detected_warmup = 0;
  binning::GuidanceEntry guidance;

  phase::PhasePlan plan;
  bool binary_search_used = false;
  int binary_search_result = -1;

  int runs_planned = 0;
  int runs_executed = 0;
  int topup_runs = 0;
  std::vector<std::string> golden_runs;
  int discarded_runs = 0;
  Nanos golden_anchor = 0;

  PhaseBoundaries bounds;  // plan-derived boundaries applied to every golden run
  std::map<std::string, PhaseLoiStats> loi;  // keyed by phase name

  std::vector<ProfileReport> profiles;
  std::map<std::string, double> sse_ssp_error_pct;  // per component; empty unless both phases

  bool reconstruction_available = false;
  std::string reference_run;
  std::vector<ReconstructionEntry> reconstruction;
};

/// Simulation side products kept out of the report proper.
struct ExperimentArtifacts {
  std::vector<RunRecord> runs;  // every executed run, discarded ones included
  std::vector<LoiSample> lois;  // golden-run LOIs
  std::map<std::string, PhaseBoundaries> bounds_by_run;
  std::map<std::string, sim::GroundTruth> truths;
};

/// The full nine-step experiment over the simulator. Stage failures surface
/// as errors naming the offending stage.
ExperimentReport run_experiment(const ExperimentConfig& cfg,
                                ExperimentArtifacts* artifacts = nullptr);

/// Analysis half only, over imported runs: binning, sync, LOIs, stitching. No
/// ground truth, so the reconstruction section is marked unavailable.
ExperimentReport analyze_runs(const std::vector<RunRecord>& runs, const ExperimentConfig& cfg);

// --- file formats -----------------------------------------------------------

std::vector<RunRecord> import_logs(const std::string& power_csv_path,
                                   const std::string& runmeta_csv_path);
void export_logs(const std::vector<RunRecord>& runs, const std::string& power_csv_path,
                 const std::string& runmeta_csv_path);

void export_loi_csv(const std::vector<LoiSample>& lois,
                    const std::map<std::string, PhaseBoundaries>& bounds_by_run,
                    const std::string& path);
std::vector<LoiSample> import_loi_csv(const std::string& path,
                                      std::map<std::string, PhaseBoundaries>* bounds_out);

nlohmann::json report_to_json(const ExperimentReport& report);
std::string report_to_string(const ExperimentReport& report);

/// Per-component profile CSVs plus a two-column gnuplot series per phase
/// (total power). Deterministic names and bytes.
std::vector<std::string> emit_plot_data(const ExperimentReport& report,
                                        const std::string& out_dir);

}  // namespace fingrav::pipeline
