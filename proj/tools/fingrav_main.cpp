#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "fingrav/pipeline.hpp"

namespace {

using namespace fingrav;

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return nlohmann::json::parse(in);
}

// "40us", "1.5ms", "250000" (plain ns) -> nanoseconds
Nanos parse_duration(const std::string& text) {
  size_t pos = 0;
  double v = std::stod(text, &pos);
  std::string unit = text.substr(pos);
  double factor = 1.0;
  if (unit == "" || unit == "ns")
    factor = 1.0;
  else if (unit == "us")
    factor = 1e3;
  else if (unit == "ms")
    factor = 1e6;
  else if (unit == "s")
    factor = 1e9;
  else
    throw std::runtime_error("unknown duration unit '" + unit + "' (use ns/us/ms/s)");
  return static_cast<Nanos>(std::llround(v * factor));
}

struct CommonFlags {
  std::optional<std::uint64_t> seed;
  std::optional<int> runs;
  std::string phase;
  bool strict_loi = false;
  bool lenient_loi = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--seed", seed, "override the config seed");
    cmd->add_option("--runs", runs, "override the planned run count");
    cmd->add_option("--phase", phase, "profile phase: sse, ssp or both")
        ->check(CLI::IsMember({"sse", "ssp", "both"}));
    auto* s = cmd->add_flag("--strict-loi", strict_loi,
                            "keep only samples whose window fits inside one execution");
    cmd->add_flag("--lenient-loi", lenient_loi, "keep straddling samples, tagged mixed")
        ->excludes(s);
  }

  void apply(pipeline::ExperimentConfig& cfg) const {
    if (seed) cfg.seed = *seed;
    if (runs) cfg.runs_override = runs;
    if (phase == "sse") cfg.phase = pipeline::PhaseSelection::sse;
    if (phase == "ssp") cfg.phase = pipeline::PhaseSelection::ssp;
    if (phase == "both") cfg.phase = pipeline::PhaseSelection::both;
    if (strict_loi) cfg.loi_mode = sync::LoiMode::strict;
    if (lenient_loi) cfg.loi_mode = sync::LoiMode::lenient;
  }
};

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

void print_summary(const pipeline::ExperimentReport& report) {
  std::cout << "kernel " << report.config.target_kernel << ": exec time "
            << report.exec_time_est << " ns, " << report.runs_executed << " runs ("
            << report.golden_runs.size() << " golden, " << report.discarded_runs
            << " discarded)\n";
  std::cout << "plan: " << report.plan.warmup_execs << " warm-ups, SSE at exec "
            << report.bounds.sse_index << ", SSP at exec " << report.bounds.ssp_index << "\n";
  for (const auto& pr : report.profiles) {
    std::cout << "profile " << to_string(pr.profile.phase) << "/"
              << to_string(pr.profile.component) << ": " << pr.profile.points.size()
              << " points, mean " << pr.mean_power_w << " W\n";
  }
  for (const auto& [comp, err] : report.sse_ssp_error_pct)
    std::cout << "sse/ssp gap [" << comp << "]: " << err << " %\n";
}

void write_outputs(const pipeline::ExperimentReport& report,
                   const pipeline::ExperimentArtifacts* artifacts, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  if (artifacts) {
    pipeline::export_logs(artifacts->runs, out_dir + "/power_log.csv",
                          out_dir + "/run_meta.csv");
    pipeline::export_loi_csv(artifacts->lois, artifacts->bounds_by_run, out_dir + "/loi.csv");
  }
  write_file(out_dir + "/report.json", pipeline::report_to_string(report));
  pipeline::emit_plot_data(report, out_dir);
  std::cout << "wrote " << out_dir << "/report.json\n";
}

int cmd_simulate(const std::string& config_path, const CommonFlags& flags,
                 const std::string& out_dir) {
  pipeline::ExperimentConfig cfg = pipeline::parse_config(load_json(config_path));
  flags.apply(cfg);
  pipeline::ExperimentArtifacts artifacts;
  pipeline::ExperimentReport report = pipeline::run_experiment(cfg, &artifacts);
  write_outputs(report, &artifacts, out_dir);
  print_summary(report);
  return 0;
}

int cmd_analyze(const std::string& config_path, const std::string& power_csv,
                const std::string& meta_csv, const CommonFlags& flags,
                const std::string& out_dir) {
  pipeline::ExperimentConfig cfg;
  if (!config_path.empty()) cfg = pipeline::parse_config(load_json(config_path));
  flags.apply(cfg);
  auto runs = pipeline::import_logs(power_csv, meta_csv);
  pipeline::ExperimentReport report = pipeline::analyze_runs(runs, cfg);
  write_outputs(report, nullptr, out_dir);
  print_summary(report);
  return 0;
}

int cmd_guidance(const std::string& exec_time) {
  auto row = binning::lookup_guidance(parse_duration(exec_time));
  std::cout << "exec range: >" << row.exec_lo << " ns";
  if (row.exec_hi != binning::kOpenEnd) std::cout << " to " << row.exec_hi << " ns";
  std::cout << "\nruns: " << row.runs << "\nloi density: 1 per " << row.loi_density
            << " ns\nbinning margin: " << row.margin_rel * 100 << " %\n";
  if (row.extrapolated)
    std::cout << "note: execution time below the table floor; first row extrapolated\n";
  return 0;
}

int cmd_stitch(const std::string& loi_path, const std::string& phase_name,
               const std::string& component_name, std::optional<Nanos> anchor, int degree,
               const std::string& out_dir) {
  std::map<std::string, PhaseBoundaries> bounds;
  auto lois = pipeline::import_loi_csv(loi_path, &bounds);

  Phase phase = phase_name == "sse" ? Phase::sse : Phase::ssp;
  Component comp = Component::total;
  for (Component c : kAllComponents)
    if (component_name == to_string(c)) comp = c;

  Nanos anchor_ns = anchor.value_or(0);
  if (anchor_ns <= 0) {
    for (const auto& s : lois) anchor_ns = std::max(anchor_ns, s.toi + 1);
  }
  auto profile = stitch::build_profile(lois, bounds, phase, comp, "imported", anchor_ns);

  std::filesystem::create_directories(out_dir);
  pipeline::ExperimentReport shim;  // reuse the plot writer for one profile
  pipeline::ProfileReport pr;
  pr.profile = profile;
  pr.mean_power_w = stitch::profile_mean(profile);
  if (profile.points.size() >= static_cast<size_t>(degree + 1))
    pr.fit = stitch::fit_poly(profile, degree);
  shim.profiles.push_back(pr);
  pipeline::emit_plot_data(shim, out_dir);

  nlohmann::json fit = nullptr;
  if (pr.fit)
    fit = {{"degree", pr.fit->degree},
           {"coefficients", pr.fit->coefficients},
           {"rms_residual_w", pr.fit->rms_residual}};
  write_file(out_dir + "/fit.json",
             nlohmann::json{{"kernel_id", profile.kernel_id},
                            {"phase", to_string(phase)},
                            {"component", to_string(comp)},
                            {"exec_time_anchor_ns", anchor_ns},
                            {"points", profile.points.size()},
                            {"mean_power_w", pr.mean_power_w},
                            {"fit", fit}}
                 .dump(2) +
                 "\n");
  std::cout << "stitched " << profile.points.size() << " points, mean " << pr.mean_power_w
            << " W\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fine-grain GPU power profiling toolkit (simulator + analysis pipeline)"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "fingrav-out";
  std::string power_csv;
  std::string meta_csv;
  std::string exec_time;
  std::string loi_path;
  std::string phase_name = "ssp";
  std::string component_name = "total";
  std::optional<Nanos> anchor;
  int degree = 4;
  CommonFlags sim_flags;
  CommonFlags ana_flags;

  auto* sim = app.add_subcommand("simulate", "simulate a profiling experiment end to end");
  sim->add_option("--config", config_path, "experiment config (json)")->required();
  sim->add_option("--out", out_dir, "output directory");
  sim_flags.attach(sim);

  auto* ana = app.add_subcommand("analyze", "reconstruct profiles from captured logs");
  ana->add_option("--config", config_path, "analysis config (json), optional");
  ana->add_option("--power-log", power_csv, "power_log.csv")->required();
  ana->add_option("--run-meta", meta_csv, "run_meta.csv")->required();
  ana->add_option("--out", out_dir, "output directory");
  ana_flags.attach(ana);

  auto* gd = app.add_subcommand("guidance", "print the profiling guidance row for an exec time");
  gd->add_option("--exec-time", exec_time, "kernel execution time, e.g. 40us or 1.2ms")
      ->required();

  auto* st = app.add_subcommand("stitch", "stitch a profile from a LOI csv and fit it");
  st->add_option("--loi", loi_path, "loi.csv")->required();
  st->add_option("--phase", phase_name, "sse or ssp")->check(CLI::IsMember({"sse", "ssp"}));
  st->add_option("--component", component_name, "total, xcd, iod or hbm")
      ->check(CLI::IsMember({"total", "xcd", "iod", "hbm"}));
  st->add_option("--anchor-ns", anchor, "execution-time anchor (default: max TOI + 1)");
  st->add_option("--degree", degree, "fit degree");
  st->add_option("--out", out_dir, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(config_path, sim_flags, out_dir);
    if (ana->parsed()) return cmd_analyze(config_path, power_csv, meta_csv, ana_flags, out_dir);
    if (gd->parsed()) return cmd_guidance(exec_time);
    if (st->parsed())
      return cmd_stitch(loi_path, phase_name, component_name, anchor, degree, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
