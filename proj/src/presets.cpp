#include <stdexcept>

#include "fingrav/pipeline.hpp"

namespace fingrav::pipeline {

namespace {

using sim::ComponentCurves;
using sim::KernelSpec;
using sim::PowerCurve;
using sim::WarmupModel;

WarmupModel no_warmup_effects() {
  WarmupModel w;
  w.mode = WarmupModel::Mode::settle;
  w.slowdown = {1.0, 1.0, 1.0};
  w.power_scale = {1.0, 1.0, 1.0};
  return w;
}

ComponentPower idle_10w() { return {10.0, 4.0, 3.0, 2.0}; }

sim::ClockSpec default_clock(Nanos read_jitter) {
  sim::ClockSpec c;
  c.cpu_gpu_offset = 7'777'777;
  c.read_delay_mean = 800;
  c.read_delay_jitter = read_jitter;
  return c;
}

ExperimentConfig base_config(KernelSpec kernel) {
  ExperimentConfig cfg;
  cfg.sequence = {{kernel.kernel_id, 1}};
  cfg.target_kernel = kernel.kernel_id;
  cfg.kernels = {std::move(kernel)};
  cfg.logger.idle_power = idle_10w();
  cfg.clock = default_clock(0);
  return cfg;
}

// Long compute-bound kernel: flat power, execution longer than the averaging
// window, so the SSE and SSP executions coincide.
ExperimentConfig make_cb_long() {
  KernelSpec k;
  k.kernel_id = "cb-long";
  k.nominal_exec_time = 1'200'000;
  k.curve = {PowerCurve::constant(300), PowerCurve::constant(60), PowerCurve::constant(40),
             PowerCurve::constant(10)};
  k.warmup = no_warmup_effects();
  k.warmup.slowdown = {1.25, 1.10, 1.03};
  ExperimentConfig cfg = base_config(std::move(k));
  cfg.loi_mode = sync::LoiMode::strict;
  return cfg;
}

// Short kernel at 5% of the averaging window; every sample mixes idle or
// neighbouring executions, so analysis runs in lenient mode.
ExperimentConfig make_cb_short() {
  KernelSpec k;
  k.kernel_id = "cb-short";
  k.nominal_exec_time = 50'000;
  k.curve = {PowerCurve::constant(300), PowerCurve::constant(60), PowerCurve::constant(40),
             PowerCurve::constant(10)};
  k.warmup = no_warmup_effects();
  ExperimentConfig cfg = base_config(std::move(k));
  cfg.loi_mode = sync::LoiMode::lenient;
  return cfg;
}

ExperimentConfig make_ramp() {
  KernelSpec k;
  k.kernel_id = "ramp";
  k.nominal_exec_time = 2'500'000;
  k.exec_time_jitter_rel = 0.003;
  k.curve = {PowerCurve::ramp(250, 500), PowerCurve::constant(60), PowerCurve::ramp(30, 60),
             PowerCurve::constant(10)};
  k.warmup = no_warmup_effects();
  k.warmup.slowdown = {1.30, 1.10, 1.02};
  ExperimentConfig cfg = base_config(std::move(k));
  cfg.clock = default_clock(60);
  cfg.loi_mode = sync::LoiMode::strict;
  return cfg;
}

// Early executions over-stress power until the firmware model settles: power
// scaled up and executions stretched during warm-up, then back to nominal.
ExperimentConfig make_throttle() {
  KernelSpec k;
  k.kernel_id = "throttle";
  k.nominal_exec_time = 1'500'000;
  k.curve = {PowerCurve::constant(320), PowerCurve::constant(50), PowerCurve::constant(40),
             PowerCurve::constant(10)};
  k.warmup.mode = WarmupModel::Mode::throttle;
  k.warmup.slowdown = {1.35, 1.15, 1.05};
  k.warmup.power_scale = {1.30, 1.12, 1.04};
  ExperimentConfig cfg = base_config(std::move(k));
  cfg.loi_mode = sync::LoiMode::strict;
  return cfg;
}

// Ramp kernel with random idle gaps injected between executions; straddling
// samples mix in run-specific idle, which is what lenient mode lets through.
ExperimentConfig make_gap_ramp() {
  KernelSpec k;
  k.kernel_id = "gap-ramp";
  k.nominal_exec_time = 1'500'000;
  k.curve = {PowerCurve::ramp(250, 500), PowerCurve::constant(60), PowerCurve::ramp(30, 60),
             PowerCurve::constant(10)};
  k.warmup = no_warmup_effects();
  ExperimentConfig cfg = base_config(std::move(k));
  cfg.gap_range = {50'000, 400'000};
  cfg.loi_mode = sync::LoiMode::strict;
  return cfg;
}

KernelSpec light_kernel() {
  KernelSpec k;
  k.kernel_id = "light";
  k.nominal_exec_time = 50'000;
  k.curve = {PowerCurve::constant(220), PowerCurve::constant(40), PowerCurve::constant(30),
             PowerCurve::constant(10)};
  k.warmup = no_warmup_effects();
  return k;
}

// A compute-light kernel measured right after a block of high-power
// executions; its sampled windows are dominated by the preceding kernel.
ExperimentConfig make_interleaved_light() {
  KernelSpec heavy;
  heavy.kernel_id = "heavy";
  heavy.nominal_exec_time = 250'000;
  heavy.curve = {PowerCurve::constant(450), PowerCurve::constant(80), PowerCurve::constant(50),
                 PowerCurve::constant(20)};
  heavy.warmup = no_warmup_effects();

  ExperimentConfig cfg;
  cfg.kernels = {heavy, light_kernel()};
  cfg.sequence = {{"heavy", 8}, {"light", 1}};
  cfg.target_kernel = "light";
  cfg.mode = RunMode::interleaved;
  cfg.phase = PhaseSelection::ssp;
  cfg.loi_mode = sync::LoiMode::lenient;
  cfg.logger.idle_power = idle_10w();
  cfg.clock = default_clock(0);
  return cfg;
}

ExperimentConfig make_light_isolated() {
  ExperimentConfig cfg = base_config(light_kernel());
  cfg.loi_mode = sync::LoiMode::lenient;
  return cfg;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"cb-long", "cb-short", "ramp", "throttle", "gap-ramp", "interleaved-light",
          "light-isolated"};
}

ExperimentConfig preset_config(const std::string& name) {
  ExperimentConfig cfg;
  if (name == "cb-long")
    cfg = make_cb_long();
  else if (name == "cb-short")
    cfg = make_cb_short();
  else if (name == "ramp")
    cfg = make_ramp();
  else if (name == "throttle")
    cfg = make_throttle();
  else if (name == "gap-ramp")
    cfg = make_gap_ramp();
  else if (name == "interleaved-light")
    cfg = make_interleaved_light();
  else if (name == "light-isolated")
    cfg = make_light_isolated();
  else
    throw std::invalid_argument("unknown preset '" + name + "'");
  cfg.preset = name;
  return cfg;
}

}  // namespace fingrav::pipeline
