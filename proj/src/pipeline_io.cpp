#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "fingrav/pipeline.hpp"

namespace fingrav::pipeline {

namespace {

using nlohmann::json;

std::string fmt_double(double v) {
  char buf[40];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, p};
}

double parse_double(const std::string& s, const std::string& ctx) {
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw std::runtime_error(ctx + ": bad floating-point value '" + s + "'");
  return v;
}

std::int64_t parse_int(const std::string& s, const std::string& ctx) {
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw std::runtime_error(ctx + ": bad integer value '" + s + "'");
  return v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

struct CsvReader {
  std::ifstream in;
  std::string path;
  int line_no = 0;

  explicit CsvReader(const std::string& p) : in(p), path(p) {
    if (!in) throw std::runtime_error("cannot open " + p);
  }

  bool next(std::vector<std::string>& fields) {
    std::string line;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      fields = split_csv(line);
      return true;
    }
    return false;
  }

  std::string where() const { return path + ":" + std::to_string(line_no); }
};

void check_header(const std::vector<std::string>& got, const std::vector<std::string>& required,
                  const std::vector<std::string>& optional, const std::string& path) {
  for (size_t i = 0; i < required.size(); ++i) {
    if (i >= got.size() || got[i] != required[i])
      throw std::runtime_error(path + ": missing column '" + required[i] + "'");
  }
  for (size_t i = required.size(); i < got.size(); ++i) {
    size_t j = i - required.size();
    if (j >= optional.size() || got[i] != optional[j])
      throw std::runtime_error(path + ": unexpected column '" + got[i] + "'");
  }
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// power_log.csv / run_meta.csv
// ---------------------------------------------------------------------------

void export_logs(const std::vector<RunRecord>& runs, const std::string& power_csv_path,
                 const std::string& runmeta_csv_path) {
  auto power = open_out(power_csv_path);
  power << "run_id,sample_idx,gpu_ts_ticks,tick_period_ns,p_total_w,p_xcd_w,p_iod_w,p_hbm_w\n";
  for (const auto& run : runs) {
    for (size_t i = 0; i < run.log.size(); ++i) {
      const auto& e = run.log[i];
      power << run.run_id << ',' << i << ',' << e.gpu_ts.ticks << ',' << e.gpu_ts.tick_period
            << ',' << fmt_double(e.power.total) << ',' << fmt_double(e.power.xcd) << ','
            << fmt_double(e.power.iod) << ',' << fmt_double(e.power.hbm) << '\n';
    }
  }

  auto meta = open_out(runmeta_csv_path);
  meta << "run_id,t0_gpu_ticks,tc_cpu_ns,read_delay_ns,exec_index,kernel_id,start_cpu_ns,"
          "end_cpu_ns,pre_delay_ns\n";
  for (const auto& run : runs) {
    for (const auto& e : run.executions) {
      meta << run.run_id << ',' << run.t0_gpu.ticks << ',' << run.tc_cpu << ',' << run.read_delay
           << ',' << e.exec_index << ',' << e.kernel_id << ',' << e.start_cpu << ',' << e.end_cpu
           << ',' << run.pre_delay << '\n';
    }
  }
}

std::vector<RunRecord> import_logs(const std::string& power_csv_path,
                                   const std::string& runmeta_csv_path) {
  std::vector<RunRecord> runs;
  std::map<std::string, size_t> index;

  CsvReader meta(runmeta_csv_path);
  std::vector<std::string> f;
  if (!meta.next(f)) throw std::runtime_error(runmeta_csv_path + ": empty file");
  check_header(f,
               {"run_id", "t0_gpu_ticks", "tc_cpu_ns", "read_delay_ns", "exec_index", "kernel_id",
                "start_cpu_ns", "end_cpu_ns"},
               {"pre_delay_ns"}, runmeta_csv_path);
  const bool has_pre = f.size() == 9;
  while (meta.next(f)) {
    if (f.size() != (has_pre ? 9u : 8u))
      throw std::runtime_error(meta.where() + ": wrong field count");
    const std::string& id = f[0];
    auto [it, fresh] = index.try_emplace(id, runs.size());
    if (fresh) {
      RunRecord r;
      r.run_id = id;
      r.t0_gpu.ticks = parse_int(f[1], meta.where());
      r.tc_cpu = parse_int(f[2], meta.where());
      r.read_delay = parse_int(f[3], meta.where());
      if (has_pre) r.pre_delay = parse_int(f[8], meta.where());
      runs.push_back(std::move(r));
    }
    RunRecord& run = runs[it->second];
    if (run.t0_gpu.ticks != parse_int(f[1], meta.where()) ||
        run.tc_cpu != parse_int(f[2], meta.where()) ||
        run.read_delay != parse_int(f[3], meta.where()))
      throw std::runtime_error(meta.where() + ": sync anchor differs within run " + id);
    ExecutionRecord e;
    e.exec_index = static_cast<int>(parse_int(f[4], meta.where()));
    e.kernel_id = f[5];
    e.start_cpu = parse_int(f[6], meta.where());
    e.end_cpu = parse_int(f[7], meta.where());
    if (e.exec_index != static_cast<int>(run.executions.size()))
      throw std::runtime_error(meta.where() + ": exec_index must be contiguous from 0");
    if (e.end_cpu <= e.start_cpu)
      throw std::runtime_error(meta.where() + ": execution end must exceed start");
    if (!run.executions.empty() && e.start_cpu < run.executions.back().end_cpu)
      throw std::runtime_error(meta.where() + ": executions overlap or are out of order");
    run.executions.push_back(std::move(e));
  }

  CsvReader power(power_csv_path);
  if (!power.next(f)) throw std::runtime_error(power_csv_path + ": empty file");
  check_header(f,
               {"run_id", "sample_idx", "gpu_ts_ticks", "tick_period_ns", "p_total_w", "p_xcd_w",
                "p_iod_w", "p_hbm_w"},
               {}, power_csv_path);
  while (power.next(f)) {
    if (f.size() != 8) throw std::runtime_error(power.where() + ": wrong field count");
    auto it = index.find(f[0]);
    if (it == index.end())
      throw std::runtime_error(power.where() + ": run '" + f[0] + "' not present in run_meta");
    RunRecord& run = runs[it->second];
    PowerLogEntry e;
    e.gpu_ts.ticks = parse_int(f[2], power.where());
    e.gpu_ts.tick_period = parse_int(f[3], power.where());
    e.power = {parse_double(f[4], power.where()), parse_double(f[5], power.where()),
               parse_double(f[6], power.where()), parse_double(f[7], power.where())};
    if (e.gpu_ts.tick_period <= 0)
      throw std::runtime_error(power.where() + ": tick_period_ns must be > 0");
    if (!run.log.empty()) {
      if (run.log.back().gpu_ts.tick_period != e.gpu_ts.tick_period)
        throw std::runtime_error(power.where() + ": tick_period_ns differs within run " + f[0]);
      if (e.gpu_ts.ticks < run.log.back().gpu_ts.ticks)
        throw std::runtime_error(power.where() + ": out-of-order gpu_ts_ticks in run " + f[0]);
    }
    run.log.push_back(std::move(e));
  }

  for (auto& run : runs) {
    if (!run.log.empty()) run.t0_gpu.tick_period = run.log.front().gpu_ts.tick_period;
  }
  return runs;
}

// ---------------------------------------------------------------------------
// loi.csv
// ---------------------------------------------------------------------------

namespace {

std::string phase_label(int exec_index, const PhaseBoundaries& b) {
  if (exec_index == b.ssp_index && exec_index == b.sse_index) return "sse+ssp";
  if (exec_index == b.ssp_index) return "ssp";
  if (exec_index == b.sse_index) return "sse";
  if (exec_index < b.warmup_count) return "warmup";
  return "other";
}

}  // namespace

void export_loi_csv(const std::vector<LoiSample>& lois,
                    const std::map<std::string, PhaseBoundaries>& bounds_by_run,
                    const std::string& path) {
  auto out = open_out(path);
  out << "run_id,exec_index,phase,toi_ns,p_total_w,p_xcd_w,p_iod_w,p_hbm_w,mixed\n";
  for (const auto& s : lois) {
    auto it = bounds_by_run.find(s.run_id);
    std::string label = it == bounds_by_run.end() ? "other" : phase_label(s.exec_index, it->second);
    out << s.run_id << ',' << s.exec_index << ',' << label << ',' << s.toi << ','
        << fmt_double(s.power.total) << ',' << fmt_double(s.power.xcd) << ','
        << fmt_double(s.power.iod) << ',' << fmt_double(s.power.hbm) << ',' << (s.mixed ? 1 : 0)
        << '\n';
  }
}

std::vector<LoiSample> import_loi_csv(const std::string& path,
                                      std::map<std::string, PhaseBoundaries>* bounds_out) {
  CsvReader in(path);
  std::vector<std::string> f;
  if (!in.next(f)) throw std::runtime_error(path + ": empty file");
  check_header(f,
               {"run_id", "exec_index", "phase", "toi_ns", "p_total_w", "p_xcd_w", "p_iod_w",
                "p_hbm_w", "mixed"},
               {}, path);
  std::vector<LoiSample> lois;
  std::map<std::string, PhaseBoundaries> bounds;
  while (in.next(f)) {
    if (f.size() != 9) throw std::runtime_error(in.where() + ": wrong field count");
    LoiSample s;
    s.run_id = f[0];
    s.exec_index = static_cast<int>(parse_int(f[1], in.where()));
    s.toi = parse_int(f[3], in.where());
    s.power = {parse_double(f[4], in.where()), parse_double(f[5], in.where()),
               parse_double(f[6], in.where()), parse_double(f[7], in.where())};
    s.mixed = parse_int(f[8], in.where()) != 0;
    auto& b = bounds.try_emplace(s.run_id, PhaseBoundaries{0, -1, -1}).first->second;
    if (f[2] == "sse" || f[2] == "sse+ssp") b.sse_index = s.exec_index;
    if (f[2] == "ssp" || f[2] == "sse+ssp") b.ssp_index = s.exec_index;
    lois.push_back(std::move(s));
  }
  if (bounds_out) *bounds_out = std::move(bounds);
  return lois;
}

// ---------------------------------------------------------------------------
// Config documents
// ---------------------------------------------------------------------------

namespace {

void check_keys(const json& j, const std::vector<std::string>& allowed, const std::string& ctx) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      throw std::invalid_argument("config: unknown key '" + it.key() + "' in " + ctx);
  }
}

sim::PowerCurve parse_curve(const json& j, const std::string& ctx) {
  if (!j.is_object()) throw std::invalid_argument("config: " + ctx + " must be an object");
  std::string shape = j.at("shape").get<std::string>();
  if (shape == "constant") {
    check_keys(j, {"shape", "watts"}, ctx);
    return sim::PowerCurve::constant(j.at("watts").get<double>());
  }
  if (shape == "linear-ramp") {
    check_keys(j, {"shape", "from_watts", "to_watts"}, ctx);
    return sim::PowerCurve::ramp(j.at("from_watts").get<double>(),
                                 j.at("to_watts").get<double>());
  }
  if (shape == "piecewise") {
    check_keys(j, {"shape", "knots"}, ctx);
    std::vector<std::pair<double, double>> knots;
    for (const auto& k : j.at("knots"))
      knots.emplace_back(k.at(0).get<double>(), k.at(1).get<double>());
    return sim::PowerCurve::piecewise(std::move(knots));
  }
  throw std::invalid_argument("config: " + ctx + " has unknown shape '" + shape + "'");
}

json curve_to_json(const sim::PowerCurve& c) {
  switch (c.shape) {
    case sim::CurveShape::constant:
      return {{"shape", "constant"}, {"watts", c.level}};
    case sim::CurveShape::linear_ramp:
      return {{"shape", "linear-ramp"}, {"from_watts", c.ramp_from}, {"to_watts", c.ramp_to}};
    case sim::CurveShape::piecewise: {
      json knots = json::array();
      for (const auto& [f, w] : c.knots) knots.push_back({f, w});
      return {{"shape", "piecewise"}, {"knots", knots}};
    }
  }
  return {};
}

sim::KernelSpec parse_kernel(const json& j) {
  check_keys(j,
             {"kernel_id", "nominal_exec_time_ns", "exec_time_jitter_rel", "outlier_prob",
              "outlier_scale", "curve", "warmup"},
             "kernel");
  sim::KernelSpec k;
  k.kernel_id = j.at("kernel_id").get<std::string>();
  k.nominal_exec_time = j.at("nominal_exec_time_ns").get<Nanos>();
  k.exec_time_jitter_rel = j.value("exec_time_jitter_rel", 0.0);
  k.outlier_prob = j.value("outlier_prob", 0.0);
  k.outlier_scale = j.value("outlier_scale", 3.0);
  const json& c = j.at("curve");
  check_keys(c, {"xcd", "iod", "hbm", "other"}, "curve");
  k.curve.xcd = parse_curve(c.at("xcd"), "curve.xcd");
  k.curve.iod = parse_curve(c.at("iod"), "curve.iod");
  k.curve.hbm = parse_curve(c.at("hbm"), "curve.hbm");
  k.curve.other = parse_curve(c.at("other"), "curve.other");
  if (j.contains("warmup")) {
    const json& w = j.at("warmup");
    check_keys(w, {"mode", "warmup_execs", "slowdown", "power_scale"}, "warmup");
    std::string mode = w.value("mode", "settle");
    if (mode == "settle")
      k.warmup.mode = sim::WarmupModel::Mode::settle;
    else if (mode == "throttle")
      k.warmup.mode = sim::WarmupModel::Mode::throttle;
    else
      throw std::invalid_argument("config: unknown warmup mode '" + mode + "'");
    k.warmup.warmup_execs = w.value("warmup_execs", 3);
    if (w.contains("slowdown")) k.warmup.slowdown = w.at("slowdown").get<std::vector<double>>();
    if (w.contains("power_scale"))
      k.warmup.power_scale = w.at("power_scale").get<std::vector<double>>();
  }
  return k;
}

json kernel_to_json(const sim::KernelSpec& k) {
  json w{{"mode", k.warmup.mode == sim::WarmupModel::Mode::settle ? "settle" : "throttle"},
         {"warmup_execs", k.warmup.warmup_execs},
         {"slowdown", k.warmup.slowdown},
         {"power_scale", k.warmup.power_scale}};
  return {{"kernel_id", k.kernel_id},
          {"nominal_exec_time_ns", k.nominal_exec_time},
          {"exec_time_jitter_rel", k.exec_time_jitter_rel},
          {"outlier_prob", k.outlier_prob},
          {"outlier_scale", k.outlier_scale},
          {"curve",
           {{"xcd", curve_to_json(k.curve.xcd)},
            {"iod", curve_to_json(k.curve.iod)},
            {"hbm", curve_to_json(k.curve.hbm)},
            {"other", curve_to_json(k.curve.other)}}},
          {"warmup", w}};
}

ComponentPower parse_power(const json& j, const std::string& ctx) {
  check_keys(j, {"total", "xcd", "iod", "hbm"}, ctx);
  return {j.at("total").get<double>(), j.at("xcd").get<double>(), j.at("iod").get<double>(),
          j.at("hbm").get<double>()};
}

std::pair<Nanos, Nanos> parse_range(const json& j, const std::string& ctx) {
  if (!j.is_array() || j.size() != 2)
    throw std::invalid_argument("config: " + ctx + " must be [min, max]");
  return {j.at(0).get<Nanos>(), j.at(1).get<Nanos>()};
}

}  // namespace

ExperimentConfig parse_config(const json& doc) {
  check_keys(doc,
             {"preset", "kernels", "sequence", "target", "mode", "phase", "loi_mode", "logger",
              "clock", "seed", "pre_delay_range_ns", "gap_range_ns", "warmup_execs",
              "sse_execs_total", "runs", "margin_rel", "loi_density_ns"},
             "top level");

  ExperimentConfig cfg;
  if (doc.contains("preset")) cfg = preset_config(doc.at("preset").get<std::string>());

  if (doc.contains("kernels")) {
    cfg.kernels.clear();
    for (const auto& k : doc.at("kernels")) cfg.kernels.push_back(parse_kernel(k));
  }
  if (doc.contains("sequence")) {
    cfg.sequence.clear();
    for (const auto& s : doc.at("sequence"))
      cfg.sequence.emplace_back(s.at(0).get<std::string>(), s.at(1).get<int>());
  } else if (doc.contains("kernels") && cfg.sequence.empty() && cfg.kernels.size() == 1) {
    cfg.sequence = {{cfg.kernels.front().kernel_id, 1}};
  }
  if (doc.contains("target")) cfg.target_kernel = doc.at("target").get<std::string>();
  if (doc.contains("mode")) {
    std::string m = doc.at("mode").get<std::string>();
    if (m == "isolated")
      cfg.mode = RunMode::isolated;
    else if (m == "interleaved")
      cfg.mode = RunMode::interleaved;
    else
      throw std::invalid_argument("config: unknown mode '" + m + "'");
  }
  if (doc.contains("phase")) {
    std::string p = doc.at("phase").get<std::string>();
    if (p == "sse")
      cfg.phase = PhaseSelection::sse;
    else if (p == "ssp")
      cfg.phase = PhaseSelection::ssp;
    else if (p == "both")
      cfg.phase = PhaseSelection::both;
    else
      throw std::invalid_argument("config: unknown phase '" + p + "'");
  }
  if (doc.contains("loi_mode")) {
    std::string m = doc.at("loi_mode").get<std::string>();
    if (m == "strict")
      cfg.loi_mode = sync::LoiMode::strict;
    else if (m == "lenient")
      cfg.loi_mode = sync::LoiMode::lenient;
    else
      throw std::invalid_argument("config: unknown loi_mode '" + m + "'");
  }
  if (doc.contains("logger")) {
    const json& l = doc.at("logger");
    check_keys(l, {"sample_interval_ns", "averaging_window_ns", "idle_power"}, "logger");
    if (l.contains("sample_interval_ns")) {
      cfg.logger.sample_interval = l.at("sample_interval_ns").get<Nanos>();
      cfg.logger.averaging_window = cfg.logger.sample_interval;
    }
    if (l.contains("averaging_window_ns"))
      cfg.logger.averaging_window = l.at("averaging_window_ns").get<Nanos>();
    if (l.contains("idle_power"))
      cfg.logger.idle_power = parse_power(l.at("idle_power"), "idle_power");
  }
  if (doc.contains("clock")) {
    const json& c = doc.at("clock");
    check_keys(c,
               {"cpu_gpu_offset_ns", "read_delay_mean_ns", "read_delay_jitter_ns", "drift_ppb",
                "tick_period_ns"},
               "clock");
    if (c.contains("cpu_gpu_offset_ns")) cfg.clock.cpu_gpu_offset = c.at("cpu_gpu_offset_ns").get<Nanos>();
    if (c.contains("read_delay_mean_ns")) cfg.clock.read_delay_mean = c.at("read_delay_mean_ns").get<Nanos>();
    if (c.contains("read_delay_jitter_ns"))
      cfg.clock.read_delay_jitter = c.at("read_delay_jitter_ns").get<Nanos>();
    if (c.contains("drift_ppb")) cfg.clock.drift_ppb = c.at("drift_ppb").get<double>();
    if (c.contains("tick_period_ns")) cfg.clock.tick_period = c.at("tick_period_ns").get<Nanos>();
  }
  if (doc.contains("seed")) cfg.seed = doc.at("seed").get<std::uint64_t>();
  if (doc.contains("pre_delay_range_ns"))
    cfg.pre_delay_range = parse_range(doc.at("pre_delay_range_ns"), "pre_delay_range_ns");
  if (doc.contains("gap_range_ns"))
    cfg.gap_range = parse_range(doc.at("gap_range_ns"), "gap_range_ns");
  if (doc.contains("warmup_execs")) cfg.warmup_execs = doc.at("warmup_execs").get<int>();
  if (doc.contains("sse_execs_total")) cfg.sse_execs_total = doc.at("sse_execs_total").get<int>();
  if (doc.contains("runs")) cfg.runs_override = doc.at("runs").get<int>();
  if (doc.contains("margin_rel")) cfg.margin_override = doc.at("margin_rel").get<double>();
  if (doc.contains("loi_density_ns")) cfg.density_override = doc.at("loi_density_ns").get<Nanos>();
  return cfg;
}

json config_to_json(const ExperimentConfig& cfg) {
  json kernels = json::array();
  for (const auto& k : cfg.kernels) kernels.push_back(kernel_to_json(k));
  json sequence = json::array();
  for (const auto& [id, reps] : cfg.sequence) sequence.push_back({id, reps});

  json j{{"preset", cfg.preset},
         {"kernels", kernels},
         {"sequence", sequence},
         {"target", cfg.target_kernel},
         {"mode", cfg.mode == RunMode::isolated ? "isolated" : "interleaved"},
         {"phase", cfg.phase == PhaseSelection::sse   ? "sse"
                   : cfg.phase == PhaseSelection::ssp ? "ssp"
                                                      : "both"},
         {"loi_mode", cfg.loi_mode == sync::LoiMode::strict ? "strict" : "lenient"},
         {"logger",
          {{"sample_interval_ns", cfg.logger.sample_interval},
           {"averaging_window_ns", cfg.logger.averaging_window},
           {"idle_power",
            {{"total", cfg.logger.idle_power.total},
             {"xcd", cfg.logger.idle_power.xcd},
             {"iod", cfg.logger.idle_power.iod},
             {"hbm", cfg.logger.idle_power.hbm}}}}},
         {"clock",
          {{"cpu_gpu_offset_ns", cfg.clock.cpu_gpu_offset},
           {"read_delay_mean_ns", cfg.clock.read_delay_mean},
           {"read_delay_jitter_ns", cfg.clock.read_delay_jitter},
           {"drift_ppb", cfg.clock.drift_ppb},
           {"tick_period_ns", cfg.clock.tick_period}}},
         {"seed", cfg.seed},
         {"pre_delay_range_ns", {cfg.pre_delay_range.first, cfg.pre_delay_range.second}},
         {"gap_range_ns", {cfg.gap_range.first, cfg.gap_range.second}},
         {"warmup_execs", cfg.warmup_execs},
         {"sse_execs_total", cfg.sse_execs_total}};
  if (cfg.runs_override) j["runs"] = *cfg.runs_override;
  if (cfg.margin_override) j["margin_rel"] = *cfg.margin_override;
  if (cfg.density_override) j["loi_density_ns"] = *cfg.density_override;
  return j;
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

json report_to_json(const ExperimentReport& report) {
  json j;
  j["version"] = kReportVersion;
  j["config"] = config_to_json(report.config);
  j["timing"] = {{"samples_ns", report.timing_samples},
                 {"exec_time_est_ns", report.exec_time_est},
                 {"detected_warmup", report.detected_warmup}};
  j["guidance"] = {{"exec_range_lo_ns", report.guidance.exec_lo},
                   {"exec_range_hi_ns",
                    report.guidance.exec_hi == binning::kOpenEnd
                        ? json(nullptr)
                        : json(report.guidance.exec_hi)},
                   {"runs", report.guidance.runs},
                   {"loi_density_ns", report.guidance.loi_density},
                   {"margin_rel", report.guidance.margin_rel},
                   {"extrapolated", report.guidance.extrapolated}};
  j["plan"] = {{"warmup_execs", report.plan.warmup_execs},
               {"sse_execs_total", report.plan.sse_execs_total},
               {"ssp_execs_total", report.plan.ssp_execs_total},
               {"binary_search_used", report.binary_search_used},
               {"binary_search_result",
                report.binary_search_used ? json(report.binary_search_result) : json(nullptr)}};
  j["runs"] = {{"planned", report.runs_planned},
               {"executed", report.runs_executed},
               {"topup", report.topup_runs},
               {"golden", report.golden_runs},
               {"discarded", report.discarded_runs},
               {"golden_anchor_ns", report.golden_anchor}};
  j["phases"] = {{"warmup_count", report.bounds.warmup_count},
                 {"sse_index", report.bounds.sse_index},
                 {"ssp_index", report.bounds.ssp_index}};
  json loi = json::object();
  for (const auto& [name, st] : report.loi)
    loi[name] = {{"count", st.count},
                 {"distinct", st.distinct},
                 {"target", st.target},
                 {"deficit", st.deficit}};
  j["loi"] = loi;

  json profiles = json::array();
  for (const auto& pr : report.profiles) {
    json points = json::array();
    for (const auto& p : pr.profile.points) points.push_back({p.toi, p.power, p.run_id});
    json fit = nullptr;
    if (pr.fit)
      fit = {{"degree", pr.fit->degree},
             {"coefficients", pr.fit->coefficients},
             {"rms_residual_w", pr.fit->rms_residual}};
    profiles.push_back({{"kernel_id", pr.profile.kernel_id},
                        {"phase", to_string(pr.profile.phase)},
                        {"component", to_string(pr.profile.component)},
                        {"exec_time_anchor_ns", pr.profile.exec_time_anchor},
                        {"mean_power_w", pr.mean_power_w},
                        {"points", points},
                        {"fit", fit}});
  }
  j["profiles"] = profiles;

  j["sse_ssp_error_pct"] =
      report.sse_ssp_error_pct.empty() ? json(nullptr) : json(report.sse_ssp_error_pct);

  json recon;
  recon["available"] = report.reconstruction_available;
  if (report.reconstruction_available) {
    recon["reference_run"] = report.reference_run;
    json entries = json::array();
    for (const auto& e : report.reconstruction)
      entries.push_back({{"phase", to_string(e.phase)},
                         {"component", to_string(e.component)},
                         {"rms_w", e.rms_w},
                         {"max_abs_w", e.max_abs_w}});
    recon["entries"] = entries;
  }
  j["reconstruction"] = recon;
  return j;
}

std::string report_to_string(const ExperimentReport& report) {
  return report_to_json(report).dump(2) + "\n";
}

std::vector<std::string> emit_plot_data(const ExperimentReport& report,
                                        const std::string& out_dir) {
  if (report.profiles.empty()) throw std::invalid_argument("emit_plot_data: report has no profiles");
  std::filesystem::create_directories(out_dir);
  std::vector<std::string> written;

  for (const auto& pr : report.profiles) {
    const auto& prof = pr.profile;
    std::string base = std::string("profile_") + to_string(prof.phase) + "_" +
                       to_string(prof.component) + ".csv";
    std::string path = out_dir + "/" + base;
    auto csv = open_out(path);
    csv << "kernel_id,phase,component,toi_ns,power_w,run_id\n";
    for (const auto& p : prof.points) {
      csv << prof.kernel_id << ',' << to_string(prof.phase) << ',' << to_string(prof.component)
          << ',' << p.toi << ',' << fmt_double(p.power) << ',' << p.run_id << '\n';
    }
    written.push_back(base);

    if (prof.component == Component::total) {
      std::string dat = std::string("plot_") + to_string(prof.phase) + "_total.dat";
      auto out = open_out(out_dir + "/" + dat);
      out << "# toi_ns power_w\n";
      for (const auto& p : prof.points) out << p.toi << ' ' << fmt_double(p.power) << '\n';
      written.push_back(dat);
    }
  }
  return written;
}

}  // namespace fingrav::pipeline
