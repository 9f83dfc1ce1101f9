#include "spo2/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>

namespace {

using namespace spo2;
namespace fs = std::filesystem;

std::vector<Location> parse_locations(const std::string& s) {
  if (s == "both") return {Location::upper_arm, Location::wrist};
  return {location_from_string(s)};
}

// "min:max:step"
DelaySearch parse_delay_search(const std::string& s) {
  DelaySearch d;
  char c1 = 0, c2 = 0;
  std::istringstream is(s);
  if (!(is >> d.min >> c1 >> d.max >> c2 >> d.step) || c1 != ':' || c2 != ':' || !is.eof())
    throw Error("invalid config: --delay-search expects min:max:step, got '" + s + "'");
  if (!(d.step > 0.0)) throw Error("invalid config: delay step must be positive");
  return d;
}

struct EstimatorFlags {
  double window = 3.0;
  double refresh = 1.0;
  double qi_threshold = 0.5;
  bool aasm = false;

  void attach(CLI::App* app) {
    app->add_option("--window", window, "averaging window in seconds")
        ->check(CLI::IsMember({3.0, 15.0}));
    app->add_option("--refresh", refresh, "output rate in Hz")->check(CLI::IsMember({1.0}));
    app->add_option("--qi-threshold", qi_threshold, "minimum pulse quality")
        ->check(CLI::Range(0.0, 1.0));
    app->add_flag("--aasm", aasm, "extend short windows to three pulses below 80 bpm");
  }
  EstimatorConfig config() const {
    EstimatorConfig c;
    c.window = window;
    c.refresh_rate = refresh;
    c.qi_threshold = qi_threshold;
    c.aasm_mode = aasm;
    return c;
  }
};

int run_stage(const char* stage, const std::function<void()>& f) {
  try {
    f();
    return 0;
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << stage << ": " << e.what() << '\n';
  }
  return 1;
}

void print_report(std::ostream& os, const io::json& report, const io::json& compliance) {
  auto line = [&](const std::string& name, const io::json& r) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-12s A_RMS %6.3f  bias %+6.3f  LoA [%+.2f, %+.2f]  acc %6.2f%%  n %zu\n",
                  name.c_str(), r["a_rms"].get<double>(), r["bias"].get<double>(),
                  r["loa_low"].get<double>(), r["loa_high"].get<double>(),
                  r["acceptance_rate"].get<double>(), r["n_samples"].get<std::size_t>());
    os << buf;
  };
  line("overall", report["overall"]);
  for (const auto& [k, v] : report["per_location"].items()) line(k, v);
  for (const auto& [k, v] : report["by_skin_tone"].items()) line("skin:" + k, v);
  for (const auto& [k, v] : report["delays"].items())
    os << "delay " << k << ": " << v["delay_s"].get<double>() << " s\n";
  const auto& c = compliance["overall"];
  os << "ISO (<= " << c["iso_limit"].get<double>() << "): " << (c["iso_pass"].get<bool>() ? "pass" : "fail")
     << "\nFDA (<= " << c["fda_limit"].get<double>() << "): " << (c["fda_pass"].get<bool>() ? "pass" : "fail")
     << "\nAASM averaging: " << (c["aasm_averaging_ok"].get<bool>() ? "ok" : "not ok")
     << "\ndata age <= 30 s: " << (c["data_age_ok"].get<bool>() ? "ok" : "not ok") << '\n';
}

io::json read_json(const fs::path& p) {
  auto in = io::detail::open_in(p);
  try {
    return io::json::parse(in);
  } catch (const io::json::parse_error& e) {
    throw Error("invalid document: " + p.string() + ": " + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reflectance pulse-oximetry estimation and evaluation"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "write a synthetic cohort");
  std::size_t sim_records = 20;
  std::string sim_location = "upper_arm";
  std::uint64_t sim_seed = 1;
  double sim_duration = 3600.0;
  bool sim_clean = false;
  std::string sim_out = "cohort";
  sim->add_option("--records", sim_records, "records per location");
  sim->add_option("--location", sim_location, "wrist, upper_arm or both")
      ->check(CLI::IsMember({"wrist", "upper_arm", "both"}));
  sim->add_option("--seed", sim_seed);
  sim->add_option("--duration", sim_duration, "seconds per record")->check(CLI::PositiveNumber);
  sim->add_flag("--clean", sim_clean, "no noise and no motion");
  sim->add_option("--out-dir", sim_out);

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "fit the ROS-to-SpO2 calibration");
  std::string cal_pairs, cal_out = "calibration.json";
  cal->add_option("--pairs", cal_pairs, "CSV with ros,spo2")->required();
  cal->add_option("--out", cal_out);

  // sync
  auto* syn = app.add_subcommand("sync", "clock offset of one record");
  std::string syn_manifest, syn_out = ".";
  syn->add_option("--manifest", syn_manifest)->required();
  syn->add_option("--out-dir", syn_out);

  // estimate
  auto* est = app.add_subcommand("estimate", "SpO2 series of one record");
  std::string est_manifest, est_cal, est_out = ".";
  EstimatorFlags est_flags;
  est->add_option("--manifest", est_manifest)->required();
  est->add_option("--calibration", est_cal)->required();
  est->add_option("--out-dir", est_out);
  est_flags.attach(est);

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "full evaluation over records");
  std::string ev_cohort, ev_cal, ev_out = "results", ev_delay = "0:30:1", ev_scope = "cohort",
                         ev_location;
  std::vector<std::string> ev_manifests;
  bool ev_serial = false;
  EstimatorFlags ev_flags;
  auto* ev_c = ev->add_option("--cohort", ev_cohort, "cohort.json listing manifests");
  auto* ev_m = ev->add_option("--manifest", ev_manifests, "record manifest (repeatable)");
  ev_c->excludes(ev_m);
  ev->add_option("--calibration", ev_cal)->required();
  ev->add_option("--delay-search", ev_delay, "min:max:step in seconds");
  ev->add_option("--delay-scope", ev_scope)->check(CLI::IsMember({"cohort", "record"}));
  ev->add_option("--location", ev_location)->check(CLI::IsMember({"wrist", "upper_arm"}));
  ev->add_flag("--serial", ev_serial, "process records one at a time");
  ev->add_option("--out-dir", ev_out);
  ev_flags.attach(ev);

  // report
  auto* rep = app.add_subcommand("report", "summarize an evaluation");
  std::string rep_dir, rep_out;
  rep->add_option("--report", rep_dir, "evaluation output directory")->required();
  rep->add_option("--out", rep_out, "text file (default stdout)");

  CLI11_PARSE(app, argc, argv);

  if (sim->parsed()) {
    return run_stage("simulate", [&] {
      io::SimulationConfig c;
      c.records = sim_records;
      c.locations = parse_locations(sim_location);
      c.seed = sim_seed;
      c.scenario.duration = sim_duration;
      c.scenario.clean = sim_clean;
      auto p = io::simulate_cohort(sim_out, c);
      std::cout << p.string() << '\n';
    });
  }
  if (cal->parsed()) {
    return run_stage("calibrate", [&] {
      auto pairs = io::read_calibration_pairs(cal_pairs);
      auto m = fit_calibration(pairs);
      io::write_calibration(cal_out, m);
      std::cout << "offset " << m.offset_a() << " slope " << m.slope_b() << '\n';
    });
  }
  if (syn->parsed()) {
    return run_stage("sync", [&] {
      PipelineConfig cfg;
      auto rec = io::load_record(syn_manifest);
      RecordResult r;
      r.id = rec.manifest.record_id;
      r.location = rec.manifest.location;
      try {
        auto det = analyze_pulses(rec.ppg, cfg.pulses);
        r.pulse_count = det.segments.size();
        r.sync = synchronize(rec.ppg, rec.ecg, cfg, &det);
      } catch (const Error& e) {
        throw StageError("sync", r.id, e.what());
      }
      io::write_json(fs::path(syn_out) / "sync.json", io::sync_json(r));
      std::cout << "clock offset " << r.sync.clock_offset << " s, score " << r.sync.score << '\n';
    });
  }
  if (est->parsed()) {
    return run_stage("estimate", [&] {
      PipelineConfig cfg;
      cfg.estimator = est_flags.config();
      validate(cfg);
      auto model = io::read_calibration(est_cal);
      auto rec = io::load_record(est_manifest);
      auto r = process_record(rec, model, cfg);
      io::write_estimate_csv(fs::path(est_out) / "estimate.csv", r.estimate);
      io::write_json(fs::path(est_out) / "sync.json", io::sync_json(r));
    });
  }
  if (ev->parsed()) {
    return run_stage("evaluate", [&] {
      PipelineConfig cfg;
      cfg.estimator = ev_flags.config();
      cfg.delay = parse_delay_search(ev_delay);
      cfg.delay_scope = ev_scope == "record" ? DelayScope::record : DelayScope::cohort;
      if (!ev_location.empty()) cfg.location = location_from_string(ev_location);
      cfg.parallel = !ev_serial;
      validate(cfg);
      std::vector<fs::path> paths;
      if (!ev_cohort.empty()) {
        paths = io::read_cohort(ev_cohort);
      } else {
        for (const auto& m : ev_manifests) paths.emplace_back(m);
      }
      if (paths.empty()) throw Error("invalid config: no records given (--cohort or --manifest)");
      auto model = io::read_calibration(ev_cal);
      std::vector<io::LoadedRecord> recs;
      for (const auto& p : paths) {
        try {
          recs.push_back(io::load_record(p));
        } catch (const Error& e) {
          throw StageError("load", p.string(), e.what());
        }
      }
      auto res = run_pipeline(recs, model, cfg);
      io::write_artifacts(ev_out, res, cfg);
      io::json report = read_json(fs::path(ev_out) / "report.json");
      io::json comp = read_json(fs::path(ev_out) / "compliance.json");
      print_report(std::cout, report, comp);
    });
  }
  if (rep->parsed()) {
    return run_stage("report", [&] {
      auto report = read_json(fs::path(rep_dir) / "report.json");
      auto comp = read_json(fs::path(rep_dir) / "compliance.json");
      if (rep_out.empty()) {
        print_report(std::cout, report, comp);
      } else {
        std::ofstream out = io::detail::open_out(rep_out);
        print_report(out, report, comp);
      }
    });
  }
  return 0;
}
