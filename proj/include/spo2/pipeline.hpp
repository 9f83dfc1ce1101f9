#pragma once

#include "spo2/beats.hpp"
#include "spo2/eval.hpp"
#include "spo2/oximetry.hpp"
#include "spo2/record_io.hpp"
#include "spo2/sync.hpp"
#include "spo2/synth.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace spo2 {

enum class DelayScope { cohort, record };

struct PipelineConfig {
  EstimatorConfig estimator;
  DelaySearch delay;
  DelayScope delay_scope = DelayScope::cohort;
  AlignmentConfig alignment;
  PulseDetectionConfig pulses;
  double ibi_grid_rate = kDefaultIbiGridRate;
  std::optional<Location> location;  // only records from this location
  bool parallel = true;
};

// Rejects out-of-domain settings before any record is touched.
inline void validate(const PipelineConfig& c) {
  try {
    validate(c.estimator);
  } catch (const Error& e) {
    throw Error(std::string("invalid config: ") + e.what());
  }
  if (!(c.delay.min >= 0.0) || !(c.delay.max >= c.delay.min) || c.delay.max > kMaxDataAge)
    throw Error("invalid config: delay search must lie within [0, 30] s");
  if (c.delay.step < 0.0) throw Error("invalid config: delay step");
  if (!(c.alignment.max_offset > 0.0)) throw Error("invalid config: max offset");
  if (!(c.ibi_grid_rate > 0.0)) throw Error("invalid config: ibi grid rate");
}

struct RecordResult {
  std::string id;
  Location location = Location::other;
  SyncResult sync;
  std::size_t pulse_count = 0;
  std::vector<RosSample> ros;  // times on the reference clock
  Spo2Series estimate;         // reference-clock ticks
  Spo2Series reference;
  std::optional<bool> dark_skin;
  double delay = 0.0;
};

// Clock offset between wearable and reference from inter-beat intervals.
// Wearable intervals come from pulses passing the QI threshold only.
inline SyncResult synchronize(const PpgRecord& ppg, const UniformSignal& ecg,
                              const PipelineConfig& cfg,
                              const PulseDetection* detection = nullptr) {
  PulseDetection local;
  if (!detection) {
    local = analyze_pulses(ppg, cfg.pulses);
    detection = &local;
  }
  QualityTracker tracker;
  std::vector<PulseSegment> good;
  for (const auto& s : detection->segments)
    if (tracker.assess(s).value() >= cfg.estimator.qi_threshold) good.push_back(s);
  auto wearable = ibi_series(ibi_anchors(std::span<const PulseSegment>(good)), cfg.ibi_grid_rate);
  auto reference = ibi_series(detect_beats(ecg), cfg.ibi_grid_rate);
  return align_by_ibi(wearable, reference, cfg.alignment);
}

// Sync and SpO2 estimation for one record; the estimate is placed on the
// reference tick grid.
inline RecordResult process_record(const io::LoadedRecord& rec, const CalibrationModel& model,
                                   const PipelineConfig& cfg) {
  RecordResult r;
  r.id = rec.manifest.record_id;
  r.location = rec.manifest.location;
  r.reference = rec.reference;
  if (rec.manifest.subject.skin_tone) {
    try {
      r.dark_skin = classify_skin_tone(*rec.manifest.subject.skin_tone);
    } catch (const Error& e) {
      throw StageError("load", r.id, e.what());
    }
  }

  PulseDetection det;
  try {
    det = analyze_pulses(rec.ppg, cfg.pulses);
  } catch (const Error& e) {
    throw StageError("pulses", r.id, e.what());
  }
  r.pulse_count = det.segments.size();
  try {
    r.sync = synchronize(rec.ppg, rec.ecg, cfg, &det);
  } catch (const Error& e) {
    throw StageError("sync", r.id, e.what());
  }
  try {
    r.ros = ros_samples(det.segments);
    for (auto& s : r.ros) s.time -= r.sync.clock_offset;
    TickGrid ticks{r.reference.size() ? r.reference.times.front() : 0.0, r.reference.size()};
    EstimatorConfig ec = cfg.estimator;
    ec.refresh_rate = r.reference.refresh_rate;
    r.estimate = estimate_spo2_series(r.ros, model, ec, ticks);
  } catch (const Error& e) {
    throw StageError("estimate", r.id, e.what());
  }
  return r;
}

struct PipelineResult {
  std::vector<RecordResult> records;
  std::map<std::string, DelayResult> delays;  // key: location (cohort) or record id
  EvaluationReport overall;
  std::map<std::string, EvaluationReport> per_location;
  std::map<std::string, EvaluationReport> by_skin_tone;
  ComplianceVerdict compliance;
  std::map<std::string, ComplianceVerdict> per_location_compliance;
};

inline PipelineResult run_pipeline(const std::vector<io::LoadedRecord>& inputs,
                                   const CalibrationModel& model, const PipelineConfig& config) {
  validate(config);
  PipelineConfig cfg = config;
  cfg.delay.qi_threshold = cfg.estimator.qi_threshold;

  std::vector<const io::LoadedRecord*> selected;
  for (const auto& r : inputs)
    if (!cfg.location || r.manifest.location == *cfg.location) selected.push_back(&r);
  std::sort(selected.begin(), selected.end(), [](const auto* a, const auto* b) {
    return a->manifest.record_id < b->manifest.record_id;
  });
  if (selected.empty()) throw StageError("load", "*", "no records selected");

  PipelineResult out;
  out.records.resize(selected.size());
  if (cfg.parallel) {
    std::vector<std::future<RecordResult>> jobs;
    for (const auto* r : selected)
      jobs.push_back(std::async(std::launch::async,
                                [r, &model, &cfg] { return process_record(*r, model, cfg); }));
    for (std::size_t i = 0; i < jobs.size(); ++i) out.records[i] = jobs[i].get();
  } else {
    for (std::size_t i = 0; i < selected.size(); ++i)
      out.records[i] = process_record(*selected[i], model, cfg);
  }

  // Response delay: pooled per location, or per record.
  if (cfg.delay_scope == DelayScope::cohort) {
    std::map<std::string, std::vector<SeriesPair>> groups;
    for (const auto& r : out.records)
      groups[to_string(r.location)].push_back({&r.estimate, &r.reference});
    for (const auto& [loc, pairs] : groups) {
      try {
        out.delays[loc] = estimate_delay_pooled(pairs, cfg.delay);
      } catch (const Error& e) {
        throw StageError("delay", loc, e.what());
      }
    }
    for (auto& r : out.records) r.delay = out.delays.at(to_string(r.location)).delay;
  } else {
    for (auto& r : out.records) {
      try {
        out.delays[r.id] = estimate_delay(r.estimate, r.reference, cfg.delay);
      } catch (const Error& e) {
        throw StageError("delay", r.id, e.what());
      }
      r.delay = out.delays[r.id].delay;
    }
  }

  std::vector<PairedRecord> paired;
  std::map<std::string, std::vector<PairedRecord>> by_loc;
  std::vector<PairedRecord> with_tone;
  std::vector<bool> dark;
  for (const auto& r : out.records) {
    auto p = pair_series(r.estimate, r.reference, r.delay, cfg.estimator.qi_threshold);
    p.id = r.id;
    by_loc[to_string(r.location)].push_back(p);
    if (r.dark_skin) {
      with_tone.push_back(p);
      dark.push_back(*r.dark_skin);
    }
    paired.push_back(std::move(p));
  }
  try {
    out.overall = pooled_evaluate(paired);
    for (const auto& [loc, recs] : by_loc) {
      auto rep = pooled_evaluate(recs);
      if (cfg.delay_scope == DelayScope::cohort) rep.location_delay[loc] = out.delays.at(loc).delay;
      out.per_location_compliance[loc] = compliance_report(
          rep, cfg.estimator.window, cfg.estimator.aasm_mode, cfg.estimator.max_data_age);
      out.per_location[loc] = std::move(rep);
    }
    if (!with_tone.empty()) out.by_skin_tone = stratified_evaluate(with_tone, dark);
  } catch (const Error& e) {
    throw StageError("evaluate", "*", e.what());
  }
  if (cfg.delay_scope == DelayScope::cohort)
    for (const auto& [loc, d] : out.delays) out.overall.location_delay[loc] = d.delay;
  out.compliance = compliance_report(out.overall, cfg.estimator.window, cfg.estimator.aasm_mode,
                                     cfg.estimator.max_data_age);
  return out;
}

// ---------------------------------------------------------------------------
// Serialization of results

namespace io {

inline json to_json(const EvaluationReport& r) {
  json j;
  j["a_rms"] = r.a_rms;
  j["bias"] = r.bias;
  j["bias_sd"] = r.bias_sd;
  j["loa_low"] = r.loa_low;
  j["loa_high"] = r.loa_high;
  j["acceptance_rate"] = r.acceptance_rate;
  j["reference_rejection_rate"] = r.reference_rejection_rate;
  j["n_samples"] = r.n_samples;
  j["total_samples"] = r.total_samples;
  j["reference_ok_samples"] = r.reference_ok_samples;
  j["bias_convention"] = "estimate - reference";
  if (!r.location_delay.empty()) {
    json d = json::object();
    for (const auto& [k, v] : r.location_delay) d[k] = v;
    j["location_delay_s"] = d;
  }
  return j;
}

inline json to_json(const ComplianceVerdict& v) {
  return json{{"iso_limit", v.iso_limit},
              {"fda_limit", v.fda_limit},
              {"iso_pass", v.iso_pass},
              {"fda_pass", v.fda_pass},
              {"aasm_averaging_ok", v.aasm_averaging_ok},
              {"data_age_ok", v.data_age_ok}};
}

inline json to_json(const PipelineConfig& c) {
  return json{{"window_s", c.estimator.window},
              {"refresh_hz", c.estimator.refresh_rate},
              {"qi_threshold", c.estimator.qi_threshold},
              {"aasm_mode", c.estimator.aasm_mode},
              {"max_data_age_s", c.estimator.max_data_age},
              {"delay_search", {c.delay.min, c.delay.max, c.delay.step}},
              {"delay_scope", c.delay_scope == DelayScope::cohort ? "cohort" : "record"}};
}

inline json sync_json(const RecordResult& r) {
  return json{{"record_id", r.id},
              {"location", to_string(r.location)},
              {"clock_offset_s", r.sync.clock_offset},
              {"score", r.sync.score},
              {"delay_s", r.delay},
              {"pulses", r.pulse_count}};
}

inline void write_json(const fs::path& path, const json& j) {
  auto out = detail::open_out(path);
  out << j.dump(2) << '\n';
}

inline void write_bland_altman_csv(const fs::path& path, const std::vector<BlandAltmanPoint>& pts) {
  auto out = detail::open_out(path);
  out << "mean,difference\n";
  for (const auto& p : pts) out << format_double(p.mean) << ',' << format_double(p.difference) << '\n';
}

// Writes report.json, compliance.json, sync.json, bland_altman.csv and a
// per-record estimate.csv under out_dir.
inline void write_artifacts(const fs::path& out_dir, const PipelineResult& res,
                            const PipelineConfig& cfg) {
  fs::create_directories(out_dir);
  json report;
  report["config"] = to_json(cfg);
  report["overall"] = to_json(res.overall);
  json per_loc = json::object();
  for (const auto& [k, v] : res.per_location) per_loc[k] = to_json(v);
  report["per_location"] = per_loc;
  json tone = json::object();
  for (const auto& [k, v] : res.by_skin_tone) tone[k] = to_json(v);
  report["by_skin_tone"] = tone;
  json delays = json::object();
  for (const auto& [k, d] : res.delays) {
    json curve = json::array();
    for (const auto& [dl, a] : d.curve) curve.push_back({dl, a});
    delays[k] = {{"delay_s", d.delay}, {"a_rms_at_delay", d.a_rms_at_delay}, {"curve", curve}};
  }
  report["delays"] = delays;
  write_json(out_dir / "report.json", report);

  json comp;
  comp["overall"] = to_json(res.compliance);
  json pl = json::object();
  for (const auto& [k, v] : res.per_location_compliance) pl[k] = to_json(v);
  comp["per_location"] = pl;
  write_json(out_dir / "compliance.json", comp);

  json sync = json::array();
  for (const auto& r : res.records) {
    sync.push_back(sync_json(r));
    write_estimate_csv(out_dir / "records" / r.id / "estimate.csv", r.estimate);
  }
  write_json(out_dir / "sync.json", sync);
  write_bland_altman_csv(out_dir / "bland_altman.csv", res.overall.bland_altman_points);
}

// ---------------------------------------------------------------------------
// Simulated cohorts

struct SimulationConfig {
  std::size_t records = 20;
  std::vector<Location> locations{Location::upper_arm};
  std::uint64_t seed = 1;
  ScenarioOptions scenario;
};

// Writes records/<id>/manifest.json (+ CSVs), calibration_pairs.csv and
// cohort.json listing the manifests relative to out_dir. Returns cohort.json.
inline fs::path simulate_cohort(const fs::path& out_dir, const SimulationConfig& cfg) {
  fs::create_directories(out_dir);
  json cohort = json::array();
  std::size_t index = 0;
  for (Location loc : cfg.locations) {
    for (std::size_t i = 0; i < cfg.records; ++i, ++index) {
      std::uint64_t seed = cfg.seed * 1000003ULL + index;
      auto spec = make_scenario(loc, seed, cfg.scenario);
      auto truth = generate_truth(spec);
      auto rec = synthesize_record(truth, spec);
      char id[64];
      std::snprintf(id, sizeof(id), "%s_%03zu", to_string(loc), i);
      std::mt19937_64 rng(seed + 7);
      SubjectInfo subject;
      subject.age = std::round(std::uniform_real_distribution<double>(25.0, 75.0)(rng));
      subject.skin_tone =
          SkinToneMeasure{SkinToneScale::ita_degrees,
                          std::round(std::uniform_real_distribution<double>(-30.0, 60.0)(rng))};
      auto mp = write_record(out_dir / "records" / id, id, rec.ppg, rec.reference, rec.ecg, subject);
      cohort.push_back(fs::relative(mp, out_dir).generic_string());
    }
  }
  write_calibration_pairs(out_dir / "calibration_pairs.csv",
                          hypoxia_calibration_pairs(CalibrationModel(110.0, -25.0), cfg.seed));
  write_json(out_dir / "cohort.json", cohort);
  return out_dir / "cohort.json";
}

inline std::vector<fs::path> read_cohort(const fs::path& cohort_path) {
  auto in = detail::open_in(cohort_path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error("invalid cohort: " + cohort_path.string() + ": " + e.what());
  }
  if (!j.is_array()) throw Error("invalid cohort: " + cohort_path.string() + ": expected array");
  std::vector<fs::path> out;
  for (const auto& e : j) out.push_back(cohort_path.parent_path() / e.get<std::string>());
  return out;
}

}  // namespace io
}  // namespace spo2
