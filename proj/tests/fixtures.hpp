#pragma once

#include "spo2/pipeline.hpp"
#include "spo2/synth.hpp"

#include <string>

// In-memory record equivalent to what load_record returns for a written one.
inline spo2::io::LoadedRecord loaded_record(const spo2::SyntheticRecord& rec, const std::string& id,
                                            spo2::Location location = spo2::Location::upper_arm) {
  spo2::io::LoadedRecord r;
  r.manifest.record_id = id;
  r.manifest.location = location;
  r.ppg = rec.ppg;
  r.ppg.location = location;
  r.reference = rec.reference;
  r.ecg = rec.ecg;
  return r;
}

inline spo2::io::LoadedRecord simulate(const spo2::ScenarioSpec& spec, const std::string& id) {
  auto truth = spo2::generate_truth(spec);
  return loaded_record(spo2::synthesize_record(truth, spec), id, spec.location);
}
