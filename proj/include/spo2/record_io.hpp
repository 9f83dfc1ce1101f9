#pragma once

#include "spo2/eval.hpp"
#include "spo2/signal.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace spo2::io {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::string where(const fs::path& p, std::size_t line, std::size_t col) {
  return p.string() + ":" + std::to_string(line) + ":" + std::to_string(col);
}

inline double parse_field(std::string_view field, const fs::path& path, std::size_t line,
                          std::size_t col) {
  while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r'))
    field.remove_suffix(1);
  double v = 0.0;
  auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (field.empty() || res.ec != std::errc() || res.ptr != field.data() + field.size() ||
      !std::isfinite(v))
    throw Error("malformed row: " + where(path, line, col) + ": '" + std::string(field) + "'");
  return v;
}

inline std::ifstream open_in(const fs::path& p) {
  if (!fs::exists(p)) throw Error("missing file: " + p.string());
  std::ifstream in(p);
  if (!in) throw Error("unreadable file: " + p.string());
  return in;
}

inline std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write file: " + p.string());
  return out;
}

// Rows of numeric columns after a single header line.
inline std::vector<std::vector<double>> read_numeric_csv(const fs::path& path,
                                                         std::size_t columns,
                                                         std::string* header = nullptr) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw Error("malformed row: " + where(path, 1, 1) + ": empty file");
  if (header) *header = line;
  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::vector<double> row;
    std::size_t start = 0;
    while (true) {
      std::size_t comma = line.find(',', start);
      std::string_view f(line.data() + start,
                         (comma == std::string::npos ? line.size() : comma) - start);
      row.push_back(parse_field(f, path, lineno, start + 1));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (row.size() != columns)
      throw Error("malformed row: " + where(path, lineno, 1) + ": expected " +
                  std::to_string(columns) + " columns, got " + std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace detail

// Channel file: one header line (the channel name), one sample per line.
inline void write_signal_csv(const fs::path& path, const UniformSignal& s,
                             const std::string& header = {}) {
  auto out = detail::open_out(path);
  out << (header.empty() ? s.label() : header) << '\n';
  for (double v : s.samples()) out << format_double(v) << '\n';
}

inline std::vector<double> read_signal_csv(const fs::path& path) {
  auto rows = detail::read_numeric_csv(path, 1);
  std::vector<double> v;
  v.reserve(rows.size());
  for (const auto& r : rows) v.push_back(r[0]);
  return v;
}

// Reference file: header "t_s,spo2", explicit timestamps.
inline void write_reference_csv(const fs::path& path, const Spo2Series& s) {
  auto out = detail::open_out(path);
  out << "t_s,spo2\n";
  for (std::size_t i = 0; i < s.size(); ++i)
    out << format_double(s.times[i]) << ',' << format_double(s.values[i]) << '\n';
}

inline Spo2Series read_reference_csv(const fs::path& path, double rate = 1.0) {
  auto rows = detail::read_numeric_csv(path, 2);
  std::vector<double> values;
  values.reserve(rows.size());
  double t0 = rows.empty() ? 0.0 : rows.front()[0];
  for (std::size_t i = 0; i < rows.size(); ++i) {
    double expected = t0 + static_cast<double>(i) / rate;
    if (std::abs(rows[i][0] - expected) > 1e-6)
      throw Error("rate mismatch: " + detail::where(path, i + 2, 1) + ": expected t = " +
                  format_double(expected));
    values.push_back(rows[i][1]);
  }
  auto s = make_reference_series(t0, rate, std::move(values));
  s.times.clear();
  for (const auto& r : rows) s.times.push_back(r[0]);
  return s;
}

// Estimate file: t_s,spo2,qi,valid,window_s
inline void write_estimate_csv(const fs::path& path, const Spo2Series& s) {
  auto out = detail::open_out(path);
  out << "t_s,spo2,qi,valid,window_s\n";
  for (std::size_t i = 0; i < s.size(); ++i)
    out << format_double(s.times[i]) << ',' << format_double(s.values[i]) << ','
        << format_double(s.qi[i]) << ',' << (s.valid[i] ? 1 : 0) << ','
        << format_double(s.effective_window[i]) << '\n';
}

inline Spo2Series read_estimate_csv(const fs::path& path, double refresh_rate = 1.0,
                                    double window = 3.0) {
  auto rows = detail::read_numeric_csv(path, 5);
  Spo2Series s;
  s.refresh_rate = refresh_rate;
  s.window_duration = window;
  for (const auto& r : rows) {
    s.times.push_back(r[0]);
    s.values.push_back(r[1]);
    s.qi.push_back(r[2]);
    s.valid.push_back(r[3] != 0.0);
    s.effective_window.push_back(r[4]);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Manifest

struct ChannelEntry {
  std::string name;
  double wavelength_nm = 0.0;
  double sampling_rate_hz = 0.0;
  double start_time_s = 0.0;
  std::size_t n_samples = 0;
  std::string data_file;
};

struct SubjectInfo {
  std::optional<double> age;
  std::optional<SkinToneMeasure> skin_tone;
};

struct RecordManifest {
  std::string record_id;
  Location location = Location::other;
  std::vector<ChannelEntry> channels;
  std::string spo2_file;
  double reference_rate_hz = 1.0;
  std::string ecg_file;
  double ecg_sampling_rate_hz = 0.0;
  double ecg_start_time_s = 0.0;
  std::size_t ecg_n_samples = 0;
  SubjectInfo subject;
};

inline json to_json(const RecordManifest& m) {
  json j;
  j["record_id"] = m.record_id;
  j["location"] = to_string(m.location);
  j["channels"] = json::array();
  for (const auto& c : m.channels)
    j["channels"].push_back({{"name", c.name},
                             {"wavelength_nm", c.wavelength_nm},
                             {"sampling_rate_hz", c.sampling_rate_hz},
                             {"start_time_s", c.start_time_s},
                             {"n_samples", c.n_samples},
                             {"data_file", c.data_file}});
  j["reference"] = {{"spo2_file", m.spo2_file},
                    {"spo2_rate_hz", m.reference_rate_hz},
                    {"ecg_file", m.ecg_file},
                    {"ecg_sampling_rate_hz", m.ecg_sampling_rate_hz},
                    {"ecg_start_time_s", m.ecg_start_time_s},
                    {"ecg_n_samples", m.ecg_n_samples}};
  json subj = json::object();
  if (m.subject.age) subj["age"] = *m.subject.age;
  if (m.subject.skin_tone)
    subj["skin_tone"] = {{"scale", to_string(m.subject.skin_tone->scale)},
                         {"value", m.subject.skin_tone->value}};
  j["subject"] = subj;
  return j;
}

namespace detail {

template <typename T>
T required(const json& j, const char* key, const std::string& ctx,
           const char* kind = "invalid manifest") {
  if (!j.contains(key)) throw Error(std::string(kind) + ": " + ctx + ": missing '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(std::string(kind) + ": " + ctx + ": field '" + key + "': " + e.what());
  }
}

}  // namespace detail

inline RecordManifest parse_manifest(const fs::path& path) {
  auto in = detail::open_in(path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    // nlohmann reports "line L, column C" in what().
    throw Error("invalid manifest: " + path.string() + ": " + e.what());
  }
  const std::string ctx = path.string();
  RecordManifest m;
  m.record_id = detail::required<std::string>(j, "record_id", ctx);
  m.location = location_from_string(detail::required<std::string>(j, "location", ctx));
  if (!j.contains("channels") || !j["channels"].is_array())
    throw Error("invalid manifest: " + ctx + ": missing 'channels'");
  std::set<std::string> names;
  for (const auto& c : j["channels"]) {
    ChannelEntry e;
    e.name = detail::required<std::string>(c, "name", ctx);
    std::string cctx = ctx + ": channel '" + e.name + "'";
    e.wavelength_nm = detail::required<double>(c, "wavelength_nm", cctx);
    e.sampling_rate_hz = detail::required<double>(c, "sampling_rate_hz", cctx);
    e.start_time_s = detail::required<double>(c, "start_time_s", cctx);
    e.n_samples = detail::required<std::size_t>(c, "n_samples", cctx);
    e.data_file = detail::required<std::string>(c, "data_file", cctx);
    if (!(e.sampling_rate_hz > 0.0)) throw Error("invalid manifest: " + cctx + ": rate must be positive");
    if (!names.insert(e.name).second)
      throw Error("invalid manifest: " + ctx + ": duplicate channel '" + e.name + "'");
    m.channels.push_back(e);
  }
  if (!j.contains("reference")) throw Error("invalid manifest: " + ctx + ": missing 'reference'");
  const auto& r = j["reference"];
  std::string rctx = ctx + ": reference";
  m.spo2_file = detail::required<std::string>(r, "spo2_file", rctx);
  m.reference_rate_hz = r.value("spo2_rate_hz", 1.0);
  m.ecg_file = detail::required<std::string>(r, "ecg_file", rctx);
  m.ecg_sampling_rate_hz = detail::required<double>(r, "ecg_sampling_rate_hz", rctx);
  m.ecg_start_time_s = r.value("ecg_start_time_s", 0.0);
  m.ecg_n_samples = detail::required<std::size_t>(r, "ecg_n_samples", rctx);
  if (!(m.ecg_sampling_rate_hz > 0.0) || !(m.reference_rate_hz > 0.0))
    throw Error("invalid manifest: " + rctx + ": rate must be positive");
  if (j.contains("subject")) {
    const auto& s = j["subject"];
    if (s.contains("age")) m.subject.age = s["age"].get<double>();
    if (s.contains("skin_tone")) {
      SkinToneMeasure st;
      st.scale = skin_tone_scale_from_string(
          detail::required<std::string>(s["skin_tone"], "scale", ctx + ": subject"));
      st.value = detail::required<double>(s["skin_tone"], "value", ctx + ": subject");
      m.subject.skin_tone = st;
    }
  }
  return m;
}

struct LoadedRecord {
  RecordManifest manifest;
  PpgRecord ppg;
  Spo2Series reference;
  UniformSignal ecg;
};

// Materializes every file named by the manifest; throws before returning
// anything if any file is missing, malformed or inconsistent.
inline LoadedRecord load_record(const fs::path& manifest_path) {
  LoadedRecord rec;
  rec.manifest = parse_manifest(manifest_path);
  const auto& m = rec.manifest;
  const fs::path dir = manifest_path.parent_path();

  auto load_channel = [&](const ChannelEntry& c) {
    fs::path p = dir / c.data_file;
    auto v = read_signal_csv(p);
    if (v.size() != c.n_samples)
      throw Error("rate mismatch: " + p.string() + ": declared " + std::to_string(c.n_samples) +
                  " samples, found " + std::to_string(v.size()));
    return UniformSignal(c.name, c.sampling_rate_hz, c.start_time_s, std::move(v));
  };

  bool have_red = false, have_ir = false, have_green = false;
  for (const auto& c : m.channels) {
    if (c.name == "red") {
      rec.ppg.red = load_channel(c);
      rec.ppg.wavelengths.red_nm = c.wavelength_nm;
      have_red = true;
    } else if (c.name == "infrared") {
      rec.ppg.infrared = load_channel(c);
      rec.ppg.wavelengths.infrared_nm = c.wavelength_nm;
      have_ir = true;
    } else if (c.name == "green") {
      rec.ppg.green = load_channel(c);
      rec.ppg.wavelengths.green_nm = c.wavelength_nm;
      have_green = true;
    }
  }
  if (!have_red || !have_ir)
    throw Error("invalid manifest: " + manifest_path.string() + ": red and infrared required");
  (void)have_green;
  rec.ppg.location = m.location;

  rec.reference = read_reference_csv(dir / m.spo2_file, m.reference_rate_hz);
  fs::path ecg_path = dir / m.ecg_file;
  auto ecg = read_signal_csv(ecg_path);
  if (ecg.size() != m.ecg_n_samples)
    throw Error("rate mismatch: " + ecg_path.string() + ": declared " +
                std::to_string(m.ecg_n_samples) + " samples, found " + std::to_string(ecg.size()));
  rec.ecg = UniformSignal("ecg", m.ecg_sampling_rate_hz, m.ecg_start_time_s, std::move(ecg), "mV");
  return rec;
}

// Writes channel, reference and ECG files plus manifest.json into dir.
inline fs::path write_record(const fs::path& dir, const std::string& record_id,
                             const PpgRecord& ppg, const Spo2Series& reference,
                             const UniformSignal& ecg, const SubjectInfo& subject = {}) {
  fs::create_directories(dir);
  RecordManifest m;
  m.record_id = record_id;
  m.location = ppg.location;
  auto add = [&](const UniformSignal& s, const char* name, double wl) {
    if (s.empty()) return;
    std::string file = std::string(name) + ".csv";
    write_signal_csv(dir / file, s, name);
    m.channels.push_back({name, wl, s.sampling_rate(), s.start_time(), s.size(), file});
  };
  add(ppg.red, "red", ppg.wavelengths.red_nm);
  add(ppg.infrared, "infrared", ppg.wavelengths.infrared_nm);
  add(ppg.green, "green", ppg.wavelengths.green_nm);
  m.spo2_file = "reference_spo2.csv";
  m.reference_rate_hz = reference.refresh_rate;
  write_reference_csv(dir / m.spo2_file, reference);
  m.ecg_file = "ecg.csv";
  m.ecg_sampling_rate_hz = ecg.sampling_rate();
  m.ecg_start_time_s = ecg.start_time();
  m.ecg_n_samples = ecg.size();
  write_signal_csv(dir / m.ecg_file, ecg, "ecg");
  m.subject = subject;
  fs::path mp = dir / "manifest.json";
  auto out = detail::open_out(mp);
  out << to_json(m).dump(2) << '\n';
  return mp;
}

// Calibration pairs file: header "ros,spo2".
inline std::vector<CalibrationPair> read_calibration_pairs(const fs::path& path) {
  auto rows = detail::read_numeric_csv(path, 2);
  std::vector<CalibrationPair> out;
  for (const auto& r : rows) out.push_back({r[0], r[1]});
  return out;
}

inline void write_calibration_pairs(const fs::path& path, const std::vector<CalibrationPair>& p) {
  auto out = detail::open_out(path);
  out << "ros,spo2\n";
  for (const auto& c : p) out << format_double(c.ros) << ',' << format_double(c.reference_spo2) << '\n';
}

inline void write_calibration(const fs::path& path, const CalibrationModel& m) {
  auto out = detail::open_out(path);
  json j{{"offset_a", m.offset_a()}, {"slope_b", m.slope_b()}};
  out << j.dump(2) << '\n';
}

inline CalibrationModel read_calibration(const fs::path& path) {
  auto in = detail::open_in(path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error("invalid calibration: " + path.string() + ": " + e.what());
  }
  return CalibrationModel(
      detail::required<double>(j, "offset_a", path.string(), "invalid calibration"),
      detail::required<double>(j, "slope_b", path.string(), "invalid calibration"));
}

}  // namespace spo2::io
