#pragma once

#include "spo2/oximetry.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace spo2 {

inline constexpr double kAcceptedSpo2Min = 60.0;
inline constexpr double kAcceptedSpo2Max = 100.0;
inline constexpr double kIsoArmsLimit = 4.0;
inline constexpr double kFdaArmsLimit = 3.5;

struct ReferenceGatingConfig {
  double min_value = kAcceptedSpo2Min;
  double max_value = kAcceptedSpo2Max;
  double window = 5.0;         // s, centered, truncated at record edges
  double max_variation = 3.0;  // %, max - min must stay below this
};

inline bool in_accepted_range(double v) {
  return v >= kAcceptedSpo2Min && v <= kAcceptedSpo2Max;
}

// Reference is usable where it is in range and stable over a centered window.
inline std::vector<bool> gate_reference(const Spo2Series& reference,
                                        const ReferenceGatingConfig& cfg = {}) {
  const std::size_t n = reference.size();
  std::vector<bool> ok(n, false);
  // Half-width in samples; 5 s at 1 Hz spans i-2 .. i+2.
  auto half = static_cast<std::size_t>(
      std::max(0.0, std::round((cfg.window * reference.refresh_rate - 1.0) / 2.0)));
  for (std::size_t i = 0; i < n; ++i) {
    if (!reference.valid[i]) continue;
    double v = reference.values[i];
    if (!(v >= cfg.min_value && v <= cfg.max_value)) continue;
    std::size_t a = i >= half ? i - half : 0, b = std::min(n - 1, i + half);
    double lo = v, hi = v;
    for (std::size_t j = a; j <= b; ++j) {
      if (!reference.valid[j]) continue;
      lo = std::min(lo, reference.values[j]);
      hi = std::max(hi, reference.values[j]);
    }
    ok[i] = hi - lo < cfg.max_variation;
  }
  return ok;
}

inline std::vector<bool> gate_estimate(const Spo2Series& estimate, double qi_threshold) {
  std::vector<bool> ok(estimate.size(), false);
  for (std::size_t i = 0; i < estimate.size(); ++i)
    ok[i] = estimate.valid[i] && in_accepted_range(estimate.values[i]) &&
            estimate.qi[i] >= qi_threshold;
  return ok;
}

struct GatingMask {
  std::vector<bool> reference_ok;
  std::vector<bool> estimate_ok;
  std::size_t total = 0;
  std::size_t reference_ok_count = 0;
  std::size_t jointly_ok_count = 0;

  bool joint(std::size_t i) const { return reference_ok[i] && estimate_ok[i]; }
};

inline GatingMask make_mask(std::vector<bool> reference_ok, std::vector<bool> estimate_ok) {
  if (reference_ok.size() != estimate_ok.size()) throw Error("mask length mismatch");
  GatingMask m;
  m.total = reference_ok.size();
  for (std::size_t i = 0; i < m.total; ++i) {
    m.reference_ok_count += reference_ok[i] ? 1 : 0;
    m.jointly_ok_count += (reference_ok[i] && estimate_ok[i]) ? 1 : 0;
  }
  m.reference_ok = std::move(reference_ok);
  m.estimate_ok = std::move(estimate_ok);
  return m;
}

// Estimate and reference values paired on the estimate's time grid.
struct PairedRecord {
  std::string id;
  std::vector<double> estimate;
  std::vector<double> reference;
  GatingMask mask;
};

// Pairs estimate(t) with reference(t + delay). Estimate ticks without a
// reference sample at the shifted time are left out of the pair entirely.
inline PairedRecord pair_series(const Spo2Series& estimate, const Spo2Series& reference,
                                double delay, double qi_threshold,
                                const ReferenceGatingConfig& ref_cfg = {}) {
  PairedRecord p;
  if (reference.size() == 0) {
    p.mask = make_mask({}, {});
    return p;
  }
  auto ref_ok = gate_reference(reference, ref_cfg);
  auto est_ok = gate_estimate(estimate, qi_threshold);
  const double rate = reference.refresh_rate;
  const double r0 = reference.times.front();
  std::vector<bool> r_mask, e_mask;
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    double t = estimate.times[i] + delay;
    double pos = (t - r0) * rate;
    long long j = std::llround(pos);
    if (j < 0 || j >= static_cast<long long>(reference.size())) continue;
    auto ju = static_cast<std::size_t>(j);
    if (std::abs(reference.times[ju] - t) > 0.5 / rate) continue;
    p.estimate.push_back(estimate.values[i]);
    p.reference.push_back(reference.values[ju]);
    r_mask.push_back(ref_ok[ju]);
    e_mask.push_back(est_ok[i]);
  }
  p.mask = make_mask(std::move(r_mask), std::move(e_mask));
  return p;
}

// Paired view of two series already on the same grid.
inline PairedRecord pair_aligned(const Spo2Series& estimate, const Spo2Series& reference,
                                 GatingMask mask) {
  if (estimate.size() != reference.size() || mask.total != estimate.size())
    throw Error("series length mismatch");
  return {"", estimate.values, reference.values, std::move(mask)};
}

inline GatingMask gate_pair(const Spo2Series& estimate, const Spo2Series& reference,
                            double qi_threshold) {
  return make_mask(gate_reference(reference), gate_estimate(estimate, qi_threshold));
}

// ---------------------------------------------------------------------------
// Metrics

inline double a_rms(const PairedRecord& p) {
  double ss = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < p.mask.total; ++i) {
    if (!p.mask.joint(i)) continue;
    double d = p.estimate[i] - p.reference[i];
    ss += d * d;
    ++n;
  }
  if (n == 0) throw Error("no comparable samples");
  return std::sqrt(ss / static_cast<double>(n));
}

inline double a_rms(const Spo2Series& estimate, const Spo2Series& reference,
                    const GatingMask& mask) {
  return a_rms(pair_aligned(estimate, reference, mask));
}

struct BlandAltmanPoint {
  double mean = 0.0;
  double difference = 0.0;  // estimate - reference
};

struct BlandAltman {
  double bias = 0.0;  // mean(estimate - reference)
  double sd = 0.0;    // sample standard deviation, n - 1
  double loa_low = 0.0;
  double loa_high = 0.0;
  std::vector<BlandAltmanPoint> points;
};

namespace detail {

inline BlandAltman bland_altman_from(std::vector<BlandAltmanPoint> points) {
  if (points.size() < 2) throw Error("insufficient samples");
  const auto n = static_cast<double>(points.size());
  double sum = 0.0;
  for (const auto& pt : points) sum += pt.difference;
  double bias = sum / n;
  double ss = 0.0;
  for (const auto& pt : points) ss += (pt.difference - bias) * (pt.difference - bias);
  double sd = std::sqrt(ss / (n - 1.0));
  return {bias, sd, bias - 1.96 * sd, bias + 1.96 * sd, std::move(points)};
}

inline void append_points(const PairedRecord& p, std::vector<BlandAltmanPoint>& out) {
  for (std::size_t i = 0; i < p.mask.total; ++i)
    if (p.mask.joint(i))
      out.push_back({(p.estimate[i] + p.reference[i]) / 2.0, p.estimate[i] - p.reference[i]});
}

}  // namespace detail

inline BlandAltman bias_and_bland_altman(const PairedRecord& p) {
  std::vector<BlandAltmanPoint> pts;
  detail::append_points(p, pts);
  return detail::bland_altman_from(std::move(pts));
}

struct AcceptanceRates {
  double acceptance = 0.0;           // % of reference-accepted samples also estimate-accepted
  double reference_rejection = 0.0;  // % of all samples rejected on reference quality
};

inline AcceptanceRates acceptance_rate(const GatingMask& mask) {
  if (mask.total == 0) throw Error("no samples");
  if (mask.reference_ok_count == 0) throw Error("no reference-accepted samples");
  return {100.0 * static_cast<double>(mask.jointly_ok_count) /
              static_cast<double>(mask.reference_ok_count),
          100.0 * static_cast<double>(mask.total - mask.reference_ok_count) /
              static_cast<double>(mask.total)};
}

struct EvaluationReport {
  double a_rms = 0.0;
  double bias = 0.0;
  double bias_sd = 0.0;
  double loa_low = 0.0;
  double loa_high = 0.0;
  double acceptance_rate = 0.0;
  double reference_rejection_rate = 0.0;
  std::size_t n_samples = 0;  // jointly accepted samples pooled
  std::size_t total_samples = 0;
  std::size_t reference_ok_samples = 0;
  std::vector<BlandAltmanPoint> bland_altman_points;
  std::map<std::string, double> location_delay;  // s, per measurement location
};

// Concatenates the jointly accepted samples of every record, then computes
// each metric once over the pool.
inline EvaluationReport pooled_evaluate(std::span<const PairedRecord> records) {
  EvaluationReport r;
  std::vector<BlandAltmanPoint> pts;
  double ss = 0.0;
  for (const auto& p : records) {
    r.total_samples += p.mask.total;
    r.reference_ok_samples += p.mask.reference_ok_count;
    for (std::size_t i = 0; i < p.mask.total; ++i) {
      if (!p.mask.joint(i)) continue;
      double d = p.estimate[i] - p.reference[i];
      ss += d * d;
    }
    detail::append_points(p, pts);
  }
  if (pts.empty()) throw Error("empty pool");
  r.n_samples = pts.size();
  r.a_rms = std::sqrt(ss / static_cast<double>(pts.size()));
  auto ba = detail::bland_altman_from(std::move(pts));
  r.bias = ba.bias;
  r.bias_sd = ba.sd;
  r.loa_low = ba.loa_low;
  r.loa_high = ba.loa_high;
  r.bland_altman_points = std::move(ba.points);
  r.acceptance_rate = 100.0 * static_cast<double>(r.n_samples) /
                      static_cast<double>(r.reference_ok_samples);
  r.reference_rejection_rate =
      100.0 * static_cast<double>(r.total_samples - r.reference_ok_samples) /
      static_cast<double>(r.total_samples);
  return r;
}

// ---------------------------------------------------------------------------
// Standards

struct ComplianceVerdict {
  double iso_limit = kIsoArmsLimit;
  double fda_limit = kFdaArmsLimit;
  bool iso_pass = false;
  bool fda_pass = false;
  bool aasm_averaging_ok = false;
  bool data_age_ok = false;
};

inline ComplianceVerdict compliance_report(const EvaluationReport& report,
                                           double window_duration, bool aasm_mode,
                                           double max_data_age = kMaxDataAge) {
  ComplianceVerdict v;
  v.iso_pass = report.a_rms <= v.iso_limit;
  v.fda_pass = report.a_rms <= v.fda_limit;
  v.aasm_averaging_ok = window_duration <= kAasmMaxWindow || aasm_mode;
  v.data_age_ok = max_data_age <= kMaxDataAge;
  return v;
}

// ---------------------------------------------------------------------------
// Skin tone

enum class SkinToneScale { ita_degrees, fitzpatrick, monk };

inline SkinToneScale skin_tone_scale_from_string(const std::string& s) {
  if (s == "ita" || s == "ita_degrees") return SkinToneScale::ita_degrees;
  if (s == "fitzpatrick") return SkinToneScale::fitzpatrick;
  if (s == "monk") return SkinToneScale::monk;
  throw Error("invalid scale value: " + s);
}

inline const char* to_string(SkinToneScale s) {
  switch (s) {
    case SkinToneScale::ita_degrees: return "ita";
    case SkinToneScale::fitzpatrick: return "fitzpatrick";
    case SkinToneScale::monk: return "monk";
  }
  return "ita";
}

struct SkinToneMeasure {
  SkinToneScale scale = SkinToneScale::ita_degrees;
  double value = 0.0;
};

// Unified dark-skin flag: ITA < 10 deg, Fitzpatrick > 5, Monk > 7.
inline bool classify_skin_tone(const SkinToneMeasure& m) {
  auto integral_in = [](double v, double lo, double hi) {
    return v >= lo && v <= hi && std::floor(v) == v;
  };
  switch (m.scale) {
    case SkinToneScale::ita_degrees:
      if (!std::isfinite(m.value) || m.value < -90.0 || m.value > 90.0)
        throw Error("invalid scale value");
      return m.value < 10.0;
    case SkinToneScale::fitzpatrick:
      if (!integral_in(m.value, 1.0, 6.0)) throw Error("invalid scale value");
      return m.value > 5.0;
    case SkinToneScale::monk:
      if (!integral_in(m.value, 1.0, 10.0)) throw Error("invalid scale value");
      return m.value > 7.0;
  }
  throw Error("invalid scale value");
}

// Pooled metrics per skin-tone stratum ("dark" / "not_dark"); strata with
// no comparable samples are omitted.
inline std::map<std::string, EvaluationReport> stratified_evaluate(
    std::span<const PairedRecord> records, const std::vector<bool>& dark) {
  if (records.size() != dark.size()) throw Error("strata length mismatch");
  std::map<std::string, EvaluationReport> out;
  for (bool flag : {true, false}) {
    std::vector<PairedRecord> subset;
    for (std::size_t i = 0; i < records.size(); ++i)
      if (dark[i] == flag) subset.push_back(records[i]);
    try {
      out.emplace(flag ? "dark" : "not_dark", pooled_evaluate(subset));
    } catch (const Error&) {
    }
  }
  return out;
}

}  // namespace spo2
