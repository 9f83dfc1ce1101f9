#pragma once

#include "spo2/beats.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

namespace spo2 {

// Per-pulse confidence in [0, 1]; higher is better.
class QualityIndex {
 public:
  constexpr QualityIndex() = default;
  explicit QualityIndex(double v) : value_(v) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error("quality index out of range");
  }
  constexpr double value() const noexcept { return value_; }
  friend constexpr auto operator<=>(QualityIndex, QualityIndex) = default;

 private:
  double value_ = 0.0;
};

struct RosSample {
  double time = 0.0;      // pulse end time
  double ros = 0.0;
  QualityIndex qi;
  double duration = 0.0;  // pulse duration, feeds the pulse-rate estimate
};

// Affine ratio-of-ratios to SpO2 map, spo2 = offset + slope * ros.
class CalibrationModel {
 public:
  CalibrationModel(double offset_a, double slope_b) : offset_a_(offset_a), slope_b_(slope_b) {
    if (!std::isfinite(offset_a) || !std::isfinite(slope_b))
      throw Error("non-physiological calibration");
    if (!(slope_b < 0.0)) throw Error("non-physiological calibration");
  }
  double offset_a() const noexcept { return offset_a_; }
  double slope_b() const noexcept { return slope_b_; }

  // Unclamped value of the map.
  double raw(double ros) const noexcept { return offset_a_ + slope_b_ * ros; }
  // Inverse map, ros producing the given SpO2.
  double ros_for(double spo2) const noexcept { return (spo2 - offset_a_) / slope_b_; }

 private:
  double offset_a_;
  double slope_b_;
};

inline double apply_calibration(const CalibrationModel& model, double ros) {
  return std::clamp(model.raw(ros), 0.0, 100.0);
}

inline RosSample compute_ros(const PulseSegment& segment) {
  const auto& r = segment.red;
  const auto& ir = segment.infrared;
  if (!(r.dc_level > 0.0) || !(ir.dc_level > 0.0) || !(ir.ac_amplitude > 0.0) ||
      !(r.ac_amplitude >= 0.0))
    throw Error("degenerate pulse features");
  double ros = (r.ac_amplitude / r.dc_level) / (ir.ac_amplitude / ir.dc_level);
  if (!std::isfinite(ros) || !(ros > 0.0)) throw Error("degenerate pulse features");
  RosSample s;
  s.time = segment.end_time;
  s.ros = ros;
  s.duration = segment.duration;
  return s;
}

// ---------------------------------------------------------------------------
// Quality index

// 0 at or outside [0.3, 2.0] s, 1 on [0.4, 1.5] s, linear in between.
inline double duration_plausibility(double duration) {
  if (duration <= kMinPulseDuration || duration >= kMaxPulseDuration) return 0.0;
  if (duration < 0.4) return (duration - kMinPulseDuration) / 0.1;
  if (duration > 1.5) return (kMaxPulseDuration - duration) / 0.5;
  return 1.0;
}

inline double pearson(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = std::min(a.size(), b.size());
  if (n < 2) return 0.0;
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) return 0.0;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

// qi = duration plausibility * template agreement * noise score. An empty
// template counts as full agreement.
inline QualityIndex compute_qi(const PulseSegment& segment, double local_noise,
                               std::span<const double> pulse_template = {}) {
  double plausibility = duration_plausibility(segment.duration);
  if (!pulse_template.empty())
    plausibility *= std::max(0.0, pearson(segment.shape, pulse_template));
  double ac = segment.infrared.ac_amplitude;
  double noise_score = ac > 0.0 ? 1.0 / (1.0 + std::max(0.0, local_noise) / ac) : 0.0;
  double qi = plausibility * noise_score;
  if (!std::isfinite(qi)) qi = 0.0;
  return QualityIndex(std::clamp(qi, 0.0, 1.0));
}

// Running pulse template: mean of the last `depth` accepted pulse shapes.
// A run of `reset_after` rejections drops the template so that one seeded
// from artifact cannot lock out every later pulse.
class QualityTracker {
 public:
  explicit QualityTracker(double accept_level = 0.5, std::size_t depth = 8,
                          std::size_t reset_after = 16)
      : accept_level_(accept_level), depth_(depth), reset_after_(reset_after) {}

  std::vector<double> current_template() const {
    if (shapes_.empty()) return {};
    std::vector<double> t(shapes_.front().size(), 0.0);
    for (const auto& s : shapes_)
      for (std::size_t i = 0; i < t.size() && i < s.size(); ++i) t[i] += s[i];
    for (double& v : t) v /= static_cast<double>(shapes_.size());
    return t;
  }

  QualityIndex assess(const PulseSegment& segment) {
    auto tmpl = current_template();
    QualityIndex qi = compute_qi(segment, segment.noise_rms, tmpl);
    if (qi.value() >= accept_level_ && !segment.shape.empty()) {
      shapes_.push_back(segment.shape);
      if (shapes_.size() > depth_) shapes_.pop_front();
      rejected_run_ = 0;
    } else if (++rejected_run_ >= reset_after_ && reset_after_ > 0) {
      shapes_.clear();
      rejected_run_ = 0;
    }
    return qi;
  }

 private:
  double accept_level_;
  std::size_t depth_;
  std::size_t reset_after_;
  std::size_t rejected_run_ = 0;
  std::deque<std::vector<double>> shapes_;
};

// ROS and QI for every pulse with usable features, in time order.
inline std::vector<RosSample> ros_samples(std::span<const PulseSegment> segments,
                                          double template_accept_level = 0.5) {
  QualityTracker tracker(template_accept_level);
  std::vector<RosSample> out;
  out.reserve(segments.size());
  for (const auto& seg : segments) {
    RosSample s;
    try {
      s = compute_ros(seg);
    } catch (const Error&) {
      continue;
    }
    s.qi = tracker.assess(seg);
    out.push_back(s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Calibration

struct CalibrationPair {
  double ros = 0.0;
  double reference_spo2 = 0.0;
};

// Ordinary least squares fit of spo2 = offset + slope * ros.
inline CalibrationModel fit_calibration(std::span<const CalibrationPair> pairs) {
  if (pairs.size() < 2) throw Error("rank deficient");
  double mx = 0.0, my = 0.0;
  for (const auto& p : pairs) {
    if (!(p.reference_spo2 >= 60.0 && p.reference_spo2 <= 100.0) || !std::isfinite(p.ros))
      throw Error("invalid calibration data");
    mx += p.ros;
    my += p.reference_spo2;
  }
  const auto n = static_cast<double>(pairs.size());
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& p : pairs) {
    sxx += (p.ros - mx) * (p.ros - mx);
    sxy += (p.ros - mx) * (p.reference_spo2 - my);
  }
  auto [lo, hi] = std::minmax_element(pairs.begin(), pairs.end(),
                                      [](const auto& a, const auto& b) { return a.ros < b.ros; });
  if (lo->ros == hi->ros || !(sxx > 0.0)) throw Error("rank deficient");
  double slope = sxy / sxx;
  if (!(slope < 0.0)) throw Error("non-physiological calibration");
  return CalibrationModel(my - slope * mx, slope);
}

// ---------------------------------------------------------------------------
// Windowed SpO2 series

inline constexpr double kMaxDataAge = 30.0;
inline constexpr double kAasmMaxWindow = 3.0;
inline constexpr double kAasmRateLimitBpm = 80.0;

struct EstimatorConfig {
  double window = 3.0;  // s
  double refresh_rate = 1.0;  // Hz
  double qi_threshold = 0.5;
  bool aasm_mode = false;
  double max_data_age = kMaxDataAge;
  double rate_lookback = 10.0;  // s of pulses used for the pulse-rate estimate
};

inline void validate(const EstimatorConfig& c) {
  if (!(c.window > 0.0) || !(c.max_data_age > 0.0) || c.window > c.max_data_age)
    throw Error("invalid window");
  if (!(c.refresh_rate > 0.0)) throw Error("invalid refresh rate");
  if (!(c.qi_threshold >= 0.0 && c.qi_threshold <= 1.0)) throw Error("invalid qi threshold");
}

struct Spo2Series {
  double refresh_rate = 1.0;
  double window_duration = 3.0;
  double max_data_age = kMaxDataAge;
  std::vector<double> times;
  std::vector<double> values;  // %, clamped to [0, 100]; 0 where invalid
  std::vector<double> qi;      // minimum qi of contributing pulses
  std::vector<bool> valid;
  std::vector<double> effective_window;  // averaging span used per tick, s

  std::size_t size() const noexcept { return times.size(); }
};

// Fully valid series, e.g. a reference oximeter trace.
inline Spo2Series make_reference_series(double start, double rate, std::vector<double> values) {
  Spo2Series s;
  s.refresh_rate = rate;
  s.window_duration = 0.0;
  const std::size_t n = values.size();
  s.times.resize(n);
  for (std::size_t i = 0; i < n; ++i) s.times[i] = start + static_cast<double>(i) / rate;
  s.values = std::move(values);
  s.qi.assign(n, 1.0);
  s.valid.assign(n, true);
  s.effective_window.assign(n, 0.0);
  return s;
}

// Output ticks at start + k / refresh_rate, k in [0, count).
struct TickGrid {
  double start = 0.0;
  std::size_t count = 0;
};

inline Spo2Series estimate_spo2_series(std::span<const RosSample> samples,
                                       const CalibrationModel& model,
                                       const EstimatorConfig& cfg, TickGrid ticks) {
  validate(cfg);
  std::vector<RosSample> pulses;
  for (const auto& s : samples)
    if (s.qi.value() >= cfg.qi_threshold) pulses.push_back(s);
  std::stable_sort(pulses.begin(), pulses.end(),
                   [](const RosSample& a, const RosSample& b) { return a.time < b.time; });

  Spo2Series out;
  out.refresh_rate = cfg.refresh_rate;
  out.window_duration = cfg.window;
  out.max_data_age = cfg.max_data_age;
  out.times.resize(ticks.count);
  out.values.assign(ticks.count, 0.0);
  out.qi.assign(ticks.count, 0.0);
  out.valid.assign(ticks.count, false);
  out.effective_window.assign(ticks.count, cfg.window);

  auto first_at_or_after = [&](double t) {
    return static_cast<std::size_t>(
        std::lower_bound(pulses.begin(), pulses.end(), t,
                         [](const RosSample& p, double v) { return p.time < v; }) -
        pulses.begin());
  };
  auto first_after = [&](double t) {
    return static_cast<std::size_t>(
        std::upper_bound(pulses.begin(), pulses.end(), t,
                         [](double v, const RosSample& p) { return v < p.time; }) -
        pulses.begin());
  };

  constexpr double eps = 1e-9;
  for (std::size_t k = 0; k < ticks.count; ++k) {
    const double t = ticks.start + static_cast<double>(k) / cfg.refresh_rate;
    out.times[k] = t;
    const std::size_t end = first_after(t + eps);

    double w_eff = cfg.window;
    if (cfg.aasm_mode && cfg.window <= kAasmMaxWindow) {
      std::size_t rb = first_at_or_after(t - cfg.rate_lookback - eps);
      if (end > rb) {
        double sum = 0.0;
        for (std::size_t i = rb; i < end; ++i) sum += pulses[i].duration;
        double mean_duration = sum / static_cast<double>(end - rb);
        if (mean_duration > 0.0 && 60.0 / mean_duration < kAasmRateLimitBpm)
          w_eff = std::max(cfg.window, 3.0 * mean_duration);
      }
    }
    w_eff = std::min(w_eff, cfg.max_data_age);
    out.effective_window[k] = w_eff;

    const std::size_t begin = first_at_or_after(t - w_eff - eps);
    if (end <= begin) continue;
    if (t - pulses[end - 1].time > cfg.max_data_age + eps) continue;
    double sum = 0.0, qmin = 1.0;
    for (std::size_t i = begin; i < end; ++i) {
      sum += pulses[i].ros;
      qmin = std::min(qmin, pulses[i].qi.value());
    }
    out.values[k] = apply_calibration(model, sum / static_cast<double>(end - begin));
    out.qi[k] = qmin;
    out.valid[k] = true;
  }
  return out;
}

// Ticks on the refresh grid spanning the pulses.
inline Spo2Series estimate_spo2_series(std::span<const RosSample> samples,
                                       const CalibrationModel& model,
                                       const EstimatorConfig& cfg = {}) {
  validate(cfg);
  if (samples.empty()) return estimate_spo2_series(samples, model, cfg, TickGrid{});
  auto [lo, hi] = std::minmax_element(samples.begin(), samples.end(),
                                      [](const auto& a, const auto& b) { return a.time < b.time; });
  double start = std::ceil(lo->time * cfg.refresh_rate) / cfg.refresh_rate;
  auto count = static_cast<std::size_t>(
      std::max(0.0, std::floor((hi->time - start) * cfg.refresh_rate + 1e-9) + 1));
  return estimate_spo2_series(samples, model, cfg, TickGrid{start, count});
}

}  // namespace spo2
