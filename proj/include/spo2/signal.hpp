#pragma once

#include "spo2/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace spo2 {

// Uniformly sampled single-channel time series. Sample i sits at
// start_time + i / sampling_rate; timestamps are never stored.
class UniformSignal {
 public:
  UniformSignal() = default;

  UniformSignal(std::string label, double sampling_rate, double start_time,
                std::vector<double> samples, std::string unit = "a.u.")
      : label_(std::move(label)),
        sampling_rate_(sampling_rate),
        start_time_(start_time),
        samples_(std::move(samples)),
        unit_(std::move(unit)) {
    if (!(sampling_rate_ > 0.0) || !std::isfinite(sampling_rate_))
      throw Error("invalid sampling rate: " + label_);
    if (!std::isfinite(start_time_)) throw Error("invalid start time: " + label_);
    for (double v : samples_)
      if (!std::isfinite(v)) throw Error("non-finite sample: " + label_);
  }

  const std::string& label() const noexcept { return label_; }
  const std::string& unit() const noexcept { return unit_; }
  double sampling_rate() const noexcept { return sampling_rate_; }
  double start_time() const noexcept { return start_time_; }
  std::span<const double> samples() const noexcept { return samples_; }
  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }
  double operator[](std::size_t i) const { return samples_[i]; }

  double time_at(std::size_t i) const noexcept {
    return start_time_ + static_cast<double>(i) / sampling_rate_;
  }
  // Time of the last sample (start_time for an empty signal).
  double end_time() const noexcept {
    return samples_.empty() ? start_time_ : time_at(samples_.size() - 1);
  }
  double duration() const noexcept { return end_time() - start_time_; }

  // Same metadata, new samples.
  UniformSignal with_samples(std::vector<double> samples) const {
    return UniformSignal(label_, sampling_rate_, start_time_, std::move(samples), unit_);
  }

 private:
  std::string label_;
  double sampling_rate_ = 1.0;
  double start_time_ = 0.0;
  std::vector<double> samples_;
  std::string unit_ = "a.u.";
};

enum class Location { wrist, upper_arm, other };

inline const char* to_string(Location loc) {
  switch (loc) {
    case Location::wrist: return "wrist";
    case Location::upper_arm: return "upper_arm";
    case Location::other: return "other";
  }
  return "other";
}

inline Location location_from_string(const std::string& s) {
  if (s == "wrist") return Location::wrist;
  if (s == "upper_arm") return Location::upper_arm;
  if (s == "other") return Location::other;
  throw Error("invalid location: " + s);
}

// Default device characteristics.
inline constexpr double kRedWavelengthNm = 660.0;
inline constexpr double kInfraredWavelengthNm = 950.0;
inline constexpr double kGreenWavelengthNm = 525.0;
inline constexpr double kRedIrRateHz = 50.0;
inline constexpr double kGreenRateHz = 100.0;
inline constexpr double kAnalysisRateHz = 50.0;

struct Wavelengths {
  double red_nm = kRedWavelengthNm;
  double infrared_nm = kInfraredWavelengthNm;
  double green_nm = kGreenWavelengthNm;
};

struct PpgRecord {
  UniformSignal red;
  UniformSignal infrared;
  UniformSignal green;
  Location location = Location::other;
  Wavelengths wavelengths;

  // Time span covered by all three channels; nullopt when they do not overlap.
  std::optional<std::pair<double, double>> common_span() const {
    double lo = std::max({red.start_time(), infrared.start_time(), green.start_time()});
    double hi = std::min({red.end_time(), infrared.end_time(), green.end_time()});
    if (red.empty() || infrared.empty() || green.empty() || !(hi > lo))
      return std::nullopt;
    return std::make_pair(lo, hi);
  }
};

// ---------------------------------------------------------------------------
// Resampling

namespace detail {

// Linear interpolation of `s` at absolute time t; t is clamped to the span.
inline double interpolate_at(const UniformSignal& s, double t) {
  const auto x = s.samples();
  double pos = (t - s.start_time()) * s.sampling_rate();
  if (pos <= 0.0) return x.front();
  double last = static_cast<double>(x.size() - 1);
  if (pos >= last) return x.back();
  auto i = static_cast<std::size_t>(pos);
  double frac = pos - static_cast<double>(i);
  if (i + 1 >= x.size()) return x.back();
  return x[i] + frac * (x[i + 1] - x[i]);
}

}  // namespace detail

// Linear-interpolation resampling onto a grid starting at the same start_time.
// The output stops at the last grid point not past the final source sample.
inline UniformSignal resample(const UniformSignal& signal, double target_rate) {
  if (signal.size() < 2) throw Error("insufficient samples");
  if (!(target_rate > 0.0) || !std::isfinite(target_rate))
    throw Error("invalid target rate");

  const auto x = signal.samples();
  const double ratio = signal.sampling_rate() / target_rate;  // source samples per output sample
  const double last = static_cast<double>(x.size() - 1);
  // Small slack so exact rational ratios are not lost to rounding.
  auto n_out = static_cast<std::size_t>(std::floor(last / ratio + 1e-9)) + 1;

  std::vector<double> out(n_out);
  for (std::size_t k = 0; k < n_out; ++k) {
    double pos = static_cast<double>(k) * ratio;
    auto i = static_cast<std::size_t>(std::floor(pos + 1e-12));
    if (i >= x.size() - 1) {
      out[k] = x.back();
      continue;
    }
    double frac = std::max(0.0, pos - static_cast<double>(i));
    out[k] = x[i] + frac * (x[i + 1] - x[i]);
  }
  return UniformSignal(signal.label(), target_rate, signal.start_time(), std::move(out),
                       signal.unit());
}

// Resample onto an explicit grid [start, start + (count-1)/rate].
inline UniformSignal resample_onto(const UniformSignal& signal, double rate, double start,
                                   std::size_t count) {
  if (signal.size() < 2) throw Error("insufficient samples");
  std::vector<double> out(count);
  for (std::size_t k = 0; k < count; ++k)
    out[k] = detail::interpolate_at(signal, start + static_cast<double>(k) / rate);
  return UniformSignal(signal.label(), rate, start, std::move(out), signal.unit());
}

// ---------------------------------------------------------------------------
// IIR filtering

// One second-order section, a0 normalized to 1, transposed direct form II.
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;

  double dc_gain() const { return (b0 + b1 + b2) / (1.0 + a1 + a2); }
};

// Cascade of biquads applied forward-backward (zero phase).
class SosFilter {
 public:
  SosFilter() = default;
  SosFilter(std::vector<Biquad> sections, double settle_time_s, double sampling_rate)
      : sections_(std::move(sections)),
        pad_samples_(static_cast<std::size_t>(std::ceil(settle_time_s * sampling_rate))) {}

  std::span<const Biquad> sections() const noexcept { return sections_; }

  // Single causal pass with the state initialised to the steady state of a
  // constant input equal to x.front().
  std::vector<double> filter(std::span<const double> x) const {
    std::vector<double> y(x.begin(), x.end());
    if (y.empty()) return y;
    double level = y.front();
    for (const Biquad& s : sections_) {
      double g = s.dc_gain();
      double out_level = g * level;
      double z2 = s.b2 * level - s.a2 * out_level;
      double z1 = s.b1 * level - s.a1 * out_level + z2;
      for (double& v : y) {
        double in = v;
        double out = s.b0 * in + z1;
        z1 = s.b1 * in - s.a1 * out + z2;
        z2 = s.b2 * in - s.a2 * out;
        v = out;
      }
      level = out_level;
    }
    return y;
  }

  // Forward-backward filtering with odd (point-reflected) edge extension.
  std::vector<double> filtfilt(std::span<const double> x) const {
    const std::size_t n = x.size();
    if (n == 0) return {};
    const std::size_t pad = n > 1 ? std::min(pad_samples_, n - 1) : 0;

    std::vector<double> ext;
    ext.reserve(n + 2 * pad);
    for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
    ext.insert(ext.end(), x.begin(), x.end());
    for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

    auto fwd = filter(ext);
    std::reverse(fwd.begin(), fwd.end());
    auto bwd = filter(fwd);
    std::reverse(bwd.begin(), bwd.end());
    return {bwd.begin() + static_cast<std::ptrdiff_t>(pad),
            bwd.begin() + static_cast<std::ptrdiff_t>(pad + n)};
  }

 private:
  std::vector<Biquad> sections_;
  std::size_t pad_samples_ = 0;
};

namespace detail {

// Butterworth section quality factors for an even order.
inline std::vector<double> butterworth_q(int order) {
  std::vector<double> q;
  for (int k = 0; k < order / 2; ++k)
    q.push_back(1.0 / (2.0 * std::cos(std::numbers::pi * (2.0 * k + 1.0) / (2.0 * order))));
  return q;
}

inline Biquad lowpass_section(double cutoff, double fs, double q) {
  double w0 = 2.0 * std::numbers::pi * cutoff / fs;
  double c = std::cos(w0), alpha = std::sin(w0) / (2.0 * q);
  double a0 = 1.0 + alpha;
  return {(1.0 - c) / 2.0 / a0, (1.0 - c) / a0, (1.0 - c) / 2.0 / a0, -2.0 * c / a0,
          (1.0 - alpha) / a0};
}

inline Biquad highpass_section(double cutoff, double fs, double q) {
  double w0 = 2.0 * std::numbers::pi * cutoff / fs;
  double c = std::cos(w0), alpha = std::sin(w0) / (2.0 * q);
  double a0 = 1.0 + alpha;
  return {(1.0 + c) / 2.0 / a0, -(1.0 + c) / a0, (1.0 + c) / 2.0 / a0, -2.0 * c / a0,
          (1.0 - alpha) / a0};
}

}  // namespace detail

// Order of each Butterworth edge (per pass; forward-backward doubles it).
inline constexpr int kFilterOrder = 4;

inline SosFilter design_bandpass(double sampling_rate, double low_cut, double high_cut,
                                 int order = kFilterOrder) {
  if (!(low_cut > 0.0) || !(high_cut > low_cut) || !(high_cut < sampling_rate / 2.0))
    throw Error("invalid band");
  std::vector<Biquad> s;
  for (double q : detail::butterworth_q(order)) {
    s.push_back(detail::highpass_section(low_cut, sampling_rate, q));
    s.push_back(detail::lowpass_section(high_cut, sampling_rate, q));
  }
  return SosFilter(std::move(s), 3.0 / low_cut, sampling_rate);
}

inline SosFilter design_highpass(double sampling_rate, double cutoff, int order = kFilterOrder) {
  if (!(cutoff > 0.0) || !(cutoff < sampling_rate / 2.0)) throw Error("invalid band");
  std::vector<Biquad> s;
  for (double q : detail::butterworth_q(order))
    s.push_back(detail::highpass_section(cutoff, sampling_rate, q));
  return SosFilter(std::move(s), 3.0 / cutoff, sampling_rate);
}

// Default cardiac band, 30-300 bpm.
inline constexpr double kCardiacLowHz = 0.5;
inline constexpr double kCardiacHighHz = 5.0;

// Zero-phase Butterworth band-pass. Removes DC; keeps length, rate and start.
inline UniformSignal bandpass(const UniformSignal& signal, double low_cut = kCardiacLowHz,
                              double high_cut = kCardiacHighHz) {
  auto f = design_bandpass(signal.sampling_rate(), low_cut, high_cut);
  return signal.with_samples(f.filtfilt(signal.samples()));
}

inline UniformSignal highpass(const UniformSignal& signal, double cutoff) {
  auto f = design_highpass(signal.sampling_rate(), cutoff);
  return signal.with_samples(f.filtfilt(signal.samples()));
}

// Seconds at each end of a band-passed signal dominated by filter transients.
inline double transient_margin(double low_cut) { return 2.0 / low_cut; }

}  // namespace spo2
