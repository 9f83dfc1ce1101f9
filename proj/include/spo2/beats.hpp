#pragma once

#include "spo2/signal.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

namespace spo2 {

// Plausible pulse durations, 30-200 bpm.
inline constexpr double kMinPulseDuration = 0.3;
inline constexpr double kMaxPulseDuration = 2.0;

struct ChannelFeatures {
  double ac_amplitude = 0.0;  // peak-to-trough of the band-passed pulse
  double dc_level = 0.0;      // mean of the raw pulse
};

// One trough-to-trough cardiac pulse.
struct PulseSegment {
  double onset_time = 0.0;
  double end_time = 0.0;
  double duration = 0.0;
  ChannelFeatures red;
  ChannelFeatures infrared;
  // RMS of the infrared residual above the cardiac band over the pulse.
  double noise_rms = 0.0;
  // Band-passed infrared pulse resampled to a fixed number of points.
  std::vector<double> shape;
};

enum class BeatSource { ecg, ppg };

struct BeatSeries {
  std::vector<double> beat_times;
  BeatSource source = BeatSource::ppg;

  std::size_t size() const noexcept { return beat_times.size(); }
  bool empty() const noexcept { return beat_times.empty(); }
};

enum class PulseChannel { green, infrared };

struct PulseDetectionConfig {
  PulseChannel channel = PulseChannel::green;
  double low_cut = kCardiacLowHz;
  double high_cut = kCardiacHighHz;
  double analysis_rate = kAnalysisRateHz;
  // Seconds of signal at each end excluded from segmentation.
  double edge_margin = 0.5;
  // Window of the rolling amplitude estimate.
  double amplitude_window = 5.0;
  // A trough must rise to a peak at least this fraction of the local
  // amplitude before the next trough counts as a new pulse.
  double min_prominence = 0.3;
  double noise_cutoff = kCardiacHighHz;
  std::size_t shape_points = 32;
  double min_duration = kMinPulseDuration;
  double max_duration = kMaxPulseDuration;
};

struct PulseDetection {
  std::vector<PulseSegment> segments;  // plausible pulses only
  BeatSeries onsets;                   // every detected trough
};

namespace detail {

// Centered rolling min and max over [i - half, i + half], truncated at edges.
inline std::pair<std::vector<double>, std::vector<double>> rolling_extrema(
    std::span<const double> x, std::size_t half) {
  const std::size_t n = x.size();
  std::vector<double> lo(n), hi(n);
  std::deque<std::size_t> qmin, qmax;
  std::size_t next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t right = std::min(n - 1, i + half);
    while (next <= right) {
      while (!qmin.empty() && x[qmin.back()] >= x[next]) qmin.pop_back();
      qmin.push_back(next);
      while (!qmax.empty() && x[qmax.back()] <= x[next]) qmax.pop_back();
      qmax.push_back(next);
      ++next;
    }
    std::size_t left = i >= half ? i - half : 0;
    while (qmin.front() < left) qmin.pop_front();
    while (qmax.front() < left) qmax.pop_front();
    lo[i] = x[qmin.front()];
    hi[i] = x[qmax.front()];
  }
  return {std::move(lo), std::move(hi)};
}

// Sub-sample offset of an extremum at i from a parabola through i-1, i, i+1.
inline double parabolic_offset(std::span<const double> x, std::size_t i) {
  if (i == 0 || i + 1 >= x.size()) return 0.0;
  double denom = x[i - 1] - 2.0 * x[i] + x[i + 1];
  if (denom == 0.0) return 0.0;
  double d = 0.5 * (x[i - 1] - x[i + 1]) / denom;
  return std::clamp(d, -0.5, 0.5);
}

inline std::vector<double> resample_points(std::span<const double> x, std::size_t points) {
  std::vector<double> out(points);
  if (x.empty()) return out;
  if (x.size() == 1 || points == 1) {
    std::fill(out.begin(), out.end(), x.front());
    return out;
  }
  double step = static_cast<double>(x.size() - 1) / static_cast<double>(points - 1);
  for (std::size_t k = 0; k < points; ++k) {
    double pos = static_cast<double>(k) * step;
    auto i = std::min(static_cast<std::size_t>(pos), x.size() - 2);
    double f = pos - static_cast<double>(i);
    out[k] = x[i] + f * (x[i + 1] - x[i]);
  }
  return out;
}

// Troughs of a band-passed pulse wave, as sample indices.
inline std::vector<std::size_t> find_troughs(std::span<const double> x, double rate,
                                             const PulseDetectionConfig& cfg) {
  const std::size_t n = x.size();
  std::vector<std::size_t> kept;
  if (n < 3) return kept;
  auto half = static_cast<std::size_t>(std::round(cfg.amplitude_window * rate / 2.0));
  auto [lo, hi] = rolling_extrema(x, half);
  const auto refractory = cfg.min_duration * rate;

  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (!(x[i] < x[i - 1] && x[i] <= x[i + 1])) continue;
    double amp = hi[i] - lo[i];
    if (!(amp > 1e-12)) continue;
    if (x[i] > lo[i] + 0.5 * amp) continue;  // troughs live in the lower half
    if (kept.empty()) {
      kept.push_back(i);
      continue;
    }
    std::size_t last = kept.back();
    double peak = *std::max_element(x.begin() + static_cast<std::ptrdiff_t>(last),
                                    x.begin() + static_cast<std::ptrdiff_t>(i));
    bool too_close = static_cast<double>(i - last) < refractory;
    bool shallow = peak - std::max(x[last], x[i]) < cfg.min_prominence * amp;
    if (too_close || shallow) {
      if (x[i] < x[last]) kept.back() = i;
    } else {
      kept.push_back(i);
    }
  }
  return kept;
}

inline const UniformSignal& pick_channel(const PpgRecord& record, PulseChannel ch) {
  return ch == PulseChannel::green ? record.green : record.infrared;
}

}  // namespace detail

// Segment PPG pulses trough-to-trough on the configured channel and extract
// red/infrared AC and DC features on a common analysis grid.
inline PulseDetection analyze_pulses(const PpgRecord& record,
                                     const PulseDetectionConfig& cfg = {}) {
  const UniformSignal& det_raw = detail::pick_channel(record, cfg.channel);
  if (det_raw.size() < 2) throw Error("missing channel");
  if (record.red.size() < 2 || record.infrared.size() < 2) throw Error("missing channel");

  double span_lo = std::max({record.red.start_time(), record.infrared.start_time(),
                             det_raw.start_time()});
  double span_hi =
      std::min({record.red.end_time(), record.infrared.end_time(), det_raw.end_time()});
  if (!(span_hi - span_lo > 10.0)) throw Error("insufficient signal");

  const double rate = cfg.analysis_rate;
  auto count = static_cast<std::size_t>(std::floor((span_hi - span_lo) * rate + 1e-9)) + 1;
  auto red = resample_onto(record.red, rate, span_lo, count);
  auto ir = resample_onto(record.infrared, rate, span_lo, count);
  auto det = resample_onto(det_raw, rate, span_lo, count);

  auto det_bp = bandpass(det, cfg.low_cut, cfg.high_cut);
  auto red_bp = bandpass(red, cfg.low_cut, cfg.high_cut);
  auto ir_bp = bandpass(ir, cfg.low_cut, cfg.high_cut);
  auto ir_hf = highpass(ir, cfg.noise_cutoff);

  const auto x = det_bp.samples();
  auto troughs = detail::find_troughs(x, rate, cfg);

  PulseDetection out;
  out.onsets.source = BeatSource::ppg;
  std::vector<double> trough_time(troughs.size());
  for (std::size_t k = 0; k < troughs.size(); ++k) {
    std::size_t i = troughs[k];
    trough_time[k] = span_lo + (static_cast<double>(i) + detail::parabolic_offset(x, i)) / rate;
    out.onsets.beat_times.push_back(trough_time[k]);
  }

  const auto r_raw = red.samples(), i_raw = ir.samples();
  const auto r_bp = red_bp.samples(), i_bp = ir_bp.samples(), hf = ir_hf.samples();
  for (std::size_t k = 0; k + 1 < troughs.size(); ++k) {
    const std::size_t a = troughs[k], b = troughs[k + 1];
    PulseSegment seg;
    seg.onset_time = trough_time[k];
    seg.end_time = trough_time[k + 1];
    seg.duration = seg.end_time - seg.onset_time;
    if (seg.duration < cfg.min_duration || seg.duration > cfg.max_duration) continue;
    if (seg.onset_time < span_lo + cfg.edge_margin || seg.end_time > span_hi - cfg.edge_margin)
      continue;

    auto feature = [a, b](std::span<const double> raw, std::span<const double> bp) {
      auto first = bp.begin() + static_cast<std::ptrdiff_t>(a);
      auto last = bp.begin() + static_cast<std::ptrdiff_t>(b) + 1;
      auto [mn, mx] = std::minmax_element(first, last);
      // Half-open for the mean so consecutive pulses do not share a sample.
      double sum = std::accumulate(raw.begin() + static_cast<std::ptrdiff_t>(a),
                                   raw.begin() + static_cast<std::ptrdiff_t>(b), 0.0);
      return ChannelFeatures{*mx - *mn, sum / static_cast<double>(b - a)};
    };
    seg.red = feature(r_raw, r_bp);
    seg.infrared = feature(i_raw, i_bp);
    if (!(seg.red.dc_level > 0.0) || !(seg.infrared.dc_level > 0.0)) continue;

    double ss = 0.0;
    for (std::size_t i = a; i < b; ++i) ss += hf[i] * hf[i];
    seg.noise_rms = std::sqrt(ss / static_cast<double>(b - a));
    seg.shape = detail::resample_points(i_bp.subspan(a, b - a + 1), cfg.shape_points);
    out.segments.push_back(std::move(seg));
  }
  return out;
}

inline std::vector<PulseSegment> detect_pulses(const PpgRecord& record,
                                               PulseChannel channel = PulseChannel::green) {
  PulseDetectionConfig cfg;
  cfg.channel = channel;
  return analyze_pulses(record, cfg).segments;
}

// ---------------------------------------------------------------------------
// ECG

struct BeatDetectionConfig {
  double low_cut = 5.0;
  double high_cut = 25.0;
  double refractory = 0.3;
  double smoothing = 0.04;         // moving-average window on the energy, s
  double threshold_window = 3.0;   // rolling-max window for the adaptive threshold, s
  double threshold_fraction = 0.3;
};

// Energy detector: band-pass, square, smooth, adaptive threshold, refractory.
inline BeatSeries detect_beats(const UniformSignal& ecg, const BeatDetectionConfig& cfg = {}) {
  if (ecg.sampling_rate() < 100.0) throw Error("ecg rate too low");
  BeatSeries out;
  out.source = BeatSource::ecg;
  if (ecg.size() < 3) return out;

  const double fs = ecg.sampling_rate();
  auto bp = bandpass(ecg, cfg.low_cut, cfg.high_cut);
  const auto y = bp.samples();
  const std::size_t n = y.size();

  auto half = static_cast<std::size_t>(std::round(cfg.smoothing * fs / 2.0));
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + y[i] * y[i];
  std::vector<double> energy(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t a = i >= half ? i - half : 0, b = std::min(n, i + half + 1);
    energy[i] = (prefix[b] - prefix[a]) / static_cast<double>(b - a);
  }

  double global_max = *std::max_element(energy.begin(), energy.end());
  if (!(global_max > 1e-20)) return out;

  auto win = static_cast<std::size_t>(std::round(cfg.threshold_window * fs / 2.0));
  auto [lo, hi] = detail::rolling_extrema(energy, win);
  (void)lo;

  std::vector<std::size_t> peaks;
  const double refractory = cfg.refractory * fs;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (!(energy[i] > energy[i - 1] && energy[i] >= energy[i + 1])) continue;
    if (energy[i] < cfg.threshold_fraction * hi[i] || energy[i] < 1e-9 * global_max) continue;
    if (!peaks.empty() && static_cast<double>(i - peaks.back()) < refractory) {
      if (energy[i] > energy[peaks.back()]) peaks.back() = i;
      continue;
    }
    peaks.push_back(i);
  }
  // Energy humps can be flat or split; the beat sits at the largest
  // band-passed excursion near the energy peak.
  for (std::size_t i : peaks) {
    std::size_t a = i >= 2 * half ? i - 2 * half : 0, b = std::min(n - 1, i + 2 * half);
    std::size_t best = i;
    for (std::size_t j = a; j <= b; ++j)
      if (std::abs(y[j]) > std::abs(y[best])) best = j;
    double off = 0.0;
    if (best > 0 && best + 1 < n) {
      double ym = std::abs(y[best - 1]), y0 = std::abs(y[best]), yp = std::abs(y[best + 1]);
      double denom = ym - 2.0 * y0 + yp;
      if (denom < 0.0) off = std::clamp(0.5 * (ym - yp) / denom, -0.5, 0.5);
    }
    out.beat_times.push_back(ecg.time_at(best) + off / fs);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Inter-beat intervals

struct IbiAnchors {
  std::vector<double> times;   // later beat of each interval
  std::vector<double> values;  // interval length, s
};

// Successive differences anchored at the later beat. Intervals outside the
// plausible pulse range are skipped.
inline IbiAnchors ibi_anchors(const BeatSeries& beats) {
  IbiAnchors a;
  for (std::size_t k = 1; k < beats.beat_times.size(); ++k) {
    double d = beats.beat_times[k] - beats.beat_times[k - 1];
    if (d < kMinPulseDuration || d > kMaxPulseDuration) continue;
    a.times.push_back(beats.beat_times[k]);
    a.values.push_back(d);
  }
  return a;
}

struct IbiGrid {
  UniformSignal signal;
  std::vector<bool> in_gap;  // grid points inside an anchor gap > max_gap
};

inline constexpr double kDefaultIbiGridRate = 4.0;

// Grids anchored intervals; gaps between anchors longer than max_gap hold
// the last value and are flagged.
inline IbiGrid ibi_series(const IbiAnchors& a, double grid_rate = kDefaultIbiGridRate,
                          double max_gap = 3.0) {
  if (a.times.size() < 2) throw Error("insufficient beats");
  if (!(grid_rate > 0.0)) throw Error("invalid grid rate");

  const double t0 = a.times.front();
  auto count =
      static_cast<std::size_t>(std::floor((a.times.back() - t0) * grid_rate + 1e-9)) + 1;
  std::vector<double> v(count);
  std::vector<bool> gap(count, false);
  std::size_t j = 0;
  for (std::size_t k = 0; k < count; ++k) {
    double t = t0 + static_cast<double>(k) / grid_rate;
    while (j + 2 < a.times.size() && a.times[j + 1] <= t) ++j;
    double ta = a.times[j], tb = a.times[j + 1];
    if (t >= tb) {
      v[k] = a.values[j + 1];
    } else if (tb - ta > max_gap) {
      v[k] = a.values[j];
      gap[k] = t > ta;
    } else {
      double f = (t - ta) / (tb - ta);
      v[k] = a.values[j] + f * (a.values[j + 1] - a.values[j]);
    }
  }
  return {UniformSignal("ibi", grid_rate, t0, std::move(v), "s"), std::move(gap)};
}

inline IbiGrid ibi_series(const BeatSeries& beats, double grid_rate = kDefaultIbiGridRate,
                          double max_gap = 3.0) {
  if (beats.size() < 3) throw Error("insufficient beats");
  return ibi_series(ibi_anchors(beats), grid_rate, max_gap);
}

// Intervals taken from individual pulse segments, (end_time, duration),
// so that a rejected pulse leaves a gap instead of a merged interval.
inline IbiAnchors ibi_anchors(std::span<const PulseSegment> segments) {
  IbiAnchors a;
  for (const auto& s : segments) {
    a.times.push_back(s.end_time);
    a.values.push_back(s.duration);
  }
  return a;
}

}  // namespace spo2
