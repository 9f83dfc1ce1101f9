#pragma once

#include "spo2/beats.hpp"
#include "spo2/eval.hpp"
#include "spo2/oximetry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace spo2 {

struct DesaturationEvent {
  double onset = 0.0;      // s
  double depth = 0.0;      // % below baseline at the nadir
  double fall_time = 20.0; // s
  double recovery_time = 20.0;

  double end() const noexcept { return onset + fall_time + recovery_time; }
};

struct MotionBurst {
  double start = 0.0;
  double duration = 0.0;
  double amplitude = 0.0;  // sd of the added wideband noise, a.u.
};

// Heart rate = mean + respiratory sinus arrhythmia + slow random wander.
struct HeartRateProfile {
  double mean_bpm = 65.0;
  double respiratory_bpm = 2.0;       // RSA amplitude
  double respiratory_period = 4.0;    // s
  double wander_bpm = 3.0;            // sd of the slow random component
};

struct ChannelNoise {
  double red = 0.0;
  double infrared = 0.0;
  double green = 0.0;
};

struct ScenarioSpec {
  double duration = 600.0;
  double baseline_spo2 = 96.0;
  std::vector<DesaturationEvent> events;
  HeartRateProfile heart_rate;
  ChannelNoise noise;
  std::vector<MotionBurst> motion;
  double planted_delay = 9.0;   // reference lag behind the wearable site, s
  double clock_offset = 0.0;    // wearable clock minus reference clock, s
  CalibrationModel calibration{110.0, -25.0};
  std::uint64_t seed = 1;
  Location location = Location::upper_arm;

  double perfusion_ir = 0.02;     // AC/DC of the infrared pulse
  double perfusion_green = 0.04;
  double dc_drift = 0.02;         // relative amplitude of the slow DC drift
  double dc_drift_period = 240.0; // s
  double pulse_transit = 0.2;     // R-peak to PPG trough, s
  double reference_averaging = 3.0;  // causal averaging of the reference device, s
  double ecg_rate = 250.0;
  double ecg_noise = 0.02;        // mV
  bool allow_low_spo2 = false;
};

// Ground-truth SpO2 as a continuous function of time. Before the first
// event and between events it sits at baseline.
class Spo2Trajectory {
 public:
  Spo2Trajectory(double baseline, std::vector<DesaturationEvent> events)
      : baseline_(baseline), events_(std::move(events)) {
    std::sort(events_.begin(), events_.end(),
              [](const auto& a, const auto& b) { return a.onset < b.onset; });
    for (const auto& e : events_)
      if (!(e.fall_time > 0.0) || !(e.recovery_time > 0.0) || !(e.depth >= 0.0))
        throw Error("invalid scenario: event shape");
    for (std::size_t i = 1; i < events_.size(); ++i)
      if (events_[i].onset < events_[i - 1].end()) throw Error("overlapping events");
  }

  double value_at(double t) const {
    auto it = std::upper_bound(events_.begin(), events_.end(), t,
                               [](double v, const DesaturationEvent& e) { return v < e.onset; });
    if (it == events_.begin()) return baseline_;
    const DesaturationEvent& e = *(it - 1);
    double u = t - e.onset;
    if (u >= e.fall_time + e.recovery_time) return baseline_;
    // Exponential approach, tau = phase / 3, normalized to hit the nadir
    // and the baseline exactly at the phase boundaries.
    if (u <= e.fall_time) {
      double tau = e.fall_time / 3.0;
      return baseline_ - e.depth * (1.0 - std::exp(-u / tau)) / (1.0 - std::exp(-3.0));
    }
    double v = u - e.fall_time, tau = e.recovery_time / 3.0;
    return baseline_ - e.depth * (std::exp(-v / tau) - std::exp(-3.0)) / (1.0 - std::exp(-3.0));
  }

  double baseline() const noexcept { return baseline_; }
  const std::vector<DesaturationEvent>& events() const noexcept { return events_; }

 private:
  double baseline_;
  std::vector<DesaturationEvent> events_;
};

struct Truth {
  Spo2Series spo2;    // 1 Hz, t = 0 .. duration - 1
  BeatSeries beats;   // R-peak times in [0, duration), reference clock
  std::vector<double> extended_beats;  // beats covering a margin beyond both ends
};

namespace detail {

inline void validate_scenario(const ScenarioSpec& spec) {
  if (!(spec.duration > 0.0)) throw Error("invalid scenario: duration");
  double max_depth = 0.0;
  for (const auto& e : spec.events) max_depth = std::max(max_depth, e.depth);
  if (!spec.allow_low_spo2 && spec.baseline_spo2 - max_depth < 60.0)
    throw Error("invalid scenario: desaturation below 60%");
  if (spec.baseline_spo2 > 100.0) throw Error("invalid scenario: baseline above 100%");
  if (spec.planted_delay < 0.0) throw Error("invalid scenario: negative delay");
}

// Heart rate function with seeded random wander (sum of slow sinusoids).
class HeartRateFunction {
 public:
  HeartRateFunction(const HeartRateProfile& p, std::uint64_t seed) : p_(p) {
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> period(20.0, 300.0), phase(0.0, 2.0 * std::numbers::pi);
    constexpr int kComponents = 12;
    for (int i = 0; i < kComponents; ++i)
      comps_.push_back({2.0 * std::numbers::pi / period(rng), phase(rng)});
    rsa_phase_ = phase(rng);
    // Each component has variance a^2 / 2.
    amp_ = p.wander_bpm * std::sqrt(2.0 / kComponents);
  }

  double operator()(double t) const {
    double hr = p_.mean_bpm;
    if (p_.respiratory_period > 0.0)
      hr += p_.respiratory_bpm *
            std::sin(2.0 * std::numbers::pi * t / p_.respiratory_period + rsa_phase_);
    for (const auto& c : comps_) hr += amp_ * std::sin(c.omega * t + c.phase);
    return std::max(hr, 25.0);
  }

 private:
  struct Component {
    double omega, phase;
  };
  HeartRateProfile p_;
  std::vector<Component> comps_;
  double rsa_phase_ = 0.0;
  double amp_ = 0.0;
};

// Beat times from integrating hr/60 from t = 0 (a beat at 0) towards both ends.
inline std::vector<double> integrate_beats(const HeartRateFunction& hr, double t_min,
                                           double t_max) {
  constexpr double dt = 0.005;
  std::vector<double> fwd{0.0}, bwd;
  double phase = 0.0, t = 0.0;
  while (t < t_max) {
    double inc = hr(t + dt / 2.0) / 60.0 * dt;
    if (std::floor(phase + inc) > std::floor(phase)) {
      double target = std::floor(phase + inc);
      fwd.push_back(t + dt * (target - phase) / inc);
    }
    phase += inc;
    t += dt;
  }
  phase = 0.0;
  t = 0.0;
  while (t > t_min) {
    double inc = hr(t - dt / 2.0) / 60.0 * dt;
    if (std::ceil(phase - inc) < std::ceil(phase)) {
      double target = std::ceil(phase - inc);
      bwd.push_back(t - dt * (phase - target) / inc);
    }
    phase -= inc;
    t -= dt;
  }
  std::vector<double> out(bwd.rbegin(), bwd.rend());
  // bwd's first crossing is at phase 0 only if inc lands exactly; drop dupes of 0.
  out.erase(std::remove_if(out.begin(), out.end(), [](double v) { return v >= -1e-9; }),
            out.end());
  out.insert(out.end(), fwd.begin(), fwd.end());
  return out;
}

}  // namespace detail

inline Truth generate_truth(const ScenarioSpec& spec) {
  detail::validate_scenario(spec);
  Spo2Trajectory traj(spec.baseline_spo2, spec.events);

  Truth truth;
  auto n = static_cast<std::size_t>(std::ceil(spec.duration - 1e-9));
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = traj.value_at(static_cast<double>(i));
  truth.spo2 = make_reference_series(0.0, 1.0, std::move(v));

  if (spec.heart_rate.mean_bpm > 0.0) {
    detail::HeartRateFunction hr(spec.heart_rate, spec.seed);
    double margin = std::abs(spec.clock_offset) + spec.pulse_transit + 10.0;
    truth.extended_beats = detail::integrate_beats(hr, -margin, spec.duration + margin);
  }
  truth.beats.source = BeatSource::ecg;
  for (double b : truth.extended_beats)
    if (b >= 0.0 && b < spec.duration - 1e-6) truth.beats.beat_times.push_back(b);
  return truth;
}

struct SyntheticRecord {
  PpgRecord ppg;
  Spo2Series reference;
  UniformSignal ecg;
};

// Per-beat pulse waveform parameters, in physical (reference-clock) time.
struct PlantedPulse {
  double start = 0.0;  // trough (arrival) time
  double end = 0.0;
  double ros = 0.0;
  double perfusion_red = 0.0;
  double perfusion_ir = 0.0;
};

inline std::vector<PlantedPulse> planted_pulses(const Truth& truth, const ScenarioSpec& spec) {
  if (!(spec.calibration.slope_b() < 0.0)) throw Error("non-physiological calibration");
  Spo2Trajectory traj(spec.baseline_spo2, spec.events);
  std::vector<PlantedPulse> out;
  const auto& b = truth.extended_beats;
  for (std::size_t k = 0; k + 1 < b.size(); ++k) {
    PlantedPulse p;
    p.start = b[k] + spec.pulse_transit;
    p.end = b[k + 1] + spec.pulse_transit;
    double spo2 = traj.value_at(0.5 * (p.start + p.end));
    p.ros = spec.calibration.ros_for(spo2);
    if (!(p.ros > 0.0) || !std::isfinite(p.ros)) throw Error("uncalibratable truth");
    p.perfusion_ir = spec.perfusion_ir;
    p.perfusion_red = p.ros * spec.perfusion_ir;
    out.push_back(p);
  }
  return out;
}

// Noiseless multiplicative pulse model: dc(t) * (1 + PI * (p - 1/2)), with
// p a raised cosine per beat, so AC/DC = PI and the red/IR ratio is the ROS.
class PulseWaveform {
 public:
  PulseWaveform(std::vector<PlantedPulse> pulses, const ScenarioSpec& spec)
      : pulses_(std::move(pulses)),
        drift_(spec.dc_drift),
        drift_period_(spec.dc_drift_period),
        perfusion_green_(spec.perfusion_green) {}

  struct Sample {
    double red, infrared, green;
  };

  // t in physical time; queries should be non-decreasing for speed but any
  // order is correct.
  Sample at(double t) const {
    double dc = 1.0 + drift_ * std::sin(2.0 * std::numbers::pi * t / drift_period_);
    if (pulses_.empty()) return {dc, dc, dc};
    const PlantedPulse& p = locate(t);
    double frac = std::clamp((t - p.start) / (p.end - p.start), 0.0, 1.0);
    double shape = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * frac)) - 0.5;
    return {dc * (1.0 + p.perfusion_red * shape), dc * (1.0 + p.perfusion_ir * shape),
            dc * (1.0 + perfusion_green_ * shape)};
  }

  const std::vector<PlantedPulse>& pulses() const noexcept { return pulses_; }

 private:
  const PlantedPulse& locate(double t) const {
    if (cursor_ < pulses_.size() && pulses_[cursor_].start <= t && t < pulses_[cursor_].end)
      return pulses_[cursor_];
    auto it = std::upper_bound(pulses_.begin(), pulses_.end(), t,
                               [](double v, const PlantedPulse& p) { return v < p.start; });
    std::size_t i = it == pulses_.begin() ? 0 : static_cast<std::size_t>(it - pulses_.begin()) - 1;
    cursor_ = i;
    return pulses_[i];
  }

  std::vector<PlantedPulse> pulses_;
  double drift_;
  double drift_period_;
  double perfusion_green_;
  mutable std::size_t cursor_ = 0;
};

namespace detail {

inline double motion_level(const std::vector<MotionBurst>& bursts, double t) {
  double a = 0.0;
  for (const auto& m : bursts)
    if (t >= m.start && t < m.start + m.duration) a = std::max(a, m.amplitude);
  return a;
}

}  // namespace detail

inline SyntheticRecord synthesize_record(const Truth& truth, const ScenarioSpec& spec) {
  detail::validate_scenario(spec);
  PulseWaveform wave(planted_pulses(truth, spec), spec);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  // Wearable channels on the wearable clock starting at 0.
  auto channel = [&](double rate, double noise_sd, auto pick, const char* label) {
    auto n = static_cast<std::size_t>(std::floor(spec.duration * rate + 1e-9));
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) {
      double tw = static_cast<double>(i) / rate;
      double t = tw - spec.clock_offset;
      double v = pick(wave.at(t));
      // Draw unconditionally so noise realisations scale with the sd.
      double z = gauss(rng), zm = gauss(rng);
      v += noise_sd * z + detail::motion_level(spec.motion, t) * zm;
      x[i] = v;
    }
    return UniformSignal(label, rate, 0.0, std::move(x));
  };

  SyntheticRecord rec;
  rec.ppg.location = spec.location;
  rec.ppg.red = channel(kRedIrRateHz, spec.noise.red,
                        [](const PulseWaveform::Sample& s) { return s.red; }, "red");
  rec.ppg.infrared = channel(kRedIrRateHz, spec.noise.infrared,
                             [](const PulseWaveform::Sample& s) { return s.infrared; },
                             "infrared");
  rec.ppg.green = channel(kGreenRateHz, spec.noise.green,
                          [](const PulseWaveform::Sample& s) { return s.green; }, "green");

  // Reference oximeter: causal average of the delayed truth, 1 Hz.
  Spo2Trajectory traj(spec.baseline_spo2, spec.events);
  auto n_ref = truth.spo2.size();
  std::vector<double> ref(n_ref);
  for (std::size_t j = 0; j < n_ref; ++j) {
    double t = static_cast<double>(j) - spec.planted_delay;
    if (spec.reference_averaging > 0.0) {
      constexpr int kSteps = 30;
      double sum = 0.0;
      for (int s = 0; s <= kSteps; ++s)
        sum += traj.value_at(t - spec.reference_averaging * s / kSteps);
      ref[j] = sum / (kSteps + 1);
    } else {
      ref[j] = traj.value_at(t);
    }
  }
  rec.reference = make_reference_series(0.0, 1.0, std::move(ref));

  // ECG on the reference clock: narrow QRS plus a T wave at each beat.
  auto n_ecg = static_cast<std::size_t>(std::floor(spec.duration * spec.ecg_rate + 1e-9));
  std::vector<double> ecg(n_ecg, 0.0);
  for (double b : truth.extended_beats) {
    auto add = [&](double center, double amp, double sigma) {
      auto i0 = static_cast<long long>(std::floor((center - 5 * sigma) * spec.ecg_rate));
      auto i1 = static_cast<long long>(std::ceil((center + 5 * sigma) * spec.ecg_rate));
      for (long long i = std::max(0LL, i0); i <= i1 && i < static_cast<long long>(n_ecg); ++i) {
        double dt = static_cast<double>(i) / spec.ecg_rate - center;
        ecg[static_cast<std::size_t>(i)] += amp * std::exp(-0.5 * dt * dt / (sigma * sigma));
      }
    };
    add(b, 1.0, 0.01);
    add(b + 0.25, 0.25, 0.04);
  }
  for (double& v : ecg) v += spec.ecg_noise * gauss(rng);
  rec.ecg = UniformSignal("ecg", spec.ecg_rate, 0.0, std::move(ecg), "mV");
  return rec;
}

// ---------------------------------------------------------------------------
// Scenario presets

struct ScenarioOptions {
  double duration = 3600.0;
  bool clean = false;  // no additive noise, no motion
  double min_depth = 5.0;
  double max_depth = 20.0;
  double events_per_hour = 12.0;
  double noise_scale = 1.0;
};

// Randomized overnight-style scenario for a measurement location. Wrist
// presets carry more and larger motion bursts and higher sensor noise.
inline ScenarioSpec make_scenario(Location location, std::uint64_t seed,
                                  const ScenarioOptions& opt = {}) {
  ScenarioSpec s;
  s.duration = opt.duration;
  s.seed = seed;
  s.location = location;
  s.planted_delay = location == Location::wrist ? 5.0 : 9.0;

  std::mt19937_64 rng(seed * 0x2545F4914F6CDD1DULL + 17);
  auto uni = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };

  s.baseline_spo2 = uni(93.0, 98.0);
  s.heart_rate.mean_bpm = uni(55.0, 85.0);
  s.clock_offset = uni(-20.0, 20.0);

  // Events laid out on a jittered lattice so they never overlap.
  auto n_events = static_cast<std::size_t>(std::round(opt.events_per_hour * opt.duration / 3600.0));
  if (n_events > 0) {
    double slot = opt.duration / static_cast<double>(n_events + 1);
    for (std::size_t i = 0; i < n_events; ++i) {
      DesaturationEvent e;
      e.depth = uni(opt.min_depth, opt.max_depth);
      e.fall_time = std::min(uni(20.0, 40.0), slot * 0.4);
      e.recovery_time = std::min(uni(15.0, 30.0), slot * 0.4);
      double room = slot - e.fall_time - e.recovery_time;
      e.onset = slot * (static_cast<double>(i) + 0.5) + uni(0.0, std::max(0.0, room));
      if (s.baseline_spo2 - e.depth < 60.0) e.depth = s.baseline_spo2 - 60.0;
      s.events.push_back(e);
    }
  }

  if (!opt.clean) {
    bool wrist = location == Location::wrist;
    double base = (wrist ? 0.0012 : 0.0004) * opt.noise_scale;
    s.noise = {base, base, base};
    double bursts_per_hour = wrist ? 60.0 : 8.0;
    auto n_bursts = static_cast<std::size_t>(std::round(bursts_per_hour * opt.duration / 3600.0));
    for (std::size_t i = 0; i < n_bursts; ++i) {
      MotionBurst m;
      m.start = uni(0.0, opt.duration);
      m.duration = wrist ? uni(5.0, 30.0) : uni(3.0, 10.0);
      m.amplitude = (wrist ? uni(0.01, 0.04) : uni(0.005, 0.02)) * opt.noise_scale;
      s.motion.push_back(m);
    }
  }
  return s;
}

// Synthetic hypoxia-protocol calibration data: stable plateaus from 100% down
// to 70%, ROS drawn around the model inverse with relative noise.
inline std::vector<CalibrationPair> hypoxia_calibration_pairs(const CalibrationModel& model,
                                                              std::uint64_t seed,
                                                              std::size_t per_plateau = 20,
                                                              double ros_noise = 0.01) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<CalibrationPair> out;
  for (double spo2 = 100.0; spo2 >= 70.0; spo2 -= 5.0) {
    double ros = model.ros_for(spo2);
    for (std::size_t i = 0; i < per_plateau; ++i)
      out.push_back({ros * (1.0 + ros_noise * gauss(rng)), spo2});
  }
  return out;
}

}  // namespace spo2
