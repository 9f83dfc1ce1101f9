#include "spo2/oximetry.hpp"
#include "spo2/synth.hpp"

#include "test_util.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

using namespace spo2;

namespace {

constexpr double kPi = std::numbers::pi;

PulseSegment features(double ac_r, double dc_r, double ac_ir, double dc_ir, double end = 1.0) {
  PulseSegment s;
  s.onset_time = end - 1.0;
  s.end_time = end;
  s.duration = 1.0;
  s.red = {ac_r, dc_r};
  s.infrared = {ac_ir, dc_ir};
  return s;
}

std::vector<double> raised_cosine(std::size_t n, double skew = 0.0) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    double u = static_cast<double>(i) / static_cast<double>(n - 1);
    v[i] = 0.5 * (1.0 - std::cos(2.0 * kPi * (u + skew * u * (1.0 - u))));
  }
  return v;
}

std::vector<RosSample> pulse_train(double t0, double t1, double period, double ros,
                                   double qi = 1.0) {
  std::vector<RosSample> out;
  for (double t = t0; t <= t1 + 1e-9; t += period)
    out.push_back({t, ros, QualityIndex(qi), period});
  return out;
}

// Direct transcription of the windowing rule, one tick at a time.
Spo2Series oracle_series(const std::vector<RosSample>& pulses, const CalibrationModel& m,
                         const EstimatorConfig& c, double start, std::size_t count) {
  Spo2Series s;
  for (std::size_t k = 0; k < count; ++k) {
    double t = start + static_cast<double>(k) / c.refresh_rate;
    double w = c.window;
    if (c.aasm_mode && c.window <= 3.0) {
      double sum = 0.0;
      int n = 0;
      for (const auto& p : pulses)
        if (p.qi.value() >= c.qi_threshold && p.time >= t - c.rate_lookback - 1e-9 &&
            p.time <= t + 1e-9) {
          sum += p.duration;
          ++n;
        }
      if (n > 0 && 60.0 / (sum / n) < 80.0) w = std::max(w, 3.0 * sum / n);
    }
    w = std::min(w, c.max_data_age);
    double sum = 0.0, newest = -1e300, qmin = 1.0;
    int n = 0;
    for (const auto& p : pulses) {
      if (p.qi.value() < c.qi_threshold) continue;
      if (p.time < t - w - 1e-9 || p.time > t + 1e-9) continue;
      sum += p.ros;
      qmin = std::min(qmin, p.qi.value());
      newest = std::max(newest, p.time);
      ++n;
    }
    bool valid = n > 0 && t - newest <= c.max_data_age + 1e-9;
    s.times.push_back(t);
    s.valid.push_back(valid);
    s.values.push_back(valid ? std::clamp(m.offset_a() + m.slope_b() * sum / n, 0.0, 100.0) : 0.0);
    s.qi.push_back(valid ? qmin : 0.0);
    s.effective_window.push_back(w);
  }
  return s;
}

}  // namespace

TEST(QualityIndexType, EnforcesRange) {
  EXPECT_NO_THROW(QualityIndex(0.0));
  EXPECT_NO_THROW(QualityIndex(1.0));
  EXPECT_THROW(QualityIndex(-0.01), Error);
  EXPECT_THROW(QualityIndex(1.01), Error);
  EXPECT_THROW(QualityIndex(NAN), Error);
}

TEST(ComputeRos, Arithmetic) {
  auto a = compute_ros(features(0.02, 1.0, 0.04, 2.0, 7.5));
  EXPECT_DOUBLE_EQ(a.ros, 1.0);
  EXPECT_EQ(a.time, 7.5);
  EXPECT_DOUBLE_EQ(compute_ros(features(0.01, 1.0, 0.02, 1.0)).ros, 0.5);
}

TEST(ComputeRos, DegenerateFeatures) {
  EXPECT_ERROR_PREFIX(compute_ros(features(0.01, 0.0, 0.02, 1.0)), "degenerate pulse features");
  EXPECT_ERROR_PREFIX(compute_ros(features(0.01, 1.0, 0.02, -1.0)), "degenerate pulse features");
  EXPECT_ERROR_PREFIX(compute_ros(features(0.01, 1.0, 0.0, 1.0)), "degenerate pulse features");
}

TEST(ComputeRos, SyntheticPulseMatchesGeneratorRatio) {
  // Brute-force oracle over one generator period: (max - min) / mean per channel.
  ScenarioSpec spec;
  spec.dc_drift = 0.0;
  PlantedPulse p{10.0, 11.0, 0.6, 0.6 * spec.perfusion_ir, spec.perfusion_ir};
  PulseWaveform wave({p}, spec);
  double rmin = 1e9, rmax = -1e9, imin = 1e9, imax = -1e9, rsum = 0.0, isum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    auto s = wave.at(10.0 + static_cast<double>(i) / n);
    rmin = std::min(rmin, s.red), rmax = std::max(rmax, s.red), rsum += s.red;
    imin = std::min(imin, s.infrared), imax = std::max(imax, s.infrared), isum += s.infrared;
  }
  double oracle = ((rmax - rmin) / (rsum / n)) / ((imax - imin) / (isum / n));
  EXPECT_NEAR(oracle, 0.6, 1e-6);
  auto r = compute_ros(features(rmax - rmin, rsum / n, imax - imin, isum / n));
  EXPECT_NEAR(r.ros, 0.6, 1e-6);

  // Through real feature extraction on a noiseless record: within 1%.
  spec.duration = 120.0;
  spec.baseline_spo2 = 95.0;
  spec.clock_offset = 0.0;
  auto truth = generate_truth(spec);
  auto rec = synthesize_record(truth, spec);
  auto segs = detect_pulses(rec.ppg);
  ASSERT_GT(segs.size(), 50u);
  for (const auto& s : segs) {
    if (s.onset_time < 4.0 || s.end_time > 116.0) continue;
    EXPECT_NEAR(compute_ros(s).ros, 0.6, 0.006);
  }
}

TEST(DurationPlausibility, Ramp) {
  EXPECT_EQ(duration_plausibility(0.3), 0.0);
  EXPECT_EQ(duration_plausibility(0.2), 0.0);
  EXPECT_NEAR(duration_plausibility(0.35), 0.5, 1e-12);
  EXPECT_EQ(duration_plausibility(0.4), 1.0);
  EXPECT_EQ(duration_plausibility(1.0), 1.0);
  EXPECT_EQ(duration_plausibility(1.5), 1.0);
  EXPECT_NEAR(duration_plausibility(1.75), 0.5, 1e-12);
  EXPECT_EQ(duration_plausibility(2.0), 0.0);
  EXPECT_EQ(duration_plausibility(2.5), 0.0);
}

TEST(ComputeQi, CleanPulseMatchingTemplate) {
  auto seg = features(0.012, 1.0, 0.02, 1.0);
  seg.shape = raised_cosine(32);
  auto tmpl = raised_cosine(32);
  double qi = compute_qi(seg, 0.0, tmpl).value();
  // Formula oracle: plausibility 1, correlation 1, noise score 1.
  double oracle = 1.0 * 1.0 * (1.0 / (1.0 + 0.0 / 0.02));
  EXPECT_NEAR(qi, oracle, 1e-12);
  EXPECT_GE(qi, 0.9);
  // Slightly different shape and a little noise stays high.
  seg.shape = raised_cosine(32, 0.1);
  EXPECT_GE(compute_qi(seg, 0.0005, tmpl).value(), 0.9);
}

TEST(ComputeQi, NoisePulseScoresLow) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  auto seg = features(0.012, 1.0, 0.02, 1.0);
  seg.shape.resize(32);
  for (auto& v : seg.shape) v = g(rng);
  double noise = 5.0 * seg.infrared.ac_amplitude;
  double qi = compute_qi(seg, noise).value();
  EXPECT_NEAR(qi, 1.0 / (1.0 + 5.0), 1e-12);  // empty template counts as agreement
  EXPECT_LE(qi, 0.2);
  EXPECT_LE(compute_qi(seg, noise, raised_cosine(32)).value(), 0.2);
}

TEST(ComputeQi, BoundaryDurationIsZero) {
  auto seg = features(0.01, 1.0, 0.02, 1.0);
  seg.duration = 0.3;
  seg.shape = raised_cosine(32);
  EXPECT_EQ(compute_qi(seg, 0.0, raised_cosine(32)).value(), 0.0);
}

TEST(ComputeQi, AlwaysInUnitInterval) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 3.0);
  for (int i = 0; i < 500; ++i) {
    auto seg = features(std::abs(u(rng)), 1.0, std::abs(u(rng)), 1.0);
    seg.duration = u(rng);
    seg.shape = raised_cosine(32, u(rng) * 0.2);
    double q = compute_qi(seg, u(rng), raised_cosine(32)).value();
    EXPECT_GE(q, 0.0);
    EXPECT_LE(q, 1.0);
  }
}

TEST(QualityTracker, TemplateRejectsInvertedPulse) {
  QualityTracker tracker;
  for (int i = 0; i < 10; ++i) {
    auto seg = features(0.01, 1.0, 0.02, 1.0, i + 1.0);
    seg.shape = raised_cosine(32);
    EXPECT_GE(tracker.assess(seg).value(), 0.99);
  }
  auto bad = features(0.01, 1.0, 0.02, 1.0, 12.0);
  bad.shape = raised_cosine(32);
  for (auto& v : bad.shape) v = -v;
  EXPECT_EQ(tracker.assess(bad).value(), 0.0);
  EXPECT_EQ(tracker.current_template().size(), 32u);
}

TEST(QualityTracker, RecoversFromArtifactTemplate) {
  // First pulses are inverted artifacts and seed the template; clean pulses
  // are rejected until a run of rejections clears it.
  QualityTracker tracker(0.5, 8, 16);
  double t = 1.0;
  for (int i = 0; i < 8; ++i, t += 1.0) {
    auto seg = features(0.01, 1.0, 0.02, 1.0, t);
    seg.shape = raised_cosine(32);
    for (auto& v : seg.shape) v = -v;
    tracker.assess(seg);
  }
  int rejected = 0;
  for (int i = 0; i < 40; ++i, t += 1.0) {
    auto seg = features(0.01, 1.0, 0.02, 1.0, t);
    seg.shape = raised_cosine(32);
    if (tracker.assess(seg).value() < 0.5) ++rejected;
  }
  EXPECT_EQ(rejected, 16);
}

TEST(FitCalibration, TwoPointLine) {
  std::vector<CalibrationPair> p{{0.5, 97.5}, {1.0, 85.0}};
  auto m = fit_calibration(p);
  EXPECT_NEAR(m.offset_a(), 110.0, 1e-12);
  EXPECT_NEAR(m.slope_b(), -25.0, 1e-12);
}

TEST(FitCalibration, ExactAffineData) {
  std::vector<CalibrationPair> p;
  for (int i = 0; i < 50; ++i) {
    double ros = 0.4 + 0.02 * i;
    p.push_back({ros, 110.0 - 25.0 * ros});
  }
  auto m = fit_calibration(p);
  EXPECT_NEAR(m.offset_a(), 110.0, 1e-9);
  EXPECT_NEAR(m.slope_b(), -25.0, 1e-9);
}

TEST(FitCalibration, NoisyDataWithinThreeStandardErrors) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0.0, 0.5);
  std::vector<CalibrationPair> p;
  std::vector<double> x, y;
  for (int i = 0; i < 200; ++i) {
    double ros = 0.4 + 1.4 * (i % 50) / 49.0;
    double spo2 = std::clamp(110.0 - 25.0 * ros + g(rng), 60.0, 100.0);
    p.push_back({ros, spo2});
    x.push_back(ros);
    y.push_back(spo2);
  }
  auto m = fit_calibration(p);
  // Closed-form standard errors from the normal equations.
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i], sy += y[i], sxx += x[i] * x[i], sxy += x[i] * y[i];
  }
  double det = n * sxx - sx * sx;
  double b = (n * sxy - sx * sy) / det, a = (sy - b * sx) / n;
  EXPECT_NEAR(m.slope_b(), b, 1e-9);
  EXPECT_NEAR(m.offset_a(), a, 1e-9);
  double se_b = 0.5 * std::sqrt(n / det), se_a = 0.5 * std::sqrt(sxx / det);
  EXPECT_LT(std::abs(m.slope_b() + 25.0), 3.0 * se_b);
  EXPECT_LT(std::abs(m.offset_a() - 110.0), 3.0 * se_a);
}

TEST(FitCalibration, Errors) {
  std::vector<CalibrationPair> same{{0.7, 92.0}, {0.7, 93.0}, {0.7, 91.0}};
  EXPECT_ERROR_PREFIX(fit_calibration(same), "rank deficient");
  std::vector<CalibrationPair> one{{0.7, 92.0}};
  EXPECT_ERROR_PREFIX(fit_calibration(one), "rank deficient");
  std::vector<CalibrationPair> rising{{0.5, 80.0}, {1.0, 90.0}};
  EXPECT_ERROR_PREFIX(fit_calibration(rising), "non-physiological calibration");
  std::vector<CalibrationPair> flat{{0.5, 90.0}, {1.0, 90.0}};
  EXPECT_ERROR_PREFIX(fit_calibration(flat), "non-physiological calibration");
  std::vector<CalibrationPair> out_of_range{{0.5, 97.0}, {1.0, 50.0}};
  EXPECT_ERROR_PREFIX(fit_calibration(out_of_range), "invalid calibration data");
}

TEST(CalibrationModelType, RequiresNegativeSlope) {
  EXPECT_ERROR_PREFIX(CalibrationModel(110.0, 0.0), "non-physiological calibration");
  EXPECT_ERROR_PREFIX(CalibrationModel(110.0, 3.0), "non-physiological calibration");
  CalibrationModel m(110.0, -25.0);
  EXPECT_DOUBLE_EQ(m.ros_for(m.raw(0.73)), 0.73);
}

TEST(ApplyCalibration, ArithmeticAndClamp) {
  CalibrationModel m(110.0, -25.0);
  EXPECT_DOUBLE_EQ(apply_calibration(m, 0.8), 90.0);
  EXPECT_DOUBLE_EQ(apply_calibration(m, 0.2), 100.0);
  EXPECT_DOUBLE_EQ(apply_calibration(m, 2.0), 60.0);
  EXPECT_DOUBLE_EQ(apply_calibration(m, 10.0), 0.0);
}

TEST(EstimateSeries, ConstantRos) {
  CalibrationModel m(110.0, -25.0);
  auto pulses = pulse_train(1.0, 300.0, 1.0, 0.8);
  EstimatorConfig c;
  c.window = 15.0;
  auto s = estimate_spo2_series(pulses, m, c, TickGrid{1.0, 300});
  for (std::size_t k = 0; k < s.size(); ++k) {
    EXPECT_TRUE(s.valid[k]);
    EXPECT_NEAR(s.values[k], 90.0, 1e-9);
    EXPECT_EQ(s.qi[k], 1.0);
  }
}

TEST(EstimateSeries, DataAgeCap) {
  CalibrationModel m(110.0, -25.0);
  auto pulses = pulse_train(1.0, 100.0, 1.0, 0.8);
  for (double w : {3.0, 15.0, 30.0}) {
    EstimatorConfig c;
    c.window = w;
    auto s = estimate_spo2_series(pulses, m, c, TickGrid{0.0, 200});
    for (std::size_t k = 0; k < s.size(); ++k) {
      if (s.times[k] > 130.0) EXPECT_FALSE(s.valid[k]) << "t=" << s.times[k];
      if (s.times[k] >= 1.0 && s.times[k] <= 100.0 + w) EXPECT_TRUE(s.valid[k]);
    }
  }
}

TEST(EstimateSeries, AasmExtendsWindowAtLowRate) {
  CalibrationModel m(110.0, -25.0);
  EstimatorConfig c;
  c.window = 3.0;
  c.aasm_mode = true;
  auto slow = estimate_spo2_series(pulse_train(0.0, 120.0, 1.5, 0.8), m, c, TickGrid{20.0, 90});
  for (double w : slow.effective_window) EXPECT_NEAR(w, 4.5, 1e-9);
  auto fast = estimate_spo2_series(pulse_train(0.0, 120.0, 60.0 / 90.0, 0.8), m, c,
                                   TickGrid{20.0, 90});
  for (double w : fast.effective_window) EXPECT_EQ(w, 3.0);
  // Without the flag the window never changes.
  c.aasm_mode = false;
  auto plain = estimate_spo2_series(pulse_train(0.0, 120.0, 1.5, 0.8), m, c, TickGrid{20.0, 90});
  for (double w : plain.effective_window) EXPECT_EQ(w, 3.0);
}

TEST(EstimateSeries, EmptyInputIsAllInvalid) {
  CalibrationModel m(110.0, -25.0);
  auto s = estimate_spo2_series({}, m, EstimatorConfig{}, TickGrid{0.0, 50});
  ASSERT_EQ(s.size(), 50u);
  for (bool v : s.valid) EXPECT_FALSE(v);
  EXPECT_EQ(estimate_spo2_series({}, m).size(), 0u);
}

TEST(EstimateSeries, RejectsBadConfig) {
  CalibrationModel m(110.0, -25.0);
  EstimatorConfig c;
  c.window = 45.0;
  EXPECT_ERROR_PREFIX(estimate_spo2_series({}, m, c), "invalid window");
  c = {};
  c.qi_threshold = 1.5;
  EXPECT_ERROR_PREFIX(estimate_spo2_series({}, m, c), "invalid qi threshold");
  c = {};
  c.refresh_rate = 0.0;
  EXPECT_ERROR_PREFIX(estimate_spo2_series({}, m, c), "invalid refresh rate");
}

TEST(EstimateSeries, MatchesWindowOracleOnRandomPulses) {
  CalibrationModel m(112.0, -27.0);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<RosSample> pulses;
    double t = u(rng) * 5.0;
    while (t < 400.0) {
      double d = 0.5 + 1.2 * u(rng);
      // Occasional dropouts longer than the age cap.
      if (u(rng) < 0.01) t += 20.0 + 30.0 * u(rng);
      t += d;
      pulses.push_back({t, 0.3 + 1.6 * u(rng), QualityIndex(u(rng)), d});
    }
    EstimatorConfig c;
    c.window = trial % 3 == 0 ? 15.0 : 3.0;
    c.aasm_mode = trial % 2 == 0;
    c.qi_threshold = 0.3 * u(rng);
    auto got = estimate_spo2_series(pulses, m, c, TickGrid{0.0, 450});
    auto want = oracle_series(pulses, m, c, 0.0, 450);
    for (std::size_t k = 0; k < got.size(); ++k) {
      ASSERT_EQ(got.valid[k], want.valid[k]) << "tick " << k;
      EXPECT_NEAR(got.effective_window[k], want.effective_window[k], 1e-12);
      EXPECT_LE(got.effective_window[k], kMaxDataAge);
      if (!got.valid[k]) continue;
      EXPECT_NEAR(got.values[k], want.values[k], 1e-9);
      EXPECT_EQ(got.qi[k], want.qi[k]);
    }
  }
}

TEST(EstimateSeries, AffineCommutesWithMean) {
  CalibrationModel m(110.0, -25.0);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.4, 1.0);  // no clamping in this range
  std::vector<RosSample> pulses;
  for (int i = 0; i < 200; ++i) pulses.push_back({i * 0.9, u(rng), QualityIndex(1.0), 0.9});
  EstimatorConfig c;
  c.window = 15.0;
  auto s = estimate_spo2_series(pulses, m, c, TickGrid{20.0, 100});
  for (std::size_t k = 0; k < s.size(); ++k) {
    double t = s.times[k], sum = 0.0;
    int n = 0;
    for (const auto& p : pulses)
      if (p.time >= t - 15.0 - 1e-9 && p.time <= t + 1e-9) sum += apply_calibration(m, p.ros), ++n;
    EXPECT_NEAR(s.values[k], sum / n, 1e-12);
  }
}

TEST(EstimateSeries, RaisingRosLowersOutput) {
  CalibrationModel m(110.0, -25.0);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.4, 1.4);
  std::vector<RosSample> a;
  for (int i = 0; i < 100; ++i) a.push_back({i * 1.0, u(rng), QualityIndex(1.0), 1.0});
  auto b = a;
  for (auto& p : b) p.ros += 0.05;
  auto sa = estimate_spo2_series(a, m, EstimatorConfig{}, TickGrid{5.0, 90});
  auto sb = estimate_spo2_series(b, m, EstimatorConfig{}, TickGrid{5.0, 90});
  for (std::size_t k = 0; k < sa.size(); ++k) {
    ASSERT_TRUE(sa.valid[k] && sb.valid[k]);
    if (sa.values[k] > 0.0 && sa.values[k] < 100.0) EXPECT_LT(sb.values[k], sa.values[k]);
    else EXPECT_LE(sb.values[k], sa.values[k]);
  }
}

TEST(EstimateSeries, ShortWindowTracksStepEarlier) {
  CalibrationModel m(110.0, -25.0);
  std::vector<RosSample> pulses;
  for (double t = 0.0; t < 200.0; t += 0.9)
    pulses.push_back({t, m.ros_for(t < 100.0 ? 96.0 : 80.0), QualityIndex(1.0), 0.9});
  auto reach = [&](double window) {
    EstimatorConfig c;
    c.window = window;
    auto s = estimate_spo2_series(pulses, m, c, TickGrid{0.0, 200});
    for (std::size_t k = 100; k < s.size(); ++k)
      if (s.valid[k] && std::abs(s.values[k] - 80.0) <= 2.0) return s.times[k];
    return 1e9;
  };
  EXPECT_LT(reach(3.0), reach(15.0));
}

TEST(EstimateSeries, QiGateExcludesPoorPulses) {
  CalibrationModel m(110.0, -25.0);
  std::vector<RosSample> pulses;
  for (int i = 0; i < 100; ++i)
    pulses.push_back({i * 1.0, i % 2 ? 2.0 : 0.8, QualityIndex(i % 2 ? 0.1 : 0.9), 1.0});
  auto s = estimate_spo2_series(pulses, m, EstimatorConfig{}, TickGrid{10.0, 80});
  for (std::size_t k = 0; k < s.size(); ++k) {
    EXPECT_NEAR(s.values[k], 90.0, 1e-9);
    EXPECT_EQ(s.qi[k], 0.9);
  }
}

TEST(NoiseBias, PeakToTroughNoiseMovesRosTowardOne) {
  // Noise inflates the peak-to-trough of both channels by a similar amount.
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g(0.0, 0.004);
  const double pi_ir = 0.02, ros = 0.6;
  double sum = 0.0;
  const int pulses = 400, n = 50;
  for (int k = 0; k < pulses; ++k) {
    double rmin = 1e9, rmax = -1e9, imin = 1e9, imax = -1e9;
    for (int i = 0; i < n; ++i) {
      double shape = 0.5 * (1.0 - std::cos(2.0 * kPi * i / n)) - 0.5;
      double r = 1.0 + ros * pi_ir * shape + g(rng), ir = 1.0 + pi_ir * shape + g(rng);
      rmin = std::min(rmin, r), rmax = std::max(rmax, r);
      imin = std::min(imin, ir), imax = std::max(imax, ir);
    }
    sum += compute_ros(features(rmax - rmin, 1.0, imax - imin, 1.0)).ros;
  }
  double mean = sum / pulses;
  EXPECT_GT(mean, ros);
  EXPECT_LT(std::abs(mean - 1.0), std::abs(ros - 1.0));
  // Truth 95% sits above the ROS = 1 point (85%), so the estimate is biased low.
  CalibrationModel m(110.0, -25.0);
  EXPECT_LT(apply_calibration(m, mean) - apply_calibration(m, ros), 0.0);
}

TEST(RosSamples, SkipsDegenerateSegments) {
  std::vector<PulseSegment> segs{features(0.01, 1.0, 0.02, 1.0, 1.0),
                                 features(0.01, 1.0, 0.0, 1.0, 2.0),
                                 features(0.01, 1.0, 0.02, 1.0, 3.0)};
  for (auto& s : segs) s.shape = raised_cosine(32);
  auto out = ros_samples(segs);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[1].time, 3.0);
  EXPECT_NEAR(out[0].ros, 0.5, 1e-12);
}
