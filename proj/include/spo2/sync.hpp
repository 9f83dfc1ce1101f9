#pragma once

#include "spo2/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace spo2 {

struct SyncResult {
  double clock_offset = 0.0;  // s, wearable clock minus reference clock
  double score = 0.0;         // normalized cross-correlation at the peak
};

struct AlignmentConfig {
  double max_offset = 60.0;   // s, search half-range
  double min_overlap = 60.0;  // s
  double min_score = 0.5;
};

// Raised when no candidate offset reaches min_score; best_score is attached.
class AlignmentError : public Error {
 public:
  explicit AlignmentError(double best_score)
      : Error(message(best_score)), best_score_(best_score) {}
  double best_score() const noexcept { return best_score_; }

 private:
  static std::string message(double s) {
    std::ostringstream os;
    os << "alignment failed: best score " << s;
    return os.str();
  }
  double best_score_;
};

namespace detail {

// Pearson correlation of w[i] against r[i + lag] over their overlap,
// skipping points flagged in either mask (empty mask = all usable).
inline double lagged_correlation(std::span<const double> w, std::span<const double> r,
                                 const std::vector<bool>& w_skip,
                                 const std::vector<bool>& r_skip, long long lag,
                                 std::size_t& overlap) {
  long long nw = static_cast<long long>(w.size()), nr = static_cast<long long>(r.size());
  long long i0 = std::max(0LL, -lag), i1 = std::min(nw, nr - lag);
  overlap = 0;
  double sw = 0.0, sr = 0.0, sww = 0.0, srr = 0.0, swr = 0.0;
  for (long long i = i0; i < i1; ++i) {
    auto a = static_cast<std::size_t>(i), b = static_cast<std::size_t>(i + lag);
    if ((!w_skip.empty() && w_skip[a]) || (!r_skip.empty() && r_skip[b])) continue;
    ++overlap;
    sw += w[a];
    sr += r[b];
    sww += w[a] * w[a];
    srr += r[b] * r[b];
    swr += w[a] * r[b];
  }
  if (overlap < 2) return 0.0;
  const auto n = static_cast<double>(overlap);
  double cov = swr - sw * sr / n, vw = sww - sw * sw / n, vr = srr - sr * sr / n;
  if (!(vw > 0.0) || !(vr > 0.0)) return 0.0;
  return std::clamp(cov / std::sqrt(vw * vr), -1.0, 1.0);
}

}  // namespace detail

// Clock offset maximizing the normalized cross-correlation of two IBI grids,
// refined to sub-grid resolution with a parabola through the peak.
inline SyncResult align_by_ibi(const UniformSignal& wearable_ibi,
                               const UniformSignal& reference_ibi,
                               const AlignmentConfig& cfg = {},
                               const std::vector<bool>& wearable_gap = {},
                               const std::vector<bool>& reference_gap = {}) {
  const double f = wearable_ibi.sampling_rate();
  if (std::abs(reference_ibi.sampling_rate() - f) > 1e-9 * f) throw Error("rate mismatch");
  const auto w = wearable_ibi.samples();
  const auto r = reference_ibi.samples();

  // Candidate k pairs w[i] with r[i + k], i.e. offset = base - k / f.
  const double base = wearable_ibi.start_time() - reference_ibi.start_time();
  const auto k_lo = static_cast<long long>(std::ceil((base - cfg.max_offset) * f - 1e-9));
  const auto k_hi = static_cast<long long>(std::floor((base + cfg.max_offset) * f + 1e-9));
  const auto min_overlap = static_cast<std::size_t>(std::ceil(cfg.min_overlap * f));

  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> score(k_hi >= k_lo ? static_cast<std::size_t>(k_hi - k_lo + 1) : 0, nan);
  long long best = 0;
  bool found = false;
  auto offset_of = [&](long long k) { return base - static_cast<double>(k) / f; };
  for (long long k = k_lo; k <= k_hi; ++k) {
    std::size_t overlap = 0;
    double c = detail::lagged_correlation(w, r, wearable_gap, reference_gap, k, overlap);
    if (overlap < min_overlap) continue;
    score[static_cast<std::size_t>(k - k_lo)] = c;
    if (!found) {
      best = k;
      found = true;
      continue;
    }
    double cb = score[static_cast<std::size_t>(best - k_lo)];
    if (c > cb || (c == cb && std::abs(offset_of(k)) < std::abs(offset_of(best)))) best = k;
  }
  if (!found) throw Error("alignment failed: overlap too short");

  const double peak = score[static_cast<std::size_t>(best - k_lo)];
  if (peak < cfg.min_score) throw AlignmentError(peak);

  double shift = 0.0;
  if (best > k_lo && best < k_hi) {
    double cm = score[static_cast<std::size_t>(best - 1 - k_lo)];
    double cp = score[static_cast<std::size_t>(best + 1 - k_lo)];
    if (std::isfinite(cm) && std::isfinite(cp)) {
      double denom = cm - 2.0 * peak + cp;
      if (denom < 0.0) shift = std::clamp(0.5 * (cm - cp) / denom, -0.5, 0.5);
    }
  }
  double offset = std::clamp(offset_of(best) - shift / f, -cfg.max_offset, cfg.max_offset);
  return {offset, std::clamp(peak, -1.0, 1.0)};
}

// Gap-flagged grid points are left out of the correlation.
inline SyncResult align_by_ibi(const IbiGrid& wearable, const IbiGrid& reference,
                               const AlignmentConfig& cfg = {}) {
  return align_by_ibi(wearable.signal, reference.signal, cfg, wearable.in_gap, reference.in_gap);
}

inline SyncResult align_by_ibi(const UniformSignal& wearable_ibi,
                               const UniformSignal& reference_ibi, double max_offset) {
  AlignmentConfig cfg;
  cfg.max_offset = max_offset;
  return align_by_ibi(wearable_ibi, reference_ibi, cfg);
}

// ---------------------------------------------------------------------------
// Response delay

struct DelayResult {
  double delay = 0.0;           // s applied to the reference
  double a_rms_at_delay = 0.0;  // %
  std::vector<std::pair<double, double>> curve;  // (delay, a_rms) per evaluated candidate
};

struct DelaySearch {
  double min = 0.0;
  double max = kMaxDataAge;
  double step = 0.0;  // 0 means one refresh period
  double qi_threshold = 0.5;
  std::size_t min_joint = 300;
};

struct SeriesPair {
  const Spo2Series* estimate = nullptr;
  const Spo2Series* reference = nullptr;
};

// Grid search of the reference delay minimizing A_RMS pooled over every pair.
// Candidates with fewer than min_joint pooled samples are skipped.
inline DelayResult estimate_delay_pooled(std::span<const SeriesPair> pairs,
                                         const DelaySearch& search = {}) {
  if (pairs.empty()) throw Error("insufficient joint data");
  for (const auto& p : pairs)
    if (std::abs(p.estimate->refresh_rate - p.reference->refresh_rate) > 1e-9)
      throw Error("refresh rate mismatch");
  const double step = search.step > 0.0 ? search.step : 1.0 / pairs.front().estimate->refresh_rate;
  if (!(search.max >= search.min) || search.min < 0.0) throw Error("invalid delay range");

  DelayResult best;
  bool found = false;
  const auto steps = static_cast<std::size_t>(std::floor((search.max - search.min) / step + 1e-9));
  for (std::size_t k = 0; k <= steps; ++k) {
    double d = search.min + static_cast<double>(k) * step;
    double ss = 0.0;
    std::size_t n = 0;
    for (const auto& p : pairs) {
      auto paired = pair_series(*p.estimate, *p.reference, d, search.qi_threshold);
      for (std::size_t i = 0; i < paired.mask.total; ++i) {
        if (!paired.mask.joint(i)) continue;
        double e = paired.estimate[i] - paired.reference[i];
        ss += e * e;
        ++n;
      }
    }
    if (n < search.min_joint) continue;
    double arms = std::sqrt(ss / static_cast<double>(n));
    best.curve.emplace_back(d, arms);
    // Strict comparison keeps the smaller delay on ties.
    if (!found || arms < best.a_rms_at_delay) {
      best.delay = d;
      best.a_rms_at_delay = arms;
      found = true;
    }
  }
  if (!found) throw Error("insufficient joint data");
  return best;
}

inline DelayResult estimate_delay(const Spo2Series& estimate, const Spo2Series& reference,
                                  const DelaySearch& search = {}) {
  SeriesPair p{&estimate, &reference};
  return estimate_delay_pooled(std::span<const SeriesPair>(&p, 1), search);
}

}  // namespace spo2
