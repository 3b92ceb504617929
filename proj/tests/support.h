// Shared test helpers: random valid scores and an autocorrelation pitch
// estimator used as the synthesis oracle.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "nesscore/score.h"

namespace testing_support {

struct ScoreOptions {
  std::size_t min_frames = 1;
  std::size_t max_frames = 120;
  double hold = 0.6;          // chance a voice keeps its previous state
  double silence = 0.25;      // chance a changed voice goes silent
  int pulse_note_min = 33;    // lowest timer-realizable pulse note
  double rate_hz = nesscore::kDefaultRateHz;
};

inline nesscore::ExpressiveScore random_score(std::mt19937_64& rng, const ScoreOptions& o = {}) {
  auto uni = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  auto coin = [&](double p) { return std::bernoulli_distribution(p)(rng); };

  nesscore::ExpressiveScore s;
  s.rate_hz = o.rate_hz;
  const auto n = static_cast<std::size_t>(uni(static_cast<int>(o.min_frames), static_cast<int>(o.max_frames)));
  nesscore::ExpressiveFrame f;
  for (std::size_t t = 0; t < n; ++t) {
    for (auto* p : {&f.p1, &f.p2}) {
      if (coin(o.hold)) {
        if (p->note && coin(0.3)) p->velocity = static_cast<std::uint8_t>(uni(1, 15));
        if (p->note && coin(0.2)) p->timbre = static_cast<std::uint8_t>(uni(0, 3));
        continue;
      }
      if (coin(o.silence)) {
        *p = {};
      } else {
        *p = {static_cast<std::uint8_t>(uni(o.pulse_note_min, 108)), static_cast<std::uint8_t>(uni(1, 15)),
              static_cast<std::uint8_t>(uni(0, 3))};
      }
    }
    if (!coin(o.hold)) f.tr.note = coin(o.silence) ? 0 : static_cast<std::uint8_t>(uni(21, 108));
    if (coin(o.hold)) {
      if (f.no.note && coin(0.3)) f.no.velocity = static_cast<std::uint8_t>(uni(1, 15));
      if (f.no.note && coin(0.2)) f.no.timbre = static_cast<std::uint8_t>(uni(0, 1));
    } else if (coin(o.silence)) {
      f.no = {};
    } else {
      f.no = {static_cast<std::uint8_t>(uni(1, 16)), static_cast<std::uint8_t>(uni(1, 15)),
              static_cast<std::uint8_t>(uni(0, 1))};
    }
    s.frames.push_back(f);
  }
  return s;
}

/// Every field drawn uniformly from its alphabet, independently per frame.
inline nesscore::ExpressiveScore uniform_score(std::mt19937_64& rng, std::size_t frames) {
  auto uni = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  nesscore::ExpressiveScore s;
  s.frames.resize(frames);
  for (auto& f : s.frames) {
    for (auto* p : {&f.p1, &f.p2}) {
      p->velocity = static_cast<std::uint8_t>(uni(0, 15));
      p->timbre = static_cast<std::uint8_t>(uni(0, 3));
      p->note = p->velocity ? static_cast<std::uint8_t>(uni(32, 108)) : 0;
      if (!p->velocity) p->timbre = 0;
    }
    f.tr.note = static_cast<std::uint8_t>(uni(0, 88));
    if (f.tr.note) f.tr.note = static_cast<std::uint8_t>(f.tr.note + 20);
    f.no.velocity = static_cast<std::uint8_t>(uni(0, 15));
    f.no.timbre = f.no.velocity ? static_cast<std::uint8_t>(uni(0, 1)) : 0;
    f.no.note = f.no.velocity ? static_cast<std::uint8_t>(uni(1, 16)) : 0;
  }
  return s;
}

namespace detail {

inline double autocorr(std::span<const double> x, std::size_t lag) {
  double acc = 0.0;
  for (std::size_t i = 0; i + lag < x.size(); ++i) acc += x[i] * x[i + lag];
  return acc / static_cast<double>(x.size() - lag);
}

// Vertex of the parabola through (lag-1, lag, lag+1).
inline double refine(std::span<const double> x, std::size_t lag) {
  const double a = autocorr(x, lag - 1), b = autocorr(x, lag), c = autocorr(x, lag + 1);
  const double denom = a - 2.0 * b + c;
  if (denom == 0.0) return static_cast<double>(lag);
  return static_cast<double>(lag) + 0.5 * (a - c) / denom;
}

}  // namespace detail

/// Fundamental of a periodic signal in Hz. The first autocorrelation peak
/// within 90% of the maximum gives a coarse period, which is then refined on
/// a peak many periods away.
inline double estimate_fundamental(std::span<const float> samples, double sample_rate = 44100.0,
                                   double fmin = 40.0, double fmax = 4000.0) {
  std::vector<double> x(samples.begin(), samples.end());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  for (double& v : x) v -= mean;

  const auto lo = static_cast<std::size_t>(sample_rate / fmax);
  const auto hi = static_cast<std::size_t>(sample_rate / fmin);
  std::vector<double> r(hi + 2, 0.0);
  double best = 0.0;
  for (std::size_t lag = lo; lag <= hi + 1; ++lag) {
    r[lag] = detail::autocorr(x, lag);
    if (lag <= hi) best = std::max(best, r[lag]);
  }
  std::size_t coarse = 0;
  for (std::size_t lag = lo + 1; lag <= hi; ++lag) {
    if (r[lag] >= 0.9 * best && r[lag] >= r[lag - 1] && r[lag] >= r[lag + 1]) {
      coarse = lag;
      break;
    }
  }
  if (coarse == 0) return 0.0;
  const double p0 = detail::refine(x, coarse);

  // Refine on the k-th multiple, where quantization error is divided by k.
  const auto k = static_cast<std::size_t>(std::max(1.0, std::floor((sample_rate / 10.0) / p0)));
  const auto centre = static_cast<std::size_t>(std::llround(p0 * static_cast<double>(k)));
  std::size_t peak = centre;
  double peak_r = detail::autocorr(x, centre);
  for (std::size_t lag = centre - 3; lag <= centre + 3; ++lag) {
    const double v = detail::autocorr(x, lag);
    if (v > peak_r) {
      peak_r = v;
      peak = lag;
    }
  }
  return sample_rate * static_cast<double>(k) / detail::refine(x, peak);
}

}  // namespace testing_support
