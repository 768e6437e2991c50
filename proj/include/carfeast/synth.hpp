// Copyright 2026 The carfeast Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Seeded formant synthesizer for spoken-digit-like utterances. Each digit is
// a rough phone sequence (voiced segments with formant targets, fricatives,
// bursts, closures); speakers differ in vocal-tract length, pitch, speaking
// rate and loudness, and every token adds its own timing and formant jitter.
// It stands in for recorded speech when no corpus is available: the words
// are distinguishable only through their spectrotemporal structure, and
// speakers shift that structure as real voices do. Background noise at a
// per-token SNR comes from its own random stream, so the speech is the same
// at every noise level.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "carfeast/dataset.hpp"
#include "carfeast/io.hpp"
#include "carfeast/random.hpp"

namespace carfeast::synth {

enum class Kind { kVoiced, kNasal, kFricative, kVoicedFricative, kBurst, kClosure };

struct Segment {
  Kind kind;
  double ms;                  // nominal duration
  double f1a, f2a, f3a;       // formant targets at segment start (Hz)
  double f1b, f2b, f3b;       // and at its end
  double amp;                 // relative level
  double noise_hz = 0.0;      // fricative / burst centre
  double noise_bw = 0.0;
};

inline Segment vowel(double ms, double f1, double f2, double f3, double amp = 1.0) {
  return {Kind::kVoiced, ms, f1, f2, f3, f1, f2, f3, amp};
}
inline Segment glide(double ms, double f1a, double f2a, double f3a, double f1b, double f2b, double f3b,
                     double amp = 1.0) {
  return {Kind::kVoiced, ms, f1a, f2a, f3a, f1b, f2b, f3b, amp};
}
inline Segment nasal(double ms) { return {Kind::kNasal, ms, 250, 1100, 2300, 250, 1100, 2300, 0.35}; }
inline Segment fric(double ms, double hz, double bw, double amp) {
  return {Kind::kFricative, ms, 0, 0, 0, 0, 0, 0, amp, hz, bw};
}
inline Segment vfric(double ms, double hz, double bw, double amp) {
  return {Kind::kVoicedFricative, ms, 300, 1500, 2500, 300, 1500, 2500, amp, hz, bw};
}
inline Segment burst(double hz) { return {Kind::kBurst, 18, 0, 0, 0, 0, 0, 0, 0.7, hz, 1500}; }
inline Segment closure(double ms) { return {Kind::kClosure, ms, 0, 0, 0, 0, 0, 0, 0.0}; }

inline const std::vector<std::string>& digit_names() {
  static const std::vector<std::string> names{"zero", "one", "two",   "three", "four",
                                              "five", "six", "seven", "eight", "nine"};
  return names;
}

// Phone sequences for the ten digits, adult male reference formants.
inline std::vector<Segment> digit_segments(int digit) {
  switch (digit) {
    case 0:  // z ih r ow
      return {vfric(90, 3800, 1500, 0.35), vowel(80, 400, 1900, 2550), glide(70, 450, 1300, 1650, 470, 1150, 1600),
              glide(170, 550, 950, 2400, 380, 800, 2300)};
    case 1:  // w ah n
      return {glide(80, 300, 650, 2200, 600, 1100, 2400), vowel(170, 650, 1200, 2500), nasal(120)};
    case 2:  // t uw
      return {closure(40), burst(3200), fric(35, 3000, 2000, 0.25), glide(230, 330, 1300, 2300, 300, 880, 2250)};
    case 3:  // th r iy
      return {fric(90, 4500, 3000, 0.12), glide(70, 420, 1300, 1700, 350, 1800, 2300),
              glide(210, 300, 2100, 2800, 270, 2300, 3000)};
    case 4:  // f ao r
      return {fric(100, 3800, 3000, 0.15), vowel(140, 580, 880, 2500), glide(110, 520, 1050, 2300, 450, 1150, 1650)};
    case 5:  // f ay v
      return {fric(100, 3800, 3000, 0.15), glide(230, 750, 1150, 2450, 380, 2050, 2650),
              vfric(70, 2500, 2500, 0.2)};
    case 6:  // s ih k s
      return {fric(120, 4600, 1500, 0.45), vowel(110, 400, 1950, 2600), closure(50), burst(2200),
              fric(110, 4600, 1500, 0.45)};
    case 7:  // s eh v ax n
      return {fric(110, 4600, 1500, 0.45), vowel(110, 560, 1750, 2500), vfric(50, 2500, 2500, 0.2),
              vowel(70, 500, 1450, 2450), nasal(90)};
    case 8:  // ey t
      return {glide(220, 530, 1800, 2500, 370, 2250, 2850), closure(50), burst(3500), fric(30, 3800, 2000, 0.2)};
    case 9:  // n ay n
      return {nasal(80), glide(230, 750, 1150, 2450, 380, 2050, 2650), nasal(120)};
    default:
      throw InputError("synth: digit must lie in 0..9");
  }
}

struct Speaker {
  double tract = 1.0;    // formant scale (shorter tract -> higher formants)
  double f0 = 120.0;     // Hz
  double rate = 1.0;     // duration scale
  double level = 0.3;    // peak amplitude
  double breath = 0.02;  // aspiration noise relative to voicing
};

inline Speaker make_speaker(std::uint64_t seed, int index) {
  Rng rng(derive_seed(seed, "synth-speaker", static_cast<std::uint64_t>(index)));
  Speaker s;
  const bool high = rng.uniform() < 0.5;  // two broad voice groups
  s.tract = high ? rng.uniform(1.08, 1.25) : rng.uniform(0.9, 1.06);
  s.f0 = high ? rng.uniform(170.0, 260.0) : rng.uniform(85.0, 150.0);
  s.rate = rng.uniform(0.8, 1.3);
  s.level = rng.uniform(0.15, 0.6);
  s.breath = rng.uniform(0.01, 0.08);
  return s;
}

// Two-pole resonator with unity gain at DC.
class Resonator {
 public:
  double step(double x, double hz, double bw, double fs) {
    const double r = std::exp(-std::numbers::pi * bw / fs);
    const double c = 2.0 * r * std::cos(2.0 * std::numbers::pi * hz / fs);
    const double g = 1.0 - c + r * r;
    const double y = g * x + c * y1_ - r * r * y2_;
    y2_ = y1_;
    y1_ = y;
    return y;
  }

 private:
  double y1_ = 0.0, y2_ = 0.0;
};

// Band-pass resonator (zero at DC and Nyquist) for noise shaping.
class BandPass {
 public:
  double step(double x, double hz, double bw, double fs) {
    const double r = std::exp(-std::numbers::pi * bw / fs);
    const double c = 2.0 * r * std::cos(2.0 * std::numbers::pi * hz / fs);
    const double y = (1.0 - r) * (x - x2_) + c * y1_ - r * r * y2_;
    x2_ = x1_;
    x1_ = x;
    y2_ = y1_;
    y1_ = y;
    return y;
  }

 private:
  double x1_ = 0.0, x2_ = 0.0, y1_ = 0.0, y2_ = 0.0;
};

// Adds low-pass background noise at `snr_db` relative to the RMS of
// out[begin, end). Infinite SNR leaves `out` unchanged.
inline void add_background(std::vector<double>& out, std::size_t begin, std::size_t end, double snr_db,
                           std::uint64_t noise_seed) {
  if (!std::isfinite(snr_db) || begin >= end) return;
  double power = 0.0;
  for (std::size_t i = begin; i < end; ++i) power += out[i] * out[i];
  power /= static_cast<double>(end - begin);
  constexpr double kPole = 0.9;
  // Unit-variance AR(1) noise, scaled to the target power.
  const double sigma = std::sqrt(power * std::pow(10.0, -snr_db / 10.0) * (1.0 - kPole * kPole));
  Rng rng(noise_seed);
  double y = rng.normal() / std::sqrt(1.0 - kPole * kPole);
  for (double& v : out) {
    y = kPole * y + rng.normal();
    v += sigma * y;
  }
}

inline std::vector<double> synthesize(int digit, const Speaker& spk, int fs, std::uint64_t token_seed,
                                      double snr_db = std::numeric_limits<double>::infinity()) {
  Rng rng(token_seed);
  const double nyq_guard = 0.45 * fs;
  auto segs = digit_segments(digit);
  const double token_rate = spk.rate * rng.uniform(0.85, 1.15);
  const double token_tract = spk.tract * rng.uniform(0.97, 1.03);
  const double f0 = spk.f0 * rng.uniform(0.92, 1.08);
  const double f0_slope = rng.uniform(-0.25, 0.05);  // relative change over the word

  std::vector<double> out;
  const auto lead = static_cast<std::size_t>(rng.uniform(0.04, 0.16) * fs);
  out.assign(lead, 0.0);

  Resonator r1, r2, r3;
  BandPass noise_filter;
  double sf1 = 0.0, sf2 = 0.0, sf3 = 0.0;  // smoothed formants
  bool first = true;
  const double smooth = 1.0 - std::exp(-1.0 / (0.012 * fs));
  double phase = 0.0, glottal = 0.0, level = 0.0;
  double total_ms = 0.0;
  for (const auto& s : segs) total_ms += s.ms;
  double elapsed_ms = 0.0;

  for (const auto& seg : segs) {
    const double ms = seg.ms * token_rate * rng.uniform(0.85, 1.15);
    const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(ms * 1e-3 * fs));
    const double jitter = rng.uniform(0.94, 1.06);
    for (std::size_t i = 0; i < n; ++i) {
      const double a = static_cast<double>(i) / static_cast<double>(n);
      const bool voiced = seg.kind == Kind::kVoiced || seg.kind == Kind::kNasal || seg.kind == Kind::kVoicedFricative;
      double target = seg.amp;
      if (seg.kind == Kind::kClosure) target = 0.0;
      level += (target - level) * (1.0 - std::exp(-1.0 / (0.006 * fs)));

      double sample = 0.0;
      if (voiced) {
        const double t1 = token_tract * jitter * (seg.f1a + a * (seg.f1b - seg.f1a));
        const double t2 = token_tract * jitter * (seg.f2a + a * (seg.f2b - seg.f2a));
        const double t3 = token_tract * (seg.f3a + a * (seg.f3b - seg.f3a));
        if (first) {
          sf1 = t1;
          sf2 = t2;
          sf3 = t3;
          first = false;
        }
        sf1 += (t1 - sf1) * smooth;
        sf2 += (t2 - sf2) * smooth;
        sf3 += (t3 - sf3) * smooth;
        const double pos = (elapsed_ms + a * ms / token_rate) / total_ms;
        const double pitch = f0 * (1.0 + f0_slope * pos) * (1.0 + 0.01 * rng.normal());
        phase += pitch / fs;
        double pulse = 0.0;
        if (phase >= 1.0) {
          phase -= 1.0;
          pulse = 1.0;
        }
        // Glottal flow: leaky integration of the pulse train, then lip radiation.
        const double prev = glottal;
        glottal = 0.97 * glottal + pulse;
        double src = glottal - prev + spk.breath * rng.normal();
        double v = r1.step(src, std::min(sf1, nyq_guard), 90.0, fs);
        v = r2.step(v, std::min(sf2, nyq_guard), 110.0, fs);
        v = r3.step(v, std::min(sf3, nyq_guard), 170.0, fs);
        sample = v;
        if (seg.kind == Kind::kVoicedFricative)
          sample = 0.4 * v + noise_filter.step(rng.normal(), std::min(seg.noise_hz, nyq_guard), seg.noise_bw, fs);
      } else if (seg.kind == Kind::kFricative || seg.kind == Kind::kBurst) {
        sample = 4.0 * noise_filter.step(rng.normal(), std::min(seg.noise_hz * token_tract, nyq_guard),
                                         seg.noise_bw, fs);
      }
      out.push_back(level * sample);
    }
    elapsed_ms += seg.ms;
  }
  const auto tail = static_cast<std::size_t>(rng.uniform(0.04, 0.16) * fs);
  out.insert(out.end(), tail, 0.0);

  double peak = 0.0;
  for (double v : out) peak = std::max(peak, std::abs(v));
  const double gain = peak > 0.0 ? spk.level * rng.uniform(0.7, 1.3) / peak : 0.0;
  const double floor_noise = 0.002 * rng.uniform(0.5, 2.0);
  for (double& v : out) v = v * gain + floor_noise * spk.level * rng.normal();
  add_background(out, lead, out.size() - tail, snr_db, derive_seed(token_seed, "synth-noise"));
  for (double& v : out) v = std::clamp(v, -0.99, 0.99);
  return out;
}

inline constexpr double kDefaultSnrDb = 0.0;
inline constexpr double kSnrSpreadDb = 5.0;  // per-token SNR is uniform in centre +/- spread

struct CorpusSpec {
  int speakers = 60;
  int test_speakers = 12;  // speaker-disjoint test split
  int repetitions = 5;     // tokens per (speaker, digit)
  int fs = 8000;
  std::uint64_t seed = 2026;
  double snr_db = kDefaultSnrDb;  // centre of the per-token SNR range; infinity disables
  std::vector<int> digits{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
};

// Writes WAV files and manifest.csv under `dir`; returns the manifest path.
// Labels are the digit characters "0".."9"; the last `test_speakers`
// speakers form the test split.
inline std::filesystem::path write_corpus(const std::filesystem::path& dir, const CorpusSpec& spec) {
  std::vector<ManifestRow> rows;
  for (int s = 0; s < spec.speakers; ++s) {
    const Speaker spk = make_speaker(spec.seed, s);
    const std::string speaker = "spk" + std::to_string(s);
    const std::string split = s >= spec.speakers - spec.test_speakers ? "test" : "train";
    for (int d : spec.digits) {
      for (int r = 0; r < spec.repetitions; ++r) {
        const std::uint64_t token =
            derive_seed(spec.seed, "synth-token", static_cast<std::uint64_t>((s * 10 + d) * 1000 + r));
        const double snr = spec.snr_db + kSnrSpreadDb * (2.0 * Rng(derive_seed(token, "synth-snr")).uniform() - 1.0);
        const auto audio = synthesize(d, spk, spec.fs, token, snr);
        const std::string rel = "wav/" + std::to_string(d) + "_" + speaker + "_" + std::to_string(r) + ".wav";
        write_wav(dir / rel, spec.fs, audio);
        rows.push_back(ManifestRow{dir / rel, rel, std::to_string(d), split, speaker});
      }
    }
  }
  const auto manifest = dir / "manifest.csv";
  write_text_atomic(manifest, write_manifest_text(rows));
  return manifest;
}

}  // namespace carfeast::synth
