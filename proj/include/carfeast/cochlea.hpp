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

// Cascade of asymmetric resonators with fast-acting compression (CAR-FAC).
//
// Each channel is a two-pole two-zero resonator in coupled form. Channel 0
// has the highest characteristic frequency and every stage feeds the next.
// The FAC part (outer hair cell damping, inner hair cell transduction and
// the multi-stage AGC loop) can be switched off, leaving a linear cascade.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "carfeast/error.hpp"

namespace carfeast {

struct CarParams {
  double zeta_min = 0.10;
  double zeta_max = 0.35;
  double zero_ratio = std::numbers::sqrt2;
};

struct OhcParams {
  double velocity_scale = 0.1;
  double v_offset = 0.04;
};

struct IhcParams {
  double offset = 0.175;
  double lp1_hz = 3000.0;
  double lp2_hz = 300.0;
};

struct AgcParams {
  std::vector<double> time_constants{0.002, 0.008, 0.032, 0.128};  // seconds
  double stage_gain = 2.0;
  std::vector<int> decimation{8, 2, 2, 2};
  std::vector<double> spatial_kernel{0.25, 0.5, 0.25};
};

struct CochleaConfig {
  int fs = 16000;
  int n_channels = 64;
  double cf_min = 100.0;
  // 0 selects min(6000, 0.45 * fs), i.e. 6000 Hz at 16 kHz and 3600 Hz at 8 kHz.
  double cf_max = 0.0;
  bool fac_enabled = true;
  CarParams car;
  OhcParams ohc;
  IhcParams ihc;
  AgcParams agc;
  int n_ears = 1;

  double effective_cf_max() const {
    return cf_max > 0.0 ? cf_max : std::min(6000.0, 0.45 * fs);
  }

  void validate() const {
    if (fs <= 0) throw ConfigError("cochlea.fs", "must be a positive integer");
    if (n_channels < 2) throw ConfigError("cochlea.n_channels", "must be >= 2");
    const double top = effective_cf_max();
    const double nyquist = fs / 2.0;
    if (!(cf_min > 0.0) || !(cf_min < nyquist))
      throw ConfigError("cochlea.cf_min", "must lie in (0, fs/2)");
    if (!(top > 0.0) || !(top < nyquist))
      throw ConfigError("cochlea.cf_max", "must lie in (0, fs/2)");
    if (!(cf_min < top)) throw ConfigError("cochlea.cf_min", "must be below cf_max");
    if (!(car.zeta_min > 0.0)) throw ConfigError("cochlea.car.zeta_min", "must be > 0");
    if (!(car.zeta_min < car.zeta_max))
      throw ConfigError("cochlea.car.zeta_max", "must exceed zeta_min");
    if (!(car.zero_ratio >= 1.0)) throw ConfigError("cochlea.car.zero_ratio", "must be >= 1");
    if (!(ohc.velocity_scale > 0.0))
      throw ConfigError("cochlea.ohc.velocity_scale", "must be > 0");
    if (!std::isfinite(ohc.v_offset)) throw ConfigError("cochlea.ohc.v_offset", "must be finite");
    if (!std::isfinite(ihc.offset)) throw ConfigError("cochlea.ihc.offset", "must be finite");
    if (!(ihc.lp1_hz > 0.0)) throw ConfigError("cochlea.ihc.lp1_hz", "must be > 0");
    if (!(ihc.lp2_hz > 0.0)) throw ConfigError("cochlea.ihc.lp2_hz", "must be > 0");
    if (agc.time_constants.empty())
      throw ConfigError("cochlea.agc.time_constants", "needs at least one stage");
    if (agc.time_constants.size() != agc.decimation.size())
      throw ConfigError("cochlea.agc.decimation", "needs one factor per AGC stage");
    for (double tc : agc.time_constants)
      if (!(tc > 0.0)) throw ConfigError("cochlea.agc.time_constants", "must all be > 0");
    for (int d : agc.decimation)
      if (d < 1) throw ConfigError("cochlea.agc.decimation", "must all be >= 1");
    if (!(agc.stage_gain >= 0.0)) throw ConfigError("cochlea.agc.stage_gain", "must be >= 0");
    if (agc.spatial_kernel.size() != 3)
      throw ConfigError("cochlea.agc.spatial_kernel", "must have 3 taps");
    double ksum = 0.0;
    for (double k : agc.spatial_kernel) {
      if (!(k >= 0.0)) throw ConfigError("cochlea.agc.spatial_kernel", "taps must be >= 0");
      ksum += k;
    }
    if (std::abs(ksum - 1.0) > 1e-12)
      throw ConfigError("cochlea.agc.spatial_kernel", "taps must sum to 1");
    if (n_ears != 1 && n_ears != 2) throw ConfigError("cochlea.n_ears", "must be 1 or 2");
    // The max-damped pole radius 1 - theta * zeta_max must stay positive.
    const double theta_top = 2.0 * std::numbers::pi * top / fs;
    if (!(theta_top * car.zeta_max < 1.0))
      throw ConfigError("cochlea.cf_max", "too close to fs/2 for zeta_max (pole radius <= 0)");
  }
};

// Greenwood place-frequency map, CF(x) = 165.4 * (10^(2.1 x) - 0.88).
inline double greenwood_frequency(double x) {
  return 165.4 * (std::pow(10.0, 2.1 * x) - 0.88);
}

inline double greenwood_position(double hz) {
  return std::log10(hz / 165.4 + 0.88) / 2.1;
}

// CF of channel i. Channel 0 sits at cf_max and channel n-1 at cf_min, with
// equal spacing in cochlear position between them.
inline double greenwood_cf(int i, const CochleaConfig& cfg) {
  if (i < 0 || i >= cfg.n_channels) throw InputError("greenwood_cf: channel index out of range");
  const double top = cfg.effective_cf_max();
  const double nyquist = cfg.fs / 2.0;
  if (!(cfg.cf_min > 0.0 && cfg.cf_min < nyquist)) throw ConfigError("cochlea.cf_min", "must lie in (0, fs/2)");
  if (!(top > 0.0 && top < nyquist)) throw ConfigError("cochlea.cf_max", "must lie in (0, fs/2)");
  if (i == 0) return top;
  if (i == cfg.n_channels - 1) return cfg.cf_min;
  const double x_hi = greenwood_position(top);
  const double x_lo = greenwood_position(cfg.cf_min);
  const double x = x_hi - (x_hi - x_lo) * i / (cfg.n_channels - 1);
  return greenwood_frequency(x);
}

// Per-channel resonator coefficients plus the scalar FAC coefficients that
// follow from the configuration.
struct ChannelCoeffs {
  std::vector<double> cf;     // Hz
  std::vector<double> theta;  // rad/sample
  std::vector<double> a0;
  std::vector<double> c0;
  std::vector<double> h;
  std::vector<double> r1;   // max-damped pole radius
  std::vector<double> drz;  // undamping range
  std::vector<double> g;    // unity-DC normalizer at the rest radius

  double ihc_alpha1 = 0.0;  // one-pole smoothing coefficients
  double ihc_alpha2 = 0.0;
  double ihc_rest = 0.0;           // transduction output at zero input
  std::vector<double> agc_epsilon;  // per AGC stage
  std::vector<int> agc_period;      // cumulative decimation per stage
  double agc_detect_scale = 1.0;    // reciprocal DC gain of the coupled stages

  std::size_t size() const { return cf.size(); }
  double rest_radius(std::size_t i) const { return r1[i] + drz[i]; }
};

// Saturating transduction z^3 / (z^3 + z^2 + 0.1) with z = max(0, y + offset).
inline double ihc_detect(double y, double offset) {
  const double z = std::max(0.0, y + offset);
  const double z2 = z * z;
  const double z3 = z2 * z;
  return z3 / (z3 + z2 + 0.1);
}

inline ChannelCoeffs design_coefficients(const CochleaConfig& cfg) {
  cfg.validate();
  const auto n = static_cast<std::size_t>(cfg.n_channels);
  ChannelCoeffs k;
  k.cf.resize(n);
  k.theta.resize(n);
  k.a0.resize(n);
  k.c0.resize(n);
  k.h.resize(n);
  k.r1.resize(n);
  k.drz.resize(n);
  k.g.resize(n);
  const double zr2 = cfg.car.zero_ratio * cfg.car.zero_ratio;
  for (std::size_t i = 0; i < n; ++i) {
    const double cf = greenwood_cf(static_cast<int>(i), cfg);
    const double theta = 2.0 * std::numbers::pi * cf / cfg.fs;
    const double a0 = std::cos(theta);
    const double c0 = std::sin(theta);
    const double h = c0 * (zr2 - 1.0);
    const double r1 = 1.0 - theta * cfg.car.zeta_max;
    const double drz = theta * (cfg.car.zeta_max - cfg.car.zeta_min);
    const double r = r1 + drz;
    const double pole = 1.0 - 2.0 * a0 * r + r * r;
    const double g = pole / (pole + h * c0 * r);
    for (double v : {theta, a0, c0, h, r1, drz, g}) {
      if (!std::isfinite(v))
        throw ConfigError("cochlea", "non-finite coefficient at channel " + std::to_string(i));
    }
    if (!(r1 > 0.0 && r < 1.0 && g > 0.0))
      throw ConfigError("cochlea", "unstable coefficients at channel " + std::to_string(i));
    k.cf[i] = cf;
    k.theta[i] = theta;
    k.a0[i] = a0;
    k.c0[i] = c0;
    k.h[i] = h;
    k.r1[i] = r1;
    k.drz[i] = drz;
    k.g[i] = g;
  }
  for (std::size_t i = 1; i < n; ++i) {
    if (!(k.cf[i] < k.cf[i - 1])) throw ConfigError("cochlea", "CFs must strictly decrease");
  }

  const double two_pi_over_fs = 2.0 * std::numbers::pi / cfg.fs;
  k.ihc_alpha1 = 1.0 - std::exp(-cfg.ihc.lp1_hz * two_pi_over_fs);
  k.ihc_alpha2 = 1.0 - std::exp(-cfg.ihc.lp2_hz * two_pi_over_fs);
  k.ihc_rest = ihc_detect(0.0, cfg.ihc.offset);

  double dc_gain = 0.0;
  for (std::size_t s = 0; s < cfg.agc.time_constants.size(); ++s) dc_gain += std::pow(cfg.agc.stage_gain, s);
  k.agc_detect_scale = 1.0 / dc_gain;
  int period = 1;
  for (std::size_t s = 0; s < cfg.agc.time_constants.size(); ++s) {
    period *= cfg.agc.decimation[s];
    k.agc_period.push_back(period);
    k.agc_epsilon.push_back(1.0 - std::exp(-period / (cfg.agc.time_constants[s] * cfg.fs)));
  }
  return k;
}

// Running state of one cascade.
struct EarState {
  std::vector<double> z1, z2;
  std::vector<double> velocity;  // z2 change over the last sample
  std::vector<double> radius;    // pole radius used on the last sample
  std::vector<double> ihc_lp1, ihc_lp2;
  std::vector<std::vector<double>> agc_memory;  // [stage][channel]
  std::vector<std::vector<double>> agc_accum;   // [stage][channel]
  std::vector<int> agc_count;                   // inputs accumulated per stage
  std::vector<double> undamping;                // b in [0, 1]
  std::vector<std::vector<double>> agc_scratch;  // per-stage averages

  EarState() = default;
  EarState(std::size_t n_channels, std::size_t n_stages)
      : z1(n_channels, 0.0),
        z2(n_channels, 0.0),
        velocity(n_channels, 0.0),
        radius(n_channels, 0.0),
        ihc_lp1(n_channels, 0.0),
        ihc_lp2(n_channels, 0.0),
        agc_memory(n_stages, std::vector<double>(n_channels, 0.0)),
        agc_accum(n_stages, std::vector<double>(n_channels, 0.0)),
        agc_count(n_stages, 0),
        undamping(n_channels, 1.0),
        agc_scratch(n_stages + 1, std::vector<double>(n_channels, 0.0)) {}
};

struct CochleaState {
  std::vector<EarState> ears;

  CochleaState() = default;
  explicit CochleaState(const CochleaConfig& cfg)
      : ears(static_cast<std::size_t>(cfg.n_ears),
             EarState(static_cast<std::size_t>(cfg.n_channels), cfg.agc.time_constants.size())) {}

  void reset(const CochleaConfig& cfg) { *this = CochleaState(cfg); }
};

namespace detail {

inline void spatial_smooth(std::vector<double>& m, const std::vector<double>& kernel,
                           std::vector<double>& scratch) {
  const std::size_t n = m.size();
  scratch.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double left = m[i == 0 ? 0 : i - 1];
    const double right = m[i + 1 == n ? i : i + 1];
    scratch[i] = kernel[0] * left + kernel[1] * m[i] + kernel[2] * right;
  }
  m.swap(scratch);
}

// Accumulates `input` into `stage`; when the stage's decimation count is
// reached, the next stage is updated first and then this stage's memory.
inline void agc_accumulate(EarState& ear, const ChannelCoeffs& k, const CochleaConfig& cfg,
                           std::size_t stage, std::span<const double> input) {
  auto& acc = ear.agc_accum[stage];
  const double scale = stage == 0 ? k.agc_detect_scale : 1.0;
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += scale * input[i];
  if (++ear.agc_count[stage] < cfg.agc.decimation[stage]) return;
  ear.agc_count[stage] = 0;

  auto& avg = ear.agc_scratch[stage];
  const double inv = 1.0 / cfg.agc.decimation[stage];
  for (std::size_t i = 0; i < acc.size(); ++i) {
    avg[i] = acc[i] * inv;
    acc[i] = 0.0;
  }
  const bool has_next = stage + 1 < ear.agc_memory.size();
  if (has_next) agc_accumulate(ear, k, cfg, stage + 1, std::span<const double>(avg));

  auto& mem = ear.agc_memory[stage];
  const double eps = k.agc_epsilon[stage];
  for (std::size_t i = 0; i < mem.size(); ++i) {
    double drive = avg[i];
    if (has_next) drive += cfg.agc.stage_gain * ear.agc_memory[stage + 1][i];
    mem[i] += eps * (drive - mem[i]);
  }
  spatial_smooth(mem, cfg.agc.spatial_kernel, ear.agc_scratch.back());

  if (stage == 0) {
    for (std::size_t i = 0; i < mem.size(); ++i)
      ear.undamping[i] = std::clamp(1.0 - mem[i], 0.0, 1.0);
  }
}

inline void ear_step(EarState& ear, const ChannelCoeffs& k, const CochleaConfig& cfg, double x,
                     std::span<double> bm, std::span<double> ihc) {
  const std::size_t n = k.size();
  const bool fac = cfg.fac_enabled;
  double in = x;
  for (std::size_t i = 0; i < n; ++i) {
    double r;
    if (fac) {
      const double s = ear.velocity[i] * cfg.ohc.velocity_scale + cfg.ohc.v_offset;
      const double nlf = 1.0 / (1.0 + s * s);
      r = k.r1[i] + k.drz[i] * nlf * ear.undamping[i];
    } else {
      r = k.rest_radius(i);
    }
    ear.radius[i] = r;
    const double z1 = ear.z1[i];
    const double z2 = ear.z2[i];
    const double z1n = r * (k.a0[i] * z1 - k.c0[i] * z2) + in;
    const double z2n = r * (k.c0[i] * z1 + k.a0[i] * z2);
    ear.velocity[i] = z2n - z2;
    ear.z1[i] = z1n;
    ear.z2[i] = z2n;
    const double y = k.g[i] * (in + k.h[i] * z2n);
    bm[i] = y;
    in = y;

    if (fac) {
      const double u = std::max(0.0, ihc_detect(y, cfg.ihc.offset) - k.ihc_rest);
      ear.ihc_lp1[i] += k.ihc_alpha1 * (u - ear.ihc_lp1[i]);
      ear.ihc_lp2[i] += k.ihc_alpha2 * (ear.ihc_lp1[i] - ear.ihc_lp2[i]);
      ihc[i] = ear.ihc_lp2[i];
    } else {
      ihc[i] = std::max(0.0, y);
    }
  }
  if (!std::isfinite(in)) throw ProcessingError("cochlea: cascade state became non-finite");
  if (fac) agc_accumulate(ear, k, cfg, 0, ihc);
}

}  // namespace detail

// Advances every ear by one sample. `x` holds one input sample per ear;
// `bm` and `ihc` receive n_ears * n_channels values, ear-major.
inline void car_step(CochleaState& state, const ChannelCoeffs& coeffs, const CochleaConfig& cfg,
                     std::span<const double> x, std::span<double> bm, std::span<double> ihc) {
  const std::size_t n = coeffs.size();
  if (x.size() != state.ears.size()) throw InputError("car_step: one input sample per ear expected");
  if (bm.size() != n * state.ears.size() || ihc.size() != n * state.ears.size())
    throw InputError("car_step: output spans must hold n_ears * n_channels values");
  for (std::size_t e = 0; e < state.ears.size(); ++e) {
    if (!std::isfinite(x[e])) throw ProcessingError("car_step: non-finite input sample");
    detail::ear_step(state.ears[e], coeffs, cfg, x[e], bm.subspan(e * n, n), ihc.subspan(e * n, n));
  }
}

// Mono convenience: the same sample drives every ear.
inline void car_step(CochleaState& state, const ChannelCoeffs& coeffs, const CochleaConfig& cfg,
                     double x, std::span<double> bm, std::span<double> ihc) {
  if (state.ears.size() > 2) throw InputError("car_step: at most two ears");
  const double xs[2] = {x, x};
  car_step(state, coeffs, cfg, std::span<const double>(xs, state.ears.size()), bm, ihc);
}

// Row-major [sample][ear * n_channels + channel] matrix.
struct Cochleagram {
  std::size_t n_samples = 0;
  std::size_t n_columns = 0;
  std::vector<double> values;

  std::span<const double> row(std::size_t t) const {
    return std::span<const double>(values).subspan(t * n_columns, n_columns);
  }
  double at(std::size_t t, std::size_t col) const { return values[t * n_columns + col]; }
};

struct CochleaOutput {
  Cochleagram bm;
  Cochleagram ihc;
};

// Runs the whole signal from the reset state.
inline CochleaOutput process_signal_full(std::span<const double> samples, const CochleaConfig& cfg) {
  if (samples.empty()) throw InputError("process_signal: empty signal");
  const ChannelCoeffs coeffs = design_coefficients(cfg);
  CochleaState state(cfg);
  const std::size_t cols = coeffs.size() * static_cast<std::size_t>(cfg.n_ears);
  CochleaOutput out;
  out.bm.n_samples = out.ihc.n_samples = samples.size();
  out.bm.n_columns = out.ihc.n_columns = cols;
  out.bm.values.resize(samples.size() * cols);
  out.ihc.values.resize(samples.size() * cols);
  for (std::size_t t = 0; t < samples.size(); ++t) {
    car_step(state, coeffs, cfg, samples[t], std::span<double>(out.bm.values).subspan(t * cols, cols),
             std::span<double>(out.ihc.values).subspan(t * cols, cols));
  }
  return out;
}

inline Cochleagram process_signal(std::span<const double> samples, const CochleaConfig& cfg) {
  return process_signal_full(samples, cfg).ihc;
}

}  // namespace carfeast
