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

// Lateral inhibition and leaky integrate-and-fire spike generation.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "carfeast/cochlea.hpp"
#include "carfeast/error.hpp"
#include "carfeast/events.hpp"

namespace carfeast {

struct LifThreshold {
  std::uint8_t id = 0;
  double value = 0.0004;
};

struct LifConfig {
  double tau_lif = 0.01;  // seconds
  std::vector<LifThreshold> thresholds{LifThreshold{}};
  double v_reset = 0.0;
  double li_alpha = 0.5;
  int neurons_per_threshold = 1;
  // Scales IHC output into membrane units before inhibition.
  double input_gain = 0.005;

  void validate() const {
    if (!(tau_lif > 0.0)) throw ConfigError("lif.tau_lif", "must be > 0");
    if (thresholds.empty()) throw ConfigError("lif.thresholds", "needs at least one level");
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
      if (!(thresholds[i].value > 0.0)) throw ConfigError("lif.thresholds", "values must be > 0");
      for (std::size_t j = 0; j < i; ++j)
        if (thresholds[j].id == thresholds[i].id) throw ConfigError("lif.thresholds", "duplicate level id");
    }
    if (!std::isfinite(v_reset)) throw ConfigError("lif.v_reset", "must be finite");
    if (!(li_alpha >= 0.0 && li_alpha <= 1.0)) throw ConfigError("lif.li_alpha", "must lie in [0, 1]");
    if (neurons_per_threshold < 1) throw ConfigError("lif.neurons_per_threshold", "must be >= 1");
    if (static_cast<std::size_t>(neurons_per_threshold) * thresholds.size() > 256)
      throw ConfigError("lif.neurons_per_threshold", "at most 256 neurons per channel");
    if (!(input_gain > 0.0)) throw ConfigError("lif.input_gain", "must be > 0");
  }

  // Event id of neuron `n` at threshold level `level`.
  std::uint8_t event_id(std::size_t level, std::size_t n) const {
    if (neurons_per_threshold == 1) return thresholds[level].id;
    return static_cast<std::uint8_t>(level * static_cast<std::size_t>(neurons_per_threshold) + n);
  }
};

// c_LIF = 1 / (fs * tau_LIF)
inline double lif_coefficient(double fs, double tau_lif) { return 1.0 / (fs * tau_lif); }

// out[s] = max(0, in[s] - alpha * mean(existing neighbours of s)).
inline void lateral_inhibition_into(std::span<const double> ihc, double alpha, std::span<double> out) {
  const std::size_t n = ihc.size();
  if (out.size() != n) throw InputError("lateral_inhibition: output size mismatch");
  for (std::size_t s = 0; s < n; ++s) {
    double neighbours = 0.0;
    if (n == 1) {
      neighbours = 0.0;
    } else if (s == 0) {
      neighbours = ihc[1];
    } else if (s + 1 == n) {
      neighbours = ihc[s - 1];
    } else {
      neighbours = 0.5 * (ihc[s - 1] + ihc[s + 1]);
    }
    out[s] = std::max(0.0, ihc[s] - alpha * neighbours);
  }
}

inline std::vector<double> lateral_inhibition(std::span<const double> ihc, double alpha) {
  std::vector<double> out(ihc.size());
  lateral_inhibition_into(ihc, alpha, out);
  return out;
}

// Membrane potentials, [channel][level * neurons_per_threshold + neuron].
struct LifState {
  std::size_t n_channels = 0;
  std::size_t per_channel = 0;
  std::vector<double> v;

  LifState() = default;
  LifState(std::size_t channels, const LifConfig& cfg)
      : n_channels(channels),
        per_channel(cfg.thresholds.size() * static_cast<std::size_t>(cfg.neurons_per_threshold)),
        v(channels * per_channel, cfg.v_reset) {}

  double& at(std::size_t ch, std::size_t neuron) { return v[ch * per_channel + neuron]; }
  double at(std::size_t ch, std::size_t neuron) const { return v[ch * per_channel + neuron]; }
};

// One sample of integration. Appends the spikes of sample `t` to `out` in
// (channel, id) order.
inline void lif_step(LifState& state, std::span<const double> li, std::uint64_t t, const LifConfig& cfg,
                     double fs, std::vector<AudEvent>& out) {
  if (li.size() != state.n_channels) throw InputError("lif_step: input size must equal channel count");
  const double c = lif_coefficient(fs, cfg.tau_lif);
  const auto npt = static_cast<std::size_t>(cfg.neurons_per_threshold);
  const std::size_t first = out.size();
  for (std::size_t s = 0; s < state.n_channels; ++s) {
    for (std::size_t level = 0; level < cfg.thresholds.size(); ++level) {
      for (std::size_t n = 0; n < npt; ++n) {
        double& v = state.at(s, level * npt + n);
        v += c * (li[s] - v);
        if (v > cfg.thresholds[level].value) {
          out.push_back(AudEvent{t, static_cast<std::uint16_t>(s), cfg.event_id(level, n)});
          v = cfg.v_reset;
        }
      }
    }
  }
  std::sort(out.begin() + static_cast<std::ptrdiff_t>(first), out.end());
}

inline std::vector<AudEvent> lif_step(LifState& state, std::span<const double> li, std::uint64_t t,
                                      const LifConfig& cfg, double fs) {
  std::vector<AudEvent> out;
  lif_step(state, li, t, cfg, fs, out);
  return out;
}

// Cochlea -> lateral inhibition -> LIF for a whole utterance, from reset.
// With two ears, ear e occupies channels [e * n, (e + 1) * n).
inline EventStream encode_signal(std::span<const double> samples, const CochleaConfig& ccfg,
                                 const LifConfig& lcfg) {
  if (samples.empty()) throw InputError("encode_signal: empty signal");
  lcfg.validate();
  const ChannelCoeffs coeffs = design_coefficients(ccfg);
  CochleaState cstate(ccfg);
  const std::size_t n = coeffs.size();
  const std::size_t cols = n * static_cast<std::size_t>(ccfg.n_ears);
  if (cols > 65535) throw ConfigError("cochlea.n_channels", "too many channels for 16-bit ids");
  LifState lstate(cols, lcfg);

  EventStream stream;
  stream.fs = static_cast<std::uint32_t>(ccfg.fs);
  stream.n_channels = static_cast<std::uint32_t>(cols);

  std::vector<double> bm(cols), ihc(cols), li(cols);
  for (std::size_t t = 0; t < samples.size(); ++t) {
    car_step(cstate, coeffs, ccfg, samples[t], bm, ihc);
    for (double& v : ihc) v *= lcfg.input_gain;
    for (std::size_t e = 0; e < static_cast<std::size_t>(ccfg.n_ears); ++e)
      lateral_inhibition_into(std::span<const double>(ihc).subspan(e * n, n), lcfg.li_alpha,
                              std::span<double>(li).subspan(e * n, n));
    lif_step(lstate, li, t, lcfg, ccfg.fs, stream.events);
  }
  return stream;
}

}  // namespace carfeast
