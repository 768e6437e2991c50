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

// Fixed time binning of spike / feature-map events into count vectors.
//
// Layout of an assembled vector: ascending scale, then neuron, channel, bin.
// Raw cochlear spikes (the baseline) use scale id 0 and one "neuron" per
// threshold level.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "carfeast/error.hpp"
#include "carfeast/events.hpp"
#include "carfeast/feast.hpp"

namespace carfeast {

struct BinEvent {
  std::uint64_t t = 0;
  std::size_t ch = 0;
  std::size_t neuron = 0;
};

struct CountTensor {
  std::size_t scale = 0;  // 0 = raw spikes
  std::size_t neurons = 0;
  std::size_t channels = 0;
  std::size_t bins = 0;
  std::vector<double> counts;  // [neuron][channel][bin]

  double at(std::size_t n, std::size_t c, std::size_t b) const { return counts[(n * channels + c) * bins + b]; }
  double total() const {
    double s = 0.0;
    for (double v : counts) s += v;
    return s;
  }
};

// Bin b covers [b * duration / B, (b + 1) * duration / B); the last bin also
// takes t == duration.
inline std::size_t bin_index(std::uint64_t t, std::uint64_t duration, std::size_t bins) {
  if (t > duration) throw InputError("time_bin: event at t=" + std::to_string(t) + " beyond duration " +
                                     std::to_string(duration));
  const auto b = static_cast<std::size_t>((static_cast<unsigned __int128>(t) * bins) / duration);
  return std::min(b, bins - 1);
}

inline CountTensor time_bin(std::span<const BinEvent> events, std::uint64_t duration, std::size_t neurons,
                            std::size_t channels, std::size_t bins, std::size_t scale = 0) {
  if (duration == 0) throw InputError("time_bin: duration must be > 0");
  if (bins == 0) throw InputError("time_bin: need at least one bin");
  CountTensor out{scale, neurons, channels, bins, std::vector<double>(neurons * channels * bins, 0.0)};
  for (const auto& e : events) {
    if (e.neuron >= neurons || e.ch >= channels) throw InputError("time_bin: event outside tensor shape");
    out.counts[(e.neuron * channels + e.ch) * bins + bin_index(e.t, duration, bins)] += 1.0;
  }
  return out;
}

inline CountTensor time_bin(std::span<const FeatureMapEvent> events, std::uint64_t duration, std::size_t neurons,
                            std::size_t channels, std::size_t bins, std::size_t scale) {
  std::vector<BinEvent> be;
  be.reserve(events.size());
  for (const auto& e : events) be.push_back({e.t, e.ch, e.neuron});
  return time_bin(be, duration, neurons, channels, bins, scale);
}

// Baseline: raw spikes, one row per threshold level id in `level_ids`.
inline CountTensor time_bin_raw(std::span<const AudEvent> events, std::uint64_t duration, std::size_t channels,
                                std::size_t bins, std::span<const std::uint8_t> level_ids) {
  std::vector<BinEvent> be;
  be.reserve(events.size());
  for (const auto& e : events) {
    const auto it = std::find(level_ids.begin(), level_ids.end(), e.id);
    if (it == level_ids.end()) throw InputError("time_bin: unknown threshold level id " + std::to_string(e.id));
    be.push_back({e.t, e.ch, static_cast<std::size_t>(it - level_ids.begin())});
  }
  return time_bin(be, duration, level_ids.size(), channels, bins, 0);
}

struct FeatureLayout {
  struct Block {
    std::size_t scale;
    std::size_t neurons;
  };
  std::vector<Block> blocks;  // ascending scale
  std::size_t channels = 0;
  std::size_t bins = 0;

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& b : blocks) n += b.neurons * channels * bins;
    return n;
  }

  // Column names such as s5_n3_c10_b2, or raw_n0_c10_b2 for scale 0.
  std::vector<std::string> column_names() const {
    std::vector<std::string> out;
    out.reserve(size());
    for (const auto& b : blocks) {
      const std::string prefix = b.scale == 0 ? "raw" : "s" + std::to_string(b.scale);
      for (std::size_t n = 0; n < b.neurons; ++n)
        for (std::size_t c = 0; c < channels; ++c)
          for (std::size_t k = 0; k < bins; ++k)
            out.push_back(prefix + "_n" + std::to_string(n) + "_c" + std::to_string(c) + "_b" + std::to_string(k));
    }
    return out;
  }

  friend bool operator==(const FeatureLayout::Block& a, const FeatureLayout::Block& b) {
    return a.scale == b.scale && a.neurons == b.neurons;
  }
  friend bool operator==(const FeatureLayout&, const FeatureLayout&) = default;
};

struct FeatureVector {
  std::string label;
  FeatureLayout layout;
  std::vector<double> values;
};

// Concatenates tensors in ascending scale order, optionally scaling the
// result to unit L2 norm (an all-zero vector stays zero).
inline FeatureVector assemble(std::vector<CountTensor> tensors, bool normalize, std::string label = {}) {
  if (tensors.empty()) throw InputError("assemble: no tensors");
  std::sort(tensors.begin(), tensors.end(), [](const auto& a, const auto& b) { return a.scale < b.scale; });
  FeatureVector fv;
  fv.label = std::move(label);
  fv.layout.channels = tensors.front().channels;
  fv.layout.bins = tensors.front().bins;
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const auto& t = tensors[i];
    if (t.channels != fv.layout.channels || t.bins != fv.layout.bins)
      throw InputError("assemble: channel/bin metadata differs between scales");
    if (i > 0 && t.scale == tensors[i - 1].scale) throw InputError("assemble: duplicate scale " + std::to_string(t.scale));
    if (t.counts.size() != t.neurons * t.channels * t.bins) throw InputError("assemble: tensor size mismatch");
    fv.layout.blocks.push_back({t.scale, t.neurons});
    fv.values.insert(fv.values.end(), t.counts.begin(), t.counts.end());
  }
  if (normalize) {
    double ss = 0.0;
    for (double v : fv.values) ss += v * v;
    if (ss > 0.0) {
      const double inv = 1.0 / std::sqrt(ss);
      for (double& v : fv.values) v *= inv;
    }
  }
  return fv;
}

}  // namespace carfeast
