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

// Spike events, exponential time surfaces and event contexts.
//
// An event context is a c x S snapshot of the time surface around a trigger
// spike: for each of c neighbouring channels, the k most recent spikes are
// turned into a piecewise-exponential trace (jump to 1 at a spike, decay with
// tau between spikes) and read at S uniformly spaced points of the row's own
// window [oldest selected spike, trigger time].

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "carfeast/error.hpp"

namespace carfeast {

using Timestamp = std::int64_t;  // sample index

struct AudEvent {
  std::uint64_t t = 0;
  std::uint16_t ch = 0;
  std::uint8_t id = 0;

  friend bool operator==(const AudEvent&, const AudEvent&) = default;
  friend bool operator<(const AudEvent& a, const AudEvent& b) {
    return std::tie(a.t, a.ch, a.id) < std::tie(b.t, b.ch, b.id);
  }
};

struct EventStream {
  std::uint32_t fs = 0;
  std::uint32_t n_channels = 0;
  std::string label;
  std::vector<AudEvent> events;

  bool is_sorted() const {
    return std::is_sorted(events.begin(), events.end());
  }

  friend bool operator==(const EventStream&, const EventStream&) = default;
};

// Time constant of the surface in samples: 1 ms worth of samples.
inline double default_tau(double fs) { return fs * 1e-3; }

inline double surface_value(Timestamp t, std::optional<Timestamp> t_last, double tau) {
  if (!t_last) return 0.0;
  return std::exp(-static_cast<double>(t - *t_last) / tau);
}

// Most recent `capacity` spike times per channel, oldest first. Equal
// timestamps on one channel (several threshold levels) collapse into one.
class SpikeHistory {
 public:
  SpikeHistory(std::size_t n_channels, std::size_t capacity)
      : capacity_(capacity), rows_(n_channels) {
    if (capacity == 0) throw InputError("SpikeHistory: capacity must be >= 1");
  }

  void push(std::size_t ch, Timestamp t) {
    auto& row = rows_.at(ch);
    if (!row.empty()) {
      if (row.back() == t) return;
      if (row.back() > t) throw InputError("SpikeHistory: spikes must arrive in time order");
    }
    if (row.size() == capacity_) row.erase(row.begin());
    row.push_back(t);
  }

  std::span<const Timestamp> channel(std::size_t ch) const { return rows_.at(ch); }
  std::size_t n_channels() const { return rows_.size(); }
  std::size_t capacity() const { return capacity_; }

 private:
  std::size_t capacity_;
  std::vector<std::vector<Timestamp>> rows_;
};

// The k largest timestamps <= t_i on `ch`, ascending. With exclude_trigger the
// spike at exactly t_i is left out (it is appended by the caller).
inline std::vector<Timestamp> select_spikes(const SpikeHistory& history, std::size_t ch,
                                            Timestamp t_i, std::size_t k,
                                            bool exclude_trigger = true) {
  if (k == 0) throw InputError("select_spikes: k must be >= 1");
  const auto row = history.channel(ch);
  auto end = std::upper_bound(row.begin(), row.end(), t_i);
  if (exclude_trigger && end != row.begin() && *(end - 1) == t_i) --end;
  const auto count = std::min<std::size_t>(k, static_cast<std::size_t>(end - row.begin()));
  return std::vector<Timestamp>(end - static_cast<std::ptrdiff_t>(count), end);
}

// Evaluates the piecewise-exponential surface of `spike_times` (ascending) at
// u_j = t_start + j (t_i - t_start) / (S - 1), S = out.size(). Elapsed times
// are formed as exact integer numerators over (S - 1) so results are
// bit-identical when all times and tau are scaled by a common integer factor.
inline void resample_channel_into(std::span<const Timestamp> spike_times, Timestamp t_start, Timestamp t_i,
                                  double tau, std::span<double> out) {
  const std::size_t samples = out.size();
  if (samples < 2) throw InputError("resample_channel: need at least 2 samples");
  if (t_start > t_i) throw InputError("resample_channel: window start after its end");
  if (!(tau > 0.0)) throw InputError("resample_channel: tau must be > 0");
  std::fill(out.begin(), out.end(), 0.0);
  if (t_start == t_i) {
    if (spike_times.size() != 1 || spike_times[0] != t_i)
      throw InputError("resample_channel: degenerate window needs exactly the trigger spike");
    out.back() = 1.0;
    return;
  }
  const auto intervals = static_cast<Timestamp>(samples - 1);
  const Timestamp span = t_i - t_start;
  const double denom = static_cast<double>(intervals) * tau;
  std::size_t next = 0;  // first spike not yet passed
  bool have_last = false;
  Timestamp last = 0;
  for (std::size_t j = 0; j < samples; ++j) {
    // Query position scaled by (S - 1): u_j * (S - 1).
    const Timestamp q = t_start * intervals + static_cast<Timestamp>(j) * span;
    while (next < spike_times.size() && spike_times[next] * intervals <= q) {
      last = spike_times[next];
      have_last = true;
      ++next;
    }
    if (have_last) out[j] = std::exp(-static_cast<double>(q - last * intervals) / denom);
  }
}

inline std::vector<double> resample_channel(std::span<const Timestamp> spike_times, Timestamp t_start,
                                            Timestamp t_i, std::size_t samples, double tau) {
  if (samples < 2) throw InputError("resample_channel: need at least 2 samples");
  std::vector<double> out(samples, 0.0);
  resample_channel_into(spike_times, t_start, t_i, tau, out);
  return out;
}

struct EventContext {
  Timestamp t = 0;          // trigger time
  std::size_t ch = 0;       // trigger channel
  std::size_t scale = 1;    // rows (odd)
  std::size_t samples = 0;  // columns
  std::vector<double> values;  // row-major scale x samples

  double at(std::size_t row, std::size_t col) const { return values[row * samples + col]; }
  std::size_t center() const { return scale / 2; }
};

struct ContextParams {
  std::size_t scale = 1;
  std::size_t k = 4;
  std::size_t samples = 32;
  double tau = 16.0;  // samples

  void validate() const {
    if (scale == 0 || scale % 2 == 0) throw ConfigError("events.scale", "must be odd");
    if (k == 0) throw ConfigError("events.k", "must be >= 1");
    if (samples < 2) throw ConfigError("events.samples", "must be >= 2");
    if (!(tau > 0.0)) throw ConfigError("events.tau", "must be > 0");
  }
};

// Writes the scale x samples context of a trigger spike into `out`. The
// history must already contain the trigger. Returns false (and leaves `out`
// unspecified) when the trigger channel has fewer than k earlier spikes.
inline bool extract_context_into(const SpikeHistory& history, Timestamp t, std::size_t ch,
                                 const ContextParams& p, std::span<double> out) {
  const std::size_t n_channels = history.n_channels();
  if (ch >= n_channels) throw InputError("extract_context: trigger channel out of range");
  if (out.size() != p.scale * p.samples) throw InputError("extract_context: output size mismatch");

  // The trigger row: k earlier spikes followed by the trigger itself.
  const auto row = history.channel(ch);
  auto end = std::upper_bound(row.begin(), row.end(), t);
  if (end != row.begin() && *(end - 1) == t) --end;
  const auto earlier = static_cast<std::size_t>(end - row.begin());
  if (earlier < p.k) return false;
  std::vector<Timestamp> own(end - static_cast<std::ptrdiff_t>(p.k), end);
  own.push_back(t);

  std::fill(out.begin(), out.end(), 0.0);
  const auto half = static_cast<std::ptrdiff_t>(p.scale / 2);
  for (std::size_t r = 0; r < p.scale; ++r) {
    const std::ptrdiff_t c = static_cast<std::ptrdiff_t>(ch) - half + static_cast<std::ptrdiff_t>(r);
    if (c < 0 || c >= static_cast<std::ptrdiff_t>(n_channels)) continue;
    const auto cc = static_cast<std::size_t>(c);
    auto dst = out.subspan(r * p.samples, p.samples);
    if (cc == ch) {
      resample_channel_into(own, own.front(), t, p.tau, dst);
      continue;
    }
    const auto other = history.channel(cc);
    const auto stop = std::upper_bound(other.begin(), other.end(), t);
    const auto count = std::min<std::size_t>(p.k, static_cast<std::size_t>(stop - other.begin()));
    if (count == 0) continue;
    const std::span<const Timestamp> spikes(stop - static_cast<std::ptrdiff_t>(count), stop);
    resample_channel_into(spikes, spikes.front(), t, p.tau, dst);
  }
  return true;
}

// Context for a trigger spike already pushed into `history`. Returns nothing
// when the trigger channel has fewer than k earlier spikes.
inline std::optional<EventContext> extract_context(const SpikeHistory& history, Timestamp t,
                                                   std::size_t ch, const ContextParams& p) {
  EventContext ec;
  ec.t = t;
  ec.ch = ch;
  ec.scale = p.scale;
  ec.samples = p.samples;
  ec.values.assign(p.scale * p.samples, 0.0);
  if (!extract_context_into(history, t, ch, p, ec.values)) return std::nullopt;
  return ec;
}

// Walks a time-sorted stream once. For every distinct timestamp, all spikes
// at that time enter the history before any of them is used as a trigger.
// `fn(const AudEvent&, const SpikeHistory&)` is called once per event.
template <typename Fn>
void for_each_with_history(const EventStream& stream, std::size_t capacity, Fn&& fn) {
  SpikeHistory history(stream.n_channels, capacity);
  const auto& ev = stream.events;
  std::size_t i = 0;
  while (i < ev.size()) {
    std::size_t j = i;
    while (j < ev.size() && ev[j].t == ev[i].t) {
      if (ev[j].ch >= stream.n_channels) throw InputError("event channel out of range");
      history.push(ev[j].ch, static_cast<Timestamp>(ev[j].t));
      ++j;
    }
    for (std::size_t q = i; q < j; ++q) fn(ev[q], std::as_const(history));
    i = j;
  }
}

// All contexts of a stream at one scale, in stream order. Events with too
// little trigger-channel history are skipped.
inline std::vector<EventContext> extract_contexts(const EventStream& stream, const ContextParams& p) {
  p.validate();
  std::vector<EventContext> out;
  for_each_with_history(stream, p.k + 1, [&](const AudEvent& e, const SpikeHistory& h) {
    if (auto ec = extract_context(h, static_cast<Timestamp>(e.t), e.ch, p)) out.push_back(std::move(*ec));
  });
  return out;
}

}  // namespace carfeast
