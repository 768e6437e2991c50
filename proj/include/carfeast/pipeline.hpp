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

// End-to-end stages shared by the command-line tool and the acceptance
// suite. Every stage is deterministic for a given master seed: parallel work
// writes into per-index slots and stage seeds come from derive_seed().
//
// Stage seeds:
//   FEAST init         derive_seed(master, "feast-init", scale)
//   context sampling   derive_seed(master, "feast-contexts", scale)
//   FEAST shuffling    derive_seed(init seed, "feast-shuffle", scale)
//   classifier         derive_seed(master, "classifier")

#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "carfeast/classify.hpp"
#include "carfeast/config.hpp"
#include "carfeast/dataset.hpp"
#include "carfeast/events.hpp"
#include "carfeast/feast.hpp"
#include "carfeast/features.hpp"
#include "carfeast/io.hpp"
#include "carfeast/random.hpp"
#include "carfeast/spikegen.hpp"

namespace carfeast {

inline std::size_t resolve_threads(std::size_t requested) {
  if (requested > 0) return requested;
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

// Calls fn(i) for i in [0, n) on up to `threads` workers. Rethrows the
// exception of the lowest failing index, so failures do not depend on timing.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::min(resolve_threads(threads), n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::size_t failed_at = n;
  std::exception_ptr failure;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (i < failed_at) {
          failed_at = i;
          failure = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

// Manifest-relative path with separators flattened and the extension dropped.
inline std::string utterance_id(const std::string& relpath) {
  std::string id = std::filesystem::path(relpath).replace_extension().generic_string();
  for (char& c : id)
    if (c == '/' || c == '\\' || c == ':') c = '_';
  return id;
}

struct Utterance {
  std::string id;
  std::string label;
  std::string split;
  std::string speaker;
  std::uint64_t n_samples = 0;
  EventStream events;
};

// Binds cfg.cochlea.fs to the first file when the config leaves it open.
inline void bind_sample_rate(PipelineConfig& cfg, const DatasetManifest& m) {
  if (m.rows.empty()) throw InputError("manifest has no rows");
  cfg.bind_fs(read_wav(m.rows.front().path).fs, m.rows.front().path.string());
}

inline Utterance encode_row(const ManifestRow& row, const PipelineConfig& cfg) {
  const Wav w = read_wav(row.path);
  if (w.fs != cfg.cochlea.fs)
    throw InputError(row.path.string() + ": sample rate " + std::to_string(w.fs) + " Hz does not match cochlea.fs = " +
                     std::to_string(cfg.cochlea.fs) + " (audio is never resampled)");
  if (w.samples.empty()) throw InputError(row.path.string() + ": no samples");
  Utterance u{utterance_id(row.relpath), row.label, row.split, row.speaker, w.samples.size(), {}};
  u.events = encode_signal(w.samples, cfg.cochlea, cfg.lif);
  u.events.label = row.label;
  return u;
}

inline std::vector<Utterance> encode_manifest(const DatasetManifest& m, PipelineConfig& cfg, std::size_t threads) {
  bind_sample_rate(cfg, m);
  std::vector<Utterance> out(m.rows.size());
  parallel_for(m.rows.size(), threads, [&](std::size_t i) { out[i] = encode_row(m.rows[i], cfg); });
  std::set<std::string> ids;
  for (const auto& u : out)
    if (!ids.insert(u.id).second) throw InputError("two manifest rows map to utterance id '" + u.id + "'");
  return out;
}

inline ContextOptions context_options(const PipelineConfig& cfg) {
  return ContextOptions{cfg.events.k, cfg.events.tau_samples(cfg.cochlea.fs)};
}

// Number of events whose trigger channel has at least k earlier spikes. The
// count does not depend on the scale.
inline std::size_t count_extractable(const EventStream& s, std::size_t k) {
  std::size_t n = 0;
  for_each_with_history(s, k + 1, [&](const AudEvent& e, const SpikeHistory& h) {
    const auto row = h.channel(e.ch);
    // The trigger is the newest entry on its channel.
    if (row.size() >= k + 1) ++n;
  });
  return n;
}

// Training contexts of one scale from `streams`. With max_contexts > 0 a
// seeded uniform subset of that size is kept, in stream order.
inline ContextSet collect_contexts(const std::vector<const EventStream*>& streams, const ContextParams& p,
                                   std::size_t max_contexts, std::uint64_t seed) {
  p.validate();
  std::vector<std::size_t> per_stream(streams.size());
  std::size_t total = 0;
  for (std::size_t i = 0; i < streams.size(); ++i) total += per_stream[i] = count_extractable(*streams[i], p.k);
  std::vector<bool> keep(total, true);
  if (max_contexts > 0 && total > max_contexts) {
    // Selection sampling: every subset of size max_contexts is equally likely.
    Rng rng(seed);
    std::size_t need = max_contexts;
    for (std::size_t i = 0; i < total; ++i) {
      keep[i] = rng.below(total - i) < need;
      if (keep[i]) --need;
    }
  }
  ContextSet set(p.scale * p.samples);
  set.reserve(max_contexts > 0 ? std::min(total, max_contexts) : total);
  std::vector<double> buf(p.scale * p.samples);
  std::size_t index = 0;
  for (const auto* s : streams) {
    for_each_with_history(*s, p.k + 1, [&](const AudEvent& e, const SpikeHistory& h) {
      if (h.channel(e.ch).size() < p.k + 1) return;
      if (keep[index++] && extract_context_into(h, static_cast<Timestamp>(e.t), e.ch, p, buf)) set.add(buf);
    });
  }
  return set;
}

struct ScaleTraining {
  FeastModel model;
  TrainStats stats;
  std::size_t contexts = 0;
};

inline ScaleTraining train_scale(const std::vector<const EventStream*>& streams, std::size_t scale,
                                 const PipelineConfig& cfg, std::uint64_t master_seed) {
  const ContextParams p{scale, cfg.events.k, cfg.events.samples, cfg.events.tau_samples(cfg.cochlea.fs)};
  const auto contexts =
      collect_contexts(streams, p, cfg.feast.max_train_contexts, derive_seed(master_seed, "feast-contexts", scale));
  if (contexts.empty()) throw InputError("feast-train: no extractable contexts at scale " + std::to_string(scale));
  ScaleTraining out;
  out.model =
      FeastModel::initialize(scale, cfg.events.samples, cfg.feast.params, derive_seed(master_seed, "feast-init", scale));
  out.stats = train(out.model, contexts);
  out.contexts = contexts.size();
  return out;
}

// One model per scale, scales trained concurrently.
inline std::vector<ScaleTraining> train_scales(const std::vector<const EventStream*>& streams,
                                               const std::vector<std::size_t>& scales, const PipelineConfig& cfg,
                                               std::uint64_t master_seed, std::size_t threads) {
  std::vector<ScaleTraining> out(scales.size());
  parallel_for(scales.size(), threads,
               [&](std::size_t i) { out[i] = train_scale(streams, scales[i], cfg, master_seed); });
  return out;
}

// Feature-map events of one scale as an AEVT stream: id = winning neuron.
inline EventStream map_stream(const std::vector<FeatureMapEvent>& map, std::uint32_t fs, std::uint32_t n_channels,
                              const std::string& label) {
  EventStream s;
  s.fs = fs;
  s.n_channels = n_channels;
  s.label = label;
  s.events.reserve(map.size());
  for (const auto& e : map) s.events.push_back(AudEvent{e.t, e.ch, e.neuron});
  std::sort(s.events.begin(), s.events.end());
  return s;
}

inline CountTensor bin_map(const EventStream& map, std::size_t scale, std::size_t neurons, std::uint64_t duration,
                           std::size_t bins) {
  std::vector<BinEvent> be;
  be.reserve(map.events.size());
  for (const auto& e : map.events) be.push_back({e.t, e.ch, e.id});
  return time_bin(be, duration, neurons, map.n_channels, bins, scale);
}

inline CountTensor bin_raw(const EventStream& spikes, const PipelineConfig& cfg, std::uint64_t duration,
                           std::size_t bins) {
  const auto ids = cfg.level_ids();
  return time_bin_raw(spikes.events, duration, spikes.n_channels, bins, ids);
}

// Sums adjacent bins: counts binned with B = f * b collapse to b bins exactly,
// because floor(floor(t * f b / D) / f) = floor(t * b / D).
inline CountTensor coarsen(const CountTensor& t, std::size_t bins) {
  if (bins == 0 || t.bins % bins != 0) throw InputError("coarsen: bin count must divide the source bin count");
  const std::size_t f = t.bins / bins;
  CountTensor out{t.scale, t.neurons, t.channels, bins, std::vector<double>(t.neurons * t.channels * bins, 0.0)};
  for (std::size_t n = 0; n < t.neurons; ++n)
    for (std::size_t c = 0; c < t.channels; ++c)
      for (std::size_t b = 0; b < t.bins; ++b) out.counts[(n * t.channels + c) * bins + b / f] += t.at(n, c, b);
  return out;
}

// ---------------------------------------------------------------------------
// Classification report

struct ClassifierRun {
  LinearModel model;
  FitReport fit;
  Evaluation test;
  double train_accuracy = 0.0;
};

inline ClassifierRun run_classifier(const FeatureTable& table, const PipelineConfig& cfg, std::uint64_t master_seed) {
  TrainSpec spec = cfg.classifier;
  spec.seed = derive_seed(master_seed, "classifier");
  const auto train_set = table.labeled(cfg.classes, "train");
  const auto test_set = table.labeled(cfg.classes, "test");
  if (train_set.size() == 0) throw InputError("train-classifier: no training rows");
  ClassifierRun r;
  r.model = train_classifier(train_set, cfg.classes.size(), spec, &r.fit);
  r.model.class_names = cfg.classes;
  r.train_accuracy = evaluate(r.model, train_set).accuracy;
  if (test_set.size() > 0) r.test = evaluate(r.model, test_set);
  return r;
}

inline std::string mode_name(const PipelineConfig& cfg) { return cfg.cochlea.fac_enabled ? "CAR-FAC" : "linear CAR"; }

inline Json evaluation_json(const Evaluation& e, const std::vector<std::string>& classes) {
  Json j;
  j["accuracy"] = e.accuracy;
  j["correct"] = e.correct;
  j["total"] = e.total;
  j["classes"] = classes;
  j["confusion"] = e.confusion;
  return j;
}

}  // namespace carfeast
