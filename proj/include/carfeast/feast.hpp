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

// Feature extraction with adaptive selection thresholds.
//
// Learning: a neuron is eligible when its cosine similarity with the context
// strictly exceeds its threshold; the most similar eligible neuron wins, its
// threshold rises by delta_i and its weights move towards the normalized
// context with mixing rate eta. When nobody is eligible every threshold drops
// by delta_e. Inference: the most similar neuron wins, thresholds ignored.
//
// Thresholds are kept as base + delta_i * wins - delta_e * misses with integer
// win/miss counters, so the threshold ledger never accumulates rounding.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "carfeast/error.hpp"
#include "carfeast/events.hpp"
#include "carfeast/random.hpp"

namespace carfeast {

struct FeastParams {
  int neurons = 32;
  double delta_i = 0.001;
  double delta_e = 0.003;
  double eta = 0.001;
  int epochs = 10;
  // Optional variants; both off by default.
  bool clamp_thresholds = false;     // keep thresholds >= 0
  bool renormalize_weights = false;  // rescale the winner to unit norm after an update

  void validate() const {
    if (neurons < 2) throw ConfigError("feast.neurons", "must be >= 2");
    if (neurons > 256) throw ConfigError("feast.neurons", "must be <= 256 (8-bit neuron ids)");
    if (!(delta_i > 0.0)) throw ConfigError("feast.delta_i", "must be > 0");
    if (!(delta_e > 0.0)) throw ConfigError("feast.delta_e", "must be > 0");
    if (!(eta > 0.0 && eta < 1.0)) throw ConfigError("feast.eta", "must lie in (0, 1)");
    if (epochs < 1) throw ConfigError("feast.epochs", "must be >= 1");
  }
};

struct FeastNeuron {
  std::vector<double> w;
  double vth_base = 0.0;
  std::uint64_t wins = 0;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double l2_norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

// Cosine similarity. Zero-norm inputs give 0.
inline double similarity(std::span<const double> ec, std::span<const double> w) {
  if (ec.size() != w.size()) throw InputError("similarity: length mismatch");
  const double n = l2_norm(ec) * l2_norm(w);
  if (n == 0.0) return 0.0;
  return dot(ec, w) / n;
}

// Copy of `ec` scaled to unit L2 norm; empty when the norm is zero.
inline std::vector<double> normalized(std::span<const double> ec) {
  const double n = l2_norm(ec);
  if (n == 0.0) return {};
  std::vector<double> out(ec.begin(), ec.end());
  for (double& v : out) v /= n;
  return out;
}

// Flat row-major store of unit-norm contexts.
class ContextSet {
 public:
  explicit ContextSet(std::size_t dims) : dims_(dims) {}

  // Normalizes and stores `ec`; zero contexts are dropped. Returns whether stored.
  bool add(std::span<const double> ec) {
    if (ec.size() != dims_) throw InputError("ContextSet: context length mismatch");
    const double n = l2_norm(ec);
    if (n == 0.0) return false;
    for (double v : ec) data_.push_back(v / n);
    return true;
  }

  std::size_t dims() const { return dims_; }
  std::size_t size() const { return dims_ == 0 ? 0 : data_.size() / dims_; }
  bool empty() const { return data_.empty(); }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(data_).subspan(i * dims_, dims_);
  }
  void reserve(std::size_t n) { data_.reserve(n * dims_); }

 private:
  std::size_t dims_;
  std::vector<double> data_;
};

struct EpochStats {
  std::vector<std::uint64_t> wins;  // per neuron
  std::uint64_t misses = 0;
};

struct TrainStats {
  std::vector<EpochStats> epochs;

  std::vector<std::uint64_t> total_wins() const {
    std::vector<std::uint64_t> out;
    for (const auto& e : epochs) {
      out.resize(e.wins.size(), 0);
      for (std::size_t i = 0; i < e.wins.size(); ++i) out[i] += e.wins[i];
    }
    return out;
  }
  std::uint64_t total_misses() const {
    std::uint64_t m = 0;
    for (const auto& e : epochs) m += e.misses;
    return m;
  }
};

class FeastModel {
 public:
  FeastModel() = default;

  FeastModel(std::size_t scale, std::size_t samples, FeastParams params, std::uint64_t seed,
             std::vector<FeastNeuron> neurons, std::uint64_t misses = 0, bool trained = false)
      : scale_(scale),
        samples_(samples),
        params_(params),
        seed_(seed),
        neurons_(std::move(neurons)),
        misses_(misses),
        trained_(trained) {
    if (neurons_.empty()) throw InputError("FeastModel: needs at least one neuron");
    for (const auto& n : neurons_) {
      if (n.w.size() != dims()) throw InputError("FeastModel: weight length must be scale * samples");
      for (double v : n.w)
        if (!std::isfinite(v) || v < 0.0) throw InputError("FeastModel: weights must be finite and >= 0");
      if (!(l2_norm(n.w) > 0.0)) throw InputError("FeastModel: weights must be non-zero");
    }
    refresh_norms();
  }

  // Random weights U(0,1) normalized to unit length, thresholds U(0, 0.5).
  static FeastModel initialize(std::size_t scale, std::size_t samples, const FeastParams& params,
                               std::uint64_t seed) {
    params.validate();
    if (scale == 0 || scale % 2 == 0) throw ConfigError("feast.scales", "scales must be odd");
    if (samples < 2) throw ConfigError("events.samples", "must be >= 2");
    Rng rng(seed);
    std::vector<FeastNeuron> neurons(static_cast<std::size_t>(params.neurons));
    for (auto& n : neurons) {
      n.w.resize(scale * samples);
      for (double& v : n.w) v = rng.uniform_open();
      const double norm = l2_norm(n.w);
      for (double& v : n.w) v /= norm;
      n.vth_base = 0.5 * rng.uniform_open();
    }
    return FeastModel(scale, samples, params, seed, std::move(neurons));
  }

  std::size_t scale() const { return scale_; }
  std::size_t samples() const { return samples_; }
  std::size_t dims() const { return scale_ * samples_; }
  std::size_t size() const { return neurons_.size(); }
  const FeastParams& params() const { return params_; }
  std::uint64_t seed() const { return seed_; }
  bool trained() const { return trained_; }
  void mark_trained() { trained_ = true; }
  std::uint64_t misses() const { return misses_; }
  const FeastNeuron& neuron(std::size_t i) const { return neurons_.at(i); }
  const std::vector<FeastNeuron>& neurons() const { return neurons_; }

  double threshold(std::size_t i) const {
    const auto& n = neurons_[i];
    return (n.vth_base + params_.delta_i * static_cast<double>(n.wins)) -
           params_.delta_e * static_cast<double>(misses_);
  }

  // Cosine similarity of a unit-norm context with neuron i.
  double unit_similarity(std::span<const double> unit_ec, std::size_t i) const {
    return dot(unit_ec, neurons_[i].w) * inv_norm_[i];
  }

  // One learning update with a context that already has unit norm.
  std::optional<std::size_t> learn_unit(std::span<const double> unit_ec) {
    if (unit_ec.size() != dims()) throw InputError("learn_step: context length mismatch");
    std::optional<std::size_t> winner;
    double best = 0.0;
    for (std::size_t i = 0; i < neurons_.size(); ++i) {
      const double s = unit_similarity(unit_ec, i);
      if (s > threshold(i) && (!winner || s > best)) {
        winner = i;
        best = s;
      }
    }
    if (!winner) {
      ++misses_;
      if (params_.clamp_thresholds) {
        for (std::size_t i = 0; i < neurons_.size(); ++i) {
          const double t = threshold(i);
          if (t < 0.0) neurons_[i].vth_base -= t;
        }
      }
      return std::nullopt;
    }
    auto& n = neurons_[*winner];
    ++n.wins;
    const double eta = params_.eta;
    for (std::size_t d = 0; d < n.w.size(); ++d) {
      const double old = n.w[d];
      const double e = unit_ec[d];
      // Convex combination, clamped so rounding never leaves [min, max] of the pair.
      n.w[d] = std::clamp((1.0 - eta) * old + eta * e, std::min(old, e), std::max(old, e));
    }
    if (params_.renormalize_weights) {
      const double norm = l2_norm(n.w);
      for (double& v : n.w) v /= norm;
    }
    inv_norm_[*winner] = 1.0 / l2_norm(n.w);
    return winner;
  }

  // Winner by plain argmax of similarity (ties to the lowest index).
  std::size_t infer_unit(std::span<const double> unit_ec) const {
    if (unit_ec.size() != dims()) throw InputError("infer: context length mismatch");
    std::size_t best_i = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < neurons_.size(); ++i) {
      const double s = unit_similarity(unit_ec, i);
      if (s > best) {
        best = s;
        best_i = i;
      }
    }
    return best_i;
  }

 private:
  void refresh_norms() {
    inv_norm_.resize(neurons_.size());
    for (std::size_t i = 0; i < neurons_.size(); ++i) inv_norm_[i] = 1.0 / l2_norm(neurons_[i].w);
  }

  std::size_t scale_ = 1;
  std::size_t samples_ = 0;
  FeastParams params_;
  std::uint64_t seed_ = 0;
  std::vector<FeastNeuron> neurons_;
  std::uint64_t misses_ = 0;
  bool trained_ = false;
  std::vector<double> inv_norm_;
};

// Zero contexts are skipped (no winner, no threshold change).
inline std::optional<std::size_t> learn_step(FeastModel& model, std::span<const double> ec) {
  const auto unit = normalized(ec);
  if (unit.empty()) return std::nullopt;
  return model.learn_unit(unit);
}

inline std::size_t infer(const FeastModel& model, std::span<const double> ec) {
  const double n = l2_norm(ec);
  if (n == 0.0) return 0;
  std::vector<double> unit(ec.begin(), ec.end());
  for (double& v : unit) v /= n;
  return model.infer_unit(unit);
}

// `epochs` passes over the contexts in a freshly shuffled order each pass.
// The shuffle stream is seeded from the model seed.
inline TrainStats train(FeastModel& model, const ContextSet& contexts) {
  if (contexts.empty()) throw InputError("feast train: empty context set");
  if (contexts.dims() != model.dims()) throw InputError("feast train: context length mismatch");
  Rng rng(derive_seed(model.seed(), "feast-shuffle", model.scale()));
  std::vector<std::size_t> order(contexts.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  TrainStats stats;
  for (int epoch = 0; epoch < model.params().epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    EpochStats es;
    es.wins.assign(model.size(), 0);
    for (std::size_t idx : order) {
      if (auto w = model.learn_unit(contexts.row(idx))) {
        ++es.wins[*w];
      } else {
        ++es.misses;
      }
    }
    stats.epochs.push_back(std::move(es));
  }
  model.mark_trained();
  return stats;
}

struct FeatureMapEvent {
  std::uint64_t t = 0;
  std::uint16_t ch = 0;
  std::uint8_t neuron = 0;
  std::uint16_t scale = 0;

  friend bool operator==(const FeatureMapEvent&, const FeatureMapEvent&) = default;
};

struct ContextOptions {
  std::size_t k = 4;
  double tau = 16.0;  // samples
};

// One pass over the stream. For each event with an extractable context at a
// model's scale, that model's winner emits one feature-map event.
inline std::vector<std::vector<FeatureMapEvent>> extract_feature_maps(std::span<const FeastModel> models,
                                                                      const EventStream& stream,
                                                                      const ContextOptions& opt) {
  for (const auto& m : models) {
    if (!m.trained()) throw UsageError("extract_feature_maps: model for scale " + std::to_string(m.scale()) +
                                       " is not trained");
  }
  std::vector<std::vector<FeatureMapEvent>> maps(models.size());
  if (stream.events.empty()) return maps;
  std::vector<ContextParams> params;
  std::vector<std::vector<double>> buffers;
  for (const auto& m : models) {
    ContextParams p{m.scale(), opt.k, m.samples(), opt.tau};
    p.validate();
    params.push_back(p);
    buffers.emplace_back(p.scale * p.samples);
  }
  for_each_with_history(stream, opt.k + 1, [&](const AudEvent& e, const SpikeHistory& h) {
    for (std::size_t s = 0; s < models.size(); ++s) {
      auto& buf = buffers[s];
      if (!extract_context_into(h, static_cast<Timestamp>(e.t), e.ch, params[s], buf)) continue;
      const double n = l2_norm(buf);
      if (n == 0.0) continue;
      for (double& v : buf) v /= n;
      const auto winner = models[s].infer_unit(buf);
      maps[s].push_back(FeatureMapEvent{e.t, e.ch, static_cast<std::uint8_t>(winner),
                                        static_cast<std::uint16_t>(models[s].scale())});
    }
  });
  return maps;
}

}  // namespace carfeast
