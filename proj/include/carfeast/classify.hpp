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

// One-vs-rest linear max-margin classifier.
//
// Each class is an L2-regularized hinge-loss model trained by stochastic
// subgradient descent with step 1 / (lambda * t + R^2), R^2 being the mean
// squared norm of the standardized inputs. The weight vector is kept as
// scale * v so that the shrinkage step is O(1). Lambda is chosen on a held-out
// part of the training data, then the model is refit on all of it.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "carfeast/error.hpp"
#include "carfeast/random.hpp"

namespace carfeast {

// Dense row-major examples with integer class ids in [0, n_classes).
struct LabeledSet {
  std::size_t dims = 0;
  std::vector<float> x;
  std::vector<int> y;

  std::size_t size() const { return y.size(); }
  std::span<const float> row(std::size_t i) const { return std::span<const float>(x).subspan(i * dims, dims); }

  void add(std::span<const double> values, int label) {
    if (y.empty() && dims == 0) dims = values.size();
    if (values.size() != dims) throw InputError("LabeledSet: feature length mismatch");
    for (double v : values) x.push_back(static_cast<float>(v));
    y.push_back(label);
  }
  void add(std::span<const float> values, int label) {
    if (y.empty() && dims == 0) dims = values.size();
    if (values.size() != dims) throw InputError("LabeledSet: feature length mismatch");
    x.insert(x.end(), values.begin(), values.end());
    y.push_back(label);
  }
  LabeledSet subset(std::span<const std::size_t> idx) const {
    LabeledSet s;
    s.dims = dims;
    s.x.reserve(idx.size() * dims);
    for (std::size_t i : idx) {
      const auto r = row(i);
      s.x.insert(s.x.end(), r.begin(), r.end());
      s.y.push_back(y[i]);
    }
    return s;
  }
};

struct TrainSpec {
  std::vector<double> lambdas{1e-5, 1e-4, 1e-3, 1e-2, 1e-1};
  int epochs = 15;
  std::uint64_t seed = 0;
  double validation_fraction = 0.2;
  bool standardize = true;
  bool track_objective = false;

  void validate() const {
    if (lambdas.empty()) throw ConfigError("classifier.lambdas", "needs at least one value");
    for (double l : lambdas)
      if (!(l > 0.0)) throw ConfigError("classifier.lambdas", "all values must be > 0");
    if (epochs < 1) throw ConfigError("classifier.epochs", "must be >= 1");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
      throw ConfigError("classifier.validation_fraction", "must lie in (0, 1)");
  }
};

struct LinearModel {
  std::size_t n_classes = 0;
  std::size_t dims = 0;
  std::vector<double> weights;  // [class][dim], on standardized inputs
  std::vector<double> bias;
  std::vector<double> mean;     // standardization; empty when disabled
  std::vector<double> inv_std;
  std::vector<std::string> class_names;
  double lambda = 0.0;
  TrainSpec spec;

  std::span<const double> class_weights(std::size_t c) const {
    return std::span<const double>(weights).subspan(c * dims, dims);
  }

  // Raw scores for each class.
  template <typename T>
  std::vector<double> scores(std::span<const T> x) const {
    if (x.size() != dims) throw InputError("predict: expected " + std::to_string(dims) + " features, got " +
                                           std::to_string(x.size()));
    std::vector<double> z(dims);
    for (std::size_t d = 0; d < dims; ++d) {
      const double v = static_cast<double>(x[d]);
      z[d] = mean.empty() ? v : (v - mean[d]) * inv_std[d];
    }
    std::vector<double> s(n_classes);
    for (std::size_t c = 0; c < n_classes; ++c) {
      const auto w = class_weights(c);
      double acc = bias[c];
      for (std::size_t d = 0; d < dims; ++d) acc += w[d] * z[d];
      s[c] = acc;
    }
    return s;
  }
};

// Argmax, ties to the lowest class id.
inline std::size_t argmax(std::span<const double> s) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < s.size(); ++i)
    if (s[i] > s[best]) best = i;
  return best;
}

template <typename T>
std::size_t predict(const LinearModel& model, std::span<const T> x) {
  const auto s = model.scores(x);
  return argmax(s);
}

inline std::size_t predict(const LinearModel& model, const std::vector<double>& x) {
  return predict(model, std::span<const double>(x));
}

struct Evaluation {
  double accuracy = 0.0;
  std::size_t correct = 0;
  std::size_t total = 0;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
};

inline Evaluation evaluate(const LinearModel& model, const LabeledSet& data) {
  if (data.size() == 0) throw InputError("evaluate: empty set");
  Evaluation ev;
  ev.confusion.assign(model.n_classes, std::vector<std::size_t>(model.n_classes, 0));
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto truth = static_cast<std::size_t>(data.y[i]);
    if (truth >= model.n_classes) throw InputError("evaluate: label outside the model's classes");
    const std::size_t p = predict(model, data.row(i));
    ++ev.confusion[truth][p];
    if (p == truth) ++ev.correct;
  }
  ev.total = data.size();
  ev.accuracy = static_cast<double>(ev.correct) / static_cast<double>(ev.total);
  return ev;
}

struct FitReport {
  std::vector<double> lambdas;
  std::vector<double> validation_accuracy;
  double selected_lambda = 0.0;
  std::vector<double> objective;  // per epoch of the final fit, when tracked
};

namespace detail {

inline void standardize_fit(const LabeledSet& data, std::span<const std::size_t> idx, LinearModel& m) {
  const std::size_t d = data.dims;
  m.mean.assign(d, 0.0);
  std::vector<double> sq(d, 0.0);
  for (std::size_t i : idx) {
    const auto r = data.row(i);
    for (std::size_t j = 0; j < d; ++j) m.mean[j] += r[j];
  }
  for (double& v : m.mean) v /= static_cast<double>(idx.size());
  for (std::size_t i : idx) {
    const auto r = data.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      const double c = r[j] - m.mean[j];
      sq[j] += c * c;
    }
  }
  m.inv_std.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    const double sd = std::sqrt(sq[j] / static_cast<double>(idx.size()));
    m.inv_std[j] = sd > 1e-12 ? 1.0 / sd : 1.0;
  }
}

inline double hinge_objective(const LinearModel& m, const LabeledSet& data, std::span<const std::size_t> idx,
                              double lambda) {
  double reg = 0.0;
  for (double w : m.weights) reg += w * w;
  double loss = 0.0;
  for (std::size_t i : idx) {
    const auto s = m.scores(data.row(i));
    for (std::size_t c = 0; c < m.n_classes; ++c) {
      const double y = data.y[i] == static_cast<int>(c) ? 1.0 : -1.0;
      loss += std::max(0.0, 1.0 - y * s[c]);
    }
  }
  return 0.5 * lambda * reg + loss / static_cast<double>(idx.size());
}

inline double accuracy_on(const LinearModel& m, const LabeledSet& data, std::span<const std::size_t> idx) {
  std::size_t ok = 0;
  for (std::size_t i : idx)
    if (predict(m, data.row(i)) == static_cast<std::size_t>(data.y[i])) ++ok;
  return static_cast<double>(ok) / static_cast<double>(idx.size());
}

inline LinearModel fit_one(const LabeledSet& data, std::span<const std::size_t> idx, std::size_t n_classes,
                           double lambda, const TrainSpec& spec, std::uint64_t seed, std::vector<double>* objective) {
  const std::size_t n = idx.size(), d = data.dims;
  LinearModel m;
  m.n_classes = n_classes;
  m.dims = d;
  m.lambda = lambda;
  m.spec = spec;
  if (spec.standardize) standardize_fit(data, idx, m);
  const bool std_on = !m.mean.empty();

  std::vector<double> z(d);  // standardized current example
  auto load = [&](std::size_t i) {
    const auto r = data.row(i);
    double ss = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      z[j] = std_on ? (r[j] - m.mean[j]) * m.inv_std[j] : r[j];
      ss += z[j] * z[j];
    }
    return ss;
  };
  double r2 = 0.0;
  for (std::size_t i : idx) r2 += load(i);
  r2 = r2 / static_cast<double>(n) + 1.0;  // + 1 for the bias input

  std::vector<double> v(n_classes * d, 0.0);
  std::vector<double> scale(n_classes, 1.0);
  std::vector<double> b(n_classes, 0.0);
  Rng rng(seed);
  std::vector<std::size_t> order(idx.begin(), idx.end());
  std::uint64_t t = 0;

  auto export_weights = [&]() {
    m.weights.resize(n_classes * d);
    for (std::size_t c = 0; c < n_classes; ++c)
      for (std::size_t j = 0; j < d; ++j) m.weights[c * d + j] = scale[c] * v[c * d + j];
    m.bias = b;
  };

  for (int epoch = 0; epoch < spec.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t i : order) {
      const double eta = 1.0 / (lambda * static_cast<double>(t) + r2);
      ++t;
      load(i);
      const double y_true = static_cast<double>(data.y[i]);
      for (std::size_t c = 0; c < n_classes; ++c) {
        double* vc = &v[c * d];
        double acc = 0.0;
        for (std::size_t j = 0; j < d; ++j) acc += vc[j] * z[j];
        const double score = scale[c] * acc + b[c];
        const double y = y_true == static_cast<double>(c) ? 1.0 : -1.0;
        scale[c] *= (1.0 - eta * lambda);
        if (y * score < 1.0) {
          const double step = eta * y / scale[c];
          for (std::size_t j = 0; j < d; ++j) vc[j] += step * z[j];
          b[c] += eta * y;
        }
        if (scale[c] < 1e-9) {
          for (std::size_t j = 0; j < d; ++j) vc[j] *= scale[c];
          scale[c] = 1.0;
        }
      }
    }
    if (objective) {
      export_weights();
      objective->push_back(hinge_objective(m, data, idx, lambda));
    }
  }
  export_weights();
  return m;
}

// Content hash of an example; identical examples land on the same side of
// the validation split.
inline std::uint64_t example_key(const LabeledSet& data, std::size_t i, std::uint64_t seed) {
  std::uint64_t h = splitmix64(seed ^ static_cast<std::uint64_t>(data.y[i]));
  for (float f : data.row(i)) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, sizeof bits);
    h = splitmix64(h ^ bits);
  }
  return h;
}

}  // namespace detail

// Grid search over spec.lambdas on a validation split, then a refit on all
// of `data`. Labels must be class ids in [0, n_classes).
inline LinearModel train_classifier(const LabeledSet& data, std::size_t n_classes, const TrainSpec& spec,
                                    FitReport* report = nullptr) {
  spec.validate();
  if (data.size() == 0) throw InputError("train: empty training set");
  std::vector<std::size_t> per_class(n_classes, 0);
  for (int y : data.y) {
    if (y < 0 || static_cast<std::size_t>(y) >= n_classes) throw InputError("train: label outside class range");
    ++per_class[static_cast<std::size_t>(y)];
  }
  const auto present = std::count_if(per_class.begin(), per_class.end(), [](std::size_t c) { return c > 0; });
  if (present < 2) throw InputError("train: need examples from at least 2 classes");

  const std::uint64_t split_seed = derive_seed(spec.seed, "classifier-split");
  std::vector<std::size_t> fit_idx, val_idx;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double u = static_cast<double>(detail::example_key(data, i, split_seed) >> 11) * 0x1.0p-53;
    (u < spec.validation_fraction ? val_idx : fit_idx).push_back(i);
  }

  FitReport local;
  FitReport& rep = report ? *report : local;
  rep = FitReport{};
  rep.lambdas = spec.lambdas;
  std::vector<double> lambdas = spec.lambdas;
  std::sort(lambdas.begin(), lambdas.end());
  rep.lambdas = lambdas;

  double selected = lambdas.front();
  if (lambdas.size() > 1 && !val_idx.empty() && !fit_idx.empty()) {
    double best = -1.0;
    for (double lambda : lambdas) {
      const auto m =
          detail::fit_one(data, fit_idx, n_classes, lambda, spec, derive_seed(spec.seed, "classifier-sgd"), nullptr);
      const double acc = detail::accuracy_on(m, data, val_idx);
      rep.validation_accuracy.push_back(acc);
      if (acc > best) {  // ascending lambdas: ties keep the smaller one
        best = acc;
        selected = lambda;
      }
    }
  }
  rep.selected_lambda = selected;
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  auto model = detail::fit_one(data, all, n_classes, selected, spec, derive_seed(spec.seed, "classifier-sgd"),
                               spec.track_objective ? &rep.objective : nullptr);
  return model;
}

}  // namespace carfeast
