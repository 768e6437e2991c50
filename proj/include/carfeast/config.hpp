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

// Pipeline configuration as a JSON document. Absent keys take defaults,
// unknown keys and wrong types are rejected with their dotted key path.
// See README.md for the full key list.

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "carfeast/classify.hpp"
#include "carfeast/cochlea.hpp"
#include "carfeast/error.hpp"
#include "carfeast/events.hpp"
#include "carfeast/feast.hpp"
#include "carfeast/io.hpp"
#include "carfeast/spikegen.hpp"

namespace carfeast {

using Json = nlohmann::ordered_json;

struct EventsConfig {
  std::size_t k = 4;
  std::size_t samples = 32;
  double tau_ms = 1.0;  // time-surface constant; 1 ms gives tau = fs * 1e-3 samples

  double tau_samples(int fs) const { return tau_ms * 1e-3 * fs; }
};

struct FeastConfig {
  FeastParams params;
  std::vector<std::size_t> scales{5, 13, 25, 37};
  // Contexts drawn per scale for training; 0 keeps all.
  std::size_t max_train_contexts = 20000;
};

struct FeaturesConfig {
  std::size_t bins = 4;
  bool normalize = true;
};

struct PipelineConfig {
  CochleaConfig cochlea;
  bool fs_explicit = false;  // false: taken from the audio files
  LifConfig lif;
  EventsConfig events;
  FeastConfig feast;
  FeaturesConfig features;
  TrainSpec classifier;
  std::vector<std::string> classes{"0", "1", "2", "3", "4", "5", "6", "7", "8", "9"};

  // Constraint checks that need no audio. cochlea.validate() runs once fs is known.
  void validate() const {
    lif.validate();
    feast.params.validate();
    if (feast.scales.empty()) throw ConfigError("feast.scales", "needs at least one scale");
    for (std::size_t i = 0; i < feast.scales.size(); ++i) {
      const auto s = feast.scales[i];
      if (s == 0 || s % 2 == 0) throw ConfigError("feast.scales", "scales must be odd and >= 1");
      for (std::size_t j = 0; j < i; ++j)
        if (feast.scales[j] == s) throw ConfigError("feast.scales", "duplicate scale " + std::to_string(s));
    }
    if (events.k < 1) throw ConfigError("events.k", "must be >= 1");
    if (events.samples < 2) throw ConfigError("events.samples", "must be >= 2");
    if (!(events.tau_ms > 0.0)) throw ConfigError("events.tau_ms", "must be > 0");
    if (features.bins < 1) throw ConfigError("features.bins", "must be >= 1");
    classifier.validate();
    if (classes.size() < 2) throw ConfigError("classes", "needs at least two classes");
    std::set<std::string> seen(classes.begin(), classes.end());
    if (seen.size() != classes.size()) throw ConfigError("classes", "duplicate class name");
    if (fs_explicit) cochlea.validate();
  }

  // Fixes fs from the audio when the config left it open, then validates.
  void bind_fs(int file_fs, const std::string& source) {
    if (fs_explicit) {
      if (file_fs != cochlea.fs)
        throw InputError(source + ": sample rate " + std::to_string(file_fs) + " Hz does not match cochlea.fs = " +
                         std::to_string(cochlea.fs) + " (audio is never resampled)");
    } else {
      cochlea.fs = file_fs;
      fs_explicit = true;
    }
    cochlea.validate();
  }

  std::vector<std::uint8_t> level_ids() const {
    std::vector<std::uint8_t> ids;
    for (std::size_t l = 0; l < lif.thresholds.size(); ++l)
      for (int n = 0; n < lif.neurons_per_threshold; ++n) ids.push_back(lif.event_id(l, static_cast<std::size_t>(n)));
    return ids;
  }
};

namespace detail {

// Walks one JSON object, consuming known keys and rejecting the rest.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

  const Json* find(const std::string& k) {
    seen_.insert(k);
    auto it = j_.find(k);
    return it == j_.end() ? nullptr : &*it;
  }

  void number(const std::string& k, double& out) {
    if (const Json* v = find(k)) {
      if (!v->is_number()) throw ConfigError(key(k), "expected a number");
      out = v->get<double>();
    }
  }
  template <typename Int>
  void integer(const std::string& k, Int& out) {
    if (const Json* v = find(k)) {
      if (!v->is_number_integer()) throw ConfigError(key(k), "expected an integer");
      if (v->is_number_unsigned()) {
        const auto u = v->get<std::uint64_t>();
        if (u > static_cast<std::uint64_t>(std::numeric_limits<Int>::max()))
          throw ConfigError(key(k), "value out of range");
        out = static_cast<Int>(u);
      } else {
        const auto s = v->get<std::int64_t>();
        if constexpr (std::is_unsigned_v<Int>) {
          if (s < 0) throw ConfigError(key(k), "must be >= 0");
        } else {
          if (s < std::numeric_limits<Int>::min() || s > std::numeric_limits<Int>::max())
            throw ConfigError(key(k), "value out of range");
        }
        out = static_cast<Int>(s);
      }
    }
  }
  void boolean(const std::string& k, bool& out) {
    if (const Json* v = find(k)) {
      if (!v->is_boolean()) throw ConfigError(key(k), "expected true or false");
      out = v->get<bool>();
    }
  }
  void numbers(const std::string& k, std::vector<double>& out) {
    if (const Json* v = find(k)) {
      if (!v->is_array()) throw ConfigError(key(k), "expected an array of numbers");
      std::vector<double> r;
      for (std::size_t i = 0; i < v->size(); ++i) {
        if (!(*v)[i].is_number()) throw ConfigError(key(k) + "[" + std::to_string(i) + "]", "expected a number");
        r.push_back((*v)[i].get<double>());
      }
      out = std::move(r);
    }
  }
  template <typename Int>
  void integers(const std::string& k, std::vector<Int>& out) {
    if (const Json* v = find(k)) {
      if (!v->is_array()) throw ConfigError(key(k), "expected an array of integers");
      std::vector<Int> r;
      for (std::size_t i = 0; i < v->size(); ++i) {
        const auto& e = (*v)[i];
        const std::string ek = key(k) + "[" + std::to_string(i) + "]";
        if (!e.is_number_integer()) throw ConfigError(ek, "expected an integer");
        if (std::is_unsigned_v<Int> && e.is_number_integer() && !e.is_number_unsigned() && e.get<std::int64_t>() < 0)
          throw ConfigError(ek, "must be >= 0");
        r.push_back(e.get<Int>());
      }
      out = std::move(r);
    }
  }
  void strings(const std::string& k, std::vector<std::string>& out) {
    if (const Json* v = find(k)) {
      if (!v->is_array()) throw ConfigError(key(k), "expected an array of strings");
      std::vector<std::string> r;
      for (std::size_t i = 0; i < v->size(); ++i) {
        if (!(*v)[i].is_string()) throw ConfigError(key(k) + "[" + std::to_string(i) + "]", "expected a string");
        r.push_back((*v)[i].get<std::string>());
      }
      out = std::move(r);
    }
  }
  void object(const std::string& k, const std::function<void(ObjectReader&)>& fn) {
    if (const Json* v = find(k)) {
      ObjectReader sub(*v, key(k));
      fn(sub);
      sub.finish();
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(key(it.key()), "unknown key");
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace detail

inline PipelineConfig parse_config(const Json& root) {
  PipelineConfig c;
  detail::ObjectReader r(root, "");
  r.object("cochlea", [&](detail::ObjectReader& o) {
    if (o.find("fs")) {
      o.integer("fs", c.cochlea.fs);
      c.fs_explicit = true;
    }
    o.integer("n_channels", c.cochlea.n_channels);
    o.number("cf_min", c.cochlea.cf_min);
    o.number("cf_max", c.cochlea.cf_max);
    o.boolean("fac_enabled", c.cochlea.fac_enabled);
    o.integer("n_ears", c.cochlea.n_ears);
    o.object("car", [&](detail::ObjectReader& p) {
      p.number("zeta_min", c.cochlea.car.zeta_min);
      p.number("zeta_max", c.cochlea.car.zeta_max);
      p.number("zero_ratio", c.cochlea.car.zero_ratio);
    });
    o.object("ohc", [&](detail::ObjectReader& p) {
      p.number("velocity_scale", c.cochlea.ohc.velocity_scale);
      p.number("v_offset", c.cochlea.ohc.v_offset);
    });
    o.object("ihc", [&](detail::ObjectReader& p) {
      p.number("offset", c.cochlea.ihc.offset);
      p.number("lp1_hz", c.cochlea.ihc.lp1_hz);
      p.number("lp2_hz", c.cochlea.ihc.lp2_hz);
    });
    o.object("agc", [&](detail::ObjectReader& p) {
      p.numbers("time_constants", c.cochlea.agc.time_constants);
      p.number("stage_gain", c.cochlea.agc.stage_gain);
      p.integers("decimation", c.cochlea.agc.decimation);
      p.numbers("spatial_kernel", c.cochlea.agc.spatial_kernel);
    });
  });
  r.object("lif", [&](detail::ObjectReader& o) {
    o.number("tau_lif", c.lif.tau_lif);
    o.number("v_reset", c.lif.v_reset);
    o.number("li_alpha", c.lif.li_alpha);
    o.integer("neurons_per_threshold", c.lif.neurons_per_threshold);
    o.number("input_gain", c.lif.input_gain);
    if (const Json* v = o.find("thresholds")) {
      const std::string k = o.key("thresholds");
      if (!v->is_array()) throw ConfigError(k, "expected an array");
      std::vector<LifThreshold> levels;
      for (std::size_t i = 0; i < v->size(); ++i) {
        const std::string ek = k + "[" + std::to_string(i) + "]";
        const auto& e = (*v)[i];
        LifThreshold t;
        t.id = static_cast<std::uint8_t>(i);
        if (e.is_number()) {
          t.value = e.get<double>();
        } else if (e.is_object()) {
          detail::ObjectReader p(e, ek);
          int id = static_cast<int>(i);
          p.integer("id", id);
          if (id < 0 || id > 255) throw ConfigError(ek + ".id", "must lie in [0, 255]");
          t.id = static_cast<std::uint8_t>(id);
          p.number("value", t.value);
          p.finish();
        } else {
          throw ConfigError(ek, "expected a number or {id, value}");
        }
        levels.push_back(t);
      }
      c.lif.thresholds = std::move(levels);
    }
  });
  r.object("events", [&](detail::ObjectReader& o) {
    o.integer("k", c.events.k);
    o.integer("samples", c.events.samples);
    o.number("tau_ms", c.events.tau_ms);
  });
  r.object("feast", [&](detail::ObjectReader& o) {
    o.integer("neurons", c.feast.params.neurons);
    o.number("delta_i", c.feast.params.delta_i);
    o.number("delta_e", c.feast.params.delta_e);
    o.number("eta", c.feast.params.eta);
    o.integer("epochs", c.feast.params.epochs);
    o.boolean("clamp_thresholds", c.feast.params.clamp_thresholds);
    o.boolean("renormalize_weights", c.feast.params.renormalize_weights);
    o.integers("scales", c.feast.scales);
    o.integer("max_train_contexts", c.feast.max_train_contexts);
  });
  r.object("features", [&](detail::ObjectReader& o) {
    o.integer("bins", c.features.bins);
    o.boolean("normalize", c.features.normalize);
  });
  r.object("classifier", [&](detail::ObjectReader& o) {
    o.numbers("lambdas", c.classifier.lambdas);
    o.integer("epochs", c.classifier.epochs);
    o.number("validation_fraction", c.classifier.validation_fraction);
    o.boolean("standardize", c.classifier.standardize);
  });
  r.strings("classes", c.classes);
  r.finish();
  c.validate();
  return c;
}

inline PipelineConfig parse_config_text(const std::string& text, const std::string& source = "<config>") {
  Json j;
  try {
    j = text.find_first_not_of(" \t\r\n") == std::string::npos ? Json::object() : Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("", source + ": not valid JSON (" + e.what() + ")");
  }
  return parse_config(j);
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return parse_config_text(std::string(bytes.begin(), bytes.end()), path.string());
  } catch (const ConfigError& e) {
    throw e.in_source(path.string());
  }
}

inline Json to_json(const PipelineConfig& c) {
  Json j;
  auto& co = j["cochlea"];
  if (c.fs_explicit) co["fs"] = c.cochlea.fs;
  co["n_channels"] = c.cochlea.n_channels;
  co["cf_min"] = c.cochlea.cf_min;
  co["cf_max"] = c.cochlea.cf_max;
  co["fac_enabled"] = c.cochlea.fac_enabled;
  co["n_ears"] = c.cochlea.n_ears;
  co["car"] = {{"zeta_min", c.cochlea.car.zeta_min},
               {"zeta_max", c.cochlea.car.zeta_max},
               {"zero_ratio", c.cochlea.car.zero_ratio}};
  co["ohc"] = {{"velocity_scale", c.cochlea.ohc.velocity_scale}, {"v_offset", c.cochlea.ohc.v_offset}};
  co["ihc"] = {{"offset", c.cochlea.ihc.offset}, {"lp1_hz", c.cochlea.ihc.lp1_hz}, {"lp2_hz", c.cochlea.ihc.lp2_hz}};
  co["agc"] = {{"time_constants", c.cochlea.agc.time_constants},
               {"stage_gain", c.cochlea.agc.stage_gain},
               {"decimation", c.cochlea.agc.decimation},
               {"spatial_kernel", c.cochlea.agc.spatial_kernel}};
  auto& l = j["lif"];
  l["tau_lif"] = c.lif.tau_lif;
  Json levels = Json::array();
  for (const auto& t : c.lif.thresholds) levels.push_back({{"id", t.id}, {"value", t.value}});
  l["thresholds"] = levels;
  l["v_reset"] = c.lif.v_reset;
  l["li_alpha"] = c.lif.li_alpha;
  l["neurons_per_threshold"] = c.lif.neurons_per_threshold;
  l["input_gain"] = c.lif.input_gain;
  j["events"] = {{"k", c.events.k}, {"samples", c.events.samples}, {"tau_ms", c.events.tau_ms}};
  const auto& p = c.feast.params;
  j["feast"] = {{"neurons", p.neurons},
                {"delta_i", p.delta_i},
                {"delta_e", p.delta_e},
                {"eta", p.eta},
                {"epochs", p.epochs},
                {"clamp_thresholds", p.clamp_thresholds},
                {"renormalize_weights", p.renormalize_weights},
                {"scales", c.feast.scales},
                {"max_train_contexts", c.feast.max_train_contexts}};
  j["features"] = {{"bins", c.features.bins}, {"normalize", c.features.normalize}};
  j["classifier"] = {{"lambdas", c.classifier.lambdas},
                     {"epochs", c.classifier.epochs},
                     {"validation_fraction", c.classifier.validation_fraction},
                     {"standardize", c.classifier.standardize}};
  j["classes"] = c.classes;
  return j;
}

}  // namespace carfeast
