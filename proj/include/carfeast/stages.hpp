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

// File-level stages behind the command-line subcommands. Each stage reads its
// inputs from disk and writes its outputs under one directory:
//
//   encode            events/<id>.aevt, events.csv, config.json, encode.json
//   feast-train       s<scale>.cfmd per scale, feast_train.json
//   feast-apply       s<scale>/<id>.aevt, maps.csv
//   featurize         features.csv
//   train-classifier  classifier.cfmd, train_report.json
//   evaluate          evaluation.json
//
// `pipeline` runs them in that order into sibling subdirectories, so its
// outputs are the outputs of the individual stages. Reports hold no timings.

#pragma once

#include <charconv>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "carfeast/config.hpp"
#include "carfeast/dataset.hpp"
#include "carfeast/io.hpp"
#include "carfeast/model_io.hpp"
#include "carfeast/pipeline.hpp"

namespace carfeast {

namespace fs = std::filesystem;

inline std::string relative_to(const fs::path& p, const fs::path& base) {
  return fs::relative(p, base).generic_string();
}

inline void write_json(const fs::path& path, const Json& j) { write_text_atomic(path, j.dump(2) + "\n"); }

inline Json read_json(const fs::path& path) {
  const auto bytes = read_file(path);
  try {
    return Json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": not valid JSON (" + e.what() + ")");
  }
}

// ---------------------------------------------------------------------------
// Index files: events.csv and maps.csv

struct IndexRow {
  std::string utterance;
  fs::path path;  // resolved
  std::string label;
  std::string split;
  std::string speaker;
  std::uint64_t n_samples = 0;
  std::size_t scale = 0;    // maps.csv only
  std::size_t neurons = 0;  // maps.csv only
};

struct Index {
  bool maps = false;
  std::vector<IndexRow> rows;
};

inline const std::vector<std::string>& events_columns() {
  static const std::vector<std::string> c{"utterance", "path", "label", "split", "speaker", "n_samples"};
  return c;
}
inline const std::vector<std::string>& maps_columns() {
  static const std::vector<std::string> c{"utterance", "path",      "label", "split",
                                          "speaker",   "n_samples", "scale", "neurons"};
  return c;
}

inline void write_index(const fs::path& path, const Index& idx) {
  const auto& cols = idx.maps ? maps_columns() : events_columns();
  std::string s;
  for (std::size_t i = 0; i < cols.size(); ++i) s += (i ? "," : "") + cols[i];
  s += '\n';
  const auto base = path.parent_path();
  for (const auto& r : idx.rows) {
    s += csv_field(r.utterance) + "," + csv_field(relative_to(r.path, base)) + "," + csv_field(r.label) + "," +
         csv_field(r.split) + "," + csv_field(r.speaker) + "," + std::to_string(r.n_samples);
    if (idx.maps) s += "," + std::to_string(r.scale) + "," + std::to_string(r.neurons);
    s += '\n';
  }
  write_text_atomic(path, s);
}

inline std::uint64_t parse_count(const std::string& cell, const std::string& where, const std::string& column) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
    throw FormatError(where + ": column '" + column + "' is not a non-negative integer: '" + cell + "'");
  return v;
}

// Reads events.csv or maps.csv, telling them apart by the header.
inline Index read_index(const fs::path& path) {
  const auto lines = read_lines(path);
  const std::string src = path.string();
  if (lines.empty()) throw InputError(src + ": empty index file");
  const auto header = split_csv_line(lines[0], src + ":1");
  Index idx;
  if (header == maps_columns()) {
    idx.maps = true;
  } else if (header != events_columns()) {
    throw FormatError(src + ":1: not an events.csv or maps.csv header");
  }
  const auto base = path.parent_path();
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    const std::string where = src + ":" + std::to_string(ln + 1);
    const auto f = split_csv_line(lines[ln], where);
    if (f.size() != header.size())
      throw FormatError(where + ": expected " + std::to_string(header.size()) + " fields, got " +
                        std::to_string(f.size()));
    IndexRow r{f[0], base / f[1], f[2], f[3], f[4], parse_count(f[5], where, "n_samples")};
    if (r.n_samples == 0) throw FormatError(where + ": n_samples must be > 0");
    if (idx.maps) {
      r.scale = parse_count(f[6], where, "scale");
      r.neurons = parse_count(f[7], where, "neurons");
    }
    idx.rows.push_back(std::move(r));
  }
  if (idx.rows.empty()) throw InputError(src + ": index has no rows");
  return idx;
}

inline Index read_events_index(const fs::path& path) {
  auto idx = read_index(path);
  if (idx.maps) throw UsageError(path.string() + ": expected events.csv from 'encode', got a maps index");
  return idx;
}

// Loads the streams of `rows` and binds fs to their sample rate.
inline std::vector<EventStream> load_streams(const std::vector<const IndexRow*>& rows, PipelineConfig& cfg,
                                             std::size_t threads) {
  std::vector<EventStream> out(rows.size());
  parallel_for(rows.size(), threads, [&](std::size_t i) { out[i] = read_events(rows[i]->path); });
  for (std::size_t i = 0; i < out.size(); ++i) {
    cfg.bind_fs(static_cast<int>(out[i].fs), rows[i]->path.string());
    for (const auto& e : out[i].events)
      if (e.t >= rows[i]->n_samples)
        throw InputError(rows[i]->path.string() + ": event at t=" + std::to_string(e.t) + " beyond n_samples " +
                         std::to_string(rows[i]->n_samples));
  }
  return out;
}

inline std::vector<const IndexRow*> select_rows(const Index& idx, std::string_view split) {
  std::vector<const IndexRow*> out;
  for (const auto& r : idx.rows)
    if (split.empty() || r.split == split) out.push_back(&r);
  return out;
}

inline std::string model_file_name(std::size_t scale) { return "s" + std::to_string(scale) + ".cfmd"; }

// ---------------------------------------------------------------------------
// Stages

// WAV manifest -> one event file per utterance. Binds cfg.cochlea.fs.
inline Index stage_encode(PipelineConfig& cfg, const fs::path& manifest_path, const fs::path& out,
                          std::size_t threads) {
  const auto manifest = load_manifest(manifest_path, cfg.classes, false);
  const auto utts = encode_manifest(manifest, cfg, threads);
  Index idx;
  idx.rows.resize(utts.size());
  parallel_for(utts.size(), threads, [&](std::size_t i) {
    const auto& u = utts[i];
    const fs::path p = out / "events" / (u.id + ".aevt");
    write_events(p, u.events);
    idx.rows[i] = IndexRow{u.id, p, u.label, u.split, u.speaker, u.n_samples};
  });
  write_index(out / "events.csv", idx);
  write_json(out / "config.json", to_json(cfg));
  std::size_t total = 0;
  for (const auto& u : utts) total += u.events.events.size();
  Json rep;
  rep["mode"] = mode_name(cfg);
  rep["fs"] = cfg.cochlea.fs;
  rep["n_channels"] = utts.empty() ? 0 : utts.front().events.n_channels;
  rep["utterances"] = utts.size();
  rep["events"] = total;
  write_json(out / "encode.json", rep);
  return idx;
}

// Trains one model per configured scale on the train split.
inline std::vector<ScaleTraining> stage_feast_train(PipelineConfig& cfg, const fs::path& events_csv,
                                                    const fs::path& out, std::uint64_t seed, std::size_t threads) {
  const auto idx = read_events_index(events_csv);
  const auto rows = select_rows(idx, "train");
  if (rows.empty()) throw InputError(events_csv.string() + ": no train rows");
  const auto streams = load_streams(rows, cfg, threads);
  std::vector<const EventStream*> ptrs;
  for (const auto& s : streams) ptrs.push_back(&s);
  auto trained = train_scales(ptrs, cfg.feast.scales, cfg, seed, threads);
  Json rep;
  rep["seed"] = seed;
  rep["utterances"] = rows.size();
  rep["scales"] = Json::array();
  const Json snapshot = to_json(cfg);
  for (const auto& t : trained) {
    save_model(out / model_file_name(t.model.scale()), t.model, snapshot);
    Json s;
    s["scale"] = t.model.scale();
    s["contexts"] = t.contexts;
    s["misses_total"] = t.stats.total_misses();
    s["wins_last_epoch"] = t.stats.epochs.back().wins;  // per neuron
    s["misses_last_epoch"] = t.stats.epochs.back().misses;
    rep["scales"].push_back(s);
  }
  write_json(out / "feast_train.json", rep);
  return trained;
}

inline std::vector<FeastModel> load_scale_models(const PipelineConfig& cfg, const fs::path& models_dir) {
  std::vector<FeastModel> models;
  for (std::size_t scale : cfg.feast.scales) {
    auto m = load_feast_model(models_dir / model_file_name(scale)).model;
    if (m.samples() != cfg.events.samples)
      throw ConfigError("events.samples", "model for scale " + std::to_string(scale) + " was trained with " +
                                              std::to_string(m.samples()) + " samples per row");
    if (m.scale() != scale)
      throw FormatError((models_dir / model_file_name(scale)).string() + ": holds scale " + std::to_string(m.scale()));
    models.push_back(std::move(m));
  }
  return models;
}

// Feature-map event files for every utterance and scale.
inline Index stage_feast_apply(PipelineConfig& cfg, const fs::path& events_csv, const fs::path& models_dir,
                               const fs::path& out, std::size_t threads) {
  const auto idx = read_events_index(events_csv);
  const auto rows = select_rows(idx, "");
  const auto models = load_scale_models(cfg, models_dir);
  // Bind fs from the first stream before the parallel pass needs tau.
  cfg.bind_fs(static_cast<int>(read_events(rows.front()->path).fs), rows.front()->path.string());
  const auto opt = context_options(cfg);
  const std::size_t n_scales = models.size();
  Index maps;
  maps.maps = true;
  maps.rows.resize(rows.size() * n_scales);
  parallel_for(rows.size(), threads, [&](std::size_t i) {
    const auto& r = *rows[i];
    const auto stream = read_events(r.path);
    if (static_cast<int>(stream.fs) != cfg.cochlea.fs)
      throw InputError(r.path.string() + ": sample rate differs from the other event files");
    const auto fm = extract_feature_maps(models, stream, opt);
    for (std::size_t s = 0; s < n_scales; ++s) {
      const std::size_t scale = models[s].scale();
      const fs::path p = out / ("s" + std::to_string(scale)) / (r.utterance + ".aevt");
      write_events(p, map_stream(fm[s], stream.fs, stream.n_channels, r.label));
      maps.rows[i * n_scales + s] = IndexRow{r.utterance, p, r.label, r.split, r.speaker, r.n_samples, scale,
                                             models[s].size()};
    }
  });
  write_index(out / "maps.csv", maps);
  return maps;
}

// Feature vectors from maps.csv, or from events.csv when `baseline` is set.
inline FeatureTable stage_featurize(PipelineConfig& cfg, const fs::path& index_csv, const fs::path& out,
                                    bool baseline, std::size_t threads) {
  const auto idx = read_index(index_csv);
  if (baseline && idx.maps) throw UsageError("featurize --baseline expects events.csv from 'encode'");
  if (!baseline && !idx.maps) throw UsageError("featurize expects maps.csv from 'feast-apply' (or use --baseline)");
  // Group rows by utterance, keeping first-appearance order.
  std::vector<std::vector<const IndexRow*>> groups;
  std::map<std::string, std::size_t> where;
  for (const auto& r : idx.rows) {
    auto [it, fresh] = where.emplace(r.utterance, groups.size());
    if (fresh) groups.emplace_back();
    groups[it->second].push_back(&r);
  }
  FeatureTable table;
  table.rows.resize(groups.size());
  std::vector<FeatureLayout> layouts(groups.size());
  const auto bins = cfg.features.bins;
  parallel_for(groups.size(), threads, [&](std::size_t g) {
    std::vector<CountTensor> tensors;
    const auto& first = *groups[g].front();
    for (const auto* r : groups[g]) {
      if (r->label != first.label || r->split != first.split || r->n_samples != first.n_samples)
        throw FormatError(index_csv.string() + ": rows of utterance '" + r->utterance + "' disagree");
      const auto s = read_events(r->path);
      tensors.push_back(baseline ? bin_raw(s, cfg, r->n_samples, bins)
                                 : bin_map(s, r->scale, r->neurons, r->n_samples, bins));
    }
    auto fv = assemble(std::move(tensors), cfg.features.normalize, first.label);
    layouts[g] = fv.layout;
    table.rows[g] = FeatureRow{first.utterance, first.label, first.split, first.speaker, std::move(fv.values)};
  });
  for (const auto& l : layouts)
    if (!(l == layouts.front())) throw FormatError(index_csv.string() + ": utterances have different feature layouts");
  table.columns = layouts.front().column_names();
  write_feature_csv(out / "features.csv", table);
  return table;
}

inline Json fit_json(const FitReport& f) {
  Json j;
  j["lambdas"] = f.lambdas;
  j["validation_accuracy"] = f.validation_accuracy;
  j["selected_lambda"] = f.selected_lambda;
  return j;
}

inline ClassifierRun stage_train_classifier(const PipelineConfig& cfg, const fs::path& features_csv,
                                            const fs::path& out, std::uint64_t seed) {
  const auto table = read_feature_csv(features_csv);
  auto run = run_classifier(table, cfg, seed);
  save_model(out / "classifier.cfmd", run.model, to_json(cfg));
  Json rep;
  rep["mode"] = mode_name(cfg);
  rep["seed"] = seed;
  rep["dims"] = table.columns.size();
  rep["fit"] = fit_json(run.fit);
  rep["train_accuracy"] = run.train_accuracy;
  write_json(out / "train_report.json", rep);
  return run;
}

// Accuracy and confusion matrix of a saved classifier on one split.
inline Evaluation stage_evaluate(const fs::path& features_csv, const fs::path& model_path, const fs::path& out,
                                 const std::string& split) {
  const auto loaded = load_linear_model(model_path);
  const auto& m = loaded.model;
  const auto table = read_feature_csv(features_csv);
  const auto data = table.labeled(m.class_names, split);
  if (data.size() == 0) throw InputError(features_csv.string() + ": no rows in split '" + split + "'");
  const auto ev = evaluate(m, data);
  Json rep;
  rep["split"] = split;
  rep["selected_lambda"] = m.lambda;
  rep["evaluation"] = evaluation_json(ev, m.class_names);
  write_json(out / "evaluation.json", rep);
  return ev;
}

// All stages in order; the FEAST and the raw-spike baseline branches share
// the encoded events. Each stage gets its own copy of `loaded`, as it would
// when run as a separate command.
inline Json stage_pipeline(const PipelineConfig& loaded, const fs::path& manifest, const fs::path& out,
                           std::uint64_t seed, std::size_t threads) {
  auto fresh = [&] { return loaded; };
  PipelineConfig cfg = fresh();
  stage_encode(cfg, manifest, out / "encode", threads);
  {
    auto c = fresh();
    stage_feast_train(c, out / "encode" / "events.csv", out / "feast", seed, threads);
  }
  {
    auto c = fresh();
    stage_feast_apply(c, out / "encode" / "events.csv", out / "feast", out / "maps", threads);
  }
  {
    auto c = fresh();
    stage_featurize(c, out / "maps" / "maps.csv", out / "features", false, threads);
  }
  {
    auto c = fresh();
    stage_featurize(c, out / "encode" / "events.csv", out / "baseline", true, threads);
  }
  stage_train_classifier(fresh(), out / "features" / "features.csv", out / "classifier", seed);
  stage_train_classifier(fresh(), out / "baseline" / "features.csv", out / "classifier_baseline", seed);
  const auto feast = stage_evaluate(out / "features" / "features.csv", out / "classifier" / "classifier.cfmd",
                                    out / "classifier", "test");
  const auto base = stage_evaluate(out / "baseline" / "features.csv", out / "classifier_baseline" / "classifier.cfmd",
                                   out / "classifier_baseline", "test");
  Json rep;
  rep["mode"] = mode_name(cfg);
  rep["seed"] = seed;
  rep["fs"] = cfg.cochlea.fs;
  rep["scales"] = cfg.feast.scales;
  rep["neurons"] = cfg.feast.params.neurons;
  rep["bins"] = cfg.features.bins;
  rep["feast_test_accuracy"] = feast.accuracy;
  rep["baseline_test_accuracy"] = base.accuracy;
  rep["config"] = to_json(cfg);
  write_json(out / "report.json", rep);
  return rep;
}

}  // namespace carfeast
