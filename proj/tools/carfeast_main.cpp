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

// carfeast: command-line driver. Exit codes: 0 success, 1 usage error,
// 2 data or format error, 3 configuration constraint violation.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "carfeast/render.hpp"
#include "carfeast/stages.hpp"
#include "carfeast/synth.hpp"

namespace {

using namespace carfeast;

struct Common {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  std::size_t threads = 0;
};

void add_common(CLI::App* app, Common& c, bool with_seed) {
  app->add_option("--config", c.config, "JSON configuration file (defaults when omitted)")->check(CLI::ExistingFile);
  app->add_option("--out", c.out, "Output directory")->required();
  if (with_seed) app->add_option("--seed", c.seed, "Master seed; stage seeds derive from it");
  app->add_option("--threads", c.threads, "Worker threads (0 = all cores)");
}

PipelineConfig load(const Common& c) { return c.config.empty() ? parse_config_text("{}") : load_config(c.config); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Throughput of the encoder and of FEAST inference over an audio manifest.
Json run_bench(PipelineConfig& cfg, const fs::path& manifest_path, const std::string& models_dir, std::uint64_t seed,
               std::size_t threads) {
  const auto manifest = load_manifest(manifest_path, cfg.classes, false);
  bind_sample_rate(cfg, manifest);
  std::size_t n_samples = 0;
  for (const auto& r : manifest.rows) n_samples += read_wav(r.path).samples.size();

  auto t0 = std::chrono::steady_clock::now();
  const auto seq = encode_manifest(manifest, cfg, 1);
  const double enc_seq = seconds_since(t0);
  t0 = std::chrono::steady_clock::now();
  const auto par = encode_manifest(manifest, cfg, threads);
  const double enc_par = seconds_since(t0);

  std::vector<FeastModel> models;
  if (!models_dir.empty()) {
    models = load_scale_models(cfg, models_dir);
  } else {
    for (std::size_t scale : cfg.feast.scales) {
      auto m = FeastModel::initialize(scale, cfg.events.samples, cfg.feast.params,
                                      derive_seed(seed, "feast-init", scale));
      m.mark_trained();  // random weights suffice for timing
      models.push_back(std::move(m));
    }
  }
  const auto opt = context_options(cfg);
  std::size_t n_events = 0;
  for (const auto& u : seq) n_events += u.events.events.size();
  auto infer_all = [&](std::size_t workers) {
    std::vector<std::vector<std::vector<FeatureMapEvent>>> maps(seq.size());
    parallel_for(seq.size(), workers, [&](std::size_t i) { maps[i] = extract_feature_maps(models, seq[i].events, opt); });
    return maps;
  };
  t0 = std::chrono::steady_clock::now();
  const auto maps_seq = infer_all(1);
  const double inf_seq = seconds_since(t0);
  t0 = std::chrono::steady_clock::now();
  const auto maps_par = infer_all(threads);
  const double inf_par = seconds_since(t0);
  std::size_t n_map_events = 0;
  for (const auto& per_utt : maps_seq)
    for (const auto& m : per_utt) n_map_events += m.size();

  bool same = seq.size() == par.size();
  for (std::size_t i = 0; same && i < seq.size(); ++i) same = seq[i].events.events == par[i].events.events;
  for (std::size_t i = 0; same && i < maps_seq.size(); ++i)
    for (std::size_t s = 0; same && s < models.size(); ++s) {
      const auto& a = maps_seq[i][s];
      const auto& b = maps_par[i][s];
      same = a.size() == b.size();
      for (std::size_t j = 0; same && j < a.size(); ++j)
        same = a[j].t == b[j].t && a[j].ch == b[j].ch && a[j].neuron == b[j].neuron;
    }

  auto rate = [](std::size_t n, double s) { return s > 0.0 ? static_cast<double>(n) / s : 0.0; };
  Json j;
  j["utterances"] = manifest.rows.size();
  j["threads"] = resolve_threads(threads);
  j["samples"] = n_samples;
  j["events"] = n_events;
  j["feature_map_events"] = n_map_events;
  j["trained_models"] = !models_dir.empty();
  j["encode"] = {{"sequential_seconds", enc_seq},
                 {"parallel_seconds", enc_par},
                 {"sequential_samples_per_second", rate(n_samples, enc_seq)},
                 {"parallel_samples_per_second", rate(n_samples, enc_par)}};
  j["feast_inference"] = {{"sequential_seconds", inf_seq},
                          {"parallel_seconds", inf_par},
                          {"sequential_events_per_second", rate(n_events, inf_seq)},
                          {"parallel_events_per_second", rate(n_events, inf_par)}};
  j["parallel_matches_sequential"] = same;
  return j;
}

void run_render(PipelineConfig& cfg, const std::string& kind, const std::string& input, const std::string& model,
                std::size_t neurons, const fs::path& out) {
  if (kind == "weights") {
    if (model.empty()) throw UsageError("render --kind weights needs --model");
    write_image(out / "weights.pgm", render_weights(load_feast_model(model).model));
    return;
  }
  if (input.empty()) throw UsageError("render --kind " + kind + " needs --input");
  if (kind == "cochleagram") {
    const auto w = read_wav(input);
    cfg.bind_fs(w.fs, input);
    write_image(out / "cochleagram.pgm", render_cochleagram(process_signal(w.samples, cfg.cochlea)));
  } else if (kind == "raster") {
    write_image(out / "raster.pgm", render_raster(read_events(input)));
  } else if (kind == "map") {
    write_image(out / "map.pgm", render_feature_map(read_events(input), neurons ? neurons : cfg.feast.params.neurons));
  } else {
    throw UsageError("render: unknown --kind '" + kind + "'");
  }
}

int run(int argc, char** argv) {
  CLI::App app{"carfeast: cochlear spike encoding, FEAST feature learning and digit classification"};
  app.require_subcommand(1);
  Common c;
  std::string manifest, models, features, model, split = "test", kind, input;
  bool baseline = false;
  std::size_t neurons = 0;

  auto* encode = app.add_subcommand("encode", "WAV manifest -> event files and events.csv");
  add_common(encode, c, false);
  encode->add_option("--manifest", manifest, "CSV with path,label,split,speaker")->required();

  auto* ftrain = app.add_subcommand("feast-train", "events.csv -> one FEAST model per scale");
  add_common(ftrain, c, true);
  ftrain->add_option("--manifest", manifest, "events.csv written by encode")->required();

  auto* fapply = app.add_subcommand("feast-apply", "events.csv + models -> feature-map event files and maps.csv");
  add_common(fapply, c, false);
  fapply->add_option("--manifest", manifest, "events.csv written by encode")->required();
  fapply->add_option("--models", models, "Directory written by feast-train")->required();

  auto* featurize = app.add_subcommand("featurize", "maps.csv (or events.csv with --baseline) -> features.csv");
  add_common(featurize, c, false);
  featurize->add_option("--manifest", manifest, "maps.csv, or events.csv with --baseline")->required();
  featurize->add_flag("--baseline", baseline, "Bin raw spikes instead of feature maps");

  auto* tclass = app.add_subcommand("train-classifier", "features.csv -> classifier.cfmd and train_report.json");
  add_common(tclass, c, true);
  tclass->add_option("--features", features, "features.csv written by featurize")->required();

  auto* eval = app.add_subcommand("evaluate", "features.csv + classifier -> evaluation.json");
  add_common(eval, c, false);
  eval->add_option("--features", features, "features.csv written by featurize")->required();
  eval->add_option("--model", model, "classifier.cfmd written by train-classifier")->required();
  eval->add_option("--split", split, "Split to evaluate")->check(CLI::IsMember({"train", "test"}));

  auto* pipe = app.add_subcommand("pipeline", "All stages, FEAST and raw-spike baseline");
  add_common(pipe, c, true);
  pipe->add_option("--manifest", manifest, "CSV with path,label,split,speaker")->required();

  auto* render = app.add_subcommand("render", "PGM images with .txt and .csv sidecars");
  add_common(render, c, false);
  render->add_option("--kind", kind, "cochleagram | raster | weights | map")
      ->required()
      ->check(CLI::IsMember({"cochleagram", "raster", "weights", "map"}));
  render->add_option("--input", input, "WAV (cochleagram) or event file (raster, map)");
  render->add_option("--model", model, "FEAST model file (weights)");
  render->add_option("--neurons", neurons, "Neuron count of a feature map (default: feast.neurons)");

  auto* bench = app.add_subcommand("bench", "Encoder and FEAST inference throughput");
  add_common(bench, c, true);
  bench->add_option("--manifest", manifest, "CSV with path,label,split,speaker")->required();
  bench->add_option("--models", models, "Directory written by feast-train (random weights when omitted)");

  synth::CorpusSpec spec;
  auto* synth_cmd = app.add_subcommand("synth", "Write the synthetic spoken-digit corpus and its manifest");
  synth_cmd->add_option("--out", c.out, "Output directory")->required();
  synth_cmd->add_option("--speakers", spec.speakers)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--test-speakers", spec.test_speakers)->check(CLI::NonNegativeNumber);
  synth_cmd->add_option("--repetitions", spec.repetitions)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--fs", spec.fs)->check(CLI::Range(4000, 96000));
  synth_cmd->add_option("--seed", spec.seed, "Corpus seed");
  synth_cmd->add_option("--snr-db", spec.snr_db, "Centre of the per-token background-noise SNR (dB)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  const fs::path out = c.out;
  if (synth_cmd->parsed()) {
    if (spec.test_speakers >= spec.speakers) throw UsageError("synth: --test-speakers must be below --speakers");
    std::cout << synth::write_corpus(out, spec).string() << "\n";
    return 0;
  }
  auto cfg = load(c);
  if (encode->parsed()) {
    stage_encode(cfg, manifest, out, c.threads);
  } else if (ftrain->parsed()) {
    stage_feast_train(cfg, manifest, out, c.seed, c.threads);
  } else if (fapply->parsed()) {
    stage_feast_apply(cfg, manifest, models, out, c.threads);
  } else if (featurize->parsed()) {
    stage_featurize(cfg, manifest, out, baseline, c.threads);
  } else if (tclass->parsed()) {
    stage_train_classifier(cfg, features, out, c.seed);
  } else if (eval->parsed()) {
    const auto ev = stage_evaluate(features, model, out, split);
    std::cout << "accuracy " << ev.accuracy << " (" << ev.correct << "/" << ev.total << ")\n";
  } else if (pipe->parsed()) {
    const auto rep = stage_pipeline(cfg, manifest, out, c.seed, c.threads);
    std::cout << rep.at("mode").get<std::string>()
              << ": feast test accuracy " << rep.at("feast_test_accuracy").get<double>() << ", baseline "
              << rep.at("baseline_test_accuracy").get<double>() << "\n";
  } else if (render->parsed()) {
    run_render(cfg, kind, input, model, neurons, out);
  } else if (bench->parsed()) {
    const auto rep = run_bench(cfg, manifest, models, c.seed, c.threads);
    write_json(out / "bench.json", rep);
    std::cout << rep.dump(2) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "carfeast: error: " << e.what() << "\n";
    return carfeast::exit_code(e);
  }
}
