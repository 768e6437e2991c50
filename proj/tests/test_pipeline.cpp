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

#include <gtest/gtest.h>

#include <atomic>
#include <stdexcept>
#include <vector>

#include "carfeast/pipeline.hpp"
#include "carfeast/random.hpp"
#include "carfeast/stages.hpp"
#include "carfeast/synth.hpp"
#include "support.hpp"

namespace carfeast {
namespace {

EventStream random_stream(std::uint64_t seed, std::size_t n, std::uint32_t channels, std::uint64_t span) {
  Rng rng(seed);
  EventStream s;
  s.fs = 8000;
  s.n_channels = channels;
  for (std::size_t i = 0; i < n; ++i)
    s.events.push_back(AudEvent{rng.below(span), static_cast<std::uint16_t>(rng.below(channels)), 0});
  std::sort(s.events.begin(), s.events.end());
  return s;
}

std::vector<double> flat(const ContextSet& set) {
  std::vector<double> out;
  for (std::size_t i = 0; i < set.size(); ++i) out.insert(out.end(), set.row(i).begin(), set.row(i).end());
  return out;
}

PipelineConfig small_config() {
  auto cfg = parse_config_text(R"({"cochlea": {"fs": 8000}, "feast": {"scales": [1, 3], "neurons": 4, "epochs": 2}})");
  return cfg;
}

TEST(ParallelFor, VisitsEveryIndexOnce) {
  for (std::size_t threads : {1u, 2u, 4u, 16u}) {
    std::vector<std::atomic<int>> hits(100);
    parallel_for(hits.size(), threads, [&](std::size_t i) { ++hits[i]; });
    for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
  }
  parallel_for(0, 4, [](std::size_t) { FAIL(); });
}

TEST(ParallelFor, RethrowsLowestFailingIndex) {
  for (std::size_t threads : {1u, 3u, 8u}) {
    try {
      parallel_for(50, threads, [](std::size_t i) {
        if (i == 17 || i == 40) throw std::runtime_error(std::to_string(i));
      });
      FAIL() << "no exception";
    } catch (const std::runtime_error& e) {
      EXPECT_STREQ(e.what(), "17");
    }
  }
}

TEST(UtteranceId, FlattensPathAndDropsExtension) {
  EXPECT_EQ(utterance_id("spk1/3_a.wav"), "spk1_3_a");
  EXPECT_EQ(utterance_id("a.wav"), "a");
  EXPECT_EQ(utterance_id("x/y/z.v1.wav"), "x_y_z.v1");
}

TEST(Contexts, CountMatchesPerEventExtraction) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto s = random_stream(seed, 400, 6, 2000);
    for (std::size_t k : {1u, 2u, 4u}) {
      const ContextParams p{1, k, 8, 16.0};
      const auto set = collect_contexts({&s}, p, 0, 0);
      EXPECT_EQ(set.size(), count_extractable(s, k)) << seed << " " << k;
    }
  }
}

TEST(Contexts, SubsetHasRequestedSizeAndIsSeeded) {
  const auto a = random_stream(7, 600, 4, 3000);
  const auto b = random_stream(8, 600, 4, 3000);
  const ContextParams p{3, 2, 8, 16.0};
  const auto all = collect_contexts({&a, &b}, p, 0, 0);
  ASSERT_GT(all.size(), 300u);
  const auto x = collect_contexts({&a, &b}, p, 300, 11);
  const auto y = collect_contexts({&a, &b}, p, 300, 11);
  const auto z = collect_contexts({&a, &b}, p, 300, 12);
  EXPECT_EQ(x.size(), 300u);
  EXPECT_EQ(flat(x), flat(y));
  EXPECT_NE(flat(x), flat(z));
  EXPECT_EQ(flat(collect_contexts({&a, &b}, p, all.size() + 5, 11)), flat(all));
}

TEST(Coarsen, EqualsDirectBinning) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::uint64_t duration = 500 + rng.below(20000);
    std::vector<BinEvent> ev;
    for (int i = 0; i < 300; ++i) ev.push_back({rng.below(duration + 1), rng.below(5), rng.below(3)});
    const auto fine = time_bin(ev, duration, 3, 5, 8, 13);
    for (std::size_t b : {4u, 2u, 1u}) EXPECT_EQ(coarsen(fine, b).counts, time_bin(ev, duration, 3, 5, b, 13).counts);
  }
  const auto t = time_bin(std::span<const BinEvent>{}, 10, 1, 1, 8);
  EXPECT_THROW(coarsen(t, 3), InputError);
  EXPECT_THROW(coarsen(t, 0), InputError);
}

TEST(MapStream, SortedWithNeuronIds) {
  const std::vector<FeatureMapEvent> map{{9, 1, 3, 5}, {2, 0, 1, 5}, {9, 0, 2, 5}};
  const auto s = map_stream(map, 8000, 2, "4");
  ASSERT_EQ(s.events.size(), 3u);
  EXPECT_TRUE(s.is_sorted());
  EXPECT_EQ(s.events[0], (AudEvent{2, 0, 1}));
  EXPECT_EQ(s.events[1], (AudEvent{9, 0, 2}));
  EXPECT_EQ(s.label, "4");
  const auto t = bin_map(s, 5, 4, 10, 2);
  EXPECT_EQ(t.at(1, 0, 0), 1.0);
  EXPECT_EQ(t.at(3, 1, 1), 1.0);
}

TEST(TrainScales, DeterministicAcrossThreadCounts) {
  const auto cfg = small_config();
  std::vector<EventStream> streams;
  for (std::uint64_t s = 0; s < 4; ++s) streams.push_back(random_stream(20 + s, 500, 8, 4000));
  std::vector<const EventStream*> ptrs;
  for (const auto& s : streams) ptrs.push_back(&s);
  const auto a = train_scales(ptrs, cfg.feast.scales, cfg, 5, 1);
  const auto b = train_scales(ptrs, cfg.feast.scales, cfg, 5, 4);
  const auto c = train_scales(ptrs, cfg.feast.scales, cfg, 6, 1);
  ASSERT_EQ(a.size(), 2u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].model.scale(), cfg.feast.scales[i]);
    EXPECT_EQ(a[i].contexts, b[i].contexts);
    for (std::size_t n = 0; n < a[i].model.size(); ++n) {
      EXPECT_EQ(a[i].model.neuron(n).w, b[i].model.neuron(n).w);
      EXPECT_EQ(a[i].model.neuron(n).wins, b[i].model.neuron(n).wins);
    }
  }
  EXPECT_NE(a[0].model.neuron(0).w, c[0].model.neuron(0).w);
}

TEST(RunClassifier, ReportsTrainAndTest) {
  FeatureTable t;
  t.columns = {"a", "b"};
  Rng rng(4);
  for (int i = 0; i < 40; ++i) {
    const int y = i % 2;
    const double cx = y ? 2.0 : -2.0;
    t.rows.push_back({"u" + std::to_string(i), std::to_string(y), i < 30 ? "train" : "test", "s",
                      {cx + rng.uniform() - 0.5, rng.uniform() - 0.5}});
  }
  auto cfg = parse_config_text(R"({"classes": ["0", "1"]})");
  const auto r = run_classifier(t, cfg, 1);
  EXPECT_EQ(r.train_accuracy, 1.0);
  EXPECT_EQ(r.test.accuracy, 1.0);
  EXPECT_EQ(r.test.total, 10u);
  EXPECT_EQ(r.model.class_names, cfg.classes);
  const auto again = run_classifier(t, cfg, 1);
  EXPECT_EQ(again.model.weights, r.model.weights);
  EXPECT_EQ(mode_name(cfg), "CAR-FAC");
  cfg.cochlea.fac_enabled = false;
  EXPECT_EQ(mode_name(cfg), "linear CAR");
}

TEST(Index, RoundTripsRelativePaths) {
  testing::TempDir dir("index");
  Index idx;
  idx.maps = true;
  idx.rows.push_back(IndexRow{"a_1", dir / "s5" / "a_1.aevt", "3", "train", "spk, 1", 800, 5, 32});
  write_index(dir / "maps.csv", idx);
  const auto back = read_index(dir / "maps.csv");
  ASSERT_TRUE(back.maps);
  ASSERT_EQ(back.rows.size(), 1u);
  EXPECT_EQ(back.rows[0].path.lexically_normal(), (dir / "s5" / "a_1.aevt").lexically_normal());
  EXPECT_EQ(back.rows[0].speaker, "spk, 1");
  EXPECT_EQ(back.rows[0].scale, 5u);
  EXPECT_EQ(back.rows[0].neurons, 32u);
  EXPECT_THROW(read_events_index(dir / "maps.csv"), UsageError);
  write_text_atomic(dir / "bad.csv", "utterance,path\nx,y\n");
  EXPECT_THROW(read_index(dir / "bad.csv"), FormatError);
}

TEST(Stages, SmallCorpusEndToEnd) {
  testing::TempDir dir("stages");
  synth::CorpusSpec spec;
  spec.speakers = 3;
  spec.test_speakers = 1;
  spec.repetitions = 1;
  spec.digits = {0, 1};
  const auto manifest = synth::write_corpus(dir / "corpus", spec);
  auto cfg = parse_config_text(
      R"({"feast": {"scales": [1, 3], "neurons": 4, "epochs": 1}, "classes": ["0", "1"], "features": {"bins": 2}})");
  const auto rep = stage_pipeline(cfg, manifest, dir / "run", 9, 2);
  EXPECT_EQ(rep.at("mode"), "CAR-FAC");
  const auto table = read_feature_csv(dir / "run" / "features" / "features.csv");
  EXPECT_EQ(table.rows.size(), 6u);
  EXPECT_EQ(table.columns.size(), 2u * 4u * 64u * 2u);
  const auto base = read_feature_csv(dir / "run" / "baseline" / "features.csv");
  EXPECT_EQ(base.columns.front(), "raw_n0_c0_b0");
  // Sample-rate mismatch with an explicit config is a data error.
  auto wrong = parse_config_text(R"({"cochlea": {"fs": 16000}, "classes": ["0", "1"]})");
  EXPECT_THROW(stage_encode(wrong, manifest, dir / "wrong", 1), InputError);
}

}  // namespace
}  // namespace carfeast
