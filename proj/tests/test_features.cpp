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

#include <cmath>
#include <vector>

#include "carfeast/features.hpp"
#include "carfeast/random.hpp"

namespace carfeast {
namespace {

TEST(TimeBin, NoEventsGivesZeros) {
  const auto t = time_bin(std::span<const BinEvent>{}, 8000, 2, 4, 4);
  EXPECT_EQ(t.counts, std::vector<double>(32, 0.0));
}

TEST(TimeBin, BoundaryExample) {
  const std::vector<BinEvent> ev{{100, 3, 0}, {2100, 3, 0}};
  const auto t = time_bin(ev, 8000, 1, 4, 4);
  EXPECT_EQ(t.at(0, 3, 0), 1.0);
  EXPECT_EQ(t.at(0, 3, 1), 1.0);
  EXPECT_EQ(t.total(), 2.0);
}

TEST(TimeBin, EdgesAndClosedFinalBin) {
  EXPECT_EQ(bin_index(0, 8000, 4), 0u);
  EXPECT_EQ(bin_index(1999, 8000, 4), 0u);
  EXPECT_EQ(bin_index(2000, 8000, 4), 1u);
  EXPECT_EQ(bin_index(7999, 8000, 4), 3u);
  EXPECT_EQ(bin_index(8000, 8000, 4), 3u);
  // Non-divisible duration: bin b covers [b * 10 / 3, (b + 1) * 10 / 3).
  EXPECT_EQ(bin_index(3, 10, 3), 0u);
  EXPECT_EQ(bin_index(4, 10, 3), 1u);
  EXPECT_EQ(bin_index(6, 10, 3), 1u);
  EXPECT_EQ(bin_index(7, 10, 3), 2u);
  EXPECT_THROW(bin_index(8001, 8000, 4), InputError);
}

TEST(TimeBin, PartitionProperty) {
  Rng rng(8);
  for (std::size_t bins : {1u, 2u, 3u, 4u, 7u, 8u}) {
    const std::uint64_t duration = 1000 + rng.below(9000);
    std::vector<BinEvent> ev;
    for (int i = 0; i < 500; ++i) ev.push_back({rng.below(duration + 1), rng.below(6), rng.below(3)});
    const auto t = time_bin(ev, duration, 3, 6, bins);
    EXPECT_EQ(t.total(), 500.0);
    for (double v : t.counts) EXPECT_GE(v, 0.0);
  }
}

TEST(TimeBin, ShiftWithinBinKeepsCounts) {
  // Every event sits at its bin start; shifting by less than the bin width
  // keeps it in place.
  const std::uint64_t duration = 8000;
  std::vector<BinEvent> ev, shifted;
  for (std::size_t b = 0; b < 4; ++b) {
    ev.push_back({b * 2000, b, 0});
    shifted.push_back({b * 2000 + 1999, b, 0});
  }
  EXPECT_EQ(time_bin(ev, duration, 1, 4, 4).counts, time_bin(shifted, duration, 1, 4, 4).counts);
}

TEST(TimeBin, Errors) {
  const std::vector<BinEvent> late{{9000, 0, 0}};
  EXPECT_THROW(time_bin(late, 8000, 1, 1, 4), InputError);
  const std::vector<BinEvent> ok{{10, 0, 0}};
  EXPECT_THROW(time_bin(ok, 0, 1, 1, 4), InputError);
  EXPECT_THROW(time_bin(ok, 100, 1, 1, 0), InputError);
  const std::vector<BinEvent> wide{{10, 5, 0}};
  EXPECT_THROW(time_bin(wide, 100, 1, 2, 4), InputError);
}

TEST(TimeBin, RawSpikesUseLevelRows) {
  const std::vector<AudEvent> ev{{10, 1, 7}, {60, 1, 2}, {90, 0, 7}};
  const std::vector<std::uint8_t> levels{2, 7};
  const auto t = time_bin_raw(ev, 100, 2, 2, levels);
  EXPECT_EQ(t.neurons, 2u);
  EXPECT_EQ(t.at(1, 1, 0), 1.0);
  EXPECT_EQ(t.at(0, 1, 1), 1.0);
  EXPECT_EQ(t.at(1, 0, 1), 1.0);
  const std::vector<std::uint8_t> missing{2};
  EXPECT_THROW(time_bin_raw(ev, 100, 2, 2, missing), InputError);
}

TEST(TimeBin, FeatureMapEventsBinByNeuron) {
  const std::vector<FeatureMapEvent> ev{{5, 2, 1, 13}, {95, 0, 0, 13}};
  const auto t = time_bin(ev, 100, 2, 3, 2, 13);
  EXPECT_EQ(t.scale, 13u);
  EXPECT_EQ(t.at(1, 2, 0), 1.0);
  EXPECT_EQ(t.at(0, 0, 1), 1.0);
}

CountTensor filled(std::size_t scale, std::size_t neurons, std::size_t channels, std::size_t bins, double base) {
  CountTensor t{scale, neurons, channels, bins, std::vector<double>(neurons * channels * bins)};
  for (std::size_t i = 0; i < t.counts.size(); ++i) t.counts[i] = base + static_cast<double>(i);
  return t;
}

TEST(Assemble, SingleScaleIsFlattening) {
  const auto t = filled(5, 2, 3, 4, 0.0);
  const auto fv = assemble({t}, false, "7");
  EXPECT_EQ(fv.values, t.counts);
  EXPECT_EQ(fv.label, "7");
  EXPECT_EQ(fv.layout.size(), 24u);
}

TEST(Assemble, FullConfigurationLength) {
  std::vector<CountTensor> ts;
  for (std::size_t s : {37u, 5u, 25u, 13u}) ts.push_back(filled(s, 32, 64, 4, 0.0));
  const auto fv = assemble(ts, true);
  EXPECT_EQ(fv.values.size(), 32768u);
  EXPECT_EQ(fv.layout.size(), 32768u);
  ASSERT_EQ(fv.layout.blocks.size(), 4u);
  EXPECT_EQ(fv.layout.blocks[0].scale, 5u);
  EXPECT_EQ(fv.layout.blocks[3].scale, 37u);
}

TEST(Assemble, AscendingScaleOrder) {
  const auto a = filled(13, 1, 1, 2, 100.0);
  const auto b = filled(5, 1, 1, 2, 0.0);
  const auto fv = assemble({a, b}, false);
  EXPECT_EQ(fv.values, (std::vector<double>{0.0, 1.0, 100.0, 101.0}));
  const auto names = fv.layout.column_names();
  EXPECT_EQ(names.front(), "s5_n0_c0_b0");
  EXPECT_EQ(names.back(), "s13_n0_c0_b1");
  EXPECT_EQ(assemble({filled(0, 1, 1, 1, 0.0)}, false).layout.column_names().front(), "raw_n0_c0_b0");
}

TEST(Assemble, NormalizationAndRawCounts) {
  const auto t = filled(1, 1, 1, 2, 3.0);  // [3, 4]
  EXPECT_EQ(assemble({t}, false).values, (std::vector<double>{3.0, 4.0}));
  const auto n = assemble({t}, true).values;
  EXPECT_DOUBLE_EQ(n[0], 0.6);
  EXPECT_DOUBLE_EQ(n[1], 0.8);
  const auto z = assemble({filled(1, 1, 1, 2, 0.0)}, true);  // [0, 1]
  EXPECT_EQ(z.values, (std::vector<double>{0.0, 1.0}));
  CountTensor empty{1, 1, 1, 2, {0.0, 0.0}};
  EXPECT_EQ(assemble({empty}, true).values, (std::vector<double>{0.0, 0.0}));
}

TEST(Assemble, MetadataMismatchIsAnError) {
  EXPECT_THROW(assemble({filled(1, 1, 2, 2, 0.0), filled(3, 1, 3, 2, 0.0)}, false), InputError);
  EXPECT_THROW(assemble({filled(1, 1, 2, 2, 0.0), filled(3, 1, 2, 4, 0.0)}, false), InputError);
  EXPECT_THROW(assemble({filled(1, 1, 2, 2, 0.0), filled(1, 1, 2, 2, 0.0)}, false), InputError);
  EXPECT_THROW(assemble({}, false), InputError);
}

}  // namespace
}  // namespace carfeast
