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

#include <fstream>
#include <string>

#include "carfeast/config.hpp"
#include "support.hpp"

namespace carfeast {
namespace {

// The key path carried by the ConfigError raised for `text`.
std::string error_key(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "<accepted>";
}

TEST(Config, EmptyMeansDefaults) {
  for (const std::string text : {"", "  \n", "{}"}) {
    const auto c = parse_config_text(text);
    EXPECT_FALSE(c.fs_explicit);
    EXPECT_EQ(c.cochlea.n_channels, 64);
    EXPECT_TRUE(c.cochlea.fac_enabled);
    EXPECT_EQ(c.events.k, 4u);
    EXPECT_EQ(c.events.samples, 32u);
    EXPECT_EQ(c.feast.params.neurons, 32);
    EXPECT_EQ(c.feast.params.delta_i, 0.001);
    EXPECT_EQ(c.feast.params.delta_e, 0.003);
    EXPECT_EQ(c.feast.params.eta, 0.001);
    EXPECT_EQ(c.feast.params.epochs, 10);
    EXPECT_EQ(c.feast.scales, (std::vector<std::size_t>{5, 13, 25, 37}));
    EXPECT_EQ(c.features.bins, 4u);
    EXPECT_EQ(c.classes.size(), 10u);
  }
}

TEST(Config, ScalesParse) {
  const auto c = parse_config_text(R"({"feast": {"scales": [5, 13, 25, 37]}})");
  ASSERT_EQ(c.feast.scales.size(), 4u);
  EXPECT_EQ(c.feast.scales.back(), 37u);
  EXPECT_EQ(parse_config_text(R"({"feast": {"scales": [1]}})").feast.scales, (std::vector<std::size_t>{1}));
}

TEST(Config, ConstraintViolations) {
  EXPECT_EQ(error_key(R"({"feast": {"delta_i": -1}})"), "feast.delta_i");
  EXPECT_EQ(error_key(R"({"feast": {"eta": 1.5}})"), "feast.eta");
  EXPECT_EQ(error_key(R"({"feast": {"scales": [5, 6]}})"), "feast.scales");
  EXPECT_EQ(error_key(R"({"feast": {"scales": [5, 5]}})"), "feast.scales");
  EXPECT_EQ(error_key(R"({"feast": {"neurons": 1}})"), "feast.neurons");
  EXPECT_EQ(error_key(R"({"events": {"samples": 1}})"), "events.samples");
  EXPECT_EQ(error_key(R"({"features": {"bins": 0}})"), "features.bins");
  EXPECT_EQ(error_key(R"({"classes": ["a"]})"), "classes");
  EXPECT_EQ(error_key(R"({"classes": ["a", "a"]})"), "classes");
  EXPECT_EQ(error_key(R"({"lif": {"tau_lif": 0}})"), "lif.tau_lif");
  EXPECT_EQ(error_key(R"({"cochlea": {"fs": 8000, "cf_min": 5000}})").rfind("cochlea", 0), 0u);
}

TEST(Config, UnknownKeysAndTypeErrorsNameThePath) {
  EXPECT_EQ(error_key(R"({"feast": {"nuerons": 32}})"), "feast.nuerons");
  EXPECT_EQ(error_key(R"({"bogus": 1})"), "bogus");
  EXPECT_EQ(error_key(R"({"cochlea": {"agc": {"gain": 1}}})"), "cochlea.agc.gain");
  EXPECT_EQ(error_key(R"({"feast": {"neurons": "many"}})"), "feast.neurons");
  EXPECT_EQ(error_key(R"({"feast": {"neurons": 3.5}})"), "feast.neurons");
  EXPECT_EQ(error_key(R"({"feast": {"scales": [5, "x"]}})"), "feast.scales[1]");
  EXPECT_EQ(error_key(R"({"events": {"k": -2}})"), "events.k");
  EXPECT_EQ(error_key(R"({"cochlea": {"fac_enabled": 1}})"), "cochlea.fac_enabled");
  EXPECT_EQ(error_key(R"({"lif": {"thresholds": [0.1, "x"]}})"), "lif.thresholds[1]");
  EXPECT_EQ(error_key(R"({"lif": {"thresholds": [{"id": 3, "val": 0.1}]}})"), "lif.thresholds[0].val");
  EXPECT_EQ(error_key(R"({"feast": 3})"), "feast");
  EXPECT_EQ(error_key(R"([1, 2])"), "<root>");
}

TEST(Config, MalformedJsonIsConfigError) {
  EXPECT_THROW(parse_config_text("{\"feast\": "), ConfigError);
}

TEST(Config, ThresholdForms) {
  const auto c = parse_config_text(R"({"lif": {"thresholds": [0.0002, {"id": 9, "value": 0.0008}]}})");
  ASSERT_EQ(c.lif.thresholds.size(), 2u);
  EXPECT_EQ(c.lif.thresholds[0].id, 0);
  EXPECT_EQ(c.lif.thresholds[0].value, 0.0002);
  EXPECT_EQ(c.lif.thresholds[1].id, 9);
  EXPECT_EQ(c.lif.thresholds[1].value, 0.0008);
}

TEST(Config, ExplicitSampleRateMustMatchAudio) {
  auto c = parse_config_text(R"({"cochlea": {"fs": 16000}})");
  EXPECT_TRUE(c.fs_explicit);
  EXPECT_NO_THROW(c.bind_fs(16000, "a.wav"));
  EXPECT_THROW(c.bind_fs(8000, "b.wav"), InputError);
  auto open = parse_config_text("{}");
  open.bind_fs(8000, "a.wav");
  EXPECT_EQ(open.cochlea.fs, 8000);
  EXPECT_THROW(open.bind_fs(16000, "b.wav"), InputError);
}

TEST(Config, SnapshotRoundTrips) {
  auto c = parse_config_text(R"({"cochlea": {"fs": 8000, "fac_enabled": false}, "feast": {"scales": [1, 7]},
                                 "lif": {"thresholds": [{"id": 4, "value": 0.001}]}, "classes": ["x", "y"]})");
  const Json j = to_json(c);
  const auto back = parse_config(j);
  EXPECT_EQ(to_json(back), j);
  EXPECT_EQ(back.cochlea.fs, 8000);
  EXPECT_FALSE(back.cochlea.fac_enabled);
  EXPECT_EQ(back.feast.scales, (std::vector<std::size_t>{1, 7}));
  EXPECT_EQ(back.lif.thresholds[0].id, 4);
  EXPECT_EQ(back.classes, (std::vector<std::string>{"x", "y"}));
}

TEST(Config, LoadNamesTheFile) {
  testing::TempDir dir("cfg");
  std::ofstream(dir / "c.json") << R"({"feast": {"delta_i": -1}})";
  try {
    load_config(dir / "c.json");
    FAIL() << "accepted";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "feast.delta_i");
    EXPECT_NE(std::string(e.what()).find("c.json"), std::string::npos) << e.what();
  }
  EXPECT_THROW(load_config(dir / "missing.json"), InputError);
}

TEST(ExitCodes, Mapping) {
  EXPECT_EQ(exit_code(UsageError("u")), 1);
  EXPECT_EQ(exit_code(InputError("i")), 2);
  EXPECT_EQ(exit_code(FormatError("f")), 2);
  EXPECT_EQ(exit_code(ConfigError("k", "c")), 3);
  EXPECT_EQ(exit_code(std::runtime_error("x")), 2);
}

}  // namespace
}  // namespace carfeast
