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
#include <fstream>
#include <string>
#include <vector>

#include "carfeast/classify.hpp"
#include "carfeast/config.hpp"
#include "carfeast/dataset.hpp"
#include "carfeast/io.hpp"
#include "carfeast/model_io.hpp"
#include "support.hpp"

namespace carfeast {
namespace {

using testing::TempDir;

// Hand-built RIFF/WAVE file with a PCM fmt chunk.
std::vector<std::uint8_t> wav_bytes(std::uint16_t tag, std::uint16_t channels, std::uint16_t bits,
                                    const std::vector<std::int16_t>& samples, bool junk_chunk = false) {
  ByteWriter w;
  w.put_bytes("RIFF");
  w.put<std::uint32_t>(0);
  w.put_bytes("WAVE");
  if (junk_chunk) {
    w.put_bytes("LIST");
    w.put<std::uint32_t>(3);
    w.put_bytes("abc");
    w.put<std::uint8_t>(0);  // pad byte
  }
  w.put_bytes("fmt ");
  w.put<std::uint32_t>(16);
  w.put<std::uint16_t>(tag);
  w.put<std::uint16_t>(channels);
  w.put<std::uint32_t>(16000);
  w.put<std::uint32_t>(16000u * channels * bits / 8);
  w.put<std::uint16_t>(static_cast<std::uint16_t>(channels * bits / 8));
  w.put<std::uint16_t>(bits);
  w.put_bytes("data");
  w.put<std::uint32_t>(static_cast<std::uint32_t>(samples.size() * 2));
  for (auto s : samples) w.put(s);
  return w.bytes();
}

TEST(Wav, ScalesSixteenBitSamples) {
  const auto w = parse_wav(wav_bytes(1, 1, 16, {32767, -32768, 0, 16384}), "x.wav");
  EXPECT_EQ(w.fs, 16000);
  ASSERT_EQ(w.samples.size(), 4u);
  EXPECT_DOUBLE_EQ(w.samples[0], 32767.0 / 32768.0);
  EXPECT_NEAR(w.samples[0], 0.999969, 1e-6);
  EXPECT_EQ(w.samples[1], -1.0);
  EXPECT_EQ(w.samples[2], 0.0);
  EXPECT_EQ(w.samples[3], 0.5);
}

TEST(Wav, SkipsUnknownChunks) {
  const auto w = parse_wav(wav_bytes(1, 1, 16, {100}, true), "x.wav");
  ASSERT_EQ(w.samples.size(), 1u);
  EXPECT_DOUBLE_EQ(w.samples[0], 100.0 / 32768.0);
}

TEST(Wav, RejectsUnsupportedFormats) {
  auto expect_unsupported = [](const std::vector<std::uint8_t>& b) {
    try {
      parse_wav(b, "bad.wav");
      FAIL() << "accepted";
    } catch (const FormatError& e) {
      EXPECT_NE(std::string(e.what()).find("unsupported format"), std::string::npos) << e.what();
      EXPECT_NE(std::string(e.what()).find("bad.wav"), std::string::npos);
    }
  };
  expect_unsupported(wav_bytes(1, 2, 16, {1, 2}));  // stereo
  expect_unsupported(wav_bytes(1, 1, 8, {1}));      // 8-bit
  expect_unsupported(wav_bytes(3, 1, 32, {1, 2}));  // float
  expect_unsupported(wav_bytes(2, 1, 16, {1}));     // ADPCM
}

TEST(Wav, RejectsNonWaveInput) {
  const std::string text = "hello, this is not audio";
  const std::vector<std::uint8_t> b(text.begin(), text.end());
  EXPECT_THROW(parse_wav(b, "t.wav"), FormatError);
  EXPECT_THROW(parse_wav(std::vector<std::uint8_t>{}, "t.wav"), FormatError);
}

TEST(Wav, RoundTripThroughEncoder) {
  TempDir dir("wav");
  const std::vector<double> x{0.0, 0.5, -0.25, 32767.0 / 32768.0, -1.0};
  write_wav(dir / "a.wav", 8000, x);
  const auto w = read_wav(dir / "a.wav");
  EXPECT_EQ(w.fs, 8000);
  EXPECT_EQ(w.samples, x);
  EXPECT_THROW(read_wav(dir / "missing.wav"), InputError);
}

EventStream three_events() {
  EventStream s;
  s.fs = 16000;
  s.n_channels = 64;
  s.events = {{5, 3, 0}, {5, 7, 1}, {1ull << 40, 63, 2}};
  return s;
}

TEST(EventFile, RoundTrips) {
  TempDir dir("aevt");
  EventStream empty;
  empty.fs = 8000;
  empty.n_channels = 10;
  write_events(dir / "e.aevt", empty);
  EXPECT_EQ(read_events(dir / "e.aevt"), empty);
  write_events(dir / "s.aevt", three_events());
  auto back = read_events(dir / "s.aevt");
  back.label = "";
  EXPECT_EQ(back, three_events());
}

TEST(EventFile, LayoutIsFixed) {
  const auto b = encode_events(three_events());
  ASSERT_EQ(b.size(), kEventHeaderBytes + 3 * kEventRecordBytes);
  EXPECT_EQ(std::string(b.begin(), b.begin() + 4), "AEVT");
  EXPECT_EQ(b[4], 1);        // version, little-endian
  EXPECT_EQ(b[8], 0x80);     // 16000 = 0x3E80
  EXPECT_EQ(b[9], 0x3E);
  EXPECT_EQ(b[16], 3);       // count
  EXPECT_EQ(b[24], 5);       // first t
  EXPECT_EQ(b[32], 3);       // first ch
  EXPECT_EQ(b[34], 0);       // first id
  EXPECT_EQ(b[35], 0);       // reserved
  EXPECT_EQ(b[24 + 24 + 5], 1);  // third t = 2^40
}

TEST(EventFile, TruncationNamesByteOffset) {
  auto b = encode_events(three_events());
  b.resize(50);
  try {
    decode_events(b, "cut.aevt");
    FAIL() << "accepted";
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("cut.aevt"), std::string::npos) << msg;
    EXPECT_NE(msg.find("byte offset 48"), std::string::npos) << msg;
  }
}

TEST(EventFile, RejectsBadMagicVersionOrderAndTrailing) {
  auto b = encode_events(three_events());
  auto bad = b;
  bad[0] = 'X';
  EXPECT_THROW(decode_events(bad, "f"), FormatError);
  bad = b;
  bad[4] = 2;
  try {
    decode_events(bad, "f");
    FAIL() << "accepted";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("version 2"), std::string::npos) << e.what();
  }
  bad = b;
  bad[24] = 9;  // first t becomes 9 > second t = 5
  try {
    decode_events(bad, "f");
    FAIL() << "accepted";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("byte offset 36"), std::string::npos) << e.what();
  }
  bad = b;
  bad[32] = 70;  // channel beyond n_channels
  EXPECT_THROW(decode_events(bad, "f"), FormatError);
  bad = b;
  bad.push_back(0);
  EXPECT_THROW(decode_events(bad, "f"), FormatError);
  EventStream unsorted = three_events();
  std::swap(unsorted.events[0], unsorted.events[2]);
  EXPECT_THROW(encode_events(unsorted), InputError);
}

FeastModel trained_feast() {
  FeastParams p;
  p.neurons = 4;
  p.epochs = 2;
  auto m = FeastModel::initialize(3, 8, p, 42);
  Rng rng(1);
  ContextSet set(24);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> ec(24);
    for (double& v : ec) v = rng.uniform();
    set.add(ec);
  }
  train(m, set);
  return m;
}

TEST(ModelFile, FeastRoundTripIsExact) {
  TempDir dir("fm");
  const auto m = trained_feast();
  const Json cfg = {{"feast", {{"neurons", 4}}}};
  save_model(dir / "m.cfmd", m, cfg);
  const auto back = load_feast_model(dir / "m.cfmd");
  EXPECT_EQ(back.config, cfg);
  const auto& r = back.model;
  EXPECT_TRUE(r.trained());
  EXPECT_EQ(r.scale(), 3u);
  EXPECT_EQ(r.samples(), 8u);
  EXPECT_EQ(r.seed(), 42u);
  EXPECT_EQ(r.misses(), m.misses());
  EXPECT_EQ(r.params().delta_i, m.params().delta_i);
  for (std::size_t i = 0; i < m.size(); ++i) {
    EXPECT_EQ(r.neuron(i).w, m.neuron(i).w);
    EXPECT_EQ(r.threshold(i), m.threshold(i));
  }
  Rng rng(77);
  for (int i = 0; i < 50; ++i) {
    std::vector<double> probe(24);
    for (double& v : probe) v = rng.uniform();
    EXPECT_EQ(infer(r, probe), infer(m, probe));
  }
}

TEST(ModelFile, LinearRoundTripIsExact) {
  LabeledSet d;
  Rng rng(3);
  for (int i = 0; i < 60; ++i) {
    const int y = i % 3;
    d.add(std::vector<double>{y + rng.uniform(), 2.0 * y - rng.uniform(), rng.uniform()}, y);
  }
  TrainSpec spec;
  spec.seed = 5;
  LinearModel m = train_classifier(d, 3, spec);
  m.class_names = {"a", "b", "c"};
  TempDir dir("lm");
  save_model(dir / "c.cfmd", m, Json::object());
  const auto back = load_linear_model(dir / "c.cfmd").model;
  EXPECT_EQ(back.weights, m.weights);
  EXPECT_EQ(back.bias, m.bias);
  EXPECT_EQ(back.mean, m.mean);
  EXPECT_EQ(back.inv_std, m.inv_std);
  EXPECT_EQ(back.class_names, m.class_names);
  EXPECT_EQ(back.lambda, m.lambda);
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_EQ(predict(back, d.row(i)), predict(m, d.row(i)));
}

TEST(ModelFile, CorruptionIsDetected) {
  const auto bytes = encode_feast_model(trained_feast(), Json::object());
  auto bad = bytes;
  bad[kModelHeaderBytes + 40] ^= 0x01;
  try {
    decode_feast_model(bad, "m");
    FAIL() << "accepted";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("checksum"), std::string::npos) << e.what();
  }
  bad = bytes;
  bad[4] = 9;
  EXPECT_THROW(decode_feast_model(bad, "m"), FormatError);
  bad = bytes;
  bad.resize(bytes.size() - 3);
  EXPECT_THROW(decode_feast_model(bad, "m"), FormatError);
  EXPECT_THROW(decode_linear_model(bytes, "m"), FormatError);  // wrong kind
  bad = bytes;
  bad[0] = 'Z';
  EXPECT_THROW(decode_feast_model(bad, "m"), FormatError);
}

TEST(Manifest, LoadsAndValidates) {
  TempDir dir("man");
  write_wav(dir / "a.wav", 8000, std::vector<double>(10, 0.0));
  write_wav(dir / "b.wav", 8000, std::vector<double>(10, 0.0));
  const std::vector<std::string> classes{"0", "1"};
  auto write = [&](const std::string& text) {
    std::ofstream(dir / "m.csv") << text;
    return dir / "m.csv";
  };
  const auto m = load_manifest(write("path,label,split,speaker\na.wav,0,train,s1\n\"b.wav\",1,test,s2\n"), classes);
  ASSERT_EQ(m.rows.size(), 2u);
  EXPECT_EQ(m.rows[1].relpath, "b.wav");
  EXPECT_EQ(m.rows[1].path, dir / "b.wav");
  EXPECT_EQ(m.indices("train"), (std::vector<std::size_t>{0}));
  // Column order is free.
  EXPECT_NO_THROW(load_manifest(write("speaker,split,label,path\ns1,train,0,a.wav\ns2,test,1,b.wav\n"), classes));
  EXPECT_THROW(load_manifest(write("path,label,split\na.wav,0,train\n"), classes), FormatError);
  EXPECT_THROW(load_manifest(write("path,label,split,speaker\na.wav,7,train,s\nb.wav,1,test,s\n"), classes),
               InputError);
  EXPECT_THROW(load_manifest(write("path,label,split,speaker\na.wav,0,dev,s\nb.wav,1,test,s\n"), classes),
               InputError);
  EXPECT_THROW(load_manifest(write("path,label,split,speaker\nzz.wav,0,train,s\nb.wav,1,test,s\n"), classes),
               InputError);
  EXPECT_THROW(load_manifest(write("path,label,split,speaker\na.wav,0,train,s\n"), classes), InputError);
  EXPECT_NO_THROW(load_manifest(write("path,label,split,speaker\na.wav,0,train,s\n"), classes, false));
  EXPECT_THROW(load_manifest(write("path,label,split,speaker\na.wav,0,train\n"), classes), FormatError);
}

TEST(Csv, QuotedFields) {
  EXPECT_EQ(split_csv_line("a,\"b,c\",\"d\"\"e\",", "x"), (std::vector<std::string>{"a", "b,c", "d\"e", ""}));
  EXPECT_THROW(split_csv_line("a,\"b", "x"), FormatError);
  EXPECT_EQ(csv_field("plain"), "plain");
  EXPECT_EQ(csv_field("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_field("q\""), "\"q\"\"\"");
}

TEST(FeatureCsv, RoundTripIsExact) {
  TempDir dir("csv");
  FeatureTable t;
  t.columns = {"s5_n0_c0_b0", "s5_n0_c0_b1"};
  t.rows.push_back({"u1", "3", "train", "spk,1", {0.1, 1.0 / 3.0}});
  t.rows.push_back({"u2", "0", "test", "spk2", {0.0, 5e-324}});
  write_feature_csv(dir / "f.csv", t);
  const auto back = read_feature_csv(dir / "f.csv");
  EXPECT_EQ(back.columns, t.columns);
  ASSERT_EQ(back.rows.size(), 2u);
  EXPECT_EQ(back.rows[0].speaker, "spk,1");
  EXPECT_EQ(back.rows[0].values, t.rows[0].values);
  EXPECT_EQ(back.rows[1].values, t.rows[1].values);
  EXPECT_EQ(feature_csv_text(back), feature_csv_text(t));

  std::ofstream(dir / "bad.csv") << "utterance,label,split,speaker,x\nu,0,train,s,abc\n";
  EXPECT_THROW(read_feature_csv(dir / "bad.csv"), FormatError);
  std::ofstream(dir / "hdr.csv") << "id,label\n";
  EXPECT_THROW(read_feature_csv(dir / "hdr.csv"), FormatError);
}

TEST(FeatureCsv, LabeledSetUsesClassOrder) {
  FeatureTable t;
  t.columns = {"a"};
  t.rows.push_back({"u1", "b", "train", "s", {1.0}});
  t.rows.push_back({"u2", "a", "test", "s", {2.0}});
  const auto train = t.labeled({"a", "b"}, "train");
  ASSERT_EQ(train.size(), 1u);
  EXPECT_EQ(train.y[0], 1);
  EXPECT_EQ(t.labeled({"a", "b"}).size(), 2u);
  EXPECT_THROW(t.labeled({"a"}), InputError);
}

TEST(Files, AtomicWriteReplacesContent) {
  TempDir dir("atomic");
  write_text_atomic(dir / "sub" / "x.txt", "one");
  write_text_atomic(dir / "sub" / "x.txt", "two");
  const auto b = read_file(dir / "sub" / "x.txt");
  EXPECT_EQ(std::string(b.begin(), b.end()), "two");
  EXPECT_FALSE(std::filesystem::exists(dir / "sub" / "x.txt.tmp"));
}

}  // namespace
}  // namespace carfeast
