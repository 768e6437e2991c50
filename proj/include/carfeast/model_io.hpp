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

// Versioned model containers.
//
//   "CFMD", u32 version (1), u32 kind (1 FEAST, 2 linear), u64 payload bytes,
//   u64 FNV-1a-64 of the payload, payload
//
// The payload opens with the JSON config snapshot (u32 length + UTF-8) and
// continues with raw little-endian parameters, so a round trip is exact.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>

#include "carfeast/classify.hpp"
#include "carfeast/config.hpp"
#include "carfeast/feast.hpp"
#include "carfeast/io.hpp"
#include "carfeast/random.hpp"

namespace carfeast {

inline constexpr std::uint32_t kModelFileVersion = 1;
inline constexpr std::size_t kModelHeaderBytes = 28;

enum class ModelKind : std::uint32_t { kFeast = 1, kLinear = 2 };

inline std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  return fnv1a64(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

namespace detail {

inline std::vector<std::uint8_t> wrap_container(ModelKind kind, const std::vector<std::uint8_t>& payload) {
  ByteWriter w;
  w.put_bytes("CFMD");
  w.put<std::uint32_t>(kModelFileVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(kind));
  w.put<std::uint64_t>(payload.size());
  w.put<std::uint64_t>(fnv1a64(payload));
  auto out = std::move(w.bytes());
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

inline std::span<const std::uint8_t> unwrap_container(std::span<const std::uint8_t> bytes, ModelKind expected,
                                                      const std::string& source) {
  ByteReader r(bytes, source);
  if (r.get_bytes(4) != "CFMD") throw FormatError(source + ": bad magic (expected CFMD model container)");
  const auto version = r.get<std::uint32_t>();
  if (version != kModelFileVersion)
    throw FormatError(source + ": unsupported model container version " + std::to_string(version) +
                      " (this build reads " + std::to_string(kModelFileVersion) + ")");
  const auto kind = r.get<std::uint32_t>();
  if (kind != static_cast<std::uint32_t>(expected))
    throw FormatError(source + ": wrong model kind " + std::to_string(kind) + " (expected " +
                      std::to_string(static_cast<std::uint32_t>(expected)) + ")");
  const auto len = r.get<std::uint64_t>();
  const auto sum = r.get<std::uint64_t>();
  if (len != r.remaining())
    throw FormatError(source + ": payload length " + std::to_string(len) + " does not match " +
                      std::to_string(r.remaining()) + " bytes present after offset " +
                      std::to_string(kModelHeaderBytes));
  const auto payload = bytes.subspan(kModelHeaderBytes);
  if (fnv1a64(payload) != sum) throw FormatError(source + ": checksum mismatch (payload corrupted)");
  return payload;
}

inline void expect_consumed(const ByteReader& r, const std::string& source) {
  if (r.remaining() != 0)
    throw FormatError(source + ": " + std::to_string(r.remaining()) + " unexpected trailing bytes at offset " +
                      std::to_string(r.offset()));
}

}  // namespace detail

template <typename Model>
struct Loaded {
  Model model;
  Json config;  // snapshot stored alongside the parameters
};

inline std::vector<std::uint8_t> encode_feast_model(const FeastModel& m, const Json& config) {
  ByteWriter w;
  w.put_string(config.dump());
  w.put<std::uint64_t>(m.scale());
  w.put<std::uint64_t>(m.samples());
  w.put<std::uint64_t>(m.seed());
  w.put<std::uint64_t>(m.misses());
  w.put<std::uint8_t>(m.trained() ? 1 : 0);
  const auto& p = m.params();
  w.put<std::int32_t>(p.neurons);
  w.put(p.delta_i);
  w.put(p.delta_e);
  w.put(p.eta);
  w.put<std::int32_t>(p.epochs);
  w.put<std::uint8_t>(p.clamp_thresholds ? 1 : 0);
  w.put<std::uint8_t>(p.renormalize_weights ? 1 : 0);
  w.put<std::uint64_t>(m.size());
  for (const auto& n : m.neurons()) {
    w.put(n.vth_base);
    w.put<std::uint64_t>(n.wins);
    w.put_doubles(n.w);
  }
  return detail::wrap_container(ModelKind::kFeast, w.bytes());
}

inline Loaded<FeastModel> decode_feast_model(std::span<const std::uint8_t> bytes, const std::string& source) {
  const auto payload = detail::unwrap_container(bytes, ModelKind::kFeast, source);
  ByteReader r(payload, source, kModelHeaderBytes);
  Loaded<FeastModel> out;
  try {
    out.config = Json::parse(r.get_string());
  } catch (const nlohmann::json::parse_error&) {
    throw FormatError(source + ": config snapshot is not valid JSON");
  }
  const auto scale = r.get<std::uint64_t>();
  const auto samples = r.get<std::uint64_t>();
  const auto seed = r.get<std::uint64_t>();
  const auto misses = r.get<std::uint64_t>();
  const bool trained = r.get<std::uint8_t>() != 0;
  FeastParams p;
  p.neurons = r.get<std::int32_t>();
  p.delta_i = r.get<double>();
  p.delta_e = r.get<double>();
  p.eta = r.get<double>();
  p.epochs = r.get<std::int32_t>();
  p.clamp_thresholds = r.get<std::uint8_t>() != 0;
  p.renormalize_weights = r.get<std::uint8_t>() != 0;
  const auto count = r.get<std::uint64_t>();
  if (scale == 0 || samples == 0 || count == 0 || count > 256)
    throw FormatError(source + ": implausible model shape");
  std::vector<FeastNeuron> neurons(count);
  for (auto& n : neurons) {
    n.vth_base = r.get<double>();
    n.wins = r.get<std::uint64_t>();
    n.w = r.get_doubles(scale * samples);
  }
  detail::expect_consumed(r, source);
  try {
    out.model = FeastModel(scale, samples, p, seed, std::move(neurons), misses, trained);
  } catch (const InputError& e) {
    throw FormatError(source + ": " + e.what());
  }
  return out;
}

inline void save_model(const std::filesystem::path& path, const FeastModel& m, const Json& config) {
  write_file_atomic(path, encode_feast_model(m, config));
}

inline Loaded<FeastModel> load_feast_model(const std::filesystem::path& path) {
  return decode_feast_model(read_file(path), path.string());
}

inline std::vector<std::uint8_t> encode_linear_model(const LinearModel& m, const Json& config) {
  ByteWriter w;
  w.put_string(config.dump());
  w.put<std::uint64_t>(m.n_classes);
  w.put<std::uint64_t>(m.dims);
  w.put(m.lambda);
  w.put<std::uint8_t>(m.mean.empty() ? 0 : 1);
  w.put_doubles(m.weights);
  w.put_doubles(m.bias);
  w.put_doubles(m.mean);
  w.put_doubles(m.inv_std);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.class_names.size()));
  for (const auto& n : m.class_names) w.put_string(n);
  w.put<std::uint64_t>(m.spec.lambdas.size());
  w.put_doubles(m.spec.lambdas);
  w.put<std::int32_t>(m.spec.epochs);
  w.put<std::uint64_t>(m.spec.seed);
  w.put(m.spec.validation_fraction);
  w.put<std::uint8_t>(m.spec.standardize ? 1 : 0);
  return detail::wrap_container(ModelKind::kLinear, w.bytes());
}

inline Loaded<LinearModel> decode_linear_model(std::span<const std::uint8_t> bytes, const std::string& source) {
  const auto payload = detail::unwrap_container(bytes, ModelKind::kLinear, source);
  ByteReader r(payload, source, kModelHeaderBytes);
  Loaded<LinearModel> out;
  try {
    out.config = Json::parse(r.get_string());
  } catch (const nlohmann::json::parse_error&) {
    throw FormatError(source + ": config snapshot is not valid JSON");
  }
  auto& m = out.model;
  m.n_classes = r.get<std::uint64_t>();
  m.dims = r.get<std::uint64_t>();
  if (m.n_classes < 2 || m.n_classes > 65536 || m.dims == 0 || m.dims > (std::uint64_t{1} << 32))
    throw FormatError(source + ": implausible classifier shape");
  m.lambda = r.get<double>();
  const bool standardized = r.get<std::uint8_t>() != 0;
  m.weights = r.get_doubles(m.n_classes * m.dims);
  m.bias = r.get_doubles(m.n_classes);
  if (standardized) {
    m.mean = r.get_doubles(m.dims);
    m.inv_std = r.get_doubles(m.dims);
  }
  const auto names = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < names; ++i) m.class_names.push_back(r.get_string());
  const auto nl = r.get<std::uint64_t>();
  if (nl > 4096) throw FormatError(source + ": implausible lambda grid size");
  m.spec.lambdas = r.get_doubles(nl);
  m.spec.epochs = r.get<std::int32_t>();
  m.spec.seed = r.get<std::uint64_t>();
  m.spec.validation_fraction = r.get<double>();
  m.spec.standardize = r.get<std::uint8_t>() != 0;
  detail::expect_consumed(r, source);
  for (double v : m.weights)
    if (!std::isfinite(v)) throw FormatError(source + ": non-finite classifier weight");
  return out;
}

inline void save_model(const std::filesystem::path& path, const LinearModel& m, const Json& config) {
  write_file_atomic(path, encode_linear_model(m, config));
}

inline Loaded<LinearModel> load_linear_model(const std::filesystem::path& path) {
  return decode_linear_model(read_file(path), path.string());
}

}  // namespace carfeast
