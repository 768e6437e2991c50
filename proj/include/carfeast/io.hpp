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

// Binary I/O: little-endian byte buffers, atomic file writes, 16-bit PCM WAV
// and the AEVT event file.
//
// AEVT layout (little-endian):
//   header, 24 bytes: "AEVT", u32 version (1), u32 fs, u32 n_channels, u64 count
//   record, 12 bytes: u64 t, u16 channel, u8 id, u8 reserved (0)
// Records are sorted by (t, channel, id).

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "carfeast/error.hpp"
#include "carfeast/events.hpp"

namespace carfeast {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

class ByteWriter {
 public:
  template <typename T>
  void put(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    buf_.insert(buf_.end(), p, p + sizeof(T));
  }
  void put_bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
  void put_string(std::string_view s) {
    put(static_cast<std::uint32_t>(s.size()));
    put_bytes(s);
  }
  void put_doubles(std::span<const double> v) {
    for (double d : v) put(d);
  }

  std::vector<std::uint8_t>& bytes() { return buf_; }
  const std::vector<std::uint8_t>& bytes() const { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> data, std::string source, std::size_t base_offset = 0)
      : data_(data), source_(std::move(source)), base_(base_offset) {}

  template <typename T>
  T get() {
    static_assert(std::is_trivially_copyable_v<T>);
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_bytes(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::string get_string() { return get_bytes(get<std::uint32_t>()); }
  std::vector<double> get_doubles(std::size_t n) {
    need(n * sizeof(double));
    std::vector<double> v(n);
    std::memcpy(v.data(), data_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
    return v;
  }

  std::size_t offset() const { return base_ + pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::size_t n) {
    if (n > data_.size() - pos_)
      throw FormatError(source_ + ": truncated at byte offset " + std::to_string(base_ + pos_) + " (needed " +
                        std::to_string(n) + " more bytes)");
  }

  std::span<const std::uint8_t> data_;
  std::string source_;
  std::size_t base_ = 0;
  std::size_t pos_ = 0;
};

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(path.string() + ": cannot open for reading");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// Writes to a temporary sibling, then renames over the target.
inline void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError(tmp.string() + ": cannot open for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw InputError(tmp.string() + ": write failed");
  }
  std::filesystem::rename(tmp, path);
}

inline void write_text_atomic(const std::filesystem::path& path, std::string_view text) {
  write_file_atomic(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

// ---------------------------------------------------------------------------
// WAV

struct Wav {
  int fs = 0;
  std::vector<double> samples;  // mono, [-1, 1)
};

inline Wav parse_wav(std::span<const std::uint8_t> bytes, const std::string& source) {
  ByteReader r(bytes, source);
  if (r.get_bytes(4) != "RIFF") throw FormatError(source + ": not a RIFF file");
  r.get<std::uint32_t>();
  if (r.get_bytes(4) != "WAVE") throw FormatError(source + ": not a WAVE file");
  bool have_fmt = false;
  std::uint16_t channels = 0, bits = 0;
  std::uint32_t rate = 0;
  while (r.remaining() >= 8) {
    const std::string id = r.get_bytes(4);
    const auto size = r.get<std::uint32_t>();
    if (id == "fmt ") {
      if (size < 16) throw FormatError(source + ": fmt chunk too small");
      const std::string body = r.get_bytes(size);
      ByteReader f(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(body.data()), body.size()),
                   source);
      auto tag = f.get<std::uint16_t>();
      channels = f.get<std::uint16_t>();
      rate = f.get<std::uint32_t>();
      f.get<std::uint32_t>();
      f.get<std::uint16_t>();
      bits = f.get<std::uint16_t>();
      if (tag == 0xFFFE && size >= 40) {  // WAVE_FORMAT_EXTENSIBLE: sub-format tag at offset 24
        f.get<std::uint16_t>();
        f.get<std::uint16_t>();
        f.get<std::uint32_t>();
        tag = f.get<std::uint16_t>();
      }
      if (tag != 1) throw FormatError(source + ": unsupported format (only uncompressed PCM is accepted)");
      if (channels != 1)
        throw FormatError(source + ": unsupported format (" + std::to_string(channels) + " channels; mono required)");
      if (bits != 16)
        throw FormatError(source + ": unsupported format (" + std::to_string(bits) + "-bit; 16-bit required)");
      if (size % 2) r.get_bytes(1);
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw FormatError(source + ": data chunk before fmt chunk");
      const std::size_t n = std::min<std::size_t>(size, r.remaining()) / 2;
      Wav w;
      w.fs = static_cast<int>(rate);
      w.samples.resize(n);
      for (std::size_t i = 0; i < n; ++i) w.samples[i] = r.get<std::int16_t>() / 32768.0;
      return w;
    } else {
      r.get_bytes(std::min<std::size_t>(size + (size % 2), r.remaining()));
    }
  }
  throw FormatError(source + ": no data chunk");
}

inline Wav read_wav(const std::filesystem::path& path) { return parse_wav(read_file(path), path.string()); }

inline std::vector<std::uint8_t> encode_wav(int fs, std::span<const double> samples) {
  ByteWriter w;
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  w.put_bytes("RIFF");
  w.put<std::uint32_t>(36 + data_bytes);
  w.put_bytes("WAVE");
  w.put_bytes("fmt ");
  w.put<std::uint32_t>(16);
  w.put<std::uint16_t>(1);
  w.put<std::uint16_t>(1);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(fs));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(fs) * 2);
  w.put<std::uint16_t>(2);
  w.put<std::uint16_t>(16);
  w.put_bytes("data");
  w.put<std::uint32_t>(data_bytes);
  for (double s : samples) {
    const double q = std::round(s * 32768.0);
    w.put(static_cast<std::int16_t>(std::clamp(q, -32768.0, 32767.0)));
  }
  return std::move(w.bytes());
}

inline void write_wav(const std::filesystem::path& path, int fs, std::span<const double> samples) {
  write_file_atomic(path, encode_wav(fs, samples));
}

// ---------------------------------------------------------------------------
// Event files

inline constexpr std::uint32_t kEventFileVersion = 1;
inline constexpr std::size_t kEventHeaderBytes = 24;
inline constexpr std::size_t kEventRecordBytes = 12;

inline std::vector<std::uint8_t> encode_events(const EventStream& s) {
  if (!s.is_sorted()) throw InputError("write_events: stream is not sorted by (t, channel, id)");
  ByteWriter w;
  w.put_bytes("AEVT");
  w.put<std::uint32_t>(kEventFileVersion);
  w.put<std::uint32_t>(s.fs);
  w.put<std::uint32_t>(s.n_channels);
  w.put<std::uint64_t>(s.events.size());
  for (const auto& e : s.events) {
    w.put<std::uint64_t>(e.t);
    w.put<std::uint16_t>(e.ch);
    w.put<std::uint8_t>(e.id);
    w.put<std::uint8_t>(0);
  }
  return std::move(w.bytes());
}

inline EventStream decode_events(std::span<const std::uint8_t> bytes, const std::string& source) {
  ByteReader r(bytes, source);
  if (r.get_bytes(4) != "AEVT") throw FormatError(source + ": bad magic (expected AEVT)");
  const auto version = r.get<std::uint32_t>();
  if (version != kEventFileVersion)
    throw FormatError(source + ": unsupported event file version " + std::to_string(version) + " (this build reads " +
                      std::to_string(kEventFileVersion) + ")");
  EventStream s;
  s.fs = r.get<std::uint32_t>();
  s.n_channels = r.get<std::uint32_t>();
  const auto count = r.get<std::uint64_t>();
  s.events.reserve(std::min<std::uint64_t>(count, r.remaining() / kEventRecordBytes));
  for (std::uint64_t i = 0; i < count; ++i) {
    AudEvent e;
    e.t = r.get<std::uint64_t>();
    e.ch = r.get<std::uint16_t>();
    e.id = r.get<std::uint8_t>();
    r.get<std::uint8_t>();
    if (e.ch >= s.n_channels)
      throw FormatError(source + ": record " + std::to_string(i) + " has channel " + std::to_string(e.ch) +
                        " >= n_channels");
    if (!s.events.empty() && !(s.events.back() < e))
      throw FormatError(source + ": records not sorted at record " + std::to_string(i) + " (byte offset " +
                        std::to_string(kEventHeaderBytes + i * kEventRecordBytes) + ")");
    s.events.push_back(e);
  }
  if (r.remaining() != 0)
    throw FormatError(source + ": " + std::to_string(r.remaining()) + " trailing bytes at byte offset " +
                      std::to_string(r.offset()));
  return s;
}

inline void write_events(const std::filesystem::path& path, const EventStream& s) {
  write_file_atomic(path, encode_events(s));
}

inline EventStream read_events(const std::filesystem::path& path) {
  return decode_events(read_file(path), path.string());
}

}  // namespace carfeast
