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

// Grayscale images as binary PGM (P5, 8-bit). Each image maps [0, max] onto
// [0, 255] with max taken from the image itself; max is written to a sidecar
// "<image>.txt" together with the dimensions, and the raw values go to
// "<image>.csv". An all-zero image is all black with max 0.
//
// Image shapes:
//   cochleagram   n_channels rows x min(n_samples, 512) columns (mean per column)
//   raster        n_channels rows x 512 columns over [0, last event t]
//   weights       scale rows x (m * (S + 1) - 1) columns, neurons side by side
//   feature map   m rows (neurons) x 512 columns over [0, last event t]

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "carfeast/cochlea.hpp"
#include "carfeast/dataset.hpp"
#include "carfeast/events.hpp"
#include "carfeast/feast.hpp"
#include "carfeast/io.hpp"

namespace carfeast {

inline constexpr std::size_t kRenderColumns = 512;

struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> values;  // row-major, all >= 0

  Image() = default;
  Image(std::size_t w, std::size_t h) : width(w), height(h), values(w * h, 0.0) {}
  double& at(std::size_t row, std::size_t col) { return values[row * width + col]; }
  double max() const { return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end()); }
};

inline std::vector<std::uint8_t> encode_pgm(const Image& img) {
  if (img.width == 0 || img.height == 0) throw InputError("render: image has no pixels");
  const std::string header = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  const double mx = img.max();
  for (double v : img.values) {
    const double level = mx > 0.0 ? std::clamp(v, 0.0, mx) / mx * 255.0 : 0.0;
    out.push_back(static_cast<std::uint8_t>(std::lround(level)));
  }
  return out;
}

// Writes <path>, <path>.txt (max and size) and <path>.csv (raw values).
inline void write_image(const std::filesystem::path& path, const Image& img) {
  write_file_atomic(path, encode_pgm(img));
  auto side = path;
  side += ".txt";
  write_text_atomic(side, "max " + format_double(img.max()) + "\nwidth " + std::to_string(img.width) + "\nheight " +
                              std::to_string(img.height) + "\n");
  std::string csv;
  for (std::size_t r = 0; r < img.height; ++r) {
    for (std::size_t c = 0; c < img.width; ++c) {
      if (c) csv += ',';
      csv += format_double(img.values[r * img.width + c]);
    }
    csv += '\n';
  }
  auto data = path;
  data += ".csv";
  write_text_atomic(data, csv);
}

inline Image render_cochleagram(const Cochleagram& g) {
  const std::size_t cols = std::max<std::size_t>(1, std::min(g.n_samples, kRenderColumns));
  Image img(cols, g.n_columns);
  std::vector<std::size_t> n(cols, 0);
  for (std::size_t t = 0; t < g.n_samples; ++t) {
    const std::size_t c = t * cols / g.n_samples;
    ++n[c];
    for (std::size_t ch = 0; ch < g.n_columns; ++ch) img.at(ch, c) += std::max(0.0, g.at(t, ch));
  }
  for (std::size_t c = 0; c < cols; ++c)
    if (n[c])
      for (std::size_t ch = 0; ch < g.n_columns; ++ch) img.at(ch, c) /= static_cast<double>(n[c]);
  return img;
}

inline std::size_t time_column(std::uint64_t t, std::uint64_t last) {
  return last == 0 ? 0 : std::min<std::size_t>(kRenderColumns - 1, static_cast<std::size_t>(t * kRenderColumns / (last + 1)));
}

inline Image render_raster(const EventStream& s) {
  Image img(kRenderColumns, std::max<std::size_t>(1, s.n_channels));
  const std::uint64_t last = s.events.empty() ? 0 : s.events.back().t;
  for (const auto& e : s.events) img.at(e.ch, time_column(e.t, last)) += 1.0;
  return img;
}

inline Image render_weights(const FeastModel& m) {
  const std::size_t S = m.samples();
  Image img(m.size() * (S + 1) - 1, m.scale());
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto& w = m.neuron(i).w;
    for (std::size_t r = 0; r < m.scale(); ++r)
      for (std::size_t c = 0; c < S; ++c) img.at(r, i * (S + 1) + c) = w[r * S + c];
  }
  return img;
}

inline Image render_feature_map(const EventStream& map, std::size_t neurons) {
  Image img(kRenderColumns, std::max<std::size_t>(1, neurons));
  const std::uint64_t last = map.events.empty() ? 0 : map.events.back().t;
  for (const auto& e : map.events) {
    if (e.id >= img.height) throw InputError("render: neuron id " + std::to_string(e.id) + " exceeds neuron count");
    img.at(e.id, time_column(e.t, last)) += 1.0;
  }
  return img;
}

}  // namespace carfeast
