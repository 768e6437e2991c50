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

// Shared helpers for the test programs.

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include <unistd.h>

#include "carfeast/cochlea.hpp"
#include "carfeast/random.hpp"

namespace carfeast::testing {

inline std::vector<double> tone(double hz, double amplitude, int fs, std::size_t n) {
  std::vector<double> x(n);
  for (std::size_t t = 0; t < n; ++t) x[t] = amplitude * std::sin(2.0 * std::numbers::pi * hz * t / fs);
  return x;
}

// Channel with the largest mean-square BM output over samples [from, end).
inline std::size_t best_channel(const Cochleagram& bm, std::size_t from) {
  std::size_t best = 0;
  double best_e = -1.0;
  for (std::size_t c = 0; c < bm.n_columns; ++c) {
    double e = 0.0;
    for (std::size_t t = from; t < bm.n_samples; ++t) e += bm.at(t, c) * bm.at(t, c);
    if (e > best_e) {
      best_e = e;
      best = c;
    }
  }
  return best;
}

inline double peak_abs(const Cochleagram& g, std::size_t col, std::size_t from = 0) {
  double p = 0.0;
  for (std::size_t t = from; t < g.n_samples; ++t) p = std::max(p, std::abs(g.at(t, col)));
  return p;
}

// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("carfeast_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

}  // namespace carfeast::testing
