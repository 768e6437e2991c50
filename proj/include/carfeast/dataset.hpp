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

// Dataset manifests and feature matrices, both CSV with a header row.
//
// Manifest columns: path,label,split,speaker. Paths are relative to the
// manifest's directory unless absolute; split is "train" or "test".
//
// Feature CSV columns: utterance,label,split,speaker, then one column per
// feature named as in FeatureLayout::column_names(). Values are written in
// shortest round-trip form, so reading back is exact.

#pragma once

#include <charconv>
#include <cstddef>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "carfeast/classify.hpp"
#include "carfeast/error.hpp"
#include "carfeast/io.hpp"

namespace carfeast {

// Splits one CSV line. Fields may be double-quoted with "" as an escaped quote.
inline std::vector<std::string> split_csv_line(std::string_view line, const std::string& where) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false, was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"' && cur.empty() && !was_quoted) {
      quoted = was_quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
      was_quoted = false;
    } else {
      cur += c;
    }
  }
  if (quoted) throw FormatError(where + ": unterminated quoted field");
  out.push_back(std::move(cur));
  return out;
}

inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  std::vector<std::string> lines;
  std::string cur;
  for (auto b : bytes) {
    const char c = static_cast<char>(b);
    if (c == '\n') {
      if (!cur.empty() && cur.back() == '\r') cur.pop_back();
      lines.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) lines.push_back(std::move(cur));
  return lines;
}

struct ManifestRow {
  std::filesystem::path path;  // resolved
  std::string relpath;         // as written in the manifest
  std::string label;
  std::string split;
  std::string speaker;
};

struct DatasetManifest {
  std::filesystem::path source;
  std::vector<ManifestRow> rows;

  std::vector<std::size_t> indices(std::string_view split) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < rows.size(); ++i)
      if (rows[i].split == split) out.push_back(i);
    return out;
  }
};

// `classes` lists the allowed labels. Every path must exist and both splits
// must be non-empty unless `require_both_splits` is false.
inline DatasetManifest load_manifest(const std::filesystem::path& path, const std::vector<std::string>& classes,
                                     bool require_both_splits = true) {
  const auto lines = read_lines(path);
  const std::string src = path.string();
  if (lines.empty()) throw InputError(src + ": empty manifest (missing header)");
  const auto header = split_csv_line(lines[0], src + ":1");
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* need : {"path", "label", "split", "speaker"})
    if (!col.count(need)) throw FormatError(src + ":1: header lacks column '" + std::string(need) + "'");
  const std::set<std::string> allowed(classes.begin(), classes.end());
  DatasetManifest m;
  m.source = path;
  const auto base = path.parent_path();
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    const std::string where = src + ":" + std::to_string(ln + 1);
    const auto f = split_csv_line(lines[ln], where);
    if (f.size() != header.size())
      throw FormatError(where + ": expected " + std::to_string(header.size()) + " fields, got " +
                        std::to_string(f.size()));
    ManifestRow r;
    r.relpath = f[col["path"]];
    r.label = f[col["label"]];
    r.split = f[col["split"]];
    r.speaker = f[col["speaker"]];
    const std::filesystem::path p(r.relpath);
    r.path = p.is_absolute() ? p : base / p;
    if (r.split != "train" && r.split != "test")
      throw InputError(where + ": split must be 'train' or 'test', got '" + r.split + "'");
    if (!allowed.count(r.label)) throw InputError(where + ": label '" + r.label + "' is not in the configured classes");
    if (!std::filesystem::exists(r.path)) throw InputError(where + ": file not found: " + r.path.string());
    m.rows.push_back(std::move(r));
  }
  if (m.rows.empty()) throw InputError(src + ": manifest has no rows");
  if (require_both_splits) {
    if (m.indices("train").empty()) throw InputError(src + ": train split is empty");
    if (m.indices("test").empty()) throw InputError(src + ": test split is empty");
  }
  return m;
}

inline std::string write_manifest_text(const std::vector<ManifestRow>& rows) {
  std::string s = "path,label,split,speaker\n";
  for (const auto& r : rows)
    s += csv_field(r.relpath) + "," + csv_field(r.label) + "," + csv_field(r.split) + "," + csv_field(r.speaker) + "\n";
  return s;
}

// ---------------------------------------------------------------------------
// Feature CSV

struct FeatureRow {
  std::string utterance;
  std::string label;
  std::string split;
  std::string speaker;
  std::vector<double> values;
};

struct FeatureTable {
  std::vector<std::string> columns;  // feature columns only
  std::vector<FeatureRow> rows;

  // Rows of `split` as class ids of `classes` (all rows when split is empty).
  LabeledSet labeled(const std::vector<std::string>& classes, std::string_view split = {}) const {
    LabeledSet s;
    s.dims = columns.size();
    for (const auto& r : rows) {
      if (!split.empty() && r.split != split) continue;
      const auto it = std::find(classes.begin(), classes.end(), r.label);
      if (it == classes.end()) throw InputError("feature table: label '" + r.label + "' is not a configured class");
      s.add(std::span<const double>(r.values), static_cast<int>(it - classes.begin()));
    }
    return s;
  }
};

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string feature_csv_text(const FeatureTable& t) {
  std::string s = "utterance,label,split,speaker";
  for (const auto& c : t.columns) s += "," + c;
  s += '\n';
  for (const auto& r : t.rows) {
    if (r.values.size() != t.columns.size()) throw InputError("feature table: row width differs from header");
    s += csv_field(r.utterance) + "," + csv_field(r.label) + "," + csv_field(r.split) + "," + csv_field(r.speaker);
    for (double v : r.values) {
      s += ',';
      s += format_double(v);
    }
    s += '\n';
  }
  return s;
}

inline void write_feature_csv(const std::filesystem::path& path, const FeatureTable& t) {
  write_text_atomic(path, feature_csv_text(t));
}

inline FeatureTable read_feature_csv(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  const std::string src = path.string();
  if (lines.empty()) throw FormatError(src + ": empty feature file");
  const auto header = split_csv_line(lines[0], src + ":1");
  static const std::vector<std::string> fixed{"utterance", "label", "split", "speaker"};
  if (header.size() < fixed.size() || !std::equal(fixed.begin(), fixed.end(), header.begin()))
    throw FormatError(src + ":1: header must start with utterance,label,split,speaker");
  FeatureTable t;
  t.columns.assign(header.begin() + 4, header.end());
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    const std::string where = src + ":" + std::to_string(ln + 1);
    const auto f = split_csv_line(lines[ln], where);
    if (f.size() != header.size())
      throw FormatError(where + ": expected " + std::to_string(header.size()) + " fields, got " +
                        std::to_string(f.size()));
    FeatureRow r{f[0], f[1], f[2], f[3], {}};
    r.values.resize(t.columns.size());
    for (std::size_t i = 0; i < t.columns.size(); ++i) {
      const auto& cell = f[4 + i];
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), r.values[i]);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
        throw FormatError(where + ": column '" + t.columns[i] + "' is not a number: '" + cell + "'");
    }
    t.rows.push_back(std::move(r));
  }
  return t;
}

}  // namespace carfeast
