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

#pragma once

#include <stdexcept>
#include <string>

namespace carfeast {

// Error categories. Each maps onto one CLI exit code (see exit_code()).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad command-line usage, or an API used out of order (e.g. untrained model).
class UsageError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input data (empty signal, label mismatch, ...).
class InputError : public Error {
 public:
  using Error::Error;
};

// On-disk format problem: bad magic, truncation, checksum, version.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Numerical trouble while running a filter (non-finite input or state).
class ProcessingError : public Error {
 public:
  using Error::Error;
};

// A configuration value violates a constraint. `key` is the dotted key path.
class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& what)
      : Error(key.empty() ? what : key + ": " + what), key_(std::move(key)), detail_(what) {}

  // The same error, attributed to a source file.
  ConfigError in_source(const std::string& source) const {
    ConfigError e(key_, detail_);
    static_cast<Error&>(e) = Error(source + ": " + what());
    return e;
  }

  const std::string& key() const noexcept { return key_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::string key_;
  std::string detail_;
};

// 0 success, 1 usage, 2 data/format, 3 constraint violation.
inline int exit_code(const std::exception& e) noexcept {
  if (dynamic_cast<const UsageError*>(&e)) return 1;
  if (dynamic_cast<const ConfigError*>(&e)) return 3;
  return 2;
}

}  // namespace carfeast
