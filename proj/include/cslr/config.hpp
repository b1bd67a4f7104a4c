/* Copyright 2026 The CSLR Toolkit Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>

#include "cslr/errors.hpp"

namespace cslr {

// Text key-value configuration: one `key = value` per line, '#' comments.
// Later assignments override earlier ones; a schema check rejects unknown
// keys so typos fail loudly.
class Config {
 public:
  Config() = default;

  static Config parse_file(const std::filesystem::path& path);
  static Config parse_string(const std::string& text,
                             const std::string& origin = "<string>");

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return values_.count(key) > 0; }

  const std::string& get_string(const std::string& key) const;
  std::string get_string(const std::string& key,
                         const std::string& fallback) const;
  std::int64_t get_int(const std::string& key) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key) const;
  bool get_bool(const std::string& key, bool fallback) const;

  // Throws ConfigError on any key outside `known`.
  void check_known_keys(const std::set<std::string>& known) const;

  // Canonical serialization: sorted keys, "key = value" lines.
  std::string serialize() const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace cslr
