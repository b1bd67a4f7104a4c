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

#include "cslr/config.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace cslr {
namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace

Config Config::parse_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open config: " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_string(ss.str(), path.string());
}

Config Config::parse_string(const std::string& text,
                            const std::string& origin) {
  Config cfg;
  std::istringstream is(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ParseError("config " + origin + " line " +
                       std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty())
      throw ParseError("config " + origin + " line " +
                       std::to_string(line_no) + ": empty key");
    cfg.values_[key] = value;
  }
  return cfg;
}

void Config::set(const std::string& key, const std::string& value) {
  values_[key] = value;
}

const std::string& Config::get_string(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end())
    throw ConfigError("config: missing required key '" + key + "'");
  return it->second;
}

std::string Config::get_string(const std::string& key,
                               const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::int64_t Config::get_int(const std::string& key) const {
  const std::string& raw = get_string(key);
  try {
    std::size_t used = 0;
    const std::int64_t v = std::stoll(raw, &used);
    if (used != raw.size()) throw std::invalid_argument(raw);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' is not an integer: '" + raw +
                      "'");
  }
}

std::int64_t Config::get_int(const std::string& key,
                             std::int64_t fallback) const {
  return has(key) ? get_int(key) : fallback;
}

double Config::get_double(const std::string& key) const {
  const std::string& raw = get_string(key);
  try {
    std::size_t used = 0;
    const double v = std::stod(raw, &used);
    if (used != raw.size()) throw std::invalid_argument(raw);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' is not a number: '" + raw +
                      "'");
  }
}

double Config::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

bool Config::get_bool(const std::string& key) const {
  const std::string& raw = get_string(key);
  if (raw == "true" || raw == "1") return true;
  if (raw == "false" || raw == "0") return false;
  throw ConfigError("config: key '" + key + "' is not a boolean: '" + raw +
                    "'");
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  return has(key) ? get_bool(key) : fallback;
}

void Config::check_known_keys(const std::set<std::string>& known) const {
  for (const auto& [key, value] : values_)
    if (known.count(key) == 0)
      throw ConfigError("config: unknown key '" + key + "'");
}

std::string Config::serialize() const {
  std::string out;
  for (const auto& [key, value] : values_) {
    out += key;
    out += " = ";
    out += value;
    out += '\n';
  }
  return out;
}

}  // namespace cslr
