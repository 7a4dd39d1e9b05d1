// Copyright 2026 the selfnerf authors
// SPDX-License-Identifier: Apache-2.0
#include "selfnerf/config_file.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "selfnerf/common.hpp"

namespace selfnerf {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void KeyValues::set(const std::string& key, const std::string& value) { values_[key] = value; }

void KeyValues::set_int(const std::string& key, long long v) { values_[key] = std::to_string(v); }

void KeyValues::set_u64(const std::string& key, std::uint64_t v) { values_[key] = std::to_string(v); }

void KeyValues::set_double(const std::string& key, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  values_[key] = buf;
}

void KeyValues::set_bool(const std::string& key, bool v) { values_[key] = v ? "true" : "false"; }

bool KeyValues::has(const std::string& key) const { return values_.count(key) > 0; }

std::string KeyValues::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ValidationError("config: missing key '" + key + "'");
  return it->second;
}

std::string KeyValues::get_or(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

long long KeyValues::get_int(const std::string& key) const { return std::stoll(get(key)); }

long long KeyValues::get_int_or(const std::string& key, long long fallback) const {
  return has(key) ? std::stoll(get(key)) : fallback;
}

std::uint64_t KeyValues::get_u64_or(const std::string& key, std::uint64_t fallback) const {
  return has(key) ? std::stoull(get(key)) : fallback;
}

double KeyValues::get_double(const std::string& key) const { return std::stod(get(key)); }

double KeyValues::get_double_or(const std::string& key, double fallback) const {
  return has(key) ? std::stod(get(key)) : fallback;
}

bool KeyValues::get_bool_or(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  std::string v = get(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ValidationError("config: bad boolean for '" + key + "': " + v);
}

std::string KeyValues::serialize() const {
  std::ostringstream out;
  for (const auto& [k, v] : values_) out << k << " = " << v << "\n";
  return out.str();
}

KeyValues KeyValues::parse(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ValidationError("config: line " + std::to_string(lineno) + " has no '='");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ValidationError("config: empty key at line " + std::to_string(lineno));
    kv.values_[key] = value;
  }
  return kv;
}

KeyValues KeyValues::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("missing file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

}  // namespace selfnerf
