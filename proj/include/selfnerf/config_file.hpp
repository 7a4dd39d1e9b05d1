// Copyright 2026 the selfnerf authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace selfnerf {

/// Self-describing "key = value" text block. '#' starts a comment. Doubles
/// round-trip exactly (%.17g).
class KeyValues {
 public:
  void set(const std::string& key, const std::string& value);
  void set_int(const std::string& key, long long v);
  void set_u64(const std::string& key, std::uint64_t v);
  void set_double(const std::string& key, double v);
  void set_bool(const std::string& key, bool v);

  bool has(const std::string& key) const;
  std::string get(const std::string& key) const;  // throws if missing
  std::string get_or(const std::string& key, const std::string& fallback) const;
  long long get_int(const std::string& key) const;
  long long get_int_or(const std::string& key, long long fallback) const;
  std::uint64_t get_u64_or(const std::string& key, std::uint64_t fallback) const;
  double get_double(const std::string& key) const;
  double get_double_or(const std::string& key, double fallback) const;
  bool get_bool_or(const std::string& key, bool fallback) const;

  std::string serialize() const;  // sorted by key
  static KeyValues parse(const std::string& text);
  static KeyValues load(const std::string& path);

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace selfnerf
