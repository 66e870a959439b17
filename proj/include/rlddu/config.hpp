// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace rlddu::cfg {

/// Flat UTF-8 key-value configuration. One `key = value` pair per line,
/// `#` starts a comment, blank lines are ignored. Keys match
/// [A-Za-z0-9_.]+; duplicate keys are an error. Typed getters mark keys as
/// consumed; reject_unknown() then fails on anything left over, so typos
/// never pass silently.
class KeyValues {
 public:
  static KeyValues from_file(const std::string& path);
  static KeyValues from_string(const std::string& text, const std::string& origin = "<string>");

  [[nodiscard]] bool has(const std::string& key) const;

  std::string get_string(const std::string& key);
  std::string get_string(const std::string& key, const std::string& fallback);
  long long get_int(const std::string& key);
  long long get_int(const std::string& key, long long fallback);
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback);
  double get_double(const std::string& key);
  double get_double(const std::string& key, double fallback);
  bool get_bool(const std::string& key, bool fallback);
  /// Comma-separated lists; empty value yields an empty list.
  std::vector<long long> get_int_list(const std::string& key);
  std::vector<long long> get_int_list(const std::string& key, std::vector<long long> fallback);
  std::vector<std::string> get_string_list(const std::string& key);
  std::vector<std::string> get_string_list(const std::string& key,
                                           std::vector<std::string> fallback);

  /// Throws listing every key no getter has consumed.
  void reject_unknown() const;

  [[nodiscard]] const std::string& origin() const { return origin_; }

 private:
  std::string raw(const std::string& key);
  std::map<std::string, std::string> kv_;
  std::set<std::string> used_;
  std::string origin_;
};

}  // namespace rlddu::cfg
