// SPDX-License-Identifier: Apache-2.0
#include "rlddu/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace rlddu::cfg {

namespace {

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

bool valid_key(const std::string& k) {
  if (k.empty()) return false;
  for (char c : k)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '.') return false;
  return true;
}

[[noreturn]] void fail(const std::string& origin, const std::string& msg) {
  throw std::runtime_error("config " + origin + ": " + msg);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss(value);
  while (std::getline(ss, item, ',')) {
    const std::string t = trim(item);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

}  // namespace

KeyValues KeyValues::from_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("config: cannot open " + path);
  std::stringstream buf;
  buf << f.rdbuf();
  return from_string(buf.str(), path);
}

KeyValues KeyValues::from_string(const std::string& text, const std::string& origin) {
  KeyValues kvs;
  kvs.origin_ = origin;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      fail(origin, "line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!valid_key(key))
      fail(origin, "line " + std::to_string(lineno) + ": bad key '" + key + "'");
    if (!kvs.kv_.emplace(key, value).second)
      fail(origin, "line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
  }
  return kvs;
}

bool KeyValues::has(const std::string& key) const { return kv_.count(key) != 0; }

std::string KeyValues::raw(const std::string& key) {
  const auto it = kv_.find(key);
  if (it == kv_.end()) fail(origin_, "missing required key '" + key + "'");
  used_.insert(key);
  return it->second;
}

std::string KeyValues::get_string(const std::string& key) { return raw(key); }

std::string KeyValues::get_string(const std::string& key, const std::string& fallback) {
  return has(key) ? raw(key) : fallback;
}

long long KeyValues::get_int(const std::string& key) {
  const std::string v = raw(key);
  long long out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    fail(origin_, "key '" + key + "': not an integer: '" + v + "'");
  return out;
}

long long KeyValues::get_int(const std::string& key, long long fallback) {
  return has(key) ? get_int(key) : fallback;
}

std::uint64_t KeyValues::get_u64(const std::string& key, std::uint64_t fallback) {
  if (!has(key)) return fallback;
  const std::string v = raw(key);
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    fail(origin_, "key '" + key + "': not an unsigned integer: '" + v + "'");
  return out;
}

double KeyValues::get_double(const std::string& key) {
  const std::string v = raw(key);
  try {
    size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    fail(origin_, "key '" + key + "': not a number: '" + v + "'");
  }
}

double KeyValues::get_double(const std::string& key, double fallback) {
  return has(key) ? get_double(key) : fallback;
}

bool KeyValues::get_bool(const std::string& key, bool fallback) {
  if (!has(key)) return fallback;
  const std::string v = raw(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail(origin_, "key '" + key + "': not a boolean: '" + v + "'");
}

std::vector<long long> KeyValues::get_int_list(const std::string& key) {
  const std::string v = raw(key);
  std::vector<long long> out;
  for (const std::string& item : split_list(v)) {
    long long x = 0;
    const auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), x);
    if (ec != std::errc() || p != item.data() + item.size())
      fail(origin_, "key '" + key + "': not an integer list entry: '" + item + "'");
    out.push_back(x);
  }
  return out;
}

std::vector<long long> KeyValues::get_int_list(const std::string& key,
                                               std::vector<long long> fallback) {
  return has(key) ? get_int_list(key) : std::move(fallback);
}

std::vector<std::string> KeyValues::get_string_list(const std::string& key) {
  return split_list(raw(key));
}

std::vector<std::string> KeyValues::get_string_list(const std::string& key,
                                                    std::vector<std::string> fallback) {
  return has(key) ? get_string_list(key) : std::move(fallback);
}

void KeyValues::reject_unknown() const {
  std::string extras;
  for (const auto& [key, value] : kv_)
    if (used_.count(key) == 0) extras += (extras.empty() ? "" : ", ") + key;
  if (!extras.empty()) fail(origin_, "unknown keys: " + extras);
}

}  // namespace rlddu::cfg
