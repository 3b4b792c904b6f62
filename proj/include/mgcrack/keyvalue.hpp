#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace mgcrack {

// Malformed or inconsistent configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flat "key = value" text: one entry per line, '#' starts a comment, blank
// lines ignored. Lists are comma-separated. Every key a consumer reads is
// marked, so leftovers can be reported as unknown.
class KeyValues {
 public:
  static KeyValues parse(const std::string& text, const std::string& origin = "<string>");
  static KeyValues load(const std::filesystem::path& path);

  bool has(const std::string& key) const;
  void set(const std::string& key, const std::string& value);

  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::string require_string(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::size_t> get_sizes(const std::string& key, const std::vector<std::size_t>& fallback) const;

  // Throws ConfigError naming the first key never read.
  void reject_unknown() const;

  std::string serialize() const;
  const std::string& origin() const { return origin_; }

 private:
  const std::string* find(const std::string& key) const;
  [[noreturn]] void fail(const std::string& key, const std::string& msg) const;

  std::string origin_;
  std::map<std::string, std::string> entries_;
  std::vector<std::string> order_;
  mutable std::set<std::string> used_;
};

}  // namespace mgcrack
