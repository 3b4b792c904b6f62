#include "mgcrack/keyvalue.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace mgcrack {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
bool parse_number(const std::string& text, T& out) {
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

}  // namespace

KeyValues KeyValues::parse(const std::string& text, const std::string& origin) {
  KeyValues kv;
  kv.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    if (kv.entries_.count(key)) throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    kv.entries_[key] = value;
    kv.order_.push_back(key);
  }
  return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse(ss.str(), path.string());
}

bool KeyValues::has(const std::string& key) const { return entries_.count(key) != 0; }

void KeyValues::set(const std::string& key, const std::string& value) {
  if (!entries_.count(key)) order_.push_back(key);
  entries_[key] = value;
}

const std::string* KeyValues::find(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return nullptr;
  used_.insert(key);
  return &it->second;
}

void KeyValues::fail(const std::string& key, const std::string& msg) const {
  throw ConfigError(origin_ + ": key '" + key + "': " + msg);
}

std::string KeyValues::get_string(const std::string& key, const std::string& fallback) const {
  const std::string* v = find(key);
  return v ? *v : fallback;
}

std::string KeyValues::require_string(const std::string& key) const {
  const std::string* v = find(key);
  if (!v) fail(key, "missing required entry");
  return *v;
}

double KeyValues::get_double(const std::string& key, double fallback) const {
  const std::string* v = find(key);
  if (!v) return fallback;
  double out = 0.0;
  if (!parse_number(*v, out)) fail(key, "not a number: '" + *v + "'");
  return out;
}

std::int64_t KeyValues::get_int(const std::string& key, std::int64_t fallback) const {
  const std::string* v = find(key);
  if (!v) return fallback;
  std::int64_t out = 0;
  if (!parse_number(*v, out)) fail(key, "not an integer: '" + *v + "'");
  return out;
}

std::uint64_t KeyValues::get_uint(const std::string& key, std::uint64_t fallback) const {
  const std::string* v = find(key);
  if (!v) return fallback;
  std::uint64_t out = 0;
  if (!parse_number(*v, out)) fail(key, "not a non-negative integer: '" + *v + "'");
  return out;
}

bool KeyValues::get_bool(const std::string& key, bool fallback) const {
  const std::string* v = find(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
  if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
  fail(key, "not a boolean: '" + *v + "'");
}

std::vector<std::size_t> KeyValues::get_sizes(const std::string& key, const std::vector<std::size_t>& fallback) const {
  const std::string* v = find(key);
  if (!v) return fallback;
  std::vector<std::size_t> out;
  std::istringstream in(*v);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    std::size_t n = 0;
    if (!parse_number(item, n)) fail(key, "not a list of non-negative integers: '" + *v + "'");
    out.push_back(n);
  }
  return out;
}

void KeyValues::reject_unknown() const {
  for (const auto& key : order_)
    if (!used_.count(key)) throw ConfigError(origin_ + ": unknown key '" + key + "'");
}

std::string KeyValues::serialize() const {
  std::ostringstream os;
  for (const auto& key : order_) os << key << " = " << entries_.at(key) << '\n';
  return os.str();
}

}  // namespace mgcrack
