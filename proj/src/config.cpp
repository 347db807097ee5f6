#include "unmix/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "unmix/errors.hpp"

namespace unmix {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

KeyValueMap parse_kv_text(const std::string& text) {
  KeyValueMap kv;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    if (kv.count(key)) throw ConfigError("duplicate config key '" + key + "'");
    kv[key] = value;
  }
  return kv;
}

KeyValueMap parse_kv_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open config file: " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return parse_kv_text(os.str());
}

int64_t kv_int(const KeyValueMap& kv, const std::string& key, int64_t def) {
  auto it = kv.find(key);
  if (it == kv.end()) return def;
  int64_t v = 0;
  auto [p, ec] = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
  if (ec != std::errc() || p != it->second.data() + it->second.size())
    throw ConfigError("config key '" + key + "': expected integer, got '" + it->second + "'");
  return v;
}

uint64_t kv_uint(const KeyValueMap& kv, const std::string& key, uint64_t def) {
  auto it = kv.find(key);
  if (it == kv.end()) return def;
  uint64_t v = 0;
  auto [p, ec] = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
  if (ec != std::errc() || p != it->second.data() + it->second.size())
    throw ConfigError("config key '" + key + "': expected unsigned integer, got '" + it->second +
                      "'");
  return v;
}

double kv_double(const KeyValueMap& kv, const std::string& key, double def) {
  auto it = kv.find(key);
  if (it == kv.end()) return def;
  try {
    size_t pos = 0;
    const double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected number, got '" + it->second + "'");
  }
}

bool kv_bool(const KeyValueMap& kv, const std::string& key, bool def) {
  auto it = kv.find(key);
  if (it == kv.end()) return def;
  const std::string& v = it->second;
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  throw ConfigError("config key '" + key + "': expected boolean, got '" + v + "'");
}

std::string kv_str(const KeyValueMap& kv, const std::string& key, const std::string& def) {
  auto it = kv.find(key);
  return it == kv.end() ? def : it->second;
}

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

std::string format_float(float v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

}  // namespace unmix
