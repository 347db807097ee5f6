#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace unmix {

// Flat UTF-8 "key = value" files, '#' comments. Used for train configs and
// dataset manifests; unknown keys are errors, not warnings.
using KeyValueMap = std::map<std::string, std::string>;

KeyValueMap parse_kv_text(const std::string& text);
KeyValueMap parse_kv_file(const std::string& path);

// Strict conversions (throw ConfigError with the offending key).
int64_t kv_int(const KeyValueMap& kv, const std::string& key, int64_t def);
uint64_t kv_uint(const KeyValueMap& kv, const std::string& key, uint64_t def);
double kv_double(const KeyValueMap& kv, const std::string& key, double def);
bool kv_bool(const KeyValueMap& kv, const std::string& key, bool def);
std::string kv_str(const KeyValueMap& kv, const std::string& key, const std::string& def);

// Shortest round-trip decimal formatting (locale-independent).
std::string format_double(double v);
std::string format_float(float v);

}  // namespace unmix
