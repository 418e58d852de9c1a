#pragma once

#include <map>
#include <set>
#include <string>

namespace dysent {

// Flat `key = value` config file. Lines starting with '#' (and blank lines)
// are ignored; values keep their raw text and are converted on access.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig from_file(const std::string& path);
  static KeyValueConfig from_string(const std::string& text);

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  long get_int(const std::string& key, long fallback) const;
  double get_real(const std::string& key, double fallback) const;

  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  // Keys present in the file but never read; lets callers reject typos.
  std::set<std::string> unused_keys() const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> touched_;
};

}  // namespace dysent
