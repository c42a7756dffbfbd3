#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace didkit {

/// Flat view of a TOML-style file: `key = value` lines under optional
/// `[section]` headers. Keys are stored as "section.key". Values are numbers,
/// quoted strings, booleans, or one-line arrays of those.
class ConfigFile {
 public:
  static ConfigFile parse(std::string_view text);
  static ConfigFile load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::vector<std::string> keys() const;

  std::optional<std::string> get_string(const std::string& key) const;
  std::optional<double> get_double(const std::string& key) const;
  std::optional<long long> get_int(const std::string& key) const;
  std::optional<bool> get_bool(const std::string& key) const;
  std::optional<std::vector<double>> get_double_list(const std::string& key) const;
  std::optional<std::vector<long long>> get_int_list(const std::string& key) const;
  std::optional<std::vector<std::string>> get_string_list(const std::string& key) const;

  void set(const std::string& key, std::vector<std::string> items, bool is_list);

 private:
  struct Value {
    std::vector<std::string> items;  // unquoted
    bool is_list = false;
  };
  const Value* find(const std::string& key) const;
  std::map<std::string, Value> values_;
};

}  // namespace didkit
