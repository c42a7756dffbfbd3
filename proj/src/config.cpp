#include "didkit/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "didkit/error.hpp"

namespace didkit {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// Drops a trailing comment that is not inside quotes.
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

std::string unquote(const std::string& s, std::size_t line_no) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
  if (!s.empty() && (s.front() == '"' || s.back() == '"')) {
    throw Error(ErrorKind::InvalidArgument, "config line " + std::to_string(line_no) + ": unbalanced quotes");
  }
  return s;
}

std::vector<std::string> split_items(const std::string& body, std::size_t line_no) {
  std::vector<std::string> items;
  std::string cur;
  bool quoted = false;
  for (char ch : body) {
    if (ch == '"') quoted = !quoted;
    if (ch == ',' && !quoted) {
      items.push_back(unquote(trim(cur), line_no));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  const auto last = trim(cur);
  if (!last.empty()) items.push_back(unquote(last, line_no));
  return items;
}

std::optional<double> to_double(const std::string& s) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end) return std::nullopt;
  return v;
}

std::optional<long long> to_int(const std::string& s) {
  long long v = 0;
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end) return std::nullopt;
  return v;
}

[[noreturn]] void bad_value(const std::string& key, const char* what) {
  throw Error(ErrorKind::InvalidArgument, "config key '" + key + "' is not " + what);
}

}  // namespace

ConfigFile ConfigFile::parse(std::string_view text) {
  ConfigFile cfg;
  std::istringstream in{std::string(text)};
  std::string raw, section;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw Error(ErrorKind::InvalidArgument, "config line " + std::to_string(line_no) + ": malformed section");
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::InvalidArgument, "config line " + std::to_string(line_no) + ": expected key = value");
    }
    std::string key = unquote(trim(line.substr(0, eq)), line_no);
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw Error(ErrorKind::InvalidArgument, "config line " + std::to_string(line_no) + ": empty key");
    if (!section.empty()) key = section + "." + key;
    if (!value.empty() && value.front() == '[') {
      if (value.back() != ']') {
        throw Error(ErrorKind::InvalidArgument, "config line " + std::to_string(line_no) + ": unterminated array");
      }
      cfg.set(key, split_items(value.substr(1, value.size() - 2), line_no), true);
    } else {
      cfg.set(key, {unquote(value, line_no)}, false);
    }
  }
  return cfg;
}

ConfigFile ConfigFile::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::Io, "cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

std::vector<std::string> ConfigFile::keys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_) out.push_back(k);
  return out;
}

void ConfigFile::set(const std::string& key, std::vector<std::string> items, bool is_list) {
  values_[key] = Value{std::move(items), is_list};
}

const ConfigFile::Value* ConfigFile::find(const std::string& key) const {
  auto it = values_.find(key);
  return it == values_.end() ? nullptr : &it->second;
}

std::optional<std::string> ConfigFile::get_string(const std::string& key) const {
  const auto* v = find(key);
  if (!v) return std::nullopt;
  if (v->is_list || v->items.size() != 1) bad_value(key, "a scalar");
  return v->items.front();
}

std::optional<double> ConfigFile::get_double(const std::string& key) const {
  auto s = get_string(key);
  if (!s) return std::nullopt;
  auto d = to_double(*s);
  if (!d) bad_value(key, "a number");
  return d;
}

std::optional<long long> ConfigFile::get_int(const std::string& key) const {
  auto s = get_string(key);
  if (!s) return std::nullopt;
  auto i = to_int(*s);
  if (!i) bad_value(key, "an integer");
  return i;
}

std::optional<bool> ConfigFile::get_bool(const std::string& key) const {
  auto s = get_string(key);
  if (!s) return std::nullopt;
  if (*s == "true") return true;
  if (*s == "false") return false;
  bad_value(key, "true or false");
}

std::optional<std::vector<double>> ConfigFile::get_double_list(const std::string& key) const {
  const auto* v = find(key);
  if (!v) return std::nullopt;
  std::vector<double> out;
  for (const auto& s : v->items) {
    auto d = to_double(s);
    if (!d) bad_value(key, "a list of numbers");
    out.push_back(*d);
  }
  return out;
}

std::optional<std::vector<long long>> ConfigFile::get_int_list(const std::string& key) const {
  const auto* v = find(key);
  if (!v) return std::nullopt;
  std::vector<long long> out;
  for (const auto& s : v->items) {
    auto i = to_int(s);
    if (!i) bad_value(key, "a list of integers");
    out.push_back(*i);
  }
  return out;
}

std::optional<std::vector<std::string>> ConfigFile::get_string_list(const std::string& key) const {
  const auto* v = find(key);
  if (!v) return std::nullopt;
  return v->items;
}

}  // namespace didkit
