#include "cdlab/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace cdlab {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool valid_name(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  });
}

std::optional<double> to_double(std::string_view s) {
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace

Config Config::parse(std::string_view text) {
  Config cfg;
  std::string section;
  std::size_t line_no = 0, offset = 0;
  while (offset <= text.size()) {
    const auto nl = text.find('\n', offset);
    const std::size_t end = nl == std::string_view::npos ? text.size() : nl;
    std::string_view line = text.substr(offset, end - offset);
    ++line_no;
    const std::size_t line_start = offset;
    offset = end + 1;

    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const std::string_view body = trim(line);
    if (body.empty()) {
      if (nl == std::string_view::npos) break;
      continue;
    }
    if (body.front() == '[') {
      if (body.back() != ']') throw ConfigError("unterminated section header", line_no, line_start);
      const std::string_view name = trim(body.substr(1, body.size() - 2));
      if (!valid_name(name)) throw ConfigError("invalid section name '" + std::string(name) + "'", line_no, line_start);
      section = std::string(name);
    } else {
      const auto eq = body.find('=');
      if (eq == std::string_view::npos) throw ConfigError("expected 'key = value'", line_no, line_start);
      const std::string_view key = trim(body.substr(0, eq));
      const std::string_view value = trim(body.substr(eq + 1));
      if (!valid_name(key)) throw ConfigError("invalid key '" + std::string(key) + "'", line_no, line_start);
      if (value.empty()) throw ConfigError("missing value for '" + std::string(key) + "'", line_no, line_start);
      std::string full = section.empty() ? std::string(key) : section + "." + std::string(key);
      if (cfg.values_.count(full)) throw ConfigError("duplicate key '" + full + "'", line_no, line_start);
      cfg.where_[full] = {line_no, line_start};
      cfg.values_[std::move(full)] = std::string(value);
    }
    if (nl == std::string_view::npos) break;
  }
  return cfg;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read config file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

bool Config::has(std::string_view key) const { return values_.find(key) != values_.end(); }

std::optional<std::string> Config::raw(std::string_view key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

void Config::fail(std::string_view key, const std::string& what) const {
  const auto it = where_.find(key);
  if (it == where_.end() || it->second.first == 0) {
    throw PreconditionError("option '" + std::string(key) + "': " + what);
  }
  throw ConfigError("'" + std::string(key) + "': " + what, it->second.first, it->second.second);
}

std::string Config::get_string(std::string_view key, std::string_view fallback) const {
  return raw(key).value_or(std::string(fallback));
}

double Config::get_double(std::string_view key, double fallback) const {
  const auto v = raw(key);
  if (!v) return fallback;
  const auto d = to_double(*v);
  if (!d) fail(key, "not a number: '" + *v + "'");
  return *d;
}

long Config::get_int(std::string_view key, long fallback) const {
  const auto v = raw(key);
  if (!v) return fallback;
  long out = 0;
  const auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || p != v->data() + v->size()) fail(key, "not an integer: '" + *v + "'");
  return out;
}

bool Config::get_bool(std::string_view key, bool fallback) const {
  const auto v = raw(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  fail(key, "not a boolean: '" + *v + "'");
}

std::vector<double> Config::get_list(std::string_view key, const std::vector<double>& fallback) const {
  const auto v = raw(key);
  if (!v) return fallback;
  std::vector<double> out;
  std::string_view rest = *v;
  for (;;) {
    const auto comma = rest.find(',');
    const std::string_view item = trim(rest.substr(0, comma));
    const auto d = to_double(item);
    if (!d) fail(key, "bad list element '" + std::string(item) + "'");
    out.push_back(*d);
    if (comma == std::string_view::npos) break;
    rest = rest.substr(comma + 1);
  }
  return out;
}

void Config::set(std::string key, std::string value) {
  where_[key] = {0, 0};
  values_[std::move(key)] = std::move(value);
}

void Config::require_known(const std::vector<std::string>& allowed) const {
  for (const auto& [key, value] : values_) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) fail(key, "unknown option");
  }
}

}  // namespace cdlab
