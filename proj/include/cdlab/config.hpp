#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cdlab/error.hpp"

namespace cdlab {

/// Parse error in configuration text, carrying the 1-based line number.
class ConfigError : public ParseError {
 public:
  ConfigError(const std::string& what, std::size_t line, std::size_t offset)
      : ParseError("line " + std::to_string(line) + ": " + what, offset), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Flat configuration: `key = value` lines grouped under `[section]` headers,
/// `#` starts a comment. Keys are addressed as "section.key"; keys before the
/// first header have no prefix. Values are kept as trimmed text and converted
/// on access.
class Config {
 public:
  static Config parse(std::string_view text);
  /// Throws Error if the file cannot be read.
  static Config load(const std::filesystem::path& path);

  bool has(std::string_view key) const;
  std::optional<std::string> raw(std::string_view key) const;

  std::string get_string(std::string_view key, std::string_view fallback) const;
  double get_double(std::string_view key, double fallback) const;
  long get_int(std::string_view key, long fallback) const;
  bool get_bool(std::string_view key, bool fallback) const;
  /// Comma-separated reals.
  std::vector<double> get_list(std::string_view key, const std::vector<double>& fallback) const;

  /// Sets or replaces a value (command-line overrides have no line number).
  void set(std::string key, std::string value);

  /// Throws ConfigError naming the first key not in `allowed`.
  void require_known(const std::vector<std::string>& allowed) const;

  const std::map<std::string, std::string, std::less<>>& entries() const { return values_; }

 private:
  std::map<std::string, std::string, std::less<>> values_;
  std::map<std::string, std::pair<std::size_t, std::size_t>, std::less<>> where_;  // (line, offset); line 0 for overrides

  [[noreturn]] void fail(std::string_view key, const std::string& what) const;
};

}  // namespace cdlab
