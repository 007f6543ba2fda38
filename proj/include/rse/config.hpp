#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rse {

/// Line-oriented structured text used by grid and scenario files:
///
///   # comment
///   [section]
///   key = value
///   token token token     (table row)
///
/// Comments start at '#' anywhere on a line.
struct ConfigEntry {
  std::string key;
  std::string value;
  int line = 0;
};

struct ConfigRow {
  std::vector<std::string> fields;
  int line = 0;
};

struct ConfigSection {
  std::string name;
  int line = 0;
  std::vector<ConfigEntry> entries;
  std::vector<ConfigRow> rows;

  const ConfigEntry* find(std::string_view key) const;
};

struct ConfigDocument {
  std::string source;
  std::vector<ConfigSection> sections;

  /// First section with the given name, or nullptr.
  const ConfigSection* find(std::string_view name) const;
  std::vector<const ConfigSection*> find_all(std::string_view name) const;
};

ConfigDocument parse_config(std::string_view text, const std::string& source = "<string>");
/// Throws ConfigInvalid if the file cannot be opened.
ConfigDocument parse_config_file(const std::filesystem::path& path);

/// Numeric/field conversions that raise ParseError with source:line context.
double to_double(const std::string& text, const std::string& source, int line,
                 std::string_view field);
long to_long(const std::string& text, const std::string& source, int line,
             std::string_view field);
bool to_bool(const std::string& text, const std::string& source, int line,
             std::string_view field);

/// Formats a double with round-trip precision.
std::string format_double(double v);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace rse
