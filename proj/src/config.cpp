#include "rse/config.hpp"

#include <cerrno>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "rse/error.hpp"

namespace rse {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void parse_fail(const std::string& source, int line, const std::string& msg) {
  std::ostringstream os;
  os << source << ":" << line << ": " << msg;
  throw Error(ErrorCode::ParseError, os.str());
}

}  // namespace

const ConfigEntry* ConfigSection::find(std::string_view key) const {
  for (const auto& e : entries) {
    if (e.key == key) return &e;
  }
  return nullptr;
}

const ConfigSection* ConfigDocument::find(std::string_view name) const {
  for (const auto& s : sections) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

std::vector<const ConfigSection*> ConfigDocument::find_all(std::string_view name) const {
  std::vector<const ConfigSection*> out;
  for (const auto& s : sections) {
    if (s.name == name) out.push_back(&s);
  }
  return out;
}

ConfigDocument parse_config(std::string_view text, const std::string& source) {
  ConfigDocument doc;
  doc.source = source;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string s = trim(std::string_view(raw).substr(0, hash));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']' || s.size() < 3) parse_fail(source, line, "malformed section header");
      ConfigSection sec;
      sec.name = trim(std::string_view(s).substr(1, s.size() - 2));
      sec.line = line;
      doc.sections.push_back(std::move(sec));
      continue;
    }
    if (doc.sections.empty()) parse_fail(source, line, "content before first section");
    auto& sec = doc.sections.back();
    const auto eq = s.find('=');
    if (eq != std::string::npos) {
      ConfigEntry e{trim(std::string_view(s).substr(0, eq)),
                    trim(std::string_view(s).substr(eq + 1)), line};
      if (e.key.empty()) parse_fail(source, line, "empty key");
      if (sec.find(e.key)) parse_fail(source, line, "duplicate key '" + e.key + "'");
      sec.entries.push_back(std::move(e));
      continue;
    }
    ConfigRow row;
    row.line = line;
    std::istringstream fields(s);
    std::string tok;
    while (fields >> tok) row.fields.push_back(tok);
    sec.rows.push_back(std::move(row));
  }
  return doc;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::ConfigInvalid, "cannot open file: " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

ConfigDocument parse_config_file(const std::filesystem::path& path) {
  return parse_config(read_text_file(path), path.string());
}

double to_double(const std::string& text, const std::string& source, int line,
                 std::string_view field) {
  const char* b = text.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(b, &end);
  if (end == b || *end != '\0' || errno == ERANGE) {
    parse_fail(source, line, "field '" + std::string(field) + "': expected a number, got '" +
                                 text + "'");
  }
  return v;
}

long to_long(const std::string& text, const std::string& source, int line,
             std::string_view field) {
  long v = 0;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  const auto [p, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || p != last) {
    parse_fail(source, line, "field '" + std::string(field) + "': expected an integer, got '" +
                                 text + "'");
  }
  return v;
}

bool to_bool(const std::string& text, const std::string& source, int line,
             std::string_view field) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  parse_fail(source, line, "field '" + std::string(field) + "': expected a boolean, got '" +
                               text + "'");
}

std::string format_double(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

}  // namespace rse
