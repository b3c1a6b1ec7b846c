#include "vpt_cli/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "vpt/errors.hpp"

namespace vpt::cli {

namespace {

std::string
trim(std::string_view s)
{
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) {
    return {};
  }
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template<class T>
T
parse_number(const std::string& key, const std::string& text)
{
  T v{};
  const auto* end = text.data() + text.size();
  const auto [p, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || p != end) {
    throw ConfigError("config key \"" + key + "\": cannot parse \"" + text + "\"");
  }
  return v;
}

} // namespace

RunConfig::RunConfig(std::string command, std::vector<ConfigKey> schema)
  : m_command(std::move(command)), m_schema(std::move(schema))
{
  for (const auto& k : m_schema) {
    m_values.push_back(k.default_value);
  }
}

std::size_t
RunConfig::index_of(const std::string& key) const
{
  for (std::size_t i = 0; i < m_schema.size(); ++i) {
    if (m_schema[i].name == key) {
      return i;
    }
  }
  throw ConfigError("unknown config key \"" + key + "\" for command " + m_command);
}

void
RunConfig::merge_text(std::string_view text, const std::string& origin)
{
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto hash = line.find('#');
    const auto body = trim(std::string_view(line).substr(0, hash));
    if (body.empty()) {
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(n) + ": expected key = value");
    }
    const auto key = trim(std::string_view(body).substr(0, eq));
    try {
      set(key, trim(std::string_view(body).substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(n) + ": " + e.what());
    }
  }
}

void
RunConfig::merge_file(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot read config file " + path.string());
  }
  std::ostringstream text;
  text << in.rdbuf();
  merge_text(text.str(), path.string());
}

void
RunConfig::set(const std::string& key, std::string value, bool explicit_value)
{
  m_values[index_of(key)] = std::move(value);
  if (explicit_value) {
    m_explicit.insert(key);
  }
}

bool
RunConfig::has(const std::string& key) const
{
  return !m_values[index_of(key)].empty();
}

const std::string&
RunConfig::get(const std::string& key) const
{
  return m_values[index_of(key)];
}

const std::string&
RunConfig::require(const std::string& key) const
{
  const auto& v = get(key);
  if (v.empty()) {
    throw ConfigError("missing required setting \"" + key + "\" for command " + m_command);
  }
  return v;
}

std::filesystem::path
RunConfig::get_path(const std::string& key) const
{
  return require(key);
}

std::size_t
RunConfig::get_size(const std::string& key) const
{
  return parse_number<std::size_t>(key, require(key));
}

std::uint64_t
RunConfig::get_u64(const std::string& key) const
{
  return parse_number<std::uint64_t>(key, require(key));
}

double
RunConfig::get_double(const std::string& key) const
{
  return parse_number<double>(key, require(key));
}

bool
RunConfig::get_bool(const std::string& key) const
{
  const auto& v = require(key);
  if (v == "true" || v == "1" || v == "yes") {
    return true;
  }
  if (v == "false" || v == "0" || v == "no") {
    return false;
  }
  throw ConfigError("config key \"" + key + "\": expected true or false, got \"" + v + "\"");
}

std::string
RunConfig::render() const
{
  std::string out = "# vpt " + m_command + "\n";
  for (std::size_t i = 0; i < m_schema.size(); ++i) {
    out += m_schema[i].name + " = " + m_values[i] + "\n";
  }
  return out;
}

std::string
RunConfig::echo() const
{
  std::string out;
  for (std::size_t i = 0; i < m_schema.size(); ++i) {
    if (i) {
      out += ' ';
    }
    out += m_schema[i].name + "=" + m_values[i];
  }
  return out;
}

} // namespace vpt::cli
