#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace vpt::cli {

struct ConfigKey
{
  std::string name;
  std::string default_value; // "" means unset
  std::string help;
};

// Command-scoped key/value settings. Layers apply in order: schema
// defaults, then a config file, then flags. Keys outside the schema are
// rejected with ConfigError at every layer.
class RunConfig
{
public:
  RunConfig(std::string command, std::vector<ConfigKey> schema);

  const std::string& command() const noexcept { return m_command; }
  const std::vector<ConfigKey>& schema() const noexcept { return m_schema; }

  // `key = value` lines; '#' starts a comment. Errors name the line.
  void merge_text(std::string_view text, const std::string& origin = "config");
  void merge_file(const std::filesystem::path& path);

  void set(const std::string& key, std::string value, bool explicit_value = true);
  bool is_explicit(const std::string& key) const { return m_explicit.contains(key); }

  bool has(const std::string& key) const; // set and non-empty
  const std::string& get(const std::string& key) const;
  // The typed getters throw ConfigError naming the key on missing or
  // malformed values.
  const std::string& require(const std::string& key) const;
  std::filesystem::path get_path(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  // Config file form, loadable with merge_text.
  std::string render() const;
  // One line of space separated key=value pairs in schema order.
  std::string echo() const;

private:
  std::size_t index_of(const std::string& key) const;

  std::string m_command;
  std::vector<ConfigKey> m_schema;
  std::vector<std::string> m_values;
  std::set<std::string> m_explicit;
};

} // namespace vpt::cli
