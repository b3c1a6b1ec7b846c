#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>

namespace vpt {

// Writes to a uniquely named temporary file next to `path` and publishes it
// with rename(2). Until commit() succeeds the target path is untouched; a
// destroyed uncommitted AtomicFile unlinks its temporary.
class AtomicFile
{
public:
  explicit AtomicFile(std::filesystem::path path);
  ~AtomicFile();

  AtomicFile(const AtomicFile&) = delete;
  AtomicFile& operator=(const AtomicFile&) = delete;

  void write(std::span<const std::uint8_t> bytes);
  void write(std::string_view text);

  // Overwrite already written bytes; [offset, offset + size) must lie
  // inside what has been written.
  void write_at(std::uint64_t offset, std::span<const std::uint8_t> bytes);

  std::uint64_t size() const noexcept { return m_size; }

  // fsync + close the temporary without renaming. Afterwards the temporary
  // is complete on disk and only commit() or destruction may follow.
  const std::filesystem::path& prepare();

  // prepare() if needed, then rename onto the target and fsync the
  // directory.
  void commit();

  const std::filesystem::path& path() const noexcept { return m_path; }
  const std::filesystem::path& temp_path() const noexcept { return m_tmp_path; }

private:
  std::filesystem::path m_path;
  std::filesystem::path m_tmp_path;
  int m_fd = -1;
  std::uint64_t m_size = 0;
  bool m_committed = false;
};

void write_file_atomically(const std::filesystem::path& path, std::string_view content);

} // namespace vpt
