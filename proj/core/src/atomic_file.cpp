#include "vpt/atomic_file.hpp"

#include <atomic>
#include <cerrno>
#include <cstring>
#include <string>

#include <fcntl.h>
#include <unistd.h>

#include "vpt/errors.hpp"

namespace vpt {

namespace {

std::atomic<std::uint64_t> g_tmp_counter{0};

std::string
errno_text()
{
  return std::strerror(errno);
}

void
fsync_directory(const std::filesystem::path& dir)
{
  const auto d = dir.empty() ? std::filesystem::path(".") : dir;
  const int fd = ::open(d.c_str(), O_RDONLY | O_DIRECTORY);
  if (fd < 0) {
    return;
  }
  ::fsync(fd);
  ::close(fd);
}

} // namespace

AtomicFile::AtomicFile(std::filesystem::path path) : m_path(std::move(path))
{
  for (int attempt = 0; attempt < 16; ++attempt) {
    m_tmp_path = m_path;
    m_tmp_path += ".tmp." + std::to_string(::getpid()) + "."
                  + std::to_string(g_tmp_counter.fetch_add(1));
    m_fd = ::open(m_tmp_path.c_str(), O_WRONLY | O_CREAT | O_EXCL | O_CLOEXEC, 0644);
    if (m_fd >= 0 || errno != EEXIST) {
      break;
    }
  }
  if (m_fd < 0) {
    throw IoError("failed to create temporary file " + m_tmp_path.string() + ": "
                  + errno_text());
  }
}

AtomicFile::~AtomicFile()
{
  if (m_fd >= 0) {
    ::close(m_fd);
  }
  if (!m_committed) {
    std::error_code ec;
    std::filesystem::remove(m_tmp_path, ec);
  }
}

void
AtomicFile::write(std::span<const std::uint8_t> bytes)
{
  if (m_fd < 0) {
    throw IoError("write to closed temporary " + m_tmp_path.string());
  }
  const std::uint8_t* p = bytes.data();
  std::size_t left = bytes.size();
  while (left > 0) {
    const ssize_t n = ::write(m_fd, p, left);
    if (n < 0) {
      if (errno == EINTR) {
        continue;
      }
      throw IoError("failed to write " + m_tmp_path.string() + ": " + errno_text());
    }
    p += n;
    left -= static_cast<std::size_t>(n);
  }
  m_size += bytes.size();
}

void
AtomicFile::write(std::string_view text)
{
  write(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void
AtomicFile::write_at(std::uint64_t offset, std::span<const std::uint8_t> bytes)
{
  if (m_fd < 0 || offset + bytes.size() > m_size) {
    throw IoError("write_at outside written region of " + m_tmp_path.string());
  }
  std::size_t done = 0;
  while (done < bytes.size()) {
    const ssize_t n = ::pwrite(m_fd, bytes.data() + done, bytes.size() - done,
                               static_cast<off_t>(offset + done));
    if (n < 0) {
      if (errno == EINTR) {
        continue;
      }
      throw IoError("failed to write " + m_tmp_path.string() + ": " + errno_text());
    }
    done += static_cast<std::size_t>(n);
  }
}

const std::filesystem::path&
AtomicFile::prepare()
{
  if (m_fd >= 0) {
    std::string failure;
    if (::fsync(m_fd) != 0) {
      failure = errno_text();
    }
    if (::close(m_fd) != 0 && failure.empty()) {
      failure = errno_text();
    }
    m_fd = -1;
    if (!failure.empty()) {
      throw IoError("failed to flush " + m_tmp_path.string() + ": " + failure);
    }
  }
  return m_tmp_path;
}

void
AtomicFile::commit()
{
  if (m_committed) {
    return;
  }
  prepare();
  if (::rename(m_tmp_path.c_str(), m_path.c_str()) != 0) {
    throw IoError("failed to rename " + m_tmp_path.string() + " to " + m_path.string() + ": "
                  + errno_text());
  }
  m_committed = true;
  fsync_directory(m_path.parent_path());
}

void
write_file_atomically(const std::filesystem::path& path, std::string_view content)
{
  AtomicFile f(path);
  f.write(content);
  f.commit();
}

} // namespace vpt
