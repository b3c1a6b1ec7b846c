#pragma once

// Binary store for ragged multimodal embedding records.
//
// Layout (all integers little-endian):
//
//   header   "VPTS" | version u32 = 1 | compression u8 | record count u64
//   records  back to back, see below
//   index    count x (offset u64, length u64, key hash u64)
//            table capacity u64 | capacity x slot u64
//   footer   index offset u64 | CRC32(header + index) u32 | "SPTV"
//
// Record: key length u16, key bytes, array count u16, then per array
// modality u8, rank u8, rank x dim u32, payload length u64, payload; the
// record ends with a CRC32 over all of its preceding bytes.
//
// Payloads are f32 little-endian, optionally zlib/deflate compressed. Key
// hashes are FNV-1a 64; the slot table is open addressed with linear
// probing, slot value = record index + 1, 0 = empty.

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vpt {

enum class Modality : std::uint8_t
{
  frame = 0,
  caption = 1,
  scene_graph = 2,
  question = 3,
  tensor = 4,
  metadata = 5,
};

std::string_view to_string(Modality m) noexcept;

enum class Compression : std::uint8_t
{
  none = 0,
  deflate = 1,
};

std::string_view to_string(Compression c) noexcept;
Compression parse_compression(std::string_view name);

struct EmbeddingArray
{
  Modality modality = Modality::frame;
  std::vector<std::uint32_t> shape;
  std::vector<float> values;

  std::uint64_t element_count() const noexcept;
  bool operator==(const EmbeddingArray&) const = default;
};

struct EmbeddingRecord
{
  std::string key;
  std::vector<EmbeddingArray> arrays;

  bool operator==(const EmbeddingRecord&) const = default;
};

struct StoreSummary
{
  std::filesystem::path path;
  std::uint64_t record_count = 0;
  std::uint64_t file_bytes = 0;
  Compression compression = Compression::none;
};

inline constexpr std::uint32_t kStoreFormatVersion = 1;
inline constexpr std::size_t kStoreHeaderBytes = 17;
inline constexpr std::size_t kStoreFooterBytes = 16;
inline constexpr std::size_t kStoreIndexEntryBytes = 24;

// Encodes one record (without index bookkeeping). Exposed for tests and
// benchmarks; throws ValidationError if the record violates the format
// limits or payload/shape agreement.
std::vector<std::uint8_t> encode_record(const EmbeddingRecord& record, Compression compression);
EmbeddingRecord decode_record(std::span<const std::uint8_t> bytes,
                              Compression compression,
                              std::uint64_t record_index);

// Streaming writer. Records are appended to a temporary next to `path`;
// commit() publishes the finished store with an atomic rename.
class StoreWriter
{
public:
  StoreWriter(std::filesystem::path path, Compression compression);
  ~StoreWriter();

  StoreWriter(const StoreWriter&) = delete;
  StoreWriter& operator=(const StoreWriter&) = delete;

  // Throws ValidationError naming the key on duplicates.
  void add(const EmbeddingRecord& record);

  std::uint64_t count() const noexcept;

  // Writes index and footer and syncs the temporary; returns its path.
  // The target path is still untouched afterwards.
  std::filesystem::path prepare();

  StoreSummary commit();

private:
  struct Impl;
  std::unique_ptr<Impl> m_impl;
};

StoreSummary write_store(std::span<const EmbeddingRecord> records,
                         const std::filesystem::path& path,
                         Compression compression);

// Immutable reader. Every accessor is safe to call from many threads.
class StoreReader
{
public:
  // Validates header, footer, index CRC and offsets. Throws
  // CorruptionError or IoError.
  explicit StoreReader(const std::filesystem::path& path);
  ~StoreReader();

  StoreReader(const StoreReader&) = delete;
  StoreReader& operator=(const StoreReader&) = delete;

  std::uint64_t count() const noexcept;
  Compression compression() const noexcept;
  std::uint32_t version() const noexcept;
  const std::filesystem::path& path() const noexcept;

  // One index lookup plus one read of the record extent. Throws
  // RangeError for index >= count, CorruptionError on CRC mismatch.
  EmbeddingRecord get(std::uint64_t index) const;

  std::optional<std::uint64_t> find(std::string_view key) const;

  // Throws NotFoundError for absent keys.
  EmbeddingRecord get_by_key(std::string_view key) const;

  // Byte offset and length of a record's extent within the file.
  std::pair<std::uint64_t, std::uint64_t> extent(std::uint64_t index) const;

  // Bytes of index entries and record extents touched by get()/find()
  // since construction or the last reset.
  std::uint64_t bytes_read() const noexcept;
  void reset_bytes_read() noexcept;

private:
  struct Impl;
  std::unique_ptr<Impl> m_impl;
};

// Shuffled, chunked access to all records. The order is the permutation
// seeded by (seed, epoch); the final batch may be short.
std::vector<std::vector<std::uint64_t>> plan_batches(std::uint64_t count,
                                                     std::size_t batch_size,
                                                     std::uint64_t seed,
                                                     std::uint64_t epoch);

class BatchIterator
{
public:
  BatchIterator(const StoreReader& store, std::size_t batch_size, std::uint64_t seed,
                std::uint64_t epoch);

  // Next batch, or nullopt after the last one.
  std::optional<std::vector<EmbeddingRecord>> next();

  std::size_t batch_count() const noexcept { return m_plan.size(); }

private:
  const StoreReader* m_store;
  std::vector<std::vector<std::uint64_t>> m_plan;
  std::size_t m_pos = 0;
};

BatchIterator iterate_batches(const StoreReader& store, std::size_t batch_size,
                              std::uint64_t seed, std::uint64_t epoch);

// Human-readable dump: header fields, count, per-record shapes. Prints at
// most `max_records` records (0 = all).
void inspect_store(const StoreReader& store, std::ostream& out, std::size_t max_records = 0);

} // namespace vpt
