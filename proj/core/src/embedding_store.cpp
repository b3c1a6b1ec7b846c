#include "vpt/embedding_store.hpp"

#include <algorithm>
#include <bit>
#include <cerrno>
#include <cstring>
#include <ostream>
#include <unordered_set>

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>
#include <zlib.h>

#include "vpt/atomic_file.hpp"
#include "vpt/errors.hpp"
#include "vpt/hashing.hpp"

namespace vpt {

namespace {

constexpr char kHeaderMagic[4] = {'V', 'P', 'T', 'S'};
constexpr char kFooterMagic[4] = {'S', 'P', 'T', 'V'};

class ByteWriter
{
public:
  void u8(std::uint8_t v) { m_buf.push_back(v); }
  void u16(std::uint16_t v) { put_le(v, 2); }
  void u32(std::uint32_t v) { put_le(v, 4); }
  void u64(std::uint64_t v) { put_le(v, 8); }
  void bytes(std::span<const std::uint8_t> b) { m_buf.insert(m_buf.end(), b.begin(), b.end()); }
  void text(std::string_view s)
  {
    bytes(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
  }

  std::vector<std::uint8_t>& buffer() { return m_buf; }

private:
  void put_le(std::uint64_t v, int n)
  {
    for (int i = 0; i < n; ++i) {
      m_buf.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
  }

  std::vector<std::uint8_t> m_buf;
};

class ByteReader
{
public:
  ByteReader(std::span<const std::uint8_t> data, std::uint64_t record) : m_data(data), m_record(record) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get_le(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get_le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get_le(4)); }
  std::uint64_t u64() { return get_le(8); }

  std::span<const std::uint8_t> bytes(std::uint64_t n)
  {
    need(n);
    auto out = m_data.subspan(m_pos, n);
    m_pos += n;
    return out;
  }

  std::size_t position() const noexcept { return m_pos; }
  std::size_t remaining() const noexcept { return m_data.size() - m_pos; }

private:
  void need(std::uint64_t n) const
  {
    if (n > remaining()) {
      throw CorruptionError("record " + std::to_string(m_record) + " is truncated");
    }
  }

  std::uint64_t get_le(int n)
  {
    need(static_cast<std::uint64_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) {
      v |= static_cast<std::uint64_t>(m_data[m_pos + i]) << (8 * i);
    }
    m_pos += static_cast<std::size_t>(n);
    return v;
  }

  std::span<const std::uint8_t> m_data;
  std::uint64_t m_record;
  std::size_t m_pos = 0;
};

std::uint64_t
read_u64_le(const std::uint8_t* p)
{
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  }
  return v;
}

std::uint32_t
read_u32_le(const std::uint8_t* p)
{
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8)
         | (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::vector<std::uint8_t>
floats_to_le(const std::vector<float>& values)
{
  std::vector<std::uint8_t> out(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(values[i]);
    out[4 * i + 0] = static_cast<std::uint8_t>(bits);
    out[4 * i + 1] = static_cast<std::uint8_t>(bits >> 8);
    out[4 * i + 2] = static_cast<std::uint8_t>(bits >> 16);
    out[4 * i + 3] = static_cast<std::uint8_t>(bits >> 24);
  }
  return out;
}

std::vector<float>
le_to_floats(std::span<const std::uint8_t> bytes)
{
  std::vector<float> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::bit_cast<float>(read_u32_le(bytes.data() + 4 * i));
  }
  return out;
}

std::vector<std::uint8_t>
deflate_bytes(const std::vector<std::uint8_t>& raw)
{
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> out(bound);
  const int rc = compress2(out.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6);
  if (rc != Z_OK) {
    throw IoError("deflate failed with zlib code " + std::to_string(rc));
  }
  out.resize(bound);
  return out;
}

std::vector<std::uint8_t>
inflate_bytes(std::span<const std::uint8_t> packed, std::uint64_t raw_size, std::uint64_t record)
{
  std::vector<std::uint8_t> out(raw_size);
  uLongf len = static_cast<uLongf>(raw_size);
  const int rc = uncompress(out.data(), &len, packed.data(), static_cast<uLong>(packed.size()));
  if (rc != Z_OK || len != raw_size) {
    throw CorruptionError("record " + std::to_string(record) + ": inflate failed");
  }
  return out;
}

std::uint64_t
slot_capacity(std::uint64_t count)
{
  return std::bit_ceil(std::max<std::uint64_t>(1, 2 * count));
}

struct IndexEntry
{
  std::uint64_t offset = 0;
  std::uint64_t length = 0;
  std::uint64_t key_hash = 0;
};

std::vector<std::uint8_t>
encode_header(Compression compression, std::uint64_t count)
{
  ByteWriter w;
  w.text(std::string_view(kHeaderMagic, 4));
  w.u32(kStoreFormatVersion);
  w.u8(static_cast<std::uint8_t>(compression));
  w.u64(count);
  return std::move(w.buffer());
}

std::vector<std::uint8_t>
encode_index(const std::vector<IndexEntry>& entries)
{
  ByteWriter w;
  for (const auto& e : entries) {
    w.u64(e.offset);
    w.u64(e.length);
    w.u64(e.key_hash);
  }
  const std::uint64_t cap = slot_capacity(entries.size());
  std::vector<std::uint64_t> slots(cap, 0);
  for (std::uint64_t i = 0; i < entries.size(); ++i) {
    std::uint64_t s = entries[i].key_hash & (cap - 1);
    while (slots[s] != 0) {
      s = (s + 1) & (cap - 1);
    }
    slots[s] = i + 1;
  }
  w.u64(cap);
  for (auto s : slots) {
    w.u64(s);
  }
  return std::move(w.buffer());
}

std::string
io_error_text()
{
  return std::strerror(errno);
}

void
pread_exact(int fd, std::uint8_t* dst, std::uint64_t n, std::uint64_t offset,
            const std::filesystem::path& path)
{
  std::uint64_t done = 0;
  while (done < n) {
    const ssize_t r = ::pread(fd, dst + done, n - done, static_cast<off_t>(offset + done));
    if (r < 0) {
      if (errno == EINTR) {
        continue;
      }
      throw IoError("failed to read " + path.string() + ": " + io_error_text());
    }
    if (r == 0) {
      throw CorruptionError(path.string() + ": unexpected end of file");
    }
    done += static_cast<std::uint64_t>(r);
  }
}

} // namespace

std::string_view
to_string(Modality m) noexcept
{
  switch (m) {
  case Modality::frame:
    return "frame";
  case Modality::caption:
    return "caption";
  case Modality::scene_graph:
    return "scene_graph";
  case Modality::question:
    return "question";
  case Modality::tensor:
    return "tensor";
  case Modality::metadata:
    return "metadata";
  }
  return "unknown";
}

std::string_view
to_string(Compression c) noexcept
{
  return c == Compression::deflate ? "deflate" : "none";
}

Compression
parse_compression(std::string_view name)
{
  if (name == "none") {
    return Compression::none;
  }
  if (name == "deflate") {
    return Compression::deflate;
  }
  throw ArgumentError("unknown compression \"" + std::string(name) + "\" (none|deflate)");
}

std::uint64_t
EmbeddingArray::element_count() const noexcept
{
  std::uint64_t n = 1;
  for (auto d : shape) {
    n *= d;
  }
  return n;
}

std::vector<std::uint8_t>
encode_record(const EmbeddingRecord& record, Compression compression)
{
  if (record.key.size() > 0xFFFF) {
    throw ValidationError("record key longer than 65535 bytes");
  }
  if (record.arrays.size() > 0xFFFF) {
    throw ValidationError("record \"" + record.key + "\" has more than 65535 arrays");
  }
  ByteWriter w;
  w.u16(static_cast<std::uint16_t>(record.key.size()));
  w.text(record.key);
  w.u16(static_cast<std::uint16_t>(record.arrays.size()));
  for (const auto& a : record.arrays) {
    if (a.shape.size() > 0xFF) {
      throw ValidationError("record \"" + record.key + "\" has an array of rank > 255");
    }
    if (a.element_count() != a.values.size()) {
      throw ValidationError("record \"" + record.key + "\": payload length does not match shape");
    }
    w.u8(static_cast<std::uint8_t>(a.modality));
    w.u8(static_cast<std::uint8_t>(a.shape.size()));
    for (auto d : a.shape) {
      w.u32(d);
    }
    auto raw = floats_to_le(a.values);
    if (compression == Compression::deflate) {
      raw = deflate_bytes(raw);
    }
    w.u64(raw.size());
    w.bytes(raw);
  }
  const auto crc = crc32(w.buffer());
  w.u32(crc);
  return std::move(w.buffer());
}

EmbeddingRecord
decode_record(std::span<const std::uint8_t> bytes, Compression compression,
              std::uint64_t record_index)
{
  if (bytes.size() < 4) {
    throw CorruptionError("record " + std::to_string(record_index) + " is truncated");
  }
  const auto body = bytes.first(bytes.size() - 4);
  const std::uint32_t stored = read_u32_le(bytes.data() + body.size());
  if (crc32(body) != stored) {
    throw CorruptionError("record " + std::to_string(record_index) + ": CRC mismatch");
  }

  ByteReader r(body, record_index);
  EmbeddingRecord rec;
  const auto key_len = r.u16();
  const auto key = r.bytes(key_len);
  rec.key.assign(reinterpret_cast<const char*>(key.data()), key.size());
  const auto n_arrays = r.u16();
  rec.arrays.reserve(n_arrays);
  for (std::uint16_t i = 0; i < n_arrays; ++i) {
    EmbeddingArray a;
    const auto tag = r.u8();
    if (tag > static_cast<std::uint8_t>(Modality::metadata)) {
      throw CorruptionError("record " + std::to_string(record_index) + ": unknown modality tag");
    }
    a.modality = static_cast<Modality>(tag);
    const auto rank = r.u8();
    a.shape.resize(rank);
    for (auto& d : a.shape) {
      d = r.u32();
    }
    const auto payload_len = r.u64();
    const auto payload = r.bytes(payload_len);
    const std::uint64_t raw_len = a.element_count() * 4;
    if (compression == Compression::deflate) {
      a.values = le_to_floats(inflate_bytes(payload, raw_len, record_index));
    } else {
      if (payload_len != raw_len) {
        throw CorruptionError("record " + std::to_string(record_index)
                              + ": payload length does not match shape");
      }
      a.values = le_to_floats(payload);
    }
    rec.arrays.push_back(std::move(a));
  }
  if (r.remaining() != 0) {
    throw CorruptionError("record " + std::to_string(record_index) + ": trailing bytes");
  }
  return rec;
}

// -- writer ------------------------------------------------------------------

struct StoreWriter::Impl
{
  Impl(std::filesystem::path p, Compression c) : file(std::move(p)), compression(c) {}

  AtomicFile file;
  Compression compression;
  std::vector<IndexEntry> entries;
  std::unordered_set<std::string> keys;
  bool prepared = false;
};

StoreWriter::StoreWriter(std::filesystem::path path, Compression compression)
  : m_impl(std::make_unique<Impl>(std::move(path), compression))
{
  m_impl->file.write(encode_header(compression, 0));
}

StoreWriter::~StoreWriter() = default;

void
StoreWriter::add(const EmbeddingRecord& record)
{
  if (m_impl->prepared) {
    throw Error("StoreWriter::add after prepare()");
  }
  if (!m_impl->keys.insert(record.key).second) {
    throw ValidationError("duplicate record key \"" + record.key + "\"");
  }
  const auto bytes = encode_record(record, m_impl->compression);
  m_impl->entries.push_back({m_impl->file.size(), bytes.size(), fnv1a64(record.key)});
  m_impl->file.write(bytes);
}

std::uint64_t
StoreWriter::count() const noexcept
{
  return m_impl->entries.size();
}

std::filesystem::path
StoreWriter::prepare()
{
  auto& im = *m_impl;
  if (!im.prepared) {
    const auto header = encode_header(im.compression, im.entries.size());
    const auto index = encode_index(im.entries);
    const std::uint64_t index_offset = im.file.size();

    std::uint32_t crc = crc32(header);
    crc = crc32_update(crc, index);

    ByteWriter footer;
    footer.u64(index_offset);
    footer.u32(crc);
    footer.text(std::string_view(kFooterMagic, 4));

    im.file.write(index);
    im.file.write(footer.buffer());
    im.file.write_at(0, header);
    im.file.prepare();
    im.prepared = true;
  }
  return im.file.temp_path();
}

StoreSummary
StoreWriter::commit()
{
  prepare();
  m_impl->file.commit();
  StoreSummary s;
  s.path = m_impl->file.path();
  s.record_count = m_impl->entries.size();
  s.file_bytes = m_impl->file.size();
  s.compression = m_impl->compression;
  return s;
}

StoreSummary
write_store(std::span<const EmbeddingRecord> records, const std::filesystem::path& path,
            Compression compression)
{
  StoreWriter w(path, compression);
  for (const auto& r : records) {
    w.add(r);
  }
  return w.commit();
}

// -- reader ------------------------------------------------------------------

struct StoreReader::Impl
{
  std::filesystem::path path;
  int fd = -1;
  std::uint32_t version = 0;
  Compression compression = Compression::none;
  std::vector<IndexEntry> entries;
  std::vector<std::uint64_t> slots;
  mutable std::atomic<std::uint64_t> bytes_read{0};

  ~Impl()
  {
    if (fd >= 0) {
      ::close(fd);
    }
  }

  std::vector<std::uint8_t> read_extent(std::uint64_t index) const
  {
    const auto& e = entries[index];
    std::vector<std::uint8_t> buf(e.length);
    pread_exact(fd, buf.data(), e.length, e.offset, path);
    bytes_read.fetch_add(kStoreIndexEntryBytes + e.length, std::memory_order_relaxed);
    return buf;
  }
};

StoreReader::StoreReader(const std::filesystem::path& path) : m_impl(std::make_unique<Impl>())
{
  auto& im = *m_impl;
  im.path = path;
  im.fd = ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
  if (im.fd < 0) {
    throw IoError("cannot open store " + path.string() + ": " + io_error_text());
  }
  struct stat st{};
  if (::fstat(im.fd, &st) != 0) {
    throw IoError("cannot stat store " + path.string() + ": " + io_error_text());
  }
  const auto file_size = static_cast<std::uint64_t>(st.st_size);
  const auto corrupt = [&](const std::string& why) {
    return CorruptionError(path.string() + ": " + why);
  };
  if (file_size < kStoreHeaderBytes + kStoreFooterBytes) {
    throw corrupt("file too small to be a store");
  }

  std::uint8_t header[kStoreHeaderBytes];
  std::uint8_t footer[kStoreFooterBytes];
  pread_exact(im.fd, header, kStoreHeaderBytes, 0, path);
  pread_exact(im.fd, footer, kStoreFooterBytes, file_size - kStoreFooterBytes, path);

  if (std::memcmp(header, kHeaderMagic, 4) != 0) {
    throw corrupt("bad header magic");
  }
  if (std::memcmp(footer + 12, kFooterMagic, 4) != 0) {
    throw corrupt("bad footer magic");
  }
  im.version = read_u32_le(header + 4);
  if (im.version != kStoreFormatVersion) {
    throw corrupt("unsupported format version " + std::to_string(im.version));
  }
  const auto tag = header[8];
  if (tag > static_cast<std::uint8_t>(Compression::deflate)) {
    throw corrupt("unknown compression tag");
  }
  im.compression = static_cast<Compression>(tag);
  const std::uint64_t count = read_u64_le(header + 9);
  const std::uint64_t index_offset = read_u64_le(footer);
  const std::uint32_t stored_crc = read_u32_le(footer + 8);

  const std::uint64_t index_end = file_size - kStoreFooterBytes;
  if (index_offset < kStoreHeaderBytes || index_offset > index_end) {
    throw corrupt("index offset out of range");
  }
  const std::uint64_t index_len = index_end - index_offset;
  if (count > index_len / kStoreIndexEntryBytes) {
    throw corrupt("record count inconsistent with index size");
  }
  std::vector<std::uint8_t> index(index_len);
  pread_exact(im.fd, index.data(), index_len, index_offset, path);

  std::uint32_t crc = crc32(std::span<const std::uint8_t>(header, kStoreHeaderBytes));
  crc = crc32_update(crc, index);
  if (crc != stored_crc) {
    throw corrupt("header/index CRC mismatch");
  }

  const std::uint64_t cap = slot_capacity(count);
  if (index_len != count * kStoreIndexEntryBytes + 8 + cap * 8) {
    throw corrupt("index size inconsistent with record count");
  }
  im.entries.resize(count);
  std::uint64_t prev_end = kStoreHeaderBytes;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto* p = index.data() + i * kStoreIndexEntryBytes;
    auto& e = im.entries[i];
    e.offset = read_u64_le(p);
    e.length = read_u64_le(p + 8);
    e.key_hash = read_u64_le(p + 16);
    if (e.offset < prev_end || e.length == 0 || e.offset + e.length > index_offset) {
      throw corrupt("record " + std::to_string(i) + " has an invalid extent");
    }
    prev_end = e.offset + e.length;
  }
  const auto* table = index.data() + count * kStoreIndexEntryBytes;
  if (read_u64_le(table) != cap) {
    throw corrupt("slot table capacity mismatch");
  }
  im.slots.resize(cap);
  for (std::uint64_t s = 0; s < cap; ++s) {
    im.slots[s] = read_u64_le(table + 8 + s * 8);
    if (im.slots[s] > count) {
      throw corrupt("slot table references a missing record");
    }
  }
}

StoreReader::~StoreReader() = default;

std::uint64_t
StoreReader::count() const noexcept
{
  return m_impl->entries.size();
}

Compression
StoreReader::compression() const noexcept
{
  return m_impl->compression;
}

std::uint32_t
StoreReader::version() const noexcept
{
  return m_impl->version;
}

const std::filesystem::path&
StoreReader::path() const noexcept
{
  return m_impl->path;
}

EmbeddingRecord
StoreReader::get(std::uint64_t index) const
{
  if (index >= count()) {
    throw RangeError("store index " + std::to_string(index) + " out of range [0, "
                     + std::to_string(count()) + ")");
  }
  const auto bytes = m_impl->read_extent(index);
  return decode_record(bytes, m_impl->compression, index);
}

std::optional<std::uint64_t>
StoreReader::find(std::string_view key) const
{
  const auto& im = *m_impl;
  const std::uint64_t cap = im.slots.size();
  const std::uint64_t h = fnv1a64(key);
  for (std::uint64_t probe = 0, s = h & (cap - 1); probe < cap; ++probe, s = (s + 1) & (cap - 1)) {
    const std::uint64_t slot = im.slots[s];
    if (slot == 0) {
      return std::nullopt;
    }
    const std::uint64_t idx = slot - 1;
    if (im.entries[idx].key_hash != h) {
      continue;
    }
    // Hash match: confirm against the stored key.
    const auto bytes = im.read_extent(idx);
    if (bytes.size() < 2) {
      throw CorruptionError("record " + std::to_string(idx) + " is truncated");
    }
    const std::size_t key_len = static_cast<std::size_t>(bytes[0]) | (static_cast<std::size_t>(bytes[1]) << 8);
    if (2 + key_len <= bytes.size()
        && std::string_view(reinterpret_cast<const char*>(bytes.data() + 2), key_len) == key) {
      return idx;
    }
  }
  return std::nullopt;
}

EmbeddingRecord
StoreReader::get_by_key(std::string_view key) const
{
  const auto idx = find(key);
  if (!idx) {
    throw NotFoundError("key \"" + std::string(key) + "\" not found in " + path().string());
  }
  return get(*idx);
}

std::pair<std::uint64_t, std::uint64_t>
StoreReader::extent(std::uint64_t index) const
{
  if (index >= count()) {
    throw RangeError("store index " + std::to_string(index) + " out of range");
  }
  return {m_impl->entries[index].offset, m_impl->entries[index].length};
}

std::uint64_t
StoreReader::bytes_read() const noexcept
{
  return m_impl->bytes_read.load(std::memory_order_relaxed);
}

void
StoreReader::reset_bytes_read() noexcept
{
  m_impl->bytes_read.store(0, std::memory_order_relaxed);
}

// -- batching ----------------------------------------------------------------

std::vector<std::vector<std::uint64_t>>
plan_batches(std::uint64_t count, std::size_t batch_size, std::uint64_t seed, std::uint64_t epoch)
{
  if (batch_size == 0) {
    throw ArgumentError("batch_size must be >= 1");
  }
  const auto perm = seeded_permutation(static_cast<std::size_t>(count), seed, epoch);
  std::vector<std::vector<std::uint64_t>> plan;
  for (std::size_t i = 0; i < perm.size(); i += batch_size) {
    const std::size_t end = std::min(perm.size(), i + batch_size);
    plan.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(i),
                      perm.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return plan;
}

BatchIterator::BatchIterator(const StoreReader& store, std::size_t batch_size, std::uint64_t seed,
                             std::uint64_t epoch)
  : m_store(&store), m_plan(plan_batches(store.count(), batch_size, seed, epoch))
{
}

std::optional<std::vector<EmbeddingRecord>>
BatchIterator::next()
{
  if (m_pos >= m_plan.size()) {
    return std::nullopt;
  }
  std::vector<EmbeddingRecord> batch;
  batch.reserve(m_plan[m_pos].size());
  for (auto idx : m_plan[m_pos]) {
    batch.push_back(m_store->get(idx));
  }
  ++m_pos;
  return batch;
}

BatchIterator
iterate_batches(const StoreReader& store, std::size_t batch_size, std::uint64_t seed,
                std::uint64_t epoch)
{
  return BatchIterator(store, batch_size, seed, epoch);
}

void
inspect_store(const StoreReader& store, std::ostream& out, std::size_t max_records)
{
  out << "path: " << store.path().string() << '\n'
      << "magic: VPTS\n"
      << "version: " << store.version() << '\n'
      << "compression: " << to_string(store.compression()) << '\n'
      << "records: " << store.count() << '\n';
  const std::uint64_t n =
    max_records == 0 ? store.count() : std::min<std::uint64_t>(store.count(), max_records);
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto rec = store.get(i);
    const auto [offset, length] = store.extent(i);
    out << '[' << i << "] key=" << rec.key << " offset=" << offset << " bytes=" << length;
    for (const auto& a : rec.arrays) {
      out << ' ' << to_string(a.modality) << '[';
      for (std::size_t d = 0; d < a.shape.size(); ++d) {
        out << (d ? "," : "") << a.shape[d];
      }
      out << ']';
    }
    out << '\n';
  }
  if (n < store.count()) {
    out << "... " << (store.count() - n) << " more\n";
  }
}

} // namespace vpt
