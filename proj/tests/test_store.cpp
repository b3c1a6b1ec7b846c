#include <doctest.h>

#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

#include "test_support.hpp"
#include "vpt/atomic_file.hpp"
#include "vpt/embedding_store.hpp"
#include "vpt/errors.hpp"
#include "vpt/hashing.hpp"

using namespace vpt;
using vpt::testing::TempDir;

namespace {

EmbeddingRecord
ragged_record(const std::string& key, Rng& rng)
{
  EmbeddingRecord r;
  r.key = key;
  const std::size_t arrays = rng.uniform_index(4);
  for (std::size_t a = 0; a < arrays; ++a) {
    EmbeddingArray arr;
    arr.modality = static_cast<Modality>(rng.uniform_index(6));
    const std::size_t rank = rng.uniform_index(3);
    std::size_t n = 1;
    for (std::size_t k = 0; k < rank; ++k) {
      arr.shape.push_back(static_cast<std::uint32_t>(rng.uniform_index(5)));
      n *= arr.shape.back();
    }
    for (std::size_t i = 0; i < n; ++i) {
      arr.values.push_back(static_cast<float>(rng.normal()));
    }
    r.arrays.push_back(std::move(arr));
  }
  return r;
}

std::uint32_t
le32(const std::vector<char>& b, std::size_t at)
{
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) {
    v = (v << 8) | static_cast<unsigned char>(b[at + i]);
  }
  return v;
}

std::uint64_t
le64(const std::vector<char>& b, std::size_t at)
{
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) {
    v = (v << 8) | static_cast<unsigned char>(b[at + i]);
  }
  return v;
}

void
write_bytes(const std::filesystem::path& p, const std::vector<char>& b)
{
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(b.data(), static_cast<std::streamsize>(b.size()));
}

} // namespace

TEST_CASE("empty store")
{
  TempDir dir;
  const auto path = dir / "empty.vpts";
  const auto summary = write_store({}, path, Compression::none);
  CHECK(summary.record_count == 0);
  StoreReader r(path);
  CHECK(r.count() == 0);
  CHECK_THROWS_AS(r.get(0), RangeError);
  CHECK_THROWS_AS(r.get_by_key("x"), NotFoundError);
}

TEST_CASE("file layout")
{
  TempDir dir;
  const auto path = dir / "s.vpts";
  EmbeddingRecord rec{"k", {{Modality::caption, {2}, {0.5f, -1.0f}}}};
  write_store(std::vector<EmbeddingRecord>{rec}, path, Compression::none);
  const auto b = testing::read_bytes(path);

  CHECK(std::string(b.begin(), b.begin() + 4) == "VPTS");
  CHECK(le32(b, 4) == 1);
  CHECK(b[8] == 0);
  CHECK(le64(b, 9) == 1);
  CHECK(std::string(b.end() - 4, b.end()) == "SPTV");

  // Record: u16 key len, key, u16 array count, u8 modality, u8 rank,
  // u32 dim, u64 payload len, payload, u32 crc.
  const std::size_t rec_len = 2 + 1 + 2 + 1 + 1 + 4 + 8 + 8 + 4;
  const std::uint64_t index_offset = le64(b, b.size() - 16);
  CHECK(index_offset == kStoreHeaderBytes + rec_len);
  CHECK(le64(b, index_offset) == kStoreHeaderBytes);
  CHECK(le64(b, index_offset + 8) == rec_len);
  CHECK(b[kStoreHeaderBytes + 5] == static_cast<char>(Modality::caption));
  float first;
  std::memcpy(&first, b.data() + kStoreHeaderBytes + 2 + 1 + 2 + 1 + 1 + 4 + 8, 4);
  CHECK(first == 0.5f);

  const std::vector<std::uint8_t> record_bytes(b.begin() + kStoreHeaderBytes,
                                               b.begin() + kStoreHeaderBytes + rec_len - 4);
  CHECK(le32(b, kStoreHeaderBytes + rec_len - 4) == crc32(record_bytes));
}

TEST_CASE("ragged roundtrip")
{
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const auto rec = ragged_record("r" + std::to_string(i), rng);
    for (auto c : {Compression::none, Compression::deflate}) {
      const auto bytes = encode_record(rec, c);
      CHECK(decode_record(bytes, c, 0) == rec);
    }
  }

  TempDir dir;
  std::vector<EmbeddingRecord> recs;
  for (int i = 0; i < 300; ++i) {
    recs.push_back(ragged_record("key" + std::to_string(i), rng));
  }
  for (auto c : {Compression::none, Compression::deflate}) {
    const auto path = dir / ("s" + std::string(to_string(c)));
    write_store(recs, path, c);
    StoreReader r(path);
    CHECK(r.compression() == c);
    REQUIRE(r.count() == recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
      CHECK(r.get(i) == recs[i]);
      CHECK(r.get_by_key(recs[i].key) == recs[i]);
      CHECK(r.find(recs[i].key) == i);
    }
    CHECK_FALSE(r.find("nope").has_value());
    CHECK_THROWS_AS(r.get(recs.size()), RangeError);
  }
}

TEST_CASE("deflate shrinks constant payloads")
{
  TempDir dir;
  EmbeddingRecord rec{"c", {{Modality::tensor, {262144}, std::vector<float>(262144, 0.25f)}}};
  const auto raw = write_store(std::vector<EmbeddingRecord>{rec}, dir / "raw", Compression::none);
  const auto z = write_store(std::vector<EmbeddingRecord>{rec}, dir / "z", Compression::deflate);
  CHECK(z.file_bytes * 10 < raw.file_bytes);
  CHECK(StoreReader(dir / "z").get(0) == rec);
}

TEST_CASE("duplicate keys are rejected and the target is untouched")
{
  TempDir dir;
  const auto path = dir / "dup.vpts";
  std::vector<EmbeddingRecord> recs{{"same", {}}, {"same", {}}};
  try {
    write_store(recs, path, Compression::none);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("same") != std::string::npos);
  }
  CHECK_FALSE(std::filesystem::exists(path));
  for (const auto& entry : std::filesystem::directory_iterator(dir.path())) {
    FAIL("leftover file " << entry.path());
  }
}

TEST_CASE("bit flips are detected")
{
  TempDir dir;
  const auto path = dir / "s.vpts";
  Rng rng(8);
  std::vector<EmbeddingRecord> recs;
  for (int i = 0; i < 4; ++i) {
    recs.push_back({"k" + std::to_string(i), {{Modality::frame, {4}, {1, 2, 3, 4}}}});
  }
  write_store(recs, path, Compression::none);
  const auto good = testing::read_bytes(path);
  StoreReader probe(path);
  const auto [off, len] = probe.extent(2);

  for (std::uint64_t byte = off; byte < off + len; ++byte) {
    for (int bit : {0, 5}) {
      auto bad = good;
      bad[byte] = static_cast<char>(bad[byte] ^ (1 << bit));
      write_bytes(dir / "bad.vpts", bad);
      StoreReader r(dir / "bad.vpts");
      try {
        (void)r.get(2);
        FAIL("flip at " << byte << " not detected");
      } catch (const CorruptionError& e) {
        CHECK(std::string(e.what()).find("2") != std::string::npos);
      }
      CHECK(r.get(1) == recs[1]);
    }
  }

  // Header and index damage is caught at open.
  for (std::size_t byte : {std::size_t{0}, std::size_t{9}, good.size() - 20, good.size() - 1}) {
    auto bad = good;
    bad[byte] = static_cast<char>(bad[byte] ^ 1);
    write_bytes(dir / "bad.vpts", bad);
    CHECK_THROWS_AS(StoreReader(dir / "bad.vpts"), CorruptionError);
  }
}

TEST_CASE("every truncation is rejected")
{
  TempDir dir;
  const auto path = dir / "s.vpts";
  std::vector<EmbeddingRecord> recs{{"a", {{Modality::frame, {3}, {1, 2, 3}}}},
                                    {"b", {{Modality::caption, {1}, {4}}}}};
  write_store(recs, path, Compression::deflate);
  const auto good = testing::read_bytes(path);
  for (std::size_t cut = 0; cut < good.size(); ++cut) {
    write_bytes(dir / "cut.vpts", std::vector<char>(good.begin(), good.begin() + cut));
    CHECK_THROWS_AS(StoreReader(dir / "cut.vpts"), CorruptionError);
  }
  CHECK_THROWS_AS(StoreReader(dir / "missing.vpts"), IoError);
}

TEST_CASE("writer publishes only on commit")
{
  TempDir dir;
  const auto path = dir / "s.vpts";
  write_store(std::vector<EmbeddingRecord>{{"old", {}}}, path, Compression::none);
  {
    StoreWriter w(path, Compression::none);
    w.add({"new", {}});
    const auto tmp = w.prepare();
    CHECK(std::filesystem::exists(tmp));
    CHECK(StoreReader(path).get(0).key == "old");
    CHECK(StoreReader(tmp).get(0).key == "new");
  }
  CHECK(StoreReader(path).get(0).key == "old");
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path())) {
    ++files;
  }
  CHECK(files == 1);

  StoreWriter w(path, Compression::none);
  w.add({"newer", {}});
  CHECK(w.count() == 1);
  w.commit();
  CHECK(StoreReader(path).get(0).key == "newer");
}

TEST_CASE("bytes read per get are independent of the index")
{
  TempDir dir;
  const auto path = dir / "s.vpts";
  std::vector<EmbeddingRecord> recs;
  for (int i = 0; i < 1000; ++i) {
    char key[16];
    std::snprintf(key, sizeof key, "k%05d", i);
    recs.push_back({key, {{Modality::frame, {8}, std::vector<float>(8, static_cast<float>(i))}}});
  }
  write_store(recs, path, Compression::none);
  StoreReader r(path);
  const auto [off, len] = r.extent(0);
  (void)off;
  for (std::uint64_t i : {0ull, 1ull, 500ull, 999ull}) {
    r.reset_bytes_read();
    (void)r.get(i);
    CHECK(r.bytes_read() == kStoreIndexEntryBytes + len);
  }
}

TEST_CASE("concurrent readers see the same data")
{
  TempDir dir;
  const auto path = dir / "s.vpts";
  Rng rng(1);
  std::vector<EmbeddingRecord> recs;
  for (int i = 0; i < 500; ++i) {
    recs.push_back(ragged_record("c" + std::to_string(i), rng));
  }
  write_store(recs, path, Compression::deflate);
  const StoreReader shared(path);
  std::atomic<int> mismatches{0};
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&, t] {
      Rng local(static_cast<std::uint64_t>(t));
      for (int k = 0; k < 400; ++k) {
        const auto i = local.uniform_index(recs.size());
        if (!(shared.get(i) == recs[i]) || !(shared.get_by_key(recs[i].key) == recs[i])) {
          ++mismatches;
        }
      }
    });
  }
  for (auto& th : threads) {
    th.join();
  }
  CHECK(mismatches == 0);
}

TEST_CASE("batches")
{
  const auto plan = plan_batches(10, 4, 3, 0);
  REQUIRE(plan.size() == 3);
  CHECK(plan[0].size() == 4);
  CHECK(plan[1].size() == 4);
  CHECK(plan[2].size() == 2);
  CHECK(plan == plan_batches(10, 4, 3, 0));
  CHECK(plan != plan_batches(10, 4, 3, 1));

  std::vector<std::uint64_t> all;
  for (const auto& b : plan) {
    all.insert(all.end(), b.begin(), b.end());
  }
  std::sort(all.begin(), all.end());
  for (std::uint64_t i = 0; i < 10; ++i) {
    CHECK(all[i] == i);
  }

  TempDir dir;
  std::vector<EmbeddingRecord> recs;
  for (int i = 0; i < 10; ++i) {
    recs.push_back({"r" + std::to_string(i), {}});
  }
  write_store(recs, dir / "s", Compression::none);
  StoreReader r(dir / "s");
  auto it = iterate_batches(r, 4, 3, 0);
  CHECK(it.batch_count() == 3);
  std::vector<std::size_t> sizes;
  while (auto batch = it.next()) {
    sizes.push_back(batch->size());
  }
  CHECK(sizes == std::vector<std::size_t>{4, 4, 2});
}

TEST_CASE("inspect prints header and shapes")
{
  TempDir dir;
  write_store(std::vector<EmbeddingRecord>{{"img0", {{Modality::frame, {3, 4}, std::vector<float>(12)}}}},
              dir / "s", Compression::deflate);
  StoreReader r(dir / "s");
  std::ostringstream out;
  inspect_store(r, out);
  const auto text = out.str();
  CHECK(text.find("deflate") != std::string::npos);
  CHECK(text.find("img0") != std::string::npos);
  CHECK(text.find("frame[3,4]") != std::string::npos);
}

TEST_CASE("atomic file")
{
  TempDir dir;
  const auto path = dir / "f.txt";
  write_file_atomically(path, "first");
  CHECK(testing::read_text(path) == "first");
  {
    AtomicFile f(path);
    f.write("second");
    CHECK(testing::read_text(path) == "first");
  }
  CHECK(testing::read_text(path) == "first");
  {
    AtomicFile f(path);
    f.write("xxcond");
    const std::uint8_t se[] = {'s', 'e'};
    f.write_at(0, se);
    f.commit();
  }
  CHECK(testing::read_text(path) == "second");
}
