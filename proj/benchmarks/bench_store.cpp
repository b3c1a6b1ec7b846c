#include <benchmark/benchmark.h>

#include <filesystem>
#include <unistd.h>

#include "vpt/embedding_store.hpp"
#include "vpt/experts.hpp"

namespace fs = std::filesystem;

namespace {

fs::path
scratch(const std::string& name)
{
  return fs::temp_directory_path() / ("vpt_bench_" + std::to_string(::getpid()) + "_" + name);
}

std::vector<vpt::EmbeddingRecord>
make_records(std::size_t n, std::size_t dim)
{
  std::vector<vpt::EmbeddingRecord> recs;
  recs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    recs.push_back(vpt::to_record("rec" + std::to_string(i),
                                  vpt::stub_encode_text(std::to_string(i), dim)));
  }
  return recs;
}

void
BM_StoreWrite(benchmark::State& state)
{
  const auto compression = static_cast<vpt::Compression>(state.range(1));
  const auto recs = make_records(static_cast<std::size_t>(state.range(0)), 768);
  const auto path = scratch("write");
  for (auto _ : state) {
    benchmark::DoNotOptimize(vpt::write_store(recs, path, compression));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
  fs::remove(path);
}
BENCHMARK(BM_StoreWrite)->Args({1000, 0})->Args({1000, 1})->Unit(benchmark::kMillisecond);

void
BM_StoreRandomGet(benchmark::State& state)
{
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto path = scratch("get");
  vpt::write_store(make_records(n, 768), path, vpt::Compression::none);
  const vpt::StoreReader reader(path);
  std::uint64_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(reader.get_by_key("rec" + std::to_string(i % n)));
    i += 7919;
  }
  state.SetItemsProcessed(state.iterations());
  fs::remove(path);
}
BENCHMARK(BM_StoreRandomGet)->Arg(10000);

} // namespace

BENCHMARK_MAIN();
