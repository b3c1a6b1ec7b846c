#include <benchmark/benchmark.h>

#include "vpt/backbone.hpp"
#include "vpt/experts.hpp"
#include "vpt/tokenizer.hpp"

namespace {

vpt::ModelConfig
config(std::size_t d)
{
  vpt::ModelConfig c;
  c.d_model = d;
  c.n_heads = 8;
  c.d_ff = 4 * d / 3;
  return c;
}

vpt::FusedInput
input(std::size_t d)
{
  const std::vector<vpt::Embedding> frames{vpt::stub_encode_frame("v", 1.0, d)};
  return vpt::fuse(frames, vpt::stub_encode_text("caption", d),
                   vpt::stub_encode_text("graph", d, 0, vpt::Modality::scene_graph));
}

void
BM_ExampleLoss(benchmark::State& state)
{
  const auto d = static_cast<std::size_t>(state.range(0));
  const vpt::Backbone model(config(d), 0);
  const auto in = input(d);
  const auto target = vpt::tokenize("the quick brown fox jumps over the lazy dog", 64);
  for (auto _ : state) {
    benchmark::DoNotOptimize(vpt::example_loss(model, in, target));
  }
}
BENCHMARK(BM_ExampleLoss)->Arg(128)->Arg(768)->Unit(benchmark::kMillisecond);

void
BM_ForwardBackward(benchmark::State& state)
{
  const auto d = static_cast<std::size_t>(state.range(0));
  vpt::Backbone model(config(d), 0);
  const auto in = input(d);
  const auto target = vpt::tokenize("the quick brown fox jumps over the lazy dog", 64);
  for (auto _ : state) {
    model.params().zero_grad();
    benchmark::DoNotOptimize(vpt::accumulate_example_gradients(model, in, target, 1.0));
  }
}
BENCHMARK(BM_ForwardBackward)->Arg(128)->Arg(768)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
