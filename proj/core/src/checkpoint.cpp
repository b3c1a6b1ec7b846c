#include "vpt/checkpoint.hpp"

#include <cmath>

#include "vpt/errors.hpp"

namespace vpt {

namespace {

constexpr const char* kConfigKey = "__config__";
constexpr double kStepRadix = 16777216.0; // 2^24, exact in f32

std::vector<float>
to_f32(const std::vector<double>& v)
{
  return {v.begin(), v.end()};
}

std::vector<std::uint32_t>
shape32(const std::vector<std::size_t>& shape)
{
  return {shape.begin(), shape.end()};
}

} // namespace

StoreSummary
save_checkpoint(const Backbone& model, const std::filesystem::path& path, Compression compression)
{
  const auto& c = model.config();
  const auto step = model.params().step;
  StoreWriter writer(path, compression);

  EmbeddingRecord meta;
  meta.key = kConfigKey;
  meta.arrays.push_back(
    {Modality::metadata,
     {10},
     {static_cast<float>(c.d_model), static_cast<float>(c.n_heads),
      static_cast<float>(c.n_encoder_layers), static_cast<float>(c.n_decoder_layers),
      static_cast<float>(c.d_ff), static_cast<float>(c.vocab_size),
      static_cast<float>(c.max_target_len), static_cast<float>(c.dropout),
      static_cast<float>(std::fmod(static_cast<double>(step), kStepRadix)),
      static_cast<float>(std::floor(static_cast<double>(step) / kStepRadix))}});
  writer.add(meta);

  for (const auto& t : model.params().tensors()) {
    EmbeddingRecord r;
    r.key = "param:" + t.name;
    r.arrays.push_back({Modality::tensor, shape32(t.shape), to_f32(t.value)});
    r.arrays.push_back({Modality::tensor, shape32(t.shape), to_f32(t.m)});
    r.arrays.push_back({Modality::tensor, shape32(t.shape), to_f32(t.v)});
    writer.add(r);
  }
  return writer.commit();
}

ModelConfig
read_checkpoint_config(const StoreReader& store)
{
  const auto meta = store.get_by_key(kConfigKey);
  if (meta.arrays.size() != 1 || meta.arrays[0].values.size() != 10) {
    throw ConfigError("checkpoint config record is malformed");
  }
  const auto& v = meta.arrays[0].values;
  ModelConfig c;
  c.d_model = static_cast<std::size_t>(v[0]);
  c.n_heads = static_cast<std::size_t>(v[1]);
  c.n_encoder_layers = static_cast<std::size_t>(v[2]);
  c.n_decoder_layers = static_cast<std::size_t>(v[3]);
  c.d_ff = static_cast<std::size_t>(v[4]);
  c.vocab_size = static_cast<std::size_t>(v[5]);
  c.max_target_len = static_cast<std::size_t>(v[6]);
  c.dropout = static_cast<double>(v[7]);
  c.validate();
  return c;
}

Backbone
load_checkpoint(const std::filesystem::path& path)
{
  const StoreReader store(path);
  const auto config = read_checkpoint_config(store);
  auto model = Backbone::zeros(config);

  const auto meta = store.get_by_key(kConfigKey);
  model.params().step = static_cast<std::uint64_t>(meta.arrays[0].values[8])
                        + static_cast<std::uint64_t>(meta.arrays[0].values[9])
                            * static_cast<std::uint64_t>(kStepRadix);

  for (auto& t : model.params().tensors()) {
    const auto rec = store.get_by_key("param:" + t.name);
    if (rec.arrays.size() != 3) {
      throw ConfigError("checkpoint tensor " + t.name + " is malformed");
    }
    for (const auto& a : rec.arrays) {
      if (a.shape != shape32(t.shape)) {
        throw ConfigError("checkpoint tensor " + t.name + " has the wrong shape");
      }
    }
    t.value.assign(rec.arrays[0].values.begin(), rec.arrays[0].values.end());
    t.m.assign(rec.arrays[1].values.begin(), rec.arrays[1].values.end());
    t.v.assign(rec.arrays[2].values.begin(), rec.arrays[2].values.end());
  }
  return model;
}

} // namespace vpt
