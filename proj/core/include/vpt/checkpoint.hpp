#pragma once

#include <filesystem>

#include "vpt/backbone.hpp"
#include "vpt/embedding_store.hpp"

namespace vpt {

// Checkpoints reuse the embedding store container. Record "__config__"
// holds a metadata array [d_model, n_heads, n_encoder_layers,
// n_decoder_layers, d_ff, vocab_size, max_target_len, dropout,
// step mod 2^24, step / 2^24]; every parameter is a record
// "param:<name>" with three tensor arrays (value, AdamW m, AdamW v).
// Values are stored as f32, so a reloaded model matches the saved one to
// single precision.
StoreSummary save_checkpoint(const Backbone& model, const std::filesystem::path& path,
                             Compression compression = Compression::none);

// Throws IoError/CorruptionError from the store, ConfigError when the
// stored tensors disagree with the stored config.
Backbone load_checkpoint(const std::filesystem::path& path);

ModelConfig read_checkpoint_config(const StoreReader& store);

} // namespace vpt
