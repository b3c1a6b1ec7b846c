#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vpt/embedding_store.hpp"

namespace vpt {

inline constexpr std::size_t kDefaultExpertDim = 768;
inline constexpr std::uint64_t kDefaultStubSeed = 0;

struct Embedding
{
  std::vector<float> values;
  Modality modality = Modality::caption;

  std::size_t dim() const noexcept { return values.size(); }
  bool operator==(const Embedding&) const = default;
};

// Stacked modality rows in canonical order: frames, caption-or-question,
// scene graph. Ablated modalities are absent rather than zeroed.
struct FusedInput
{
  std::size_t dim = 0;
  std::vector<Modality> row_modalities;
  std::vector<float> values; // row-major [rows, dim]

  std::size_t rows() const noexcept { return row_modalities.size(); }
  std::span<const float> row(std::size_t r) const;
  bool operator==(const FusedInput&) const = default;
};

struct ModalityAblation
{
  bool drop_frames = false;
  bool drop_text = false;
  bool drop_scene_graph = false;
};

// Throws DomainError for the zero vector (or any non-finite norm).
std::vector<float> l2_normalize(std::span<const float> v);

// Deterministic stand-in for a frozen text encoder. The vector is a pure
// function of (text, d, seed):
//   base  = splitmix64(fnv1a64("text:" + text) ^ splitmix64(seed))
//   u_i   = (splitmix64(base + i) >> 40) * 2^-24          i in [0, d)
//   x_i   = float(2 u_i - 1)                               exact in f32
//   out   = float(x_i / sqrt(sum_j x_j^2))                 sum in f64
Embedding stub_encode_text(std::string_view text, std::size_t d = kDefaultExpertDim,
                           std::uint64_t seed = kDefaultStubSeed,
                           Modality modality = Modality::caption);

// Same construction keyed on frame_key(video_id, time_s).
Embedding stub_encode_frame(std::string_view video_id, double time_s,
                            std::size_t d = kDefaultExpertDim,
                            std::uint64_t seed = kDefaultStubSeed);

// Time rounded to the nearest millisecond, then floor-divided into 10 ms
// buckets.
std::int64_t frame_time_bucket(double time_s);

// Manifest keys shared by the stub hash input and precomputed stores.
std::string text_key(std::string_view text);
std::string frame_key(std::string_view video_id, double time_s);

// Reads a single-array record. NotFoundError if absent, ConfigError if the
// stored element count differs from `expected_dim`.
Embedding load_precomputed(const StoreReader& manifest, std::string_view key,
                           std::size_t expected_dim);
Embedding load_precomputed(const std::filesystem::path& manifest, std::string_view key,
                           std::size_t expected_dim);

// Stacks rows. Throws ArgumentError when every modality is ablated and
// ConfigError when dimensions disagree.
FusedInput fuse(std::span<const Embedding> frames, const Embedding& text,
                const std::optional<Embedding>& graph, const ModalityAblation& ablation = {});

double cosine_similarity(std::span<const float> a, std::span<const float> b);

// The frozen expert interface used by example construction.
class ExpertEncoder
{
public:
  virtual ~ExpertEncoder() = default;

  virtual std::size_t dim() const noexcept = 0;
  virtual Embedding encode_text(std::string_view text, Modality modality) const = 0;
  virtual Embedding encode_frame(std::string_view video_id, double time_s) const = 0;
};

class StubEncoder final : public ExpertEncoder
{
public:
  StubEncoder(std::size_t d, std::uint64_t seed);

  std::size_t dim() const noexcept override { return m_dim; }
  std::uint64_t seed() const noexcept { return m_seed; }
  Embedding encode_text(std::string_view text, Modality modality) const override;
  Embedding encode_frame(std::string_view video_id, double time_s) const override;

private:
  std::size_t m_dim;
  std::uint64_t m_seed;
};

// Serves vectors from a store written by the encode/pack stage.
class PrecomputedEncoder final : public ExpertEncoder
{
public:
  PrecomputedEncoder(std::shared_ptr<const StoreReader> manifest, std::size_t d);

  std::size_t dim() const noexcept override { return m_dim; }
  Embedding encode_text(std::string_view text, Modality modality) const override;
  Embedding encode_frame(std::string_view video_id, double time_s) const override;

private:
  std::shared_ptr<const StoreReader> m_manifest;
  std::size_t m_dim;
};

EmbeddingRecord to_record(std::string key, const Embedding& e);

} // namespace vpt
