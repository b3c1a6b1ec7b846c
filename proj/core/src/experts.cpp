#include "vpt/experts.hpp"

#include <cmath>

#include "vpt/errors.hpp"
#include "vpt/hashing.hpp"

namespace vpt {

namespace {

std::vector<float>
stub_vector(std::string_view hash_input, std::size_t d, std::uint64_t seed)
{
  if (d == 0) {
    throw ArgumentError("stub encoder dimension must be >= 1");
  }
  const std::uint64_t base = splitmix64(fnv1a64(hash_input) ^ splitmix64(seed));
  std::vector<float> raw(d);
  for (std::size_t i = 0; i < d; ++i) {
    const std::uint64_t bits = splitmix64(base + i);
    const double u = static_cast<double>(bits >> 40) * 0x1.0p-24;
    raw[i] = static_cast<float>(2.0 * u - 1.0);
  }
  return l2_normalize(raw);
}

} // namespace

std::span<const float>
FusedInput::row(std::size_t r) const
{
  if (r >= rows()) {
    throw RangeError("fused row " + std::to_string(r) + " out of range");
  }
  return std::span<const float>(values).subspan(r * dim, dim);
}

std::vector<float>
l2_normalize(std::span<const float> v)
{
  double sq = 0.0;
  for (float x : v) {
    sq += static_cast<double>(x) * static_cast<double>(x);
  }
  const double norm = std::sqrt(sq);
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw DomainError("l2_normalize: vector has zero or non-finite norm");
  }
  std::vector<float> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = static_cast<float>(static_cast<double>(v[i]) / norm);
  }
  return out;
}

std::string
text_key(std::string_view text)
{
  return "text:" + std::string(text);
}

std::int64_t
frame_time_bucket(double time_s)
{
  const auto ms = static_cast<std::int64_t>(std::llround(time_s * 1000.0));
  // Floor division, also for negative inputs.
  return ms >= 0 ? ms / 10 : -((-ms + 9) / 10);
}

std::string
frame_key(std::string_view video_id, double time_s)
{
  return "frame:" + std::string(video_id) + "@" + std::to_string(frame_time_bucket(time_s));
}

Embedding
stub_encode_text(std::string_view text, std::size_t d, std::uint64_t seed, Modality modality)
{
  return {stub_vector(text_key(text), d, seed), modality};
}

Embedding
stub_encode_frame(std::string_view video_id, double time_s, std::size_t d, std::uint64_t seed)
{
  return {stub_vector(frame_key(video_id, time_s), d, seed), Modality::frame};
}

Embedding
load_precomputed(const StoreReader& manifest, std::string_view key, std::size_t expected_dim)
{
  const auto rec = manifest.get_by_key(key);
  if (rec.arrays.size() != 1) {
    throw ConfigError("precomputed record \"" + std::string(key) + "\" must hold one array");
  }
  const auto& a = rec.arrays.front();
  if (a.values.size() != expected_dim) {
    throw ConfigError("precomputed record \"" + std::string(key) + "\" has dimension "
                      + std::to_string(a.values.size()) + ", configured "
                      + std::to_string(expected_dim));
  }
  return {a.values, a.modality};
}

Embedding
load_precomputed(const std::filesystem::path& manifest, std::string_view key,
                 std::size_t expected_dim)
{
  const StoreReader reader(manifest);
  return load_precomputed(reader, key, expected_dim);
}

FusedInput
fuse(std::span<const Embedding> frames, const Embedding& text,
     const std::optional<Embedding>& graph, const ModalityAblation& ablation)
{
  std::vector<const Embedding*> rows;
  if (!ablation.drop_frames) {
    for (const auto& f : frames) {
      rows.push_back(&f);
    }
  }
  if (!ablation.drop_text) {
    rows.push_back(&text);
  }
  if (graph && !ablation.drop_scene_graph) {
    rows.push_back(&*graph);
  }
  if (rows.empty()) {
    throw ArgumentError("fuse: no modality left after ablation");
  }

  FusedInput out;
  out.dim = rows.front()->dim();
  out.values.reserve(rows.size() * out.dim);
  for (const auto* e : rows) {
    if (e->dim() != out.dim) {
      throw ConfigError("fuse: embedding dimensions disagree (" + std::to_string(e->dim())
                        + " vs " + std::to_string(out.dim) + ")");
    }
    out.row_modalities.push_back(e->modality);
    out.values.insert(out.values.end(), e->values.begin(), e->values.end());
  }
  return out;
}

double
cosine_similarity(std::span<const float> a, std::span<const float> b)
{
  if (a.size() != b.size()) {
    throw ArgumentError("cosine_similarity: length mismatch");
  }
  double ab = 0.0;
  double aa = 0.0;
  double bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += static_cast<double>(a[i]) * b[i];
    aa += static_cast<double>(a[i]) * a[i];
    bb += static_cast<double>(b[i]) * b[i];
  }
  if (aa == 0.0 || bb == 0.0) {
    throw DomainError("cosine_similarity: zero vector");
  }
  return ab / std::sqrt(aa * bb);
}

StubEncoder::StubEncoder(std::size_t d, std::uint64_t seed) : m_dim(d), m_seed(seed)
{
  if (d == 0) {
    throw ConfigError("expert dimension must be >= 1");
  }
}

Embedding
StubEncoder::encode_text(std::string_view text, Modality modality) const
{
  return stub_encode_text(text, m_dim, m_seed, modality);
}

Embedding
StubEncoder::encode_frame(std::string_view video_id, double time_s) const
{
  return stub_encode_frame(video_id, time_s, m_dim, m_seed);
}

PrecomputedEncoder::PrecomputedEncoder(std::shared_ptr<const StoreReader> manifest, std::size_t d)
  : m_manifest(std::move(manifest)), m_dim(d)
{
  if (!m_manifest) {
    throw ArgumentError("PrecomputedEncoder needs a manifest");
  }
}

Embedding
PrecomputedEncoder::encode_text(std::string_view text, Modality modality) const
{
  auto e = load_precomputed(*m_manifest, text_key(text), m_dim);
  e.modality = modality;
  return e;
}

Embedding
PrecomputedEncoder::encode_frame(std::string_view video_id, double time_s) const
{
  auto e = load_precomputed(*m_manifest, frame_key(video_id, time_s), m_dim);
  e.modality = Modality::frame;
  return e;
}

EmbeddingRecord
to_record(std::string key, const Embedding& e)
{
  EmbeddingRecord r;
  r.key = std::move(key);
  r.arrays.push_back({e.modality, {static_cast<std::uint32_t>(e.dim())}, e.values});
  return r;
}

} // namespace vpt
