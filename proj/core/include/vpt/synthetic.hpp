#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "vpt/experts.hpp"
#include "vpt/objectives.hpp"
#include "vpt/scene_graph.hpp"
#include "vpt/segmentation.hpp"

namespace vpt {

// Toy narrated-video corpus. Every dense segment is `window` words: the
// first `opener_words` come from a small shared pool of openers and the
// rest are drawn word by word from a short vocabulary. The opener carries
// no information about the remainder, so a model that sees the whole
// caption can copy it while one that sees only the opener cannot.
struct SyntheticCorpusConfig
{
  std::size_t videos = 16;
  std::size_t segments_per_video = 16;
  std::size_t window = kDefaultWindowWords;
  std::size_t opener_words = 8;
  std::size_t opener_pool = 8;
  // Extra windows per video spoken slowly enough to fall below 30 wpm.
  std::size_t sparse_segments_per_video = 0;
  std::uint64_t seed = 0;
};

struct SyntheticCorpus
{
  std::vector<TimedTranscript> transcripts;
  std::map<std::string, SceneGraph> graphs; // by segment_key
};

SyntheticCorpus make_synthetic_corpus(const SyntheticCorpusConfig& config);

// Toy VQA set over synthetic images. Each image is a small scene graph
// and gets one yes/no question (alternating present and absent labels)
// and one counting question.
struct MiniVqaConfig
{
  std::size_t images = 48;
  double test_fraction = 0.25;
  // Human answers disagreeing with the majority, out of 10.
  std::size_t dissenting_answers = 0;
  std::uint64_t seed = 0;
};

struct MiniVqa
{
  std::vector<VqaRecord> train;
  std::vector<VqaRecord> test;
  std::map<std::string, SceneGraph> graphs; // by image_key
  std::vector<std::string> image_keys;
};

MiniVqa make_mini_vqa(const MiniVqaConfig& config);

// One frame-modality record per image, keyed by image key, holding
// encoder.encode_frame(image_key, 0).
StoreSummary write_image_store(const std::vector<std::string>& image_keys,
                               const ExpertEncoder& encoder,
                               const std::filesystem::path& path);

} // namespace vpt
