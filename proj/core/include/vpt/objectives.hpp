#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vpt/embedding_store.hpp"
#include "vpt/experts.hpp"
#include "vpt/scene_graph.hpp"
#include "vpt/segmentation.hpp"
#include "vpt/tokenizer.hpp"

namespace vpt {

class Rng;

enum class Objective
{
  full_caption,
  split_half,
  vqa,
};

std::string_view to_string(Objective o) noexcept;
Objective parse_objective(std::string_view name);

inline constexpr std::size_t kVqaHumanAnswers = 10;
inline constexpr std::size_t kDefaultTargetLen = 128;

struct ExampleOptions
{
  std::size_t k_frames = 1;
  ModalityAblation ablation;
  std::size_t max_target_len = kDefaultTargetLen;
};

struct PretrainExample
{
  FusedInput fused;
  TokenSequence target;
  Objective objective = Objective::full_caption;
  std::string input_text;  // text behind the caption row
  std::string target_text;
};

// First ceil(n/2) words and the remaining words of a space-separated
// caption. Throws ArgumentError for captions with fewer than two words.
std::pair<std::string, std::string> split_caption(std::string_view caption);

// Caption row encodes the whole caption and the target is the same text.
PretrainExample build_full_caption_example(const Segment& segment, const ExpertEncoder& encoder,
                                           const SceneGraph* graph,
                                           const ExampleOptions& options = {});

// Caption row encodes the first ceil(n/2) words; the target is the rest.
PretrainExample build_split_half_example(const Segment& segment, const ExpertEncoder& encoder,
                                         const SceneGraph* graph,
                                         const ExampleOptions& options = {});

PretrainExample build_pretrain_example(Objective objective, const Segment& segment,
                                       const ExpertEncoder& encoder, const SceneGraph* graph,
                                       const ExampleOptions& options = {});

// One line of a VQA-style dataset file.
struct VqaRecord
{
  std::string image_key;
  std::string question;
  std::vector<std::string> answers;

  bool operator==(const VqaRecord&) const = default;
};

// JSONL {"image_key", "question", "answers": [10 strings]}.
std::vector<VqaRecord> read_vqa_dataset(std::istream& in);
void write_vqa_dataset(std::ostream& out, const std::vector<VqaRecord>& records);

struct VqaExample
{
  std::string image_key;
  std::string question_text;
  Embedding image;
  std::optional<Embedding> scene_graph;
  Embedding question;
  std::vector<std::string> human_answers;
  std::string chosen_target;
  TokenSequence target;
};

// Rows image, question, scene graph (graph dropped under ablation).
FusedInput vqa_fused_input(const VqaExample& example, const ModalityAblation& ablation = {});

// Looks the image up in `images` (NotFoundError when absent), encodes the
// question and linearized graph, and draws the training answer uniformly
// with `rng`. Throws ArgumentError unless exactly 10 answers are given.
VqaExample build_vqa_example(const VqaRecord& record, const StoreReader& images,
                             const ExpertEncoder& encoder, const SceneGraph* graph, Rng& rng,
                             std::size_t max_target_len = kDefaultTargetLen);

// Builds every example with a per-example generator derived from
// (run_seed, index) so datasets differ only in the factors varied.
std::vector<VqaExample> build_vqa_examples(const std::vector<VqaRecord>& records,
                                           const StoreReader& images, const ExpertEncoder& encoder,
                                           const std::map<std::string, SceneGraph>& graphs,
                                           std::uint64_t run_seed,
                                           std::size_t max_target_len = kDefaultTargetLen);

} // namespace vpt
