#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "vpt/backbone.hpp"
#include "vpt/embedding_store.hpp"
#include "vpt/experts.hpp"
#include "vpt/objectives.hpp"
#include "vpt/optimizer.hpp"
#include "vpt/scene_graph.hpp"
#include "vpt/segmentation.hpp"

namespace vpt {

struct AblationRunConfig
{
  std::string label; // derived from the flags when empty
  bool pretrain = false;
  Objective pretrain_objective = Objective::split_half;
  std::size_t pretrain_steps = 0;
  bool use_scene_graph = true;
  bool yes_no_only = false;
  std::size_t finetune_steps = 0;
  std::uint64_t seed = 0;
};

// Everything a run reads. Owned by the caller and shared by all runs.
struct AblationData
{
  ModelConfig model;
  std::shared_ptr<const ExpertEncoder> encoder;
  std::vector<Segment> segments;
  std::map<std::string, SceneGraph> segment_graphs; // by segment_key
  std::shared_ptr<const StoreReader> images;
  std::vector<VqaRecord> vqa_train;
  std::vector<VqaRecord> vqa_test;
  std::map<std::string, SceneGraph> image_graphs; // by image_key
  std::size_t batch_size = 16;
  AdamWConfig optimizer;
  std::size_t k_frames = 1;
  std::size_t max_answer_tokens = 16;
};

struct AblationRow
{
  std::string label;
  AblationRunConfig config;
  bool failed = false;
  std::string error;
  double accuracy = 0.0;
  std::size_t iterations = 0; // pretrain + finetune optimizer steps taken
  std::size_t eval_examples = 0;
  double top_share = 0.0;
  bool collapsed = false;
};

std::string default_label(const AblationRunConfig& config);

// Builds a fresh model from (model config, seed), optionally pretrains,
// finetunes on the (optionally yes/no only) training split and evaluates
// on the matching test split. Errors are captured in the row.
AblationRow run_ablation(const AblationData& data, const AblationRunConfig& config);

std::vector<AblationRow> run_ablations(const AblationData& data,
                                       const std::vector<AblationRunConfig>& configs);

// The 2 x 2 x 2 grid over pretraining, scene graph and yes/no filtering.
std::vector<AblationRunConfig> ablation_grid(std::size_t pretrain_steps,
                                             std::size_t finetune_steps, std::uint64_t seed,
                                             Objective pretrain_objective = Objective::split_half);

// Tab-separated table with a header row. Contains no timing so reruns
// with the same inputs are byte-identical.
void write_ablation_table(std::ostream& out, const std::vector<AblationRow>& rows);
void write_ablation_jsonl(std::ostream& out, const std::vector<AblationRow>& rows);

} // namespace vpt
