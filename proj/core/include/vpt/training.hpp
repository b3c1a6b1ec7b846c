#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "vpt/backbone.hpp"
#include "vpt/objectives.hpp"
#include "vpt/optimizer.hpp"

namespace vpt {

// Encoder rows plus a BOS...EOS PAD* target, ready for teacher forcing.
struct TrainingExample
{
  FusedInput input;
  TokenSequence target;
};

std::vector<TrainingExample> to_training_examples(const std::vector<PretrainExample>& examples);
std::vector<TrainingExample> to_training_examples(const std::vector<VqaExample>& examples,
                                                  const ModalityAblation& ablation = {});

struct StepMetrics
{
  std::size_t step = 0; // 1-based
  double loss = 0.0;
  double lr = 0.0;
  std::size_t examples_seen = 0;
  double wall_ms = 0.0;
};

// Append-only JSONL metrics file, flushed after every record so a crashed
// run still leaves a parseable prefix.
class MetricsLog
{
public:
  explicit MetricsLog(const std::filesystem::path& path);

  void write(const StepMetrics& m, std::string_view objective);
  void write_diagnostic(std::size_t step, std::string_view message);
  void write_summary(const std::string& json_object);

private:
  std::ofstream m_out;
};

std::vector<StepMetrics> read_metrics(const std::filesystem::path& path);

struct TrainConfig
{
  Objective objective = Objective::split_half;
  std::size_t steps = 0;
  std::size_t batch_size = 16;
  AdamWConfig optimizer;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 0; // 0 disables periodic checkpoints
  std::filesystem::path checkpoint_path;
};

// Teacher-forced minibatch training. Batches walk consecutive seeded
// permutations of the dataset (epoch e uses seed (seed, e)); the step loss
// is the token-mean NLL over the batch. A non-finite loss writes a
// diagnostic record and throws NumericalError before any update.
std::vector<StepMetrics> train(const std::vector<TrainingExample>& dataset, Backbone& model,
                               const TrainConfig& config, MetricsLog* log = nullptr);

// Token-mean teacher-forced loss over a whole dataset, no gradients.
double dataset_loss(const Backbone& model, const std::vector<TrainingExample>& dataset);

} // namespace vpt
