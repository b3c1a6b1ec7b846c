#include "vpt/training.hpp"

#include <chrono>
#include <cmath>

#include "jsonl.hpp"
#include "vpt/checkpoint.hpp"
#include "vpt/errors.hpp"
#include "vpt/hashing.hpp"

namespace vpt {

std::vector<TrainingExample>
to_training_examples(const std::vector<PretrainExample>& examples)
{
  std::vector<TrainingExample> out;
  out.reserve(examples.size());
  for (const auto& e : examples) {
    out.push_back({e.fused, e.target});
  }
  return out;
}

std::vector<TrainingExample>
to_training_examples(const std::vector<VqaExample>& examples, const ModalityAblation& ablation)
{
  std::vector<TrainingExample> out;
  out.reserve(examples.size());
  for (const auto& e : examples) {
    out.push_back({vqa_fused_input(e, ablation), e.target});
  }
  return out;
}

MetricsLog::MetricsLog(const std::filesystem::path& path) : m_out(path, std::ios::app)
{
  if (!m_out) {
    throw IoError("cannot open metrics log " + path.string());
  }
}

void
MetricsLog::write(const StepMetrics& m, std::string_view objective)
{
  detail::write_jsonl(m_out, detail::Json{{"step", m.step},
                                          {"loss", m.loss},
                                          {"lr", m.lr},
                                          {"examples_seen", m.examples_seen},
                                          {"wall_ms", m.wall_ms},
                                          {"objective", objective}});
  m_out.flush();
}

void
MetricsLog::write_diagnostic(std::size_t step, std::string_view message)
{
  detail::write_jsonl(m_out, detail::Json{{"step", step}, {"diagnostic", message}});
  m_out.flush();
}

void
MetricsLog::write_summary(const std::string& json_object)
{
  const auto parsed = detail::Json::parse(json_object);
  detail::write_jsonl(m_out, detail::Json{{"summary", parsed}});
  m_out.flush();
}

std::vector<StepMetrics>
read_metrics(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open metrics log " + path.string());
  }
  std::vector<StepMetrics> out;
  detail::for_each_jsonl(in, [&](std::size_t line, const detail::Json& rec) {
    if (!rec.contains("loss")) {
      return; // diagnostics and summaries
    }
    StepMetrics m;
    m.step = rec.at("step").get<std::size_t>();
    m.loss = detail::require_number(rec, "loss", line);
    m.lr = detail::require_number(rec, "lr", line);
    m.examples_seen = rec.at("examples_seen").get<std::size_t>();
    m.wall_ms = detail::require_number(rec, "wall_ms", line);
    out.push_back(m);
  });
  return out;
}

std::vector<StepMetrics>
train(const std::vector<TrainingExample>& dataset, Backbone& model, const TrainConfig& config,
      MetricsLog* log)
{
  if (config.steps == 0) {
    return {};
  }
  if (dataset.empty()) {
    throw ArgumentError("train: dataset is empty");
  }
  if (config.batch_size == 0) {
    throw ArgumentError("train: batch_size must be >= 1");
  }

  Rng dropout_rng(derive_seed(config.seed, 0xD7));
  ForwardOptions fwd;
  if (model.config().dropout > 0.0) {
    fwd.dropout_rng = &dropout_rng;
  }

  std::vector<StepMetrics> metrics;
  metrics.reserve(config.steps);
  std::uint64_t epoch = 0;
  std::vector<std::size_t> order = seeded_permutation(dataset.size(), config.seed, epoch);
  std::size_t cursor = 0;
  std::size_t seen = 0;

  for (std::size_t step = 1; step <= config.steps; ++step) {
    const auto t0 = std::chrono::steady_clock::now();

    std::vector<std::size_t> batch;
    batch.reserve(config.batch_size);
    while (batch.size() < config.batch_size) {
      if (cursor == order.size()) {
        order = seeded_permutation(dataset.size(), config.seed, ++epoch);
        cursor = 0;
      }
      batch.push_back(order[cursor++]);
    }

    std::size_t tokens = 0;
    for (auto i : batch) {
      tokens += unpadded_length(dataset[i].target) - 1;
    }
    const double scale = 1.0 / static_cast<double>(tokens);

    model.params().zero_grad();
    double nll = 0.0;
    try {
      for (auto i : batch) {
        nll += accumulate_example_gradients(model, dataset[i].input, dataset[i].target, scale, fwd)
                 .nll_sum;
      }
    } catch (const NumericalError& e) {
      if (log != nullptr) {
        log->write_diagnostic(step, e.what());
      }
      throw;
    }
    const double loss = nll * scale;
    if (!std::isfinite(loss)) {
      const std::string msg = "non-finite loss at step " + std::to_string(step);
      if (log != nullptr) {
        log->write_diagnostic(step, msg);
      }
      throw NumericalError(msg);
    }
    adamw_step(model.params(), config.optimizer);
    seen += batch.size();

    StepMetrics m;
    m.step = step;
    m.loss = loss;
    m.lr = config.optimizer.lr;
    m.examples_seen = seen;
    m.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    metrics.push_back(m);
    if (log != nullptr) {
      log->write(m, to_string(config.objective));
    }
    if (config.checkpoint_every > 0 && step % config.checkpoint_every == 0
        && !config.checkpoint_path.empty()) {
      save_checkpoint(model, config.checkpoint_path);
    }
  }
  return metrics;
}

double
dataset_loss(const Backbone& model, const std::vector<TrainingExample>& dataset)
{
  double nll = 0.0;
  std::size_t tokens = 0;
  for (const auto& ex : dataset) {
    const auto l = example_loss(model, ex.input, ex.target);
    nll += l.nll_sum;
    tokens += l.tokens;
  }
  if (tokens == 0) {
    throw ArgumentError("dataset_loss: no target tokens");
  }
  return nll / static_cast<double>(tokens);
}

} // namespace vpt
