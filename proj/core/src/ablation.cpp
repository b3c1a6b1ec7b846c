#include "vpt/ablation.hpp"

#include <cstdio>
#include <ostream>

#include "jsonl.hpp"
#include "vpt/errors.hpp"
#include "vpt/evaluation.hpp"
#include "vpt/hashing.hpp"
#include "vpt/training.hpp"

namespace vpt {

namespace {

std::vector<VqaRecord>
filter_records(const std::vector<VqaRecord>& records, bool yes_no_only)
{
  if (!yes_no_only) {
    return records;
  }
  std::vector<VqaRecord> out;
  for (const auto& r : records) {
    if (is_yes_no(r)) {
      out.push_back(r);
    }
  }
  return out;
}

std::string
format_accuracy(double a)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", a);
  return buf;
}

} // namespace

std::string
default_label(const AblationRunConfig& config)
{
  std::string label = config.pretrain ? "Backbone + Pre-training + VQA Finetuning"
                                      : "Backbone + VQA Finetuning";
  if (config.yes_no_only) {
    label += " (only Yes/No)";
  }
  if (!config.use_scene_graph) {
    label += " (w/o scene graph)";
  }
  return label;
}

AblationRow
run_ablation(const AblationData& data, const AblationRunConfig& config)
{
  AblationRow row;
  row.config = config;
  row.label = config.label.empty() ? default_label(config) : config.label;
  try {
    if (!data.encoder || !data.images) {
      throw ConfigError("ablation data needs an encoder and an image store");
    }
    Backbone model(data.model, derive_seed(config.seed, 1));
    const ModalityAblation ablation{false, false, !config.use_scene_graph};

    if (config.pretrain && config.pretrain_steps > 0) {
      ExampleOptions opts;
      opts.k_frames = data.k_frames;
      opts.ablation = ablation;
      opts.max_target_len = data.model.max_target_len;
      std::vector<PretrainExample> examples;
      examples.reserve(data.segments.size());
      for (const auto& seg : data.segments) {
        const SceneGraph* g = nullptr;
        if (config.use_scene_graph) {
          auto it = data.segment_graphs.find(segment_key(seg));
          if (it != data.segment_graphs.end()) {
            g = &it->second;
          }
        }
        examples.push_back(
          build_pretrain_example(config.pretrain_objective, seg, *data.encoder, g, opts));
      }
      TrainConfig tc;
      tc.objective = config.pretrain_objective;
      tc.steps = config.pretrain_steps;
      tc.batch_size = data.batch_size;
      tc.optimizer = data.optimizer;
      tc.seed = derive_seed(config.seed, 3);
      row.iterations += train(to_training_examples(examples), model, tc).size();
    }

    static const std::map<std::string, SceneGraph> no_graphs;
    const auto& graphs = config.use_scene_graph ? data.image_graphs : no_graphs;
    const auto train_records = filter_records(data.vqa_train, config.yes_no_only);
    const auto test_records = filter_records(data.vqa_test, config.yes_no_only);
    if (test_records.empty()) {
      throw ConfigError("ablation: empty evaluation split");
    }

    if (config.finetune_steps > 0) {
      if (train_records.empty()) {
        throw ConfigError("ablation: empty finetuning split");
      }
      const auto ft = build_vqa_examples(train_records, *data.images, *data.encoder, graphs,
                                         derive_seed(config.seed, 4), data.model.max_target_len);
      TrainConfig tc;
      tc.objective = Objective::vqa;
      tc.steps = config.finetune_steps;
      tc.batch_size = data.batch_size;
      tc.optimizer = data.optimizer;
      tc.seed = derive_seed(config.seed, 2);
      row.iterations += train(to_training_examples(ft, ablation), model, tc).size();
    }

    const auto test = build_vqa_examples(test_records, *data.images, *data.encoder, graphs,
                                         derive_seed(config.seed, 5), data.model.max_target_len);
    EvalOptions eo;
    eo.ablation = ablation;
    eo.max_answer_tokens = data.max_answer_tokens;
    const auto result = evaluate(model, test, eo);
    row.accuracy = result.mean;
    row.eval_examples = result.scores.size();
    row.top_share = result.collapse.top_share;
    row.collapsed = result.collapse.collapsed;
  } catch (const std::exception& e) {
    row.failed = true;
    row.error = e.what();
  }
  return row;
}

std::vector<AblationRow>
run_ablations(const AblationData& data, const std::vector<AblationRunConfig>& configs)
{
  std::vector<AblationRow> rows;
  rows.reserve(configs.size());
  for (const auto& c : configs) {
    rows.push_back(run_ablation(data, c));
  }
  return rows;
}

std::vector<AblationRunConfig>
ablation_grid(std::size_t pretrain_steps, std::size_t finetune_steps, std::uint64_t seed,
              Objective pretrain_objective)
{
  std::vector<AblationRunConfig> grid;
  for (bool pre : {false, true}) {
    for (bool yn : {false, true}) {
      for (bool sg : {true, false}) {
        AblationRunConfig c;
        c.pretrain = pre;
        c.pretrain_objective = pretrain_objective;
        c.pretrain_steps = pre ? pretrain_steps : 0;
        c.use_scene_graph = sg;
        c.yes_no_only = yn;
        c.finetune_steps = finetune_steps;
        c.seed = seed;
        grid.push_back(c);
      }
    }
  }
  return grid;
}

void
write_ablation_table(std::ostream& out, const std::vector<AblationRow>& rows)
{
  out << "label\taccuracy\titerations\tpretrain\tscene_graph\tyes_no_only\tseed"
         "\teval_examples\ttop_share\tcollapsed\tstatus\n";
  for (const auto& r : rows) {
    out << r.label << '\t' << (r.failed ? "-" : format_accuracy(r.accuracy)) << '\t'
        << r.iterations << '\t' << (r.config.pretrain ? "yes" : "no") << '\t'
        << (r.config.use_scene_graph ? "yes" : "no") << '\t'
        << (r.config.yes_no_only ? "yes" : "no") << '\t' << r.config.seed << '\t'
        << r.eval_examples << '\t' << format_accuracy(r.top_share) << '\t'
        << (r.collapsed ? "yes" : "no") << '\t' << (r.failed ? "failed: " + r.error : "ok")
        << '\n';
  }
}

void
write_ablation_jsonl(std::ostream& out, const std::vector<AblationRow>& rows)
{
  for (const auto& r : rows) {
    detail::Json rec{{"label", r.label},
                     {"failed", r.failed},
                     {"iterations", r.iterations},
                     {"pretrain", r.config.pretrain},
                     {"pretrain_objective", to_string(r.config.pretrain_objective)},
                     {"pretrain_steps", r.config.pretrain_steps},
                     {"finetune_steps", r.config.finetune_steps},
                     {"scene_graph", r.config.use_scene_graph},
                     {"yes_no_only", r.config.yes_no_only},
                     {"seed", r.config.seed},
                     {"eval_examples", r.eval_examples},
                     {"top_share", r.top_share},
                     {"collapsed", r.collapsed}};
    if (r.failed) {
      rec["accuracy"] = nullptr;
      rec["error"] = r.error;
    } else {
      rec["accuracy"] = r.accuracy;
    }
    detail::write_jsonl(out, rec);
  }
}

} // namespace vpt
