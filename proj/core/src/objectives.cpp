#include "vpt/objectives.hpp"

#include <istream>
#include <ostream>
#include <sstream>

#include "jsonl.hpp"
#include "vpt/errors.hpp"
#include "vpt/hashing.hpp"

namespace vpt {

namespace {

std::vector<std::string>
split_words(std::string_view text)
{
  std::vector<std::string> words;
  std::istringstream in{std::string(text)};
  std::string w;
  while (in >> w) {
    words.push_back(w);
  }
  return words;
}

std::string
join(const std::vector<std::string>& words, std::size_t begin, std::size_t end)
{
  std::string out;
  for (std::size_t i = begin; i < end; ++i) {
    if (i != begin) {
      out += ' ';
    }
    out += words[i];
  }
  return out;
}

PretrainExample
assemble(Objective objective, const Segment& segment, const ExpertEncoder& encoder,
         const SceneGraph* graph, const ExampleOptions& options, std::string input_text,
         std::string target_text)
{
  std::vector<Embedding> frames;
  for (double t : sample_frame_times(segment, options.k_frames)) {
    frames.push_back(encoder.encode_frame(segment.video_id, t));
  }
  const Embedding caption = encoder.encode_text(input_text, Modality::caption);
  std::optional<Embedding> graph_row;
  if (graph != nullptr) {
    graph_row = encoder.encode_text(linearize(*graph), Modality::scene_graph);
  }

  PretrainExample ex;
  ex.fused = fuse(frames, caption, graph_row, options.ablation);
  ex.target = tokenize(target_text, options.max_target_len);
  ex.objective = objective;
  ex.input_text = std::move(input_text);
  ex.target_text = std::move(target_text);
  return ex;
}

} // namespace

std::string_view
to_string(Objective o) noexcept
{
  switch (o) {
  case Objective::full_caption:
    return "full_caption";
  case Objective::split_half:
    return "split_half";
  case Objective::vqa:
    return "vqa";
  }
  return "unknown";
}

Objective
parse_objective(std::string_view name)
{
  if (name == "full_caption") {
    return Objective::full_caption;
  }
  if (name == "split_half") {
    return Objective::split_half;
  }
  if (name == "vqa") {
    return Objective::vqa;
  }
  throw ArgumentError("unknown objective \"" + std::string(name)
                      + "\" (full_caption|split_half|vqa)");
}

std::pair<std::string, std::string>
split_caption(std::string_view caption)
{
  const auto words = split_words(caption);
  if (words.size() < 2) {
    throw ArgumentError("split-half objective needs a caption of at least two words");
  }
  const std::size_t cut = (words.size() + 1) / 2;
  return {join(words, 0, cut), join(words, cut, words.size())};
}

PretrainExample
build_full_caption_example(const Segment& segment, const ExpertEncoder& encoder,
                           const SceneGraph* graph, const ExampleOptions& options)
{
  return assemble(Objective::full_caption, segment, encoder, graph, options, segment.caption,
                  segment.caption);
}

PretrainExample
build_split_half_example(const Segment& segment, const ExpertEncoder& encoder,
                         const SceneGraph* graph, const ExampleOptions& options)
{
  auto [head, tail] = split_caption(segment.caption);
  return assemble(Objective::split_half, segment, encoder, graph, options, std::move(head),
                  std::move(tail));
}

PretrainExample
build_pretrain_example(Objective objective, const Segment& segment, const ExpertEncoder& encoder,
                       const SceneGraph* graph, const ExampleOptions& options)
{
  switch (objective) {
  case Objective::full_caption:
    return build_full_caption_example(segment, encoder, graph, options);
  case Objective::split_half:
    return build_split_half_example(segment, encoder, graph, options);
  case Objective::vqa:
    break;
  }
  throw ArgumentError("vqa is not a pretraining objective");
}

std::vector<VqaRecord>
read_vqa_dataset(std::istream& in)
{
  using detail::Json;
  std::vector<VqaRecord> out;
  detail::for_each_jsonl(in, [&](std::size_t line, const Json& rec) {
    VqaRecord r;
    r.image_key = detail::require_string(rec, "image_key", line);
    r.question = detail::require_string(rec, "question", line);
    const auto it = rec.find("answers");
    if (it == rec.end() || !it->is_array()) {
      throw ParseError(line, "expected array field \"answers\"");
    }
    for (const auto& a : *it) {
      if (!a.is_string()) {
        throw ParseError(line, "answers must be strings");
      }
      r.answers.push_back(a.get<std::string>());
    }
    if (r.answers.size() != kVqaHumanAnswers) {
      throw ParseError(line, "expected exactly 10 answers, got " + std::to_string(r.answers.size()));
    }
    out.push_back(std::move(r));
  });
  return out;
}

void
write_vqa_dataset(std::ostream& out, const std::vector<VqaRecord>& records)
{
  using detail::Json;
  for (const auto& r : records) {
    detail::write_jsonl(out, Json{{"image_key", r.image_key},
                                  {"question", r.question},
                                  {"answers", r.answers}});
  }
}

FusedInput
vqa_fused_input(const VqaExample& example, const ModalityAblation& ablation)
{
  const std::vector<Embedding> frames{example.image};
  return fuse(frames, example.question, example.scene_graph, ablation);
}

VqaExample
build_vqa_example(const VqaRecord& record, const StoreReader& images, const ExpertEncoder& encoder,
                  const SceneGraph* graph, Rng& rng, std::size_t max_target_len)
{
  if (record.answers.size() != kVqaHumanAnswers) {
    throw ArgumentError("VQA example needs exactly 10 human answers");
  }
  VqaExample ex;
  ex.image_key = record.image_key;
  ex.question_text = record.question;
  ex.image = load_precomputed(images, record.image_key, encoder.dim());
  ex.image.modality = Modality::frame;
  ex.question = encoder.encode_text(record.question, Modality::question);
  if (graph != nullptr) {
    ex.scene_graph = encoder.encode_text(linearize(*graph), Modality::scene_graph);
  }
  ex.human_answers = record.answers;
  ex.chosen_target = record.answers[rng.uniform_index(kVqaHumanAnswers)];
  ex.target = tokenize(ex.chosen_target, max_target_len);
  return ex;
}

std::vector<VqaExample>
build_vqa_examples(const std::vector<VqaRecord>& records, const StoreReader& images,
                   const ExpertEncoder& encoder, const std::map<std::string, SceneGraph>& graphs,
                   std::uint64_t run_seed, std::size_t max_target_len)
{
  std::vector<VqaExample> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    Rng rng(derive_seed(run_seed, i));
    const auto it = graphs.find(records[i].image_key);
    const SceneGraph* g = it == graphs.end() ? nullptr : &it->second;
    out.push_back(build_vqa_example(records[i], images, encoder, g, rng, max_target_len));
  }
  return out;
}

} // namespace vpt
