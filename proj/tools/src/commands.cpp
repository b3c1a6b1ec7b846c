#include "vpt_cli/commands.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "vpt/ablation.hpp"
#include "vpt/atomic_file.hpp"
#include "vpt/checkpoint.hpp"
#include "vpt/embedding_store.hpp"
#include "vpt/errors.hpp"
#include "vpt/evaluation.hpp"
#include "vpt/experts.hpp"
#include "vpt/hashing.hpp"
#include "vpt/objectives.hpp"
#include "vpt/scene_graph.hpp"
#include "vpt/segmentation.hpp"
#include "vpt/synthetic.hpp"

namespace vpt::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Seed salts shared with run_ablation so a CLI run and the matching
// ablation row see the same streams.
constexpr std::uint64_t kInitSalt = 1;
constexpr std::uint64_t kFinetuneTrainSalt = 2;
constexpr std::uint64_t kPretrainTrainSalt = 3;
constexpr std::uint64_t kFinetuneExamplesSalt = 4;
constexpr std::uint64_t kEvalExamplesSalt = 5;

std::vector<ConfigKey>
operator+(std::vector<ConfigKey> a, const std::vector<ConfigKey>& b)
{
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

const std::vector<ConfigKey> kEncoderKeys{
  {"encoder", "stub", "stub or precomputed"},
  {"encoder_seed", "0", "stub encoder seed"},
  {"manifest", "", "precomputed embedding store (encoder = precomputed)"},
};

const std::vector<ConfigKey> kModelKeys{
  {"dim", "768", "embedding and model width"},
  {"n_heads", "8", "attention heads"},
  {"encoder_layers", "2", "encoder blocks"},
  {"decoder_layers", "2", "decoder blocks"},
  {"d_ff", "1024", "MLP hidden width"},
  {"max_target_len", "128", "target tokens including BOS and EOS"},
  {"dropout", "0", "residual dropout"},
};

const std::vector<ConfigKey> kOptimKeys{
  {"batch_size", "16", "examples per step"},
  {"lr", "1e-4", "AdamW learning rate"},
  {"weight_decay", "0.01", "AdamW decoupled weight decay"},
  {"seed", "0", "run seed"},
};

std::string
fmt(const char* spec, double v)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

template<class F>
auto
parse_file(const fs::path& path, F&& reader)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot read " + path.string());
  }
  try {
    return reader(in);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path.string() + ": " + e.what());
  }
}

fs::path
resolve_out(RunConfig& config)
{
  if (!config.has("out")) {
    if (const char* root = std::getenv(kRunsDirEnv); root && *root) {
      config.set("out", (fs::path(root) / config.command()).string(), false);
    }
  }
  return config.get_path("out");
}

std::shared_ptr<const ExpertEncoder>
make_encoder(const RunConfig& config, std::size_t dim)
{
  const auto& kind = config.require("encoder");
  if (kind == "stub") {
    return std::make_shared<StubEncoder>(dim, config.get_u64("encoder_seed"));
  }
  if (kind == "precomputed") {
    auto store = std::make_shared<const StoreReader>(config.get_path("manifest"));
    return std::make_shared<PrecomputedEncoder>(std::move(store), dim);
  }
  throw ConfigError("encoder must be stub or precomputed, got \"" + kind + "\"");
}

ModelConfig
model_config(const RunConfig& config)
{
  ModelConfig m;
  m.d_model = config.get_size("dim");
  m.n_heads = config.get_size("n_heads");
  m.n_encoder_layers = config.get_size("encoder_layers");
  m.n_decoder_layers = config.get_size("decoder_layers");
  m.d_ff = config.get_size("d_ff");
  m.max_target_len = config.get_size("max_target_len");
  m.dropout = config.get_double("dropout");
  m.validate();
  return m;
}

// Adopts the model shape of a checkpoint. Explicit settings that disagree
// with it are an error.
void
adopt_model_config(RunConfig& config, const ModelConfig& m)
{
  const std::pair<const char*, std::string> values[] = {
    {"dim", std::to_string(m.d_model)},
    {"n_heads", std::to_string(m.n_heads)},
    {"encoder_layers", std::to_string(m.n_encoder_layers)},
    {"decoder_layers", std::to_string(m.n_decoder_layers)},
    {"d_ff", std::to_string(m.d_ff)},
    {"max_target_len", std::to_string(m.max_target_len)},
  };
  for (const auto& [key, value] : values) {
    if (config.is_explicit(key) && config.get(key) != value) {
      throw ConfigError(std::string(key) + " = " + config.get(key)
                        + " conflicts with the checkpoint (" + value + ")");
    }
    config.set(key, value, false);
  }
}

std::map<std::string, SceneGraph>
load_graphs(RunConfig& config, const std::string& graphs_key, const std::string& manifest_key)
{
  if (!config.has(graphs_key)) {
    return {};
  }
  const auto graphs = config.get_path(graphs_key);
  if (!config.has(manifest_key)) {
    config.set(manifest_key, graphs.string() + ".keys", false);
  }
  const auto manifest = config.get_path(manifest_key);
  std::ifstream g(graphs, std::ios::binary), m(manifest, std::ios::binary);
  if (!g || !m) {
    throw IoError("cannot read scene graphs " + graphs.string() + " / " + manifest.string());
  }
  try {
    return read_scene_graphs(g, m);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), graphs.string() + ": " + e.what());
  }
}

const SceneGraph*
graph_for(const std::map<std::string, SceneGraph>& graphs, const std::string& key)
{
  const auto it = graphs.find(key);
  return it == graphs.end() ? nullptr : &it->second;
}

std::vector<VqaRecord>
yes_no_filter(std::vector<VqaRecord> records, bool yes_no_only)
{
  if (!yes_no_only) {
    return records;
  }
  std::erase_if(records, [](const VqaRecord& r) { return !is_yes_no(r); });
  return records;
}

std::size_t
one_epoch(std::size_t examples, std::size_t batch)
{
  return batch == 0 ? 0 : (examples + batch - 1) / batch;
}

// Resolves "steps"; unset means one pass over the data.
std::size_t
resolve_steps(RunConfig& config, std::size_t examples)
{
  if (!config.has("steps")) {
    config.set("steps", std::to_string(one_epoch(examples, config.get_size("batch_size"))),
               false);
  }
  return config.get_size("steps");
}

AdamWConfig
optimizer(const RunConfig& config)
{
  AdamWConfig a;
  a.lr = config.get_double("lr");
  a.weight_decay = config.get_double("weight_decay");
  return a;
}

void
write_text(const fs::path& path, const std::string& text)
{
  write_file_atomically(path, text);
}

// Decoded answers are arbitrary bytes; invalid UTF-8 becomes U+FFFD.
std::string
dump(const json& j, int indent = -1)
{
  return j.dump(indent, ' ', false, json::error_handler_t::replace);
}

json
loss_summary(const std::vector<StepMetrics>& metrics)
{
  json j;
  j["steps"] = metrics.size();
  j["first_loss"] = metrics.empty() ? json(nullptr) : json(metrics.front().loss);
  j["last_loss"] = metrics.empty() ? json(nullptr) : json(metrics.back().loss);
  return j;
}

// Shared tail of pretrain and finetune.
int
run_training(RunConfig& config, RunDirectory& dir, const std::vector<TrainingExample>& data,
             Backbone& model, TrainConfig tc, std::ostream& out)
{
  const bool svg = config.get_bool("svg");
  write_text(dir / kConfigFileName, config.render());
  out << "config: " << config.echo() << '\n';

  tc.checkpoint_every = config.get_size("checkpoint_every");
  tc.checkpoint_path = dir / kCheckpointFileName;
  std::vector<StepMetrics> metrics;
  json summary;
  {
    MetricsLog log(dir / kMetricsFileName);
    metrics = train(data, model, tc, &log);
    save_checkpoint(model, dir / kCheckpointFileName);
    summary = loss_summary(metrics);
    summary["command"] = config.command();
    summary["examples"] = data.size();
    summary["dataset_loss"] = data.empty() ? json(nullptr) : json(dataset_loss(model, data));
    summary["checkpoint"] = (dir.final_path() / kCheckpointFileName).string();
    log.write_summary(dump(summary));
  }
  if (svg) {
    write_text(dir / kLossSvgFileName,
               render_loss_svg(metrics, config.command() + " loss (" + std::string(to_string(tc.objective))
                                          + ")"));
  }
  write_text(dir / kSummaryFileName, dump(summary, 2) + "\n");
  dir.commit();
  out << "steps=" << metrics.size() << " examples=" << data.size();
  if (!metrics.empty()) {
    out << " first_loss=" << fmt("%.4f", metrics.front().loss)
        << " last_loss=" << fmt("%.4f", metrics.back().loss);
  }
  out << "\nwrote " << dir.final_path().string() << '\n';
  return 0;
}

// Records every embedding requested from the wrapped encoder, keyed the
// way PrecomputedEncoder looks them up.
class RecordingEncoder final : public ExpertEncoder
{
public:
  explicit RecordingEncoder(const ExpertEncoder& inner) : m_inner(inner) {}

  std::size_t dim() const noexcept override { return m_inner.dim(); }
  Embedding encode_text(std::string_view text, Modality modality) const override
  {
    auto e = m_inner.encode_text(text, modality);
    m_seen.try_emplace(text_key(text), e);
    return e;
  }
  Embedding encode_frame(std::string_view video_id, double time_s) const override
  {
    auto e = m_inner.encode_frame(video_id, time_s);
    m_seen.try_emplace(frame_key(video_id, time_s), e);
    return e;
  }
  const std::map<std::string, Embedding>& seen() const noexcept { return m_seen; }

private:
  const ExpertEncoder& m_inner;
  mutable std::map<std::string, Embedding> m_seen;
};

} // namespace

RunDirectory::RunDirectory(fs::path final_path)
  : m_final(std::move(final_path)), m_staging(m_final.string() + ".partial")
{
  fs::remove_all(m_staging);
  fs::create_directories(m_staging);
}

void
RunDirectory::commit()
{
  if (fs::exists(m_final)) {
    fs::remove_all(m_final);
  }
  fs::rename(m_staging, m_final);
}

int
cmd_segment(RunConfig& config, std::ostream& out, std::ostream&)
{
  if (!config.has("stride")) {
    config.set("stride", config.get("window"), false);
  }
  const auto input = config.get_path("transcripts");
  const auto output = resolve_out(config);
  const auto window = config.get_size("window");
  const auto stride = config.get_size("stride");
  const auto min_wpm = config.get_double("min_wpm");
  const auto frames = config.get_size("frames_per_segment");
  const auto& language = config.get("language");
  const double video_min_wpm =
    config.has("video_min_wpm") ? config.get_double("video_min_wpm") : 0.0;
  out << "config: " << config.echo() << '\n';

  const auto transcripts = parse_file(input, [](std::istream& in) { return read_transcripts(in); });
  std::vector<Segment> kept;
  std::size_t total = 0, skipped_videos = 0;
  for (const auto& t : transcripts) {
    if ((!language.empty() && !matches_language(t, language))
        || (video_min_wpm > 0.0 && video_word_density(t) < video_min_wpm)) {
      ++skipped_videos;
      continue;
    }
    const auto segs = segment_transcript(t, window, stride, frames);
    total += segs.size();
    for (auto& s : filter_segments(segs, min_wpm)) {
      kept.push_back(std::move(s));
    }
  }
  std::ostringstream body;
  write_segments(body, kept);
  write_text(output, body.str());
  write_text(output.string() + ".config.txt", config.render());
  out << "videos=" << transcripts.size() - skipped_videos << " kept=" << kept.size()
      << " dropped=" << total - kept.size();
  if (skipped_videos) {
    out << " skipped_videos=" << skipped_videos;
  }
  out << "\nwrote " << output.string() << '\n';
  return 0;
}

int
cmd_encode(RunConfig& config, std::ostream& out, std::ostream& err)
{
  const auto segments_path = config.get_path("segments");
  const auto output = resolve_out(config);
  const auto graphs = load_graphs(config, "graphs", "graph_manifest");
  const auto dim = config.get_size("dim");
  const auto compression = parse_compression(config.require("compression"));
  ExampleOptions opts;
  opts.k_frames = config.get_size("k_frames");
  const auto encoder = make_encoder(config, dim);
  out << "config: " << config.echo() << '\n';

  const auto segments =
    parse_file(segments_path, [](std::istream& in) { return read_segments(in); });
  RecordingEncoder recorder(*encoder);
  std::size_t missing_graphs = 0, single_word = 0;
  for (const auto& seg : segments) {
    const auto* g = graph_for(graphs, segment_key(seg));
    missing_graphs += g == nullptr;
    build_full_caption_example(seg, recorder, g, opts);
    if (seg.word_count() >= 2) {
      build_split_half_example(seg, recorder, g, opts);
    } else {
      ++single_word;
    }
  }
  std::vector<EmbeddingRecord> records;
  records.reserve(recorder.seen().size());
  for (const auto& [key, e] : recorder.seen()) {
    records.push_back(to_record(key, e));
  }
  const auto summary = write_store(records, output, compression);
  write_text(output.string() + ".config.txt", config.render());
  if (missing_graphs) {
    err << "warning: " << missing_graphs << " segment(s) have no scene graph; graph row omitted\n";
  }
  if (single_word) {
    err << "warning: " << single_word << " single-word segment(s) cannot form split-half pairs\n";
  }
  out << "segments=" << segments.size() << " records=" << summary.record_count
      << " missing_graphs=" << missing_graphs << " bytes=" << summary.file_bytes
      << "\nwrote " << output.string() << '\n';
  return 0;
}

int
cmd_pretrain(RunConfig& config, std::ostream& out, std::ostream&)
{
  const auto segments_path = config.get_path("segments");
  const auto out_dir = resolve_out(config);
  const auto graphs = load_graphs(config, "graphs", "graph_manifest");
  std::unique_ptr<Backbone> model;
  if (config.has("init")) {
    model = std::make_unique<Backbone>(load_checkpoint(config.get_path("init")));
    adopt_model_config(config, model->config());
  }
  const auto mc = model_config(config);
  const auto seed = config.get_u64("seed");
  if (!model) {
    model = std::make_unique<Backbone>(mc, derive_seed(seed, kInitSalt));
  }
  const auto encoder = make_encoder(config, mc.d_model);
  const auto objective = parse_objective(config.require("objective"));
  if (objective == Objective::vqa) {
    throw ConfigError("pretrain objective must be full_caption or split_half");
  }
  ExampleOptions opts;
  opts.k_frames = config.get_size("k_frames");
  opts.max_target_len = mc.max_target_len;
  opts.ablation.drop_scene_graph = !config.get_bool("use_scene_graph");

  const auto segments =
    parse_file(segments_path, [](std::istream& in) { return read_segments(in); });
  std::vector<PretrainExample> examples;
  examples.reserve(segments.size());
  for (const auto& seg : segments) {
    examples.push_back(build_pretrain_example(objective, seg, *encoder,
                                              graph_for(graphs, segment_key(seg)), opts));
  }

  TrainConfig tc;
  tc.objective = objective;
  tc.steps = resolve_steps(config, examples.size());
  tc.batch_size = config.get_size("batch_size");
  tc.optimizer = optimizer(config);
  tc.seed = derive_seed(seed, kPretrainTrainSalt);
  RunDirectory dir(out_dir);
  return run_training(config, dir, to_training_examples(examples), *model, tc, out);
}

int
cmd_finetune(RunConfig& config, std::ostream& out, std::ostream&)
{
  const auto vqa_path = config.get_path("vqa");
  const auto out_dir = resolve_out(config);
  const bool use_graph = config.get_bool("use_scene_graph");
  const auto graphs = load_graphs(config, "graphs", "graph_manifest");
  std::unique_ptr<Backbone> model;
  if (config.has("init")) {
    model = std::make_unique<Backbone>(load_checkpoint(config.get_path("init")));
    adopt_model_config(config, model->config());
  }
  const auto mc = model_config(config);
  const auto seed = config.get_u64("seed");
  if (!model) {
    model = std::make_unique<Backbone>(mc, derive_seed(seed, kInitSalt));
  }
  const auto encoder = make_encoder(config, mc.d_model);
  const StoreReader images(config.get_path("images"));

  const auto records = yes_no_filter(
    parse_file(vqa_path, [](std::istream& in) { return read_vqa_dataset(in); }),
    config.get_bool("yes_no_only"));
  if (records.empty()) {
    throw ConfigError("finetune: no training records");
  }
  static const std::map<std::string, SceneGraph> none;
  const auto examples = build_vqa_examples(records, images, *encoder, use_graph ? graphs : none,
                                           derive_seed(seed, kFinetuneExamplesSalt),
                                           mc.max_target_len);

  TrainConfig tc;
  tc.objective = Objective::vqa;
  tc.steps = resolve_steps(config, examples.size());
  tc.batch_size = config.get_size("batch_size");
  tc.optimizer = optimizer(config);
  tc.seed = derive_seed(seed, kFinetuneTrainSalt);
  RunDirectory dir(out_dir);
  const ModalityAblation ablation{false, false, !use_graph};
  return run_training(config, dir, to_training_examples(examples, ablation), *model, tc, out);
}

int
cmd_eval(RunConfig& config, std::ostream& out, std::ostream&)
{
  const auto ckpt = config.get_path("checkpoint");
  if (!fs::exists(ckpt)) {
    throw NotFoundError("checkpoint not found: " + ckpt.string());
  }
  const auto vqa_path = config.get_path("vqa");
  const auto out_dir = resolve_out(config);
  const bool use_graph = config.get_bool("use_scene_graph");
  const auto graphs = load_graphs(config, "graphs", "graph_manifest");
  const auto model = load_checkpoint(ckpt);
  const auto encoder = make_encoder(config, model.config().d_model);
  const StoreReader images(config.get_path("images"));
  EvalOptions eo;
  eo.ablation.drop_scene_graph = !use_graph;
  eo.max_answer_tokens = config.get_size("max_answer_tokens");
  const auto seed = config.get_u64("seed");

  const auto records = yes_no_filter(
    parse_file(vqa_path, [](std::istream& in) { return read_vqa_dataset(in); }),
    config.get_bool("yes_no_only"));
  if (records.empty()) {
    throw ConfigError("eval: no evaluation records");
  }
  static const std::map<std::string, SceneGraph> none;
  const auto examples = build_vqa_examples(records, images, *encoder, use_graph ? graphs : none,
                                           derive_seed(seed, kEvalExamplesSalt),
                                           model.config().max_target_len);
  RunDirectory dir(out_dir);
  write_text(dir / kConfigFileName, config.render());
  out << "config: " << config.echo() << '\n';

  const auto result = evaluate(model, examples, eo);
  std::string preds;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    json j;
    j["image_key"] = examples[i].image_key;
    j["question"] = examples[i].question_text;
    j["prediction"] = result.predictions[i];
    j["normalized"] = normalize_answer(result.predictions[i]);
    j["score"] = vqa_accuracy(result.predictions[i], examples[i].human_answers);
    preds += dump(j) + "\n";
  }
  write_text(dir / "predictions.jsonl", preds);

  const auto& c = result.collapse;
  json summary;
  summary["command"] = "eval";
  summary["accuracy"] = result.mean;
  summary["examples"] = examples.size();
  summary["scored"] = result.scores.size();
  summary["failed"] = result.failed;
  summary["collapsed"] = c.collapsed;
  summary["top_answer"] = c.top_answer;
  summary["top_share"] = c.top_share;
  summary["entropy_nats"] = c.entropy_nats;
  summary["histogram"] = c.histogram;
  {
    MetricsLog log(dir / kMetricsFileName);
    log.write_summary(dump(summary));
  }
  write_text(dir / kSummaryFileName, dump(summary, 2) + "\n");
  dir.commit();

  out << "accuracy=" << fmt("%.4f", result.mean) << " examples=" << examples.size()
      << " failed=" << result.failed << " collapsed=" << (c.collapsed ? "true" : "false")
      << " top_answer=" << dump(json(c.top_answer)) << " top_share=" << fmt("%.3f", c.top_share)
      << "\nwrote " << dir.final_path().string() << '\n';
  return 0;
}

int
cmd_ablate(RunConfig& config, std::ostream& out, std::ostream& err)
{
  const auto out_dir = resolve_out(config);
  AblationData data;
  data.model = model_config(config);
  data.encoder = make_encoder(config, data.model.d_model);
  data.segment_graphs = load_graphs(config, "graphs", "graph_manifest");
  data.image_graphs = load_graphs(config, "image_graphs", "image_graph_manifest");
  data.images = std::make_shared<const StoreReader>(config.get_path("images"));
  data.segments =
    parse_file(config.get_path("segments"), [](std::istream& in) { return read_segments(in); });
  data.vqa_train =
    parse_file(config.get_path("vqa_train"), [](std::istream& in) { return read_vqa_dataset(in); });
  data.vqa_test =
    parse_file(config.get_path("vqa_test"), [](std::istream& in) { return read_vqa_dataset(in); });
  data.batch_size = config.get_size("batch_size");
  data.optimizer = optimizer(config);
  data.k_frames = config.get_size("k_frames");
  data.max_answer_tokens = config.get_size("max_answer_tokens");
  if (!config.has("pretrain_steps")) {
    config.set("pretrain_steps", std::to_string(one_epoch(data.segments.size(), data.batch_size)),
               false);
  }
  if (!config.has("finetune_steps")) {
    config.set("finetune_steps", std::to_string(one_epoch(data.vqa_train.size(), data.batch_size)),
               false);
  }
  const auto grid =
    ablation_grid(config.get_size("pretrain_steps"), config.get_size("finetune_steps"),
                  config.get_u64("seed"), parse_objective(config.require("objective")));

  RunDirectory dir(out_dir);
  write_text(dir / kConfigFileName, config.render());
  out << "config: " << config.echo() << '\n';
  const auto rows = run_ablations(data, grid);

  std::ostringstream table, jsonl;
  write_ablation_table(table, rows);
  write_ablation_jsonl(jsonl, rows);
  write_text(dir / "table.tsv", table.str());
  write_text(dir / "rows.jsonl", jsonl.str());
  std::size_t failed = 0;
  for (const auto& r : rows) {
    if (r.failed) {
      ++failed;
      err << "warning: " << r.label << " failed: " << r.error << '\n';
    }
  }
  json summary;
  summary["command"] = "ablate";
  summary["rows"] = rows.size();
  summary["failed_rows"] = failed;
  {
    MetricsLog log(dir / kMetricsFileName);
    log.write_summary(dump(summary));
  }
  write_text(dir / kSummaryFileName, dump(summary, 2) + "\n");
  dir.commit();
  out << table.str() << "wrote " << dir.final_path().string() << '\n';
  return 0;
}

int
cmd_inspect(RunConfig& config, std::ostream& out, std::ostream&)
{
  const StoreReader store(config.get_path("store"));
  inspect_store(store, out, config.get_size("max_records"));
  return 0;
}

int
cmd_synth(RunConfig& config, std::ostream& out, std::ostream&)
{
  const auto out_dir = resolve_out(config);
  SyntheticCorpusConfig cc;
  cc.videos = config.get_size("videos");
  cc.segments_per_video = config.get_size("segments_per_video");
  cc.sparse_segments_per_video = config.get_size("sparse_segments_per_video");
  cc.seed = config.get_u64("seed");
  MiniVqaConfig vc;
  vc.images = config.get_size("images");
  vc.test_fraction = config.get_double("test_fraction");
  vc.seed = config.get_u64("seed");
  const StubEncoder encoder(config.get_size("dim"), config.get_u64("encoder_seed"));

  const auto corpus = make_synthetic_corpus(cc);
  const auto vqa = make_mini_vqa(vc);
  RunDirectory dir(out_dir);
  write_text(dir / kConfigFileName, config.render());

  const auto write_graphs = [&](const std::string& name,
                                const std::map<std::string, SceneGraph>& graphs) {
    std::ostringstream g, m;
    write_scene_graphs(g, m, graphs);
    write_text(dir / name, g.str());
    write_text(dir / (name + ".keys"), m.str());
  };
  std::ostringstream transcripts, train, test;
  write_transcripts(transcripts, corpus.transcripts);
  write_vqa_dataset(train, vqa.train);
  write_vqa_dataset(test, vqa.test);
  write_text(dir / "transcripts.jsonl", transcripts.str());
  write_text(dir / "vqa_train.jsonl", train.str());
  write_text(dir / "vqa_test.jsonl", test.str());
  write_graphs("segment_graphs.txt", corpus.graphs);
  write_graphs("image_graphs.txt", vqa.graphs);
  write_image_store(vqa.image_keys, encoder, dir / "images.vpts");
  dir.commit();
  out << "videos=" << corpus.transcripts.size() << " images=" << vqa.image_keys.size()
      << " vqa_train=" << vqa.train.size() << " vqa_test=" << vqa.test.size() << "\nwrote "
      << dir.final_path().string() << '\n';
  return 0;
}

const std::vector<CommandSpec>&
commands()
{
  static const std::vector<CommandSpec> specs{
    {"segment",
     "Split transcripts into fixed word windows and drop sparse ones",
     {
       {"transcripts", "", "input transcript JSONL"},
       {"out", "", "output segment JSONL"},
       {"window", "15", "words per segment"},
       {"min_wpm", "30", "minimum words per minute"},
       {"stride", "", "words between segment starts (default: window)"},
       {"frames_per_segment", "1", "frame times recorded per segment"},
       {"language", "", "keep only transcripts with this language tag"},
       {"video_min_wpm", "", "also drop whole videos below this mean density"},
     },
     cmd_segment},
    {"encode",
     "Encode segments with the expert encoder and pack them into an embedding store",
     std::vector<ConfigKey>{
       {"segments", "", "segment JSONL"},
       {"graphs", "", "scene graph file keyed by segment"},
       {"graph_manifest", "", "graph key manifest (default: <graphs>.keys)"},
       {"out", "", "output store"},
       {"dim", "768", "embedding width"},
       {"k_frames", "1", "frames per segment"},
       {"compression", "none", "none or deflate"},
     } + kEncoderKeys,
     cmd_encode},
    {"pretrain",
     "Pretrain the backbone on segment captions",
     std::vector<ConfigKey>{
       {"segments", "", "segment JSONL"},
       {"graphs", "", "scene graph file keyed by segment"},
       {"graph_manifest", "", "graph key manifest (default: <graphs>.keys)"},
       {"out", "", "run directory"},
       {"objective", "split_half", "full_caption or split_half"},
       {"use_scene_graph", "true", "feed the scene graph row"},
       {"k_frames", "1", "frames per segment"},
       {"steps", "", "optimizer steps (default: one epoch)"},
       {"checkpoint_every", "0", "periodic checkpoint interval, 0 disables"},
       {"init", "", "checkpoint to start from"},
       {"svg", "false", "also render the loss curve as SVG"},
     } + kEncoderKeys + kModelKeys + kOptimKeys,
     cmd_pretrain},
    {"finetune",
     "Finetune the backbone on VQA records",
     std::vector<ConfigKey>{
       {"vqa", "", "VQA JSONL"},
       {"images", "", "image embedding store"},
       {"graphs", "", "scene graph file keyed by image"},
       {"graph_manifest", "", "graph key manifest (default: <graphs>.keys)"},
       {"out", "", "run directory"},
       {"use_scene_graph", "true", "feed the scene graph row"},
       {"yes_no_only", "false", "train on yes/no questions only"},
       {"steps", "", "optimizer steps (default: one epoch)"},
       {"checkpoint_every", "0", "periodic checkpoint interval, 0 disables"},
       {"init", "", "checkpoint to start from"},
       {"svg", "false", "also render the loss curve as SVG"},
     } + kEncoderKeys + kModelKeys + kOptimKeys,
     cmd_finetune},
    {"eval",
     "Score a checkpoint on VQA records",
     std::vector<ConfigKey>{
       {"checkpoint", "", "model checkpoint"},
       {"vqa", "", "VQA JSONL"},
       {"images", "", "image embedding store"},
       {"graphs", "", "scene graph file keyed by image"},
       {"graph_manifest", "", "graph key manifest (default: <graphs>.keys)"},
       {"out", "", "run directory"},
       {"use_scene_graph", "true", "feed the scene graph row"},
       {"yes_no_only", "false", "score yes/no questions only"},
       {"max_answer_tokens", "16", "decoding budget"},
       {"seed", "0", "run seed"},
     } + kEncoderKeys,
     cmd_eval},
    {"ablate",
     "Run the pretraining / scene graph / yes-no ablation grid",
     std::vector<ConfigKey>{
       {"segments", "", "segment JSONL for pretraining"},
       {"graphs", "", "scene graph file keyed by segment"},
       {"graph_manifest", "", "graph key manifest (default: <graphs>.keys)"},
       {"vqa_train", "", "VQA JSONL for finetuning"},
       {"vqa_test", "", "VQA JSONL for evaluation"},
       {"images", "", "image embedding store"},
       {"image_graphs", "", "scene graph file keyed by image"},
       {"image_graph_manifest", "", "graph key manifest (default: <image_graphs>.keys)"},
       {"out", "", "run directory"},
       {"objective", "split_half", "pretraining objective"},
       {"k_frames", "1", "frames per segment"},
       {"pretrain_steps", "", "pretraining steps (default: one epoch)"},
       {"finetune_steps", "", "finetuning steps (default: one epoch)"},
       {"max_answer_tokens", "16", "decoding budget"},
     } + kEncoderKeys + kModelKeys + kOptimKeys,
     cmd_ablate},
    {"inspect",
     "Print an embedding store's header and per-record shapes",
     {
       {"store", "", "store path"},
       {"max_records", "0", "records to list, 0 for all"},
     },
     cmd_inspect},
    {"synth",
     "Write a synthetic transcript corpus and a small VQA set",
     {
       {"out", "", "output directory"},
       {"videos", "16", "transcripts"},
       {"segments_per_video", "16", "dense segments per transcript"},
       {"sparse_segments_per_video", "2", "segments below the density threshold"},
       {"images", "48", "VQA images"},
       {"test_fraction", "0.25", "share of images held out"},
       {"dim", "768", "image embedding width"},
       {"encoder_seed", "0", "stub encoder seed for image embeddings"},
       {"seed", "0", "corpus seed"},
     },
     cmd_synth},
  };
  return specs;
}

const CommandSpec&
find_command(const std::string& name)
{
  for (const auto& c : commands()) {
    if (c.name == name) {
      return c;
    }
  }
  throw ArgumentError("unknown command " + name);
}

} // namespace vpt::cli
