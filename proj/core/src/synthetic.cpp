#include "vpt/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include "vpt/embedding_store.hpp"
#include "vpt/errors.hpp"
#include "vpt/hashing.hpp"

namespace vpt {

namespace {

constexpr std::array<const char*, 32> kWords = {
  "the", "a",   "red",  "blue", "big", "small", "cat", "dog", "box", "cup", "pan",
  "lid", "cut", "mix",  "add",  "put", "take",  "hold", "turn", "open", "shut", "now",
  "then", "on", "in",   "up",   "off", "hot",   "cold", "wet",  "dry",  "slow",
};

constexpr std::array<const char*, 8> kLabels = {
  "dog", "cat", "ball", "car", "tree", "cup", "chair", "bird",
};

constexpr std::array<const char*, 4> kPredicates = {"on", "near", "under", "behind"};

constexpr std::array<const char*, 4> kCountWords = {"0", "1", "2", "3"};

std::string
pick_word(Rng& rng)
{
  return kWords[rng.uniform_index(kWords.size())];
}

// Up to three distinct labels chained by relations.
SceneGraph
random_graph(Rng& rng, std::size_t max_objects)
{
  SceneGraph g;
  const std::size_t n = 1 + rng.uniform_index(max_objects);
  auto labels = seeded_permutation(kLabels.size(), rng.next_u64(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    g.objects.emplace_back(kLabels[labels[i]]);
  }
  for (std::size_t i = 0; i + 1 < n; ++i) {
    g.relations.push_back({i, kPredicates[rng.uniform_index(kPredicates.size())], i + 1});
  }
  return g;
}

std::vector<std::string>
human_answers(const std::string& majority, const std::string& other, std::size_t dissent)
{
  std::vector<std::string> out(kVqaHumanAnswers, majority);
  for (std::size_t i = 0; i < dissent; ++i) {
    out[kVqaHumanAnswers - 1 - i] = other;
  }
  return out;
}

} // namespace

SyntheticCorpus
make_synthetic_corpus(const SyntheticCorpusConfig& config)
{
  if (config.window == 0 || config.opener_words > config.window) {
    throw ConfigError("synthetic corpus: opener_words must not exceed window");
  }
  if (config.opener_pool == 0) {
    throw ConfigError("synthetic corpus: opener_pool must be >= 1");
  }
  Rng rng(derive_seed(config.seed, 0x636F72707573));

  std::vector<std::vector<std::string>> openers(config.opener_pool);
  std::vector<SceneGraph> graph_pool;
  for (auto& o : openers) {
    for (std::size_t i = 0; i < config.opener_words; ++i) {
      o.push_back(pick_word(rng));
    }
    graph_pool.push_back(random_graph(rng, 3));
  }

  SyntheticCorpus corpus;
  for (std::size_t v = 0; v < config.videos; ++v) {
    char id[32];
    std::snprintf(id, sizeof id, "vid%04zu", v);
    TimedTranscript t;
    t.video_id = id;
    t.language = "en";
    double clock = 0.0;

    auto emit = [&](const std::string& w, double gap) {
      const double dur = 0.2 + 0.2 * rng.uniform();
      t.words.push_back({w, clock, clock + dur});
      clock += dur + gap;
    };

    for (std::size_t s = 0; s < config.segments_per_video; ++s) {
      const std::size_t which = rng.uniform_index(openers.size());
      for (const auto& w : openers[which]) {
        emit(w, 0.05 + 0.1 * rng.uniform());
      }
      for (std::size_t i = config.opener_words; i < config.window; ++i) {
        emit(pick_word(rng), 0.05 + 0.1 * rng.uniform());
      }
      corpus.graphs[std::string(id) + "/" + std::to_string(s)] = graph_pool[which];
    }
    // Roughly 11 wpm: kept in the transcript, removed by the density filter.
    for (std::size_t s = 0; s < config.sparse_segments_per_video; ++s) {
      for (std::size_t i = 0; i < config.window; ++i) {
        emit(pick_word(rng), 5.0);
      }
    }
    corpus.transcripts.push_back(std::move(t));
  }
  return corpus;
}

MiniVqa
make_mini_vqa(const MiniVqaConfig& config)
{
  if (config.images < 2) {
    throw ConfigError("mini vqa: need at least two images");
  }
  if (!(config.test_fraction > 0.0 && config.test_fraction < 1.0)) {
    throw ConfigError("mini vqa: test_fraction must be in (0, 1)");
  }
  if (config.dissenting_answers > 2) {
    throw ConfigError("mini vqa: dissenting_answers must be <= 2");
  }
  Rng rng(derive_seed(config.seed, 0x6D696E69767161));
  MiniVqa out;
  std::vector<std::vector<VqaRecord>> per_image;
  for (std::size_t i = 0; i < config.images; ++i) {
    char key[32];
    std::snprintf(key, sizeof key, "img%04zu", i);
    const auto graph = random_graph(rng, 3);
    out.graphs[key] = graph;
    out.image_keys.emplace_back(key);

    std::vector<VqaRecord> qs;
    std::string label;
    bool present = i % 2 == 0;
    if (present) {
      label = graph.objects[rng.uniform_index(graph.objects.size())];
    } else {
      do {
        label = kLabels[rng.uniform_index(kLabels.size())];
      } while (std::find(graph.objects.begin(), graph.objects.end(), label)
               != graph.objects.end());
    }
    qs.push_back({key, "is there a " + label + "?",
                  human_answers(present ? "yes" : "no", present ? "no" : "yes",
                                config.dissenting_answers)});

    const std::size_t n = graph.objects.size();
    qs.push_back({key, "how many objects are there?",
                  human_answers(kCountWords[n], kCountWords[n - 1], config.dissenting_answers)});
    per_image.push_back(std::move(qs));
  }

  const auto order = seeded_permutation(config.images, config.seed, 0);
  const auto n_test = static_cast<std::size_t>(
    std::ceil(config.test_fraction * static_cast<double>(config.images)));
  for (std::size_t r = 0; r < order.size(); ++r) {
    auto& dst = r < n_test ? out.test : out.train;
    for (auto& q : per_image[order[r]]) {
      dst.push_back(std::move(q));
    }
  }
  return out;
}

StoreSummary
write_image_store(const std::vector<std::string>& image_keys, const ExpertEncoder& encoder,
                  const std::filesystem::path& path)
{
  StoreWriter writer(path, Compression::none);
  for (const auto& k : image_keys) {
    writer.add(to_record(k, encoder.encode_frame(k, 0.0)));
  }
  return writer.commit();
}

} // namespace vpt
