#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "test_support.hpp"
#include "vpt/ablation.hpp"
#include "vpt/errors.hpp"
#include "vpt/evaluation.hpp"
#include "vpt/hashing.hpp"
#include "vpt/synthetic.hpp"

using namespace vpt;

namespace {

std::vector<std::string>
answers_with(std::size_t matches, const std::string& ans)
{
  std::vector<std::string> out(10, "something else");
  for (std::size_t i = 0; i < matches; ++i) {
    out[i] = ans;
  }
  return out;
}

} // namespace

TEST_CASE("normalize_answer")
{
  CHECK(normalize_answer("The Dog.") == "dog");
  CHECK(normalize_answer("yes") == "yes");
  CHECK(normalize_answer("  NO ") == "no");
  CHECK(normalize_answer("a") == "a");
  CHECK(normalize_answer("the a dog") == "dog");
  CHECK(normalize_answer("two   red\tcups!") == "two red cups");
  CHECK(normalize_answer("") == "");

  Rng rng(9);
  const std::string alphabet = "aAbB .,!?-'theTHE\t";
  for (int i = 0; i < 300; ++i) {
    std::string s;
    const auto n = rng.uniform_index(20);
    for (std::size_t j = 0; j < n; ++j) {
      s.push_back(alphabet[rng.uniform_index(alphabet.size())]);
    }
    const auto once = normalize_answer(s);
    CHECK(normalize_answer(once) == once);
  }
}

TEST_CASE("vqa_accuracy")
{
  CHECK(vqa_accuracy("yes", answers_with(3, "yes")) == 1.0);
  CHECK(vqa_accuracy("yes", answers_with(0, "yes")) == 0.0);
  CHECK(vqa_accuracy("yes", answers_with(1, "yes")) == 1.0 / 3.0);
  CHECK(vqa_accuracy("yes", answers_with(2, "yes")) == doctest::Approx(0.6667).epsilon(1e-4));
  CHECK(vqa_accuracy("The Dog", answers_with(2, "dog.")) == 2.0 / 3.0);

  double prev = -1.0;
  for (std::size_t m = 0; m <= 10; ++m) {
    const double s = vqa_accuracy("x", answers_with(m, "x"));
    CHECK(s >= prev);
    CHECK(s == std::min(static_cast<double>(m) / 3.0, 1.0));
    prev = s;
  }
  CHECK_THROWS_AS(vqa_accuracy("x", std::vector<std::string>(11, "x")), ArgumentError);
}

TEST_CASE("is_yes_no")
{
  std::vector<std::string> mix{"yes", "no", "yes", "yes", "no", "no", "yes", "yes", "no", "no"};
  CHECK(is_yes_no(mix));
  auto with_two = mix;
  with_two[4] = "2";
  CHECK_FALSE(is_yes_no(with_two));
  auto with_empty = mix;
  with_empty[0] = "";
  CHECK_FALSE(is_yes_no(with_empty));
  CHECK(is_yes_no(VqaRecord{"k", "q", mix}));
}

TEST_CASE("collapse_report")
{
  const std::vector<std::string> p{"no", "no", "no", "yes"};
  const auto r = collapse_report(p);
  CHECK(r.top_share == 0.75);
  CHECK(r.collapsed);
  CHECK(r.top_answer == "no");

  const auto u = collapse_report(std::vector<std::string>{"a", "b", "c", "d"});
  CHECK(u.entropy_nats == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK_FALSE(u.collapsed);
  CHECK(collapse_report(std::vector<std::string>{"x"}).entropy_nats == 0.0);
  CHECK_THROWS_AS(collapse_report(std::vector<std::string>{}), ArgumentError);

  const auto half = collapse_report(std::vector<std::string>{"a", "a", "b", "c"});
  CHECK_FALSE(half.collapsed); // exactly 0.5 is not a majority

  std::size_t total = 0;
  for (const auto& [k, v] : r.histogram) {
    total += v;
  }
  CHECK(total == p.size());

  Rng rng(4);
  std::vector<std::string> preds;
  for (int i = 0; i < 40; ++i) {
    preds.push_back(rng.uniform() < 0.6 ? "no" : (rng.uniform() < 0.5 ? "yes" : "2"));
  }
  const auto base = collapse_report(preds);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto perm = seeded_permutation(preds.size(), s, 0);
    std::vector<std::string> shuffled;
    for (auto i : perm) {
      shuffled.push_back(preds[i]);
    }
    const auto other = collapse_report(shuffled);
    CHECK(other.collapsed == base.collapsed);
    CHECK(other.top_share == base.top_share);
    CHECK(other.histogram == base.histogram);
  }
}

TEST_CASE("evaluate")
{
  testing::TempDir dir;
  ModelConfig cfg;
  cfg.d_model = 16;
  cfg.n_heads = 2;
  cfg.n_encoder_layers = cfg.n_decoder_layers = 1;
  cfg.d_ff = 32;
  cfg.max_target_len = 16;
  StubEncoder enc(16, 0);

  MiniVqaConfig vc;
  vc.images = 16;
  const auto vqa = make_mini_vqa(vc);
  write_image_store(vqa.image_keys, enc, dir / "images");
  StoreReader images(dir / "images");
  const auto test = build_vqa_examples(vqa.test, images, enc, vqa.graphs, 1, cfg.max_target_len);

  const Backbone model(cfg, 3);
  const auto a = evaluate(model, test);
  const auto b = evaluate(model, test);
  CHECK(a.predictions == b.predictions);
  CHECK(a.scores == b.scores);
  CHECK(a.mean == b.mean);
  CHECK(a.failed == 0);
  CHECK(a.mean >= 0.0);
  CHECK(a.mean <= 1.0);
  double sum = 0.0;
  for (double s : a.scores) {
    sum += s;
  }
  CHECK(std::abs(a.mean - sum / static_cast<double>(a.scores.size())) < 1e-12);
  CHECK(a.collapse.collapsed); // zero output projections: identical predictions

  SUBCASE("oracle and constant predictors")
  {
    // Score the metric directly with the predictions an oracle and a
    // constant "no" model would make on a balanced unanimous set.
    std::vector<VqaRecord> yn;
    auto all = vqa.train;
    all.insert(all.end(), vqa.test.begin(), vqa.test.end());
    for (const auto& r : all) {
      if (is_yes_no(r)) {
        yn.push_back(r);
      }
    }
    std::size_t yes = 0;
    double oracle = 0.0, constant = 0.0;
    for (const auto& r : yn) {
      yes += r.answers[0] == "yes";
      oracle += vqa_accuracy(r.answers[0], r.answers);
      constant += vqa_accuracy("no", r.answers);
    }
    REQUIRE(2 * yes == yn.size());
    CHECK(oracle / static_cast<double>(yn.size()) == 1.0);
    CHECK(constant / static_cast<double>(yn.size()) == 0.5);
  }
}

TEST_CASE("ablation table")
{
  testing::TempDir dir;
  ModelConfig cfg;
  cfg.d_model = 16;
  cfg.n_heads = 2;
  cfg.n_encoder_layers = cfg.n_decoder_layers = 1;
  cfg.d_ff = 32;
  cfg.max_target_len = 64;
  auto enc = std::make_shared<StubEncoder>(16, 0);

  MiniVqaConfig vc;
  vc.images = 12;
  const auto vqa = make_mini_vqa(vc);
  write_image_store(vqa.image_keys, *enc, dir / "images");
  SyntheticCorpusConfig cc;
  cc.videos = 2;
  cc.segments_per_video = 3;
  const auto corpus = make_synthetic_corpus(cc);

  AblationData data;
  data.model = cfg;
  data.encoder = enc;
  for (const auto& t : corpus.transcripts) {
    for (const auto& s : segment_transcript(t)) {
      data.segments.push_back(s);
    }
  }
  data.segment_graphs = corpus.graphs;
  data.images = std::make_shared<StoreReader>(dir / "images");
  data.vqa_train = vqa.train;
  data.vqa_test = vqa.test;
  data.image_graphs = vqa.graphs;
  data.batch_size = 4;

  SUBCASE("empty grid gives a header only")
  {
    std::ostringstream out;
    write_ablation_table(out, {});
    const auto text = out.str();
    CHECK(text.rfind("label\taccuracy\titerations", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 1);
  }

  SUBCASE("grid rows")
  {
    const auto grid = ablation_grid(2, 3, 1);
    CHECK(grid.size() == 8);
    const auto rows = run_ablations(data, grid);
    REQUIRE(rows.size() == 8);
    for (const auto& r : rows) {
      CHECK_FALSE(r.failed);
      CHECK(r.iterations == (r.config.pretrain ? 5u : 3u));
    }
    CHECK(rows[0].label == "Backbone + VQA Finetuning");
    CHECK(rows[7].label
          == "Backbone + Pre-training + VQA Finetuning (only Yes/No) (w/o scene graph)");

    std::ostringstream a, b;
    write_ablation_table(a, rows);
    write_ablation_table(b, run_ablations(data, grid));
    CHECK(a.str() == b.str());
  }

  SUBCASE("seed changes only the numbers")
  {
    AblationRunConfig c;
    c.finetune_steps = 2;
    c.seed = 1;
    auto d = c;
    d.seed = 2;
    const auto r1 = run_ablation(data, c);
    const auto r2 = run_ablation(data, d);
    CHECK(r1.label == r2.label);
    CHECK(r1.iterations == r2.iterations);
    CHECK(r1.eval_examples == r2.eval_examples);
  }

  SUBCASE("a failing run is reported, not thrown")
  {
    auto broken = data;
    broken.vqa_test.clear();
    AblationRunConfig c;
    const auto row = run_ablation(broken, c);
    CHECK(row.failed);
    std::ostringstream out, jl;
    write_ablation_table(out, {row});
    write_ablation_jsonl(jl, {row});
    CHECK(out.str().find("failed") != std::string::npos);
    CHECK(jl.str().find("\"accuracy\":null") != std::string::npos);
  }
}
