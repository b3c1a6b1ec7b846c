#include <doctest.h>

#include <cmath>
#include <cstring>

#include "test_support.hpp"
#include "vpt/backbone.hpp"
#include "vpt/checkpoint.hpp"
#include "vpt/errors.hpp"
#include "vpt/hashing.hpp"
#include "vpt/optimizer.hpp"
#include "vpt/tokenizer.hpp"

using namespace vpt;

namespace {

ModelConfig
small_config()
{
  ModelConfig c;
  c.d_model = 16;
  c.n_heads = 2;
  c.n_encoder_layers = 2;
  c.n_decoder_layers = 2;
  c.d_ff = 24;
  c.max_target_len = 12;
  return c;
}

// Fresh models start with zero output projections; perturb everything so
// every path carries signal.
Backbone
random_model(const ModelConfig& cfg, std::uint64_t seed)
{
  Backbone m(cfg, seed);
  Rng rng(seed + 100);
  for (auto& t : m.params().tensors()) {
    for (auto& v : t.value) {
      v += 0.2 * rng.normal();
    }
  }
  return m;
}

FusedInput
random_input(std::size_t rows, std::size_t d, std::uint64_t seed)
{
  const std::vector<Modality> kinds{Modality::frame, Modality::frame, Modality::caption,
                                    Modality::scene_graph};
  FusedInput in;
  in.dim = d;
  Rng rng(seed);
  for (std::size_t r = 0; r < rows; ++r) {
    in.row_modalities.push_back(kinds[r % kinds.size()]);
    for (std::size_t j = 0; j < d; ++j) {
      in.values.push_back(static_cast<float>(rng.normal() * 0.25));
    }
  }
  return in;
}

bool
bitwise_equal(std::span<const double> a, std::span<const double> b)
{
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

} // namespace

TEST_CASE("tokenizer")
{
  CHECK(tokenize("ab", 8)
        == TokenSequence{kBosToken, 97, 98, kEosToken, kPadToken, kPadToken, kPadToken, kPadToken});
  CHECK(tokenize("", 4) == TokenSequence{kBosToken, kEosToken, kPadToken, kPadToken});
  const auto t = tokenize("abcdef", 5);
  CHECK(t.size() == 5);
  CHECK(t.back() == kEosToken);
  CHECK(detokenize(t) == "abc");
  CHECK_THROWS_AS(tokenize("x", 1), ArgumentError);

  Rng rng(4);
  for (int i = 0; i < 100; ++i) {
    std::string s;
    const auto n = rng.uniform_index(30);
    for (std::size_t j = 0; j < n; ++j) {
      s.push_back(static_cast<char>(32 + rng.uniform_index(95)));
    }
    CHECK(detokenize(tokenize(s, 32)) == s);
    CHECK(unpadded_length(tokenize(s, 32)) == s.size() + 2);
  }

  CHECK_NOTHROW(validate_tokens(tokenize("ok", 6), 6));
  CHECK_THROWS_AS(validate_tokens(TokenSequence{kBosToken, kPadToken, 65}, 6), ValidationError);
  CHECK_THROWS_AS(validate_tokens(tokenize("ok", 6), 5), ValidationError);
}

TEST_CASE("model config validation")
{
  ModelConfig c = small_config();
  CHECK_NOTHROW(c.validate());
  c.n_heads = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.vocab_size = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.max_target_len = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(Backbone(c, 0), ConfigError);
}

TEST_CASE("initialization is seeded")
{
  const auto cfg = small_config();
  const Backbone a(cfg, 1), b(cfg, 1), c(cfg, 2);
  bool same = true, differs = false;
  for (std::size_t i = 0; i < a.params().tensor_count(); ++i) {
    same = same && a.params()[i].value == b.params()[i].value;
    differs = differs || a.params()[i].value != c.params()[i].value;
  }
  CHECK(same);
  CHECK(differs);
  CHECK(a.params().at("lm_head").shape == std::vector<std::size_t>{16, 259});
  CHECK_THROWS_AS(a.params().at("nope"), NotFoundError);
}

TEST_CASE("encoder forward")
{
  const auto cfg = small_config();
  const auto model = random_model(cfg, 3);
  const auto in = random_input(4, 16, 1);
  const auto enc = encoder_forward(in, model);
  CHECK(enc.hidden.rows == 4);
  CHECK(enc.hidden.cols == 16);

  for (std::size_t l = 0; l < cfg.n_encoder_layers; ++l) {
    for (std::size_t h = 0; h < cfg.n_heads; ++h) {
      const auto& p = enc.attention(l, h);
      for (std::size_t r = 0; r < p.rows; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < p.cols; ++c) {
          s += p(r, c);
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
      }
    }
  }

  SUBCASE("permutation equivariance")
  {
    const std::vector<std::size_t> perm{2, 0, 3, 1};
    FusedInput shuffled;
    shuffled.dim = in.dim;
    for (auto p : perm) {
      shuffled.row_modalities.push_back(in.row_modalities[p]);
      const auto row = in.row(p);
      shuffled.values.insert(shuffled.values.end(), row.begin(), row.end());
    }
    const auto out = encoder_forward(shuffled, model);
    for (std::size_t i = 0; i < perm.size(); ++i) {
      for (std::size_t j = 0; j < 16; ++j) {
        CHECK(out.hidden(i, j) == doctest::Approx(enc.hidden(perm[i], j)).epsilon(1e-12));
      }
    }
  }

  SUBCASE("zero input with zero output projections stays finite")
  {
    Backbone fresh(cfg, 9);
    FusedInput zero = in;
    std::fill(zero.values.begin(), zero.values.end(), 0.0f);
    const auto out = encoder_forward(zero, fresh);
    for (double v : out.hidden.data) {
      CHECK(std::isfinite(v));
    }
  }

  SUBCASE("dimension mismatch")
  {
    CHECK_THROWS_AS(encoder_forward(random_input(2, 8, 1), model), ConfigError);
    FusedInput empty;
    empty.dim = 16;
    CHECK_THROWS_AS(encoder_forward(empty, model), ConfigError);
  }
}

TEST_CASE("decoder forward")
{
  const auto cfg = small_config();
  const auto model = random_model(cfg, 4);
  const auto enc = encoder_forward(random_input(3, 16, 2), model);
  const TokenSequence prefix{kBosToken, 10, 20, 30, 40, 50};
  const auto dec = decoder_forward(prefix, enc.hidden, model);
  CHECK(dec.logits.rows == prefix.size());
  CHECK(dec.logits.cols == 259);
  for (double v : dec.logits.data) {
    CHECK(std::isfinite(v));
  }

  for (std::size_t l = 0; l < cfg.n_decoder_layers; ++l) {
    const auto& self = dec.self_attention(l, 0);
    const auto& cross = dec.cross_attention(l, 1);
    for (std::size_t r = 0; r < self.rows; ++r) {
      double s = 0.0, c = 0.0;
      for (std::size_t k = 0; k < self.cols; ++k) {
        s += self(r, k);
        if (k > r) {
          CHECK(self(r, k) == 0.0);
        }
      }
      for (std::size_t k = 0; k < cross.cols; ++k) {
        c += cross(r, k);
      }
      CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
      CHECK(c == doctest::Approx(1.0).epsilon(1e-6));
    }
  }

  SUBCASE("causality is bitwise")
  {
    for (std::size_t j = 1; j < prefix.size(); ++j) {
      auto changed = prefix;
      changed[j] = 200;
      const auto other = decoder_forward(changed, enc.hidden, model);
      for (std::size_t i = 0; i < j; ++i) {
        CHECK(bitwise_equal(dec.logits.row(i), other.logits.row(i)));
      }
    }
  }

  SUBCASE("argument errors")
  {
    CHECK_THROWS_AS(decoder_forward(TokenSequence{}, enc.hidden, model), ArgumentError);
    CHECK_THROWS_AS(decoder_forward(TokenSequence(13, 65), enc.hidden, model), ArgumentError);
    CHECK_THROWS_AS(decoder_forward(TokenSequence{kBosToken, 259}, enc.hidden, model),
                    ArgumentError);
  }
}

TEST_CASE("cross entropy")
{
  Matrix uniform(3, 259, 0.7);
  const TokenSequence targets{5, 6, kPadToken};
  const auto l = cross_entropy_loss(uniform, targets);
  CHECK(l.loss == doctest::Approx(std::log(259.0)).epsilon(1e-12));
  CHECK(l.loss == doctest::Approx(5.5568).epsilon(1e-4));
  CHECK(l.count == 2);

  Matrix more_pad(5, 259, 0.7);
  CHECK(cross_entropy_loss(more_pad, TokenSequence{5, 6, kPadToken, kPadToken, kPadToken}).loss
        == l.loss);

  double prev = 1e9;
  for (double margin : {1.0, 5.0, 20.0, 60.0}) {
    Matrix m(1, 259, 0.0);
    m(0, 7) = margin;
    const auto r = cross_entropy_loss(m, TokenSequence{7});
    CHECK(r.loss < prev);
    prev = r.loss;
  }
  CHECK(prev < 1e-20);

  CHECK_THROWS_AS(cross_entropy_loss(uniform, TokenSequence{kPadToken, kPadToken, kPadToken}),
                  ArgumentError);
}

TEST_CASE("gradients match central differences")
{
  const auto cfg = small_config();
  auto model = random_model(cfg, 5);
  const auto in = random_input(3, 16, 5);
  const auto tokens = tokenize("hi there", 12);
  model.params().zero_grad();
  accumulate_example_gradients(model, in, tokens, 1.0);

  Rng rng(6);
  double worst = 0.0;
  for (auto& t : model.params().tensors()) {
    for (int s = 0; s < 4; ++s) {
      std::size_t idx = rng.uniform_index(t.size());
      if (t.name == "decoder.token_embedding") {
        idx = static_cast<std::size_t>(tokens[rng.uniform_index(9)]) * 16 + rng.uniform_index(16);
      }
      const double orig = t.value[idx];
      t.value[idx] = orig + 1e-4;
      const double lp = example_loss(model, in, tokens).nll_sum;
      t.value[idx] = orig - 1e-4;
      const double lm = example_loss(model, in, tokens).nll_sum;
      t.value[idx] = orig;
      const double num = (lp - lm) / 2e-4;
      const double rel =
        std::abs(num - t.grad[idx]) / std::max({std::abs(num), std::abs(t.grad[idx]), 1e-6});
      worst = std::max(worst, rel);
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("unused parameters get exactly zero gradient")
{
  const auto cfg = small_config();
  auto model = random_model(cfg, 6);
  FusedInput in = random_input(2, 16, 6);
  in.row_modalities = {Modality::frame, Modality::caption}; // no scene graph row
  const auto tokens = tokenize("ab", 6);
  model.params().zero_grad();
  accumulate_example_gradients(model, in, tokens, 1.0);

  const auto& me = model.params().at("encoder.modality_embedding");
  const std::size_t graph_slot = modality_type_slot(Modality::scene_graph);
  for (std::size_t j = 0; j < 16; ++j) {
    CHECK(me.grad[graph_slot * 16 + j] == 0.0);
  }
  const auto& te = model.params().at("decoder.token_embedding");
  for (std::size_t j = 0; j < 16; ++j) {
    CHECK(te.grad[200 * 16 + j] == 0.0);
  }
}

TEST_CASE("logit gradients vanish at the perfect-prediction limit")
{
  double prev = 1e9;
  for (double margin : {2.0, 10.0, 40.0}) {
    Matrix m(2, 259, 0.0);
    m(0, 7) = margin;
    m(1, 9) = margin;
    const auto r = cross_entropy_loss(m, TokenSequence{7, 9});
    double norm = 0.0;
    for (double g : r.dlogits.data) {
      norm += g * g;
    }
    CHECK(std::sqrt(norm) < prev);
    prev = std::sqrt(norm);
  }
  CHECK(prev < 1e-12);
}

TEST_CASE("non-finite gradients name the parameter")
{
  const auto cfg = small_config();
  auto model = random_model(cfg, 7);
  model.params().at("lm_head").value[3] = std::numeric_limits<double>::quiet_NaN();
  model.params().zero_grad();
  try {
    accumulate_example_gradients(model, random_input(2, 16, 1), tokenize("x", 4), 1.0);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("non-finite") != std::string::npos);
  }
}

TEST_CASE("adamw")
{
  AdamWConfig c;
  c.lr = 0.1;
  c.eps = 0.0;
  c.weight_decay = 0.0;
  auto s = adamw_scalar_update({1.0, 0.0, 0.0}, 1.0, 1, c);
  CHECK(s.theta == doctest::Approx(0.9).epsilon(1e-12));

  s = adamw_scalar_update({1.0, 0.0, 0.0}, 0.0, 1, AdamWConfig{0.1, 0.9, 0.999, 1e-8, 0.0});
  CHECK(s.theta == 1.0);

  s = adamw_scalar_update({2.0, 0.0, 0.0}, 0.0, 1, AdamWConfig{0.1, 0.9, 0.999, 1e-8, 0.5});
  CHECK(s.theta == doctest::Approx(2.0 - 0.1 * 0.5 * 2.0).epsilon(1e-15));

  // Independent two-step oracle.
  const double g1 = 0.3, g2 = -0.7, lr = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8, wd = 0.01;
  double th = 0.5, m = 0, v = 0;
  for (int t = 1; t <= 2; ++t) {
    const double g = t == 1 ? g1 : g2;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t)), vh = v / (1 - std::pow(b2, t));
    th = th - lr * mh / (std::sqrt(vh) + eps) - lr * wd * th;
  }
  AdamWScalarState st{0.5, 0, 0};
  st = adamw_scalar_update(st, g1, 1, {lr, b1, b2, eps, wd});
  st = adamw_scalar_update(st, g2, 2, {lr, b1, b2, eps, wd});
  CHECK(st.theta == doctest::Approx(th).epsilon(1e-14));

  SUBCASE("tensor step agrees with scalar form and refuses non-finite")
  {
    auto model = Backbone(small_config(), 1);
    auto& t = model.params().at("lm_head");
    const double before = t.value[5];
    model.params().zero_grad();
    t.grad[5] = 0.25;
    adamw_step(model.params(), AdamWConfig{});
    const auto want = adamw_scalar_update({before, 0, 0}, 0.25, 1, AdamWConfig{});
    CHECK(t.value[5] == want.theta);
    CHECK(model.params().step == 1);

    const auto snapshot = t.value;
    t.grad[0] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(adamw_step(model.params(), AdamWConfig{}), NumericalError);
    CHECK(t.value == snapshot);
    CHECK(model.params().step == 1);
  }
}

TEST_CASE("greedy decode")
{
  const auto cfg = small_config();
  const auto model = random_model(cfg, 8);
  const auto enc = encoder_forward(random_input(3, 16, 3), model);
  const auto a = greedy_decode(enc.hidden, model, 10);
  CHECK(a == greedy_decode(enc.hidden, model, 10));
  CHECK(a.front() == kBosToken);
  CHECK(a.size() <= 11);

  const auto one = greedy_decode(enc.hidden, model, 1);
  CHECK(one.size() <= 2);
  CHECK(one.front() == kBosToken);
  CHECK(greedy_decode(enc.hidden, model, 0) == TokenSequence{kBosToken});

  // Ties go to the lowest id: an all-zero model predicts token 0 forever.
  auto zero = Backbone::zeros(cfg);
  const auto z = greedy_decode(encoder_forward(random_input(1, 16, 1), zero).hidden, zero, 3);
  CHECK(z == TokenSequence{kBosToken, 0, 0, 0});
}

TEST_CASE("fresh model loss is near uniform")
{
  const Backbone model(small_config(), 11);
  double total = 0.0;
  std::size_t tokens = 0;
  Rng rng(1);
  for (int i = 0; i < 8; ++i) {
    std::string text;
    for (int j = 0; j < 8; ++j) {
      text.push_back(static_cast<char>('a' + rng.uniform_index(26)));
    }
    const auto l = example_loss(model, random_input(3, 16, i), tokenize(text, 12));
    total += l.nll_sum;
    tokens += l.tokens;
  }
  CHECK(total / static_cast<double>(tokens) == doctest::Approx(std::log(259.0)).epsilon(0.1));
}

TEST_CASE("checkpoint roundtrip")
{
  testing::TempDir dir;
  const auto cfg = small_config();
  auto model = random_model(cfg, 12);
  model.params().step = (1ull << 24) + 5;
  model.params().at("lm_head").m[2] = 0.125;
  for (auto c : {Compression::none, Compression::deflate}) {
    const auto path = dir / ("ckpt_" + std::string(to_string(c)));
    save_checkpoint(model, path, c);
    const auto back = load_checkpoint(path);
    CHECK(back.config() == cfg);
    CHECK(back.params().step == model.params().step);
    for (std::size_t i = 0; i < model.params().tensor_count(); ++i) {
      const auto& a = model.params()[i];
      const auto& b = back.params()[i];
      CHECK(a.name == b.name);
      for (std::size_t k = 0; k < a.size(); ++k) {
        CHECK(b.value[k] == static_cast<double>(static_cast<float>(a.value[k])));
        CHECK(b.m[k] == static_cast<double>(static_cast<float>(a.m[k])));
      }
    }
    CHECK(read_checkpoint_config(StoreReader(path)) == cfg);
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "absent"), IoError);
}
