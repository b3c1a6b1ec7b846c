#include "vpt/backbone.hpp"

#include <cmath>
#include <limits>

#include "tensor_ops.hpp"
#include "vpt/errors.hpp"
#include "vpt/hashing.hpp"

namespace vpt {

// -- config / parameters -----------------------------------------------------

void
ModelConfig::validate() const
{
  if (d_model == 0 || n_heads == 0 || d_ff == 0) {
    throw ConfigError("model dimensions must be positive");
  }
  if (d_model % n_heads != 0) {
    throw ConfigError("d_model (" + std::to_string(d_model) + ") must be divisible by n_heads ("
                      + std::to_string(n_heads) + ")");
  }
  if (vocab_size < 4) {
    throw ConfigError("vocab_size must be >= 4");
  }
  if (max_target_len < 1) {
    throw ConfigError("max_target_len must be >= 1");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw ConfigError("dropout must lie in [0, 1)");
  }
}

std::size_t
Parameters::add(std::string name, std::vector<std::size_t> shape)
{
  std::size_t n = 1;
  for (auto d : shape) {
    n *= d;
  }
  ParamTensor t;
  t.name = std::move(name);
  t.shape = std::move(shape);
  t.value.assign(n, 0.0);
  t.grad.assign(n, 0.0);
  t.m.assign(n, 0.0);
  t.v.assign(n, 0.0);
  m_tensors.push_back(std::move(t));
  return m_tensors.size() - 1;
}

std::size_t
Parameters::scalar_count() const noexcept
{
  std::size_t n = 0;
  for (const auto& t : m_tensors) {
    n += t.size();
  }
  return n;
}

ParamTensor&
Parameters::at(std::string_view name)
{
  for (auto& t : m_tensors) {
    if (t.name == name) {
      return t;
    }
  }
  throw NotFoundError("no parameter named \"" + std::string(name) + "\"");
}

const ParamTensor&
Parameters::at(std::string_view name) const
{
  return const_cast<Parameters*>(this)->at(name);
}

void
Parameters::zero_grad()
{
  for (auto& t : m_tensors) {
    std::fill(t.grad.begin(), t.grad.end(), 0.0);
  }
}

std::size_t
modality_type_slot(Modality m)
{
  switch (m) {
  case Modality::frame:
    return 0;
  case Modality::caption:
  case Modality::question:
    return 1;
  case Modality::scene_graph:
    return 2;
  default:
    throw ArgumentError("modality " + std::string(to_string(m)) + " cannot be an encoder row");
  }
}

// -- construction ------------------------------------------------------------

Backbone::Backbone(const ModelConfig& config) : m_config(config)
{
  m_config.validate();
  const std::size_t d = config.d_model;
  const std::size_t ff = config.d_ff;
  const std::size_t vocab = config.vocab_size;
  auto& p = m_params;

  auto attention_ids = [&](const std::string& prefix) {
    AttentionIds a{};
    a.wq = p.add(prefix + ".wq", {d, d});
    a.wk = p.add(prefix + ".wk", {d, d});
    a.wv = p.add(prefix + ".wv", {d, d});
    a.wo = p.add(prefix + ".wo", {d, d});
    return a;
  };

  m_layout.modality_embedding = p.add("encoder.modality_embedding", {kModalityTypes, d});
  for (std::size_t l = 0; l < config.n_encoder_layers; ++l) {
    const std::string pre = "encoder.layer" + std::to_string(l);
    EncoderLayerIds ids{};
    ids.attn_norm = p.add(pre + ".attn_norm.gain", {d});
    ids.attn = attention_ids(pre + ".attn");
    ids.ffn_norm = p.add(pre + ".ffn_norm.gain", {d});
    ids.ffn_in = p.add(pre + ".ffn.w_in", {d, ff});
    ids.ffn_out = p.add(pre + ".ffn.w_out", {ff, d});
    m_layout.encoder.push_back(ids);
  }
  m_layout.encoder_norm = p.add("encoder.final_norm.gain", {d});

  m_layout.token_embedding = p.add("decoder.token_embedding", {vocab, d});
  for (std::size_t l = 0; l < config.n_decoder_layers; ++l) {
    const std::string pre = "decoder.layer" + std::to_string(l);
    DecoderLayerIds ids{};
    ids.self_norm = p.add(pre + ".self_norm.gain", {d});
    ids.self_attn = attention_ids(pre + ".self_attn");
    ids.cross_norm = p.add(pre + ".cross_norm.gain", {d});
    ids.cross_attn = attention_ids(pre + ".cross_attn");
    ids.ffn_norm = p.add(pre + ".ffn_norm.gain", {d});
    ids.ffn_in = p.add(pre + ".ffn.w_in", {d, ff});
    ids.ffn_out = p.add(pre + ".ffn.w_out", {ff, d});
    m_layout.decoder.push_back(ids);
  }
  m_layout.decoder_norm = p.add("decoder.final_norm.gain", {d});
  m_layout.lm_head = p.add("lm_head", {d, vocab});
}

Backbone
Backbone::zeros(const ModelConfig& config)
{
  return Backbone(config);
}

Backbone::Backbone(const ModelConfig& config, std::uint64_t seed) : Backbone(config)
{
  Rng rng(derive_seed(seed, 0x6261636B626F6E65ULL));
  const double d = static_cast<double>(config.d_model);
  for (auto& t : m_params.tensors()) {
    if (t.name.ends_with(".gain")) {
      std::fill(t.value.begin(), t.value.end(), 1.0);
      continue;
    }
    // Residual output projections start at zero, so every block begins as
    // the identity and a fresh model's predictions ignore its input.
    if (t.name.ends_with(".wo") || t.name.ends_with(".w_out")) {
      continue;
    }
    double stddev = 0.0;
    if (t.name == "lm_head") {
      // Near-uniform initial predictions: logits start with std ~0.1.
      stddev = 0.1 / std::sqrt(d);
    } else if (t.name == "decoder.token_embedding") {
      stddev = 1.0;
    } else if (t.name == "encoder.modality_embedding") {
      stddev = 0.1;
    } else {
      stddev = 1.0 / std::sqrt(static_cast<double>(t.shape.front()));
    }
    for (auto& v : t.value) {
      v = stddev * rng.normal();
    }
  }
}

// -- caches --------------------------------------------------------------------

namespace {

struct FfnCache
{
  ops::RmsCache norm;
  Matrix in;  // normalized input
  Matrix pre; // before GELU
  Matrix act; // after GELU
};

using DropMask = std::vector<double>;

ops::AttentionWeights
attn_weights(const Parameters& p, const Backbone::AttentionIds& ids)
{
  return {p[ids.wq].value, p[ids.wk].value, p[ids.wv].value, p[ids.wo].value};
}

ops::AttentionGrads
attn_grads(Parameters& p, const Backbone::AttentionIds& ids)
{
  return {p[ids.wq].grad, p[ids.wk].grad, p[ids.wv].grad, p[ids.wo].grad};
}

Matrix
ffn_forward(const Matrix& x, const Parameters& p, std::size_t norm, std::size_t w_in,
            std::size_t w_out, std::size_t d_ff, FfnCache& c)
{
  c.in = ops::rms_norm(x, p[norm].value, c.norm);
  c.pre = ops::linear(c.in, p[w_in].value, d_ff);
  c.act = ops::gelu(c.pre);
  return ops::linear(c.act, p[w_out].value, x.cols);
}

void
ffn_backward(const FfnCache& c, Parameters& p, std::size_t norm, std::size_t w_in,
             std::size_t w_out, const Matrix& dout, Matrix& dx)
{
  Matrix dact(c.act.rows, c.act.cols);
  ops::linear_backward(c.act, p[w_out].value, dout, p[w_out].grad, &dact);
  Matrix dpre(c.pre.rows, c.pre.cols);
  ops::gelu_backward(c.pre, dact, dpre);
  Matrix din(c.in.rows, c.in.cols);
  ops::linear_backward(c.in, p[w_in].value, dpre, p[w_in].grad, &din);
  ops::rms_norm_backward(c.norm, p[norm].value, din, p[norm].grad, dx);
}

void
apply_dropout(Matrix& branch, double rate, Rng* rng, DropMask& mask)
{
  mask.clear();
  if (rng == nullptr || rate <= 0.0) {
    return;
  }
  mask.resize(branch.data.size());
  const double keep_scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    mask[i] = rng->uniform() < rate ? 0.0 : keep_scale;
    branch.data[i] *= mask[i];
  }
}

Matrix
masked(const Matrix& g, const DropMask& mask)
{
  if (mask.empty()) {
    return g;
  }
  Matrix out = g;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    out.data[i] *= mask[i];
  }
  return out;
}

double
sinusoid(std::size_t pos, std::size_t i, std::size_t d)
{
  const double pair = static_cast<double>(i / 2 * 2);
  const double angle =
    static_cast<double>(pos) / std::pow(10000.0, pair / static_cast<double>(d));
  return (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
}

} // namespace

struct EncoderLayerCache
{
  ops::RmsCache attn_norm;
  ops::AttentionCache attn;
  DropMask attn_drop;
  FfnCache ffn;
  DropMask ffn_drop;
};

struct EncoderCache
{
  std::vector<Modality> row_modalities;
  std::vector<EncoderLayerCache> layers;
  ops::RmsCache final_norm;
};

struct DecoderLayerCache
{
  ops::RmsCache self_norm;
  ops::AttentionCache self_attn;
  DropMask self_drop;
  ops::RmsCache cross_norm;
  ops::AttentionCache cross_attn;
  DropMask cross_drop;
  FfnCache ffn;
  DropMask ffn_drop;
};

struct DecoderCache
{
  std::vector<std::int32_t> tokens;
  std::vector<DecoderLayerCache> layers;
  ops::RmsCache final_norm;
  Matrix final_out;
};

const Matrix&
EncoderTrace::attention(std::size_t layer, std::size_t head) const
{
  return cache->layers.at(layer).attn.probs.at(head);
}

const Matrix&
DecoderTrace::self_attention(std::size_t layer, std::size_t head) const
{
  return cache->layers.at(layer).self_attn.probs.at(head);
}

const Matrix&
DecoderTrace::cross_attention(std::size_t layer, std::size_t head) const
{
  return cache->layers.at(layer).cross_attn.probs.at(head);
}

// -- forward -------------------------------------------------------------------

EncoderTrace
encoder_forward(const FusedInput& input, const Backbone& model, const ForwardOptions& options)
{
  const auto& cfg = model.config();
  const auto& p = model.params();
  const auto& lay = model.layout();
  if (input.dim != cfg.d_model) {
    throw ConfigError("encoder input dimension " + std::to_string(input.dim)
                      + " does not match d_model " + std::to_string(cfg.d_model));
  }
  if (input.rows() == 0) {
    throw ConfigError("encoder input has no rows");
  }
  const std::size_t d = cfg.d_model;
  const double row_scale = std::sqrt(static_cast<double>(d));

  EncoderTrace trace;
  trace.cache = std::make_shared<EncoderCache>();
  auto& cache = *trace.cache;
  cache.row_modalities = input.row_modalities;

  Matrix h(input.rows(), d);
  const auto& type_emb = p[lay.modality_embedding].value;
  for (std::size_t r = 0; r < input.rows(); ++r) {
    const std::size_t slot = modality_type_slot(input.row_modalities[r]);
    const auto row = input.row(r);
    for (std::size_t j = 0; j < d; ++j) {
      h(r, j) = static_cast<double>(row[j]) * row_scale + type_emb[slot * d + j];
    }
  }

  cache.layers.resize(lay.encoder.size());
  for (std::size_t l = 0; l < lay.encoder.size(); ++l) {
    const auto& ids = lay.encoder[l];
    auto& c = cache.layers[l];
    const Matrix n = ops::rms_norm(h, p[ids.attn_norm].value, c.attn_norm);
    Matrix a = ops::attention(n, n, attn_weights(p, ids.attn), cfg.n_heads, false, c.attn);
    apply_dropout(a, cfg.dropout, options.dropout_rng, c.attn_drop);
    ops::add_inplace(h, a);
    Matrix f = ffn_forward(h, p, ids.ffn_norm, ids.ffn_in, ids.ffn_out, cfg.d_ff, c.ffn);
    apply_dropout(f, cfg.dropout, options.dropout_rng, c.ffn_drop);
    ops::add_inplace(h, f);
  }
  trace.hidden = ops::rms_norm(h, p[lay.encoder_norm].value, cache.final_norm);
  return trace;
}

DecoderTrace
decoder_forward(std::span<const std::int32_t> prefix, const Matrix& encoder_hidden,
                const Backbone& model, const ForwardOptions& options)
{
  const auto& cfg = model.config();
  const auto& p = model.params();
  const auto& lay = model.layout();
  if (prefix.empty()) {
    throw ArgumentError("decoder prefix is empty");
  }
  if (prefix.size() > cfg.max_target_len) {
    throw ArgumentError("decoder prefix length " + std::to_string(prefix.size())
                        + " exceeds max_target_len " + std::to_string(cfg.max_target_len));
  }
  if (encoder_hidden.cols != cfg.d_model || encoder_hidden.rows == 0) {
    throw ConfigError("encoder hidden state has the wrong shape");
  }
  const std::size_t d = cfg.d_model;
  const std::size_t t = prefix.size();

  DecoderTrace trace;
  trace.cache = std::make_shared<DecoderCache>();
  auto& cache = *trace.cache;
  cache.tokens.assign(prefix.begin(), prefix.end());

  Matrix x(t, d);
  const auto& emb = p[lay.token_embedding].value;
  for (std::size_t i = 0; i < t; ++i) {
    const auto tok = prefix[i];
    if (tok < 0 || static_cast<std::size_t>(tok) >= cfg.vocab_size) {
      throw ArgumentError("token id " + std::to_string(tok) + " outside vocabulary");
    }
    for (std::size_t j = 0; j < d; ++j) {
      x(i, j) = emb[static_cast<std::size_t>(tok) * d + j] + sinusoid(i, j, d);
    }
  }

  cache.layers.resize(lay.decoder.size());
  for (std::size_t l = 0; l < lay.decoder.size(); ++l) {
    const auto& ids = lay.decoder[l];
    auto& c = cache.layers[l];

    const Matrix n1 = ops::rms_norm(x, p[ids.self_norm].value, c.self_norm);
    Matrix a = ops::attention(n1, n1, attn_weights(p, ids.self_attn), cfg.n_heads, true,
                              c.self_attn);
    apply_dropout(a, cfg.dropout, options.dropout_rng, c.self_drop);
    ops::add_inplace(x, a);

    const Matrix n2 = ops::rms_norm(x, p[ids.cross_norm].value, c.cross_norm);
    Matrix ca = ops::attention(n2, encoder_hidden, attn_weights(p, ids.cross_attn), cfg.n_heads,
                               false, c.cross_attn);
    apply_dropout(ca, cfg.dropout, options.dropout_rng, c.cross_drop);
    ops::add_inplace(x, ca);

    Matrix f = ffn_forward(x, p, ids.ffn_norm, ids.ffn_in, ids.ffn_out, cfg.d_ff, c.ffn);
    apply_dropout(f, cfg.dropout, options.dropout_rng, c.ffn_drop);
    ops::add_inplace(x, f);
  }
  cache.final_out = ops::rms_norm(x, p[lay.decoder_norm].value, cache.final_norm);
  trace.logits = ops::linear(cache.final_out, p[lay.lm_head].value, cfg.vocab_size);
  return trace;
}

LossResult
cross_entropy_loss(const Matrix& logits, std::span<const std::int32_t> targets)
{
  if (logits.rows != targets.size()) {
    throw ArgumentError("cross_entropy_loss: " + std::to_string(logits.rows) + " logit rows but "
                        + std::to_string(targets.size()) + " targets");
  }
  LossResult out;
  out.dlogits = Matrix(logits.rows, logits.cols);
  for (std::size_t i = 0; i < logits.rows; ++i) {
    const auto y = targets[i];
    if (y == kPadToken) {
      continue;
    }
    if (y < 0 || static_cast<std::size_t>(y) >= logits.cols) {
      throw ArgumentError("target id " + std::to_string(y) + " outside vocabulary");
    }
    const auto row = logits.row(i);
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : row) {
      mx = std::max(mx, v);
    }
    double sum = 0.0;
    for (double v : row) {
      sum += std::exp(v - mx);
    }
    const double log_z = mx + std::log(sum);
    out.nll_sum += log_z - row[static_cast<std::size_t>(y)];
    for (std::size_t j = 0; j < logits.cols; ++j) {
      out.dlogits(i, j) = std::exp(row[j] - log_z);
    }
    out.dlogits(i, static_cast<std::size_t>(y)) -= 1.0;
    ++out.count;
  }
  if (out.count == 0) {
    throw ArgumentError("cross_entropy_loss: every target is PAD");
  }
  out.loss = out.nll_sum / static_cast<double>(out.count);
  return out;
}

// -- backward ------------------------------------------------------------------

void
backward(const EncoderTrace& encoder, const DecoderTrace& decoder, const Matrix& dlogits,
         Backbone& model)
{
  const auto& cfg = model.config();
  auto& p = model.params();
  const auto& lay = model.layout();
  const auto& dc = *decoder.cache;
  const auto& ec = *encoder.cache;
  const std::size_t d = cfg.d_model;
  const std::size_t t = dc.tokens.size();

  // LM head and decoder final norm.
  Matrix dy(t, d);
  ops::linear_backward(dc.final_out, p[lay.lm_head].value, dlogits, p[lay.lm_head].grad, &dy);
  Matrix dx(t, d);
  ops::rms_norm_backward(dc.final_norm, p[lay.decoder_norm].value, dy, p[lay.decoder_norm].grad,
                         dx);

  Matrix denc(encoder.hidden.rows, d);
  for (std::size_t l = lay.decoder.size(); l-- > 0;) {
    const auto& ids = lay.decoder[l];
    const auto& c = dc.layers[l];

    // x += ffn(x)
    ffn_backward(c.ffn, p, ids.ffn_norm, ids.ffn_in, ids.ffn_out, masked(dx, c.ffn_drop), dx);

    // x += cross_attn(norm(x), enc)
    {
      Matrix dn(t, d);
      ops::attention_backward(c.cross_attn, attn_weights(p, ids.cross_attn),
                              attn_grads(p, ids.cross_attn), masked(dx, c.cross_drop), dn, denc);
      ops::rms_norm_backward(c.cross_norm, p[ids.cross_norm].value, dn, p[ids.cross_norm].grad,
                             dx);
    }
    // x += self_attn(norm(x))
    {
      Matrix dn(t, d);
      ops::attention_backward(c.self_attn, attn_weights(p, ids.self_attn),
                              attn_grads(p, ids.self_attn), masked(dx, c.self_drop), dn, dn);
      ops::rms_norm_backward(c.self_norm, p[ids.self_norm].value, dn, p[ids.self_norm].grad, dx);
    }
  }

  // Token embeddings (sinusoids carry no parameters).
  auto& emb_grad = p[lay.token_embedding].grad;
  for (std::size_t i = 0; i < t; ++i) {
    const auto tok = static_cast<std::size_t>(dc.tokens[i]);
    for (std::size_t j = 0; j < d; ++j) {
      emb_grad[tok * d + j] += dx(i, j);
    }
  }

  // Encoder.
  const std::size_t m = encoder.hidden.rows;
  Matrix dh(m, d);
  ops::rms_norm_backward(ec.final_norm, p[lay.encoder_norm].value, denc, p[lay.encoder_norm].grad,
                         dh);
  for (std::size_t l = lay.encoder.size(); l-- > 0;) {
    const auto& ids = lay.encoder[l];
    const auto& c = ec.layers[l];
    ffn_backward(c.ffn, p, ids.ffn_norm, ids.ffn_in, ids.ffn_out, masked(dh, c.ffn_drop), dh);
    Matrix dn(m, d);
    ops::attention_backward(c.attn, attn_weights(p, ids.attn), attn_grads(p, ids.attn),
                            masked(dh, c.attn_drop), dn, dn);
    ops::rms_norm_backward(c.attn_norm, p[ids.attn_norm].value, dn, p[ids.attn_norm].grad, dh);
  }
  auto& type_grad = p[lay.modality_embedding].grad;
  for (std::size_t r = 0; r < m; ++r) {
    const std::size_t slot = modality_type_slot(ec.row_modalities[r]);
    for (std::size_t j = 0; j < d; ++j) {
      type_grad[slot * d + j] += dh(r, j);
    }
  }

  for (const auto& tensor : p.tensors()) {
    for (double g : tensor.grad) {
      if (!std::isfinite(g)) {
        throw NumericalError("non-finite gradient in parameter " + tensor.name);
      }
    }
  }
}

// -- training helpers ----------------------------------------------------------

namespace {

// Decoder input and labels for teacher forcing with the PAD tail trimmed.
// Causality makes the trimmed positions irrelevant to the kept ones.
std::pair<std::span<const std::int32_t>, std::span<const std::int32_t>>
teacher_forcing_views(std::span<const std::int32_t> tokens)
{
  const std::size_t n = unpadded_length(tokens);
  if (n < 2) {
    throw ArgumentError("target sequence needs at least BOS and one label");
  }
  return {tokens.first(n - 1), tokens.subspan(1, n - 1)};
}

} // namespace

ExampleLoss
accumulate_example_gradients(Backbone& model, const FusedInput& input,
                             std::span<const std::int32_t> tokens, double grad_scale,
                             const ForwardOptions& options)
{
  const auto [dec_in, labels] = teacher_forcing_views(tokens);
  const auto enc = encoder_forward(input, model, options);
  const auto dec = decoder_forward(dec_in, enc.hidden, model, options);
  auto loss = cross_entropy_loss(dec.logits, labels);
  if (!std::isfinite(loss.nll_sum)) {
    throw NumericalError("non-finite loss");
  }
  for (auto& g : loss.dlogits.data) {
    g *= grad_scale;
  }
  backward(enc, dec, loss.dlogits, model);
  return {loss.nll_sum, loss.count};
}

ExampleLoss
example_loss(const Backbone& model, const FusedInput& input, std::span<const std::int32_t> tokens)
{
  const auto [dec_in, labels] = teacher_forcing_views(tokens);
  const auto enc = encoder_forward(input, model);
  const auto dec = decoder_forward(dec_in, enc.hidden, model);
  const auto loss = cross_entropy_loss(dec.logits, labels);
  return {loss.nll_sum, loss.count};
}

TokenSequence
greedy_decode(const Matrix& encoder_hidden, const Backbone& model, std::size_t max_new_tokens)
{
  const auto& cfg = model.config();
  if (max_new_tokens + 1 > cfg.max_target_len) {
    max_new_tokens = cfg.max_target_len - 1;
  }
  TokenSequence out{kBosToken};
  for (std::size_t step = 0; step < max_new_tokens; ++step) {
    const auto dec = decoder_forward(out, encoder_hidden, model);
    const auto last = dec.logits.row(dec.logits.rows - 1);
    std::size_t best = 0;
    for (std::size_t j = 1; j < last.size(); ++j) {
      if (last[j] > last[best]) {
        best = j;
      }
    }
    out.push_back(static_cast<std::int32_t>(best));
    if (static_cast<std::int32_t>(best) == kEosToken) {
      break;
    }
  }
  return out;
}

} // namespace vpt
