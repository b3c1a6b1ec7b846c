#pragma once

// Encoder-decoder transformer with an LM head, trained from scratch with
// hand-written gradients.
//
// Encoder: fused modality rows are scaled by sqrt(d_model) (unit-norm
// expert vectors then have unit RMS), a learned modality-type vector is
// added per row, and pre-norm blocks (RMSNorm -> bidirectional multi-head
// self-attention -> residual, RMSNorm -> GELU MLP -> residual) follow.
// There is no positional signal, so the encoder is permutation
// equivariant over (row, modality) pairs.
//
// Decoder: byte-token embeddings plus sinusoidal absolute positions,
// pre-norm blocks with causal self-attention, cross-attention to the
// encoder output and a GELU MLP, final RMSNorm and an untied LM head.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vpt/experts.hpp"
#include "vpt/tensor.hpp"
#include "vpt/tokenizer.hpp"

namespace vpt {

class Rng;

struct ModelConfig
{
  std::size_t d_model = kDefaultExpertDim;
  std::size_t n_heads = 8;
  std::size_t n_encoder_layers = 2;
  std::size_t n_decoder_layers = 2;
  std::size_t d_ff = 1024;
  std::size_t vocab_size = kByteVocabSize;
  std::size_t max_target_len = 128;
  double dropout = 0.0;

  // Throws ConfigError when d_model % n_heads != 0, vocab_size < 4,
  // max_target_len < 1, any size is zero or dropout is outside [0, 1).
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

struct ParamTensor
{
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> value;
  std::vector<double> grad;
  // AdamW first and second moments.
  std::vector<double> m;
  std::vector<double> v;

  std::size_t size() const noexcept { return value.size(); }
};

class Parameters
{
public:
  std::size_t add(std::string name, std::vector<std::size_t> shape);

  std::size_t tensor_count() const noexcept { return m_tensors.size(); }
  std::size_t scalar_count() const noexcept;

  ParamTensor& operator[](std::size_t i) { return m_tensors[i]; }
  const ParamTensor& operator[](std::size_t i) const { return m_tensors[i]; }

  // Throws NotFoundError.
  ParamTensor& at(std::string_view name);
  const ParamTensor& at(std::string_view name) const;

  std::span<ParamTensor> tensors() noexcept { return m_tensors; }
  std::span<const ParamTensor> tensors() const noexcept { return m_tensors; }

  void zero_grad();

  // Optimizer steps taken so far; drives AdamW bias correction.
  std::uint64_t step = 0;

private:
  std::vector<ParamTensor> m_tensors;
};

// Modality-type slot for the learned per-row embedding: frames, text
// (caption or question) and scene graph.
inline constexpr std::size_t kModalityTypes = 3;
std::size_t modality_type_slot(Modality m);

class Backbone
{
public:
  // Random initialization fully determined by `seed`. Attention and MLP
  // output projections start at zero.
  Backbone(const ModelConfig& config, std::uint64_t seed);

  // Zero-initialized parameters of the right shapes (used by checkpoint
  // loading and tests).
  static Backbone zeros(const ModelConfig& config);

  const ModelConfig& config() const noexcept { return m_config; }
  Parameters& params() noexcept { return m_params; }
  const Parameters& params() const noexcept { return m_params; }

  struct AttentionIds
  {
    std::size_t wq, wk, wv, wo;
  };
  struct EncoderLayerIds
  {
    std::size_t attn_norm;
    AttentionIds attn;
    std::size_t ffn_norm, ffn_in, ffn_out;
  };
  struct DecoderLayerIds
  {
    std::size_t self_norm;
    AttentionIds self_attn;
    std::size_t cross_norm;
    AttentionIds cross_attn;
    std::size_t ffn_norm, ffn_in, ffn_out;
  };
  struct Layout
  {
    std::size_t modality_embedding;
    std::vector<EncoderLayerIds> encoder;
    std::size_t encoder_norm;
    std::size_t token_embedding;
    std::vector<DecoderLayerIds> decoder;
    std::size_t decoder_norm;
    std::size_t lm_head;
  };
  const Layout& layout() const noexcept { return m_layout; }

private:
  explicit Backbone(const ModelConfig& config);

  ModelConfig m_config;
  Parameters m_params;
  Layout m_layout;
};

// Dropout is applied to residual branches only when a generator is given
// and config.dropout > 0.
struct ForwardOptions
{
  Rng* dropout_rng = nullptr;
};

struct EncoderCache;
struct DecoderCache;

struct EncoderTrace
{
  Matrix hidden; // [rows, d_model]
  std::shared_ptr<EncoderCache> cache;

  // Softmax weights of self-attention, [rows, rows].
  const Matrix& attention(std::size_t layer, std::size_t head) const;
};

struct DecoderTrace
{
  Matrix logits; // [prefix length, vocab]
  std::shared_ptr<DecoderCache> cache;

  const Matrix& self_attention(std::size_t layer, std::size_t head) const;
  const Matrix& cross_attention(std::size_t layer, std::size_t head) const;
};

// Throws ConfigError if input.dim != d_model or the input has no rows.
EncoderTrace encoder_forward(const FusedInput& input, const Backbone& model,
                             const ForwardOptions& options = {});

// `prefix` starts with BOS. Logits row i depends only on prefix[0..i].
// Throws ArgumentError for empty/overlong prefixes or out-of-vocab ids.
DecoderTrace decoder_forward(std::span<const std::int32_t> prefix, const Matrix& encoder_hidden,
                             const Backbone& model, const ForwardOptions& options = {});

struct LossResult
{
  double loss = 0.0;      // mean NLL over non-PAD targets
  double nll_sum = 0.0;
  std::size_t count = 0;
  Matrix dlogits;         // d(nll_sum)/d(logits)
};

// targets[i] is the label for logits row i. PAD labels are ignored; an
// all-PAD target throws ArgumentError.
LossResult cross_entropy_loss(const Matrix& logits, std::span<const std::int32_t> targets);

// Adds d(loss)/d(params) to every ParamTensor::grad, where the upstream
// gradient of the logits is `dlogits`. Throws NumericalError naming the
// first parameter whose gradient is not finite.
void backward(const EncoderTrace& encoder, const DecoderTrace& decoder, const Matrix& dlogits,
              Backbone& model);

struct ExampleLoss
{
  double nll_sum = 0.0;
  std::size_t tokens = 0;
};

// Teacher-forced pass on one example: decoder input = tokens[0, n-1),
// labels = tokens[1, n) with the PAD tail trimmed. Gradients of
// `grad_scale * nll_sum` are accumulated into the parameters.
ExampleLoss accumulate_example_gradients(Backbone& model, const FusedInput& input,
                                         std::span<const std::int32_t> tokens, double grad_scale,
                                         const ForwardOptions& options = {});

// Same pass without gradients.
ExampleLoss example_loss(const Backbone& model, const FusedInput& input,
                         std::span<const std::int32_t> tokens);

// Starts from BOS and appends the argmax token (lowest id on ties) until
// EOS or `max_new_tokens` generated tokens. Result begins with BOS.
TokenSequence greedy_decode(const Matrix& encoder_hidden, const Backbone& model,
                            std::size_t max_new_tokens);

} // namespace vpt
