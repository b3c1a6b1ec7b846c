#pragma once

// Forward/backward kernels for the backbone. Weights are row-major
// [in, out] spans owned by Parameters; backward passes accumulate.

#include <cstddef>
#include <span>
#include <vector>

#include "vpt/tensor.hpp"

namespace vpt::ops {

Matrix linear(const Matrix& x, std::span<const double> w, std::size_t out);
void linear_backward(const Matrix& x, std::span<const double> w, const Matrix& dy,
                     std::span<double> dw, Matrix* dx);

void add_inplace(Matrix& a, const Matrix& b);

struct RmsCache
{
  Matrix x;
  std::vector<double> inv_rms;
};

inline constexpr double kRmsEps = 1e-6;

Matrix rms_norm(const Matrix& x, std::span<const double> gain, RmsCache& cache);
void rms_norm_backward(const RmsCache& cache, std::span<const double> gain, const Matrix& dy,
                       std::span<double> dgain, Matrix& dx);

Matrix gelu(const Matrix& x);
void gelu_backward(const Matrix& x, const Matrix& dy, Matrix& dx);

struct AttentionWeights
{
  std::span<const double> wq, wk, wv, wo;
};

struct AttentionGrads
{
  std::span<double> wq, wk, wv, wo;
};

struct AttentionCache
{
  Matrix xq;
  Matrix xkv;
  Matrix q, k, v;
  std::vector<Matrix> probs; // per head [tq, tk]
  Matrix context;            // concatenated heads [tq, d]
  std::size_t heads = 1;
  bool causal = false;
};

Matrix attention(const Matrix& xq, const Matrix& xkv, const AttentionWeights& w,
                 std::size_t heads, bool causal, AttentionCache& cache);

// Accumulates into dxq and dxkv; self-attention may pass the same matrix
// for both.
void attention_backward(const AttentionCache& cache, const AttentionWeights& w,
                        const AttentionGrads& g, const Matrix& dout, Matrix& dxq, Matrix& dxkv);

} // namespace vpt::ops
