#include "tensor_ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace vpt::ops {

Matrix
linear(const Matrix& x, std::span<const double> w, std::size_t out)
{
  const std::size_t in = x.cols;
  Matrix y(x.rows, out);
  for (std::size_t i = 0; i < x.rows; ++i) {
    double* yr = y.data.data() + i * out;
    const double* xr = x.data.data() + i * in;
    for (std::size_t k = 0; k < in; ++k) {
      const double xv = xr[k];
      const double* wr = w.data() + k * out;
      for (std::size_t j = 0; j < out; ++j) {
        yr[j] += xv * wr[j];
      }
    }
  }
  return y;
}

void
linear_backward(const Matrix& x, std::span<const double> w, const Matrix& dy,
                std::span<double> dw, Matrix* dx)
{
  const std::size_t in = x.cols;
  const std::size_t out = dy.cols;
  for (std::size_t i = 0; i < x.rows; ++i) {
    const double* xr = x.data.data() + i * in;
    const double* dyr = dy.data.data() + i * out;
    for (std::size_t k = 0; k < in; ++k) {
      const double xv = xr[k];
      double* dwr = dw.data() + k * out;
      for (std::size_t j = 0; j < out; ++j) {
        dwr[j] += xv * dyr[j];
      }
    }
    if (dx != nullptr) {
      double* dxr = dx->data.data() + i * in;
      for (std::size_t k = 0; k < in; ++k) {
        const double* wr = w.data() + k * out;
        double s = 0.0;
        for (std::size_t j = 0; j < out; ++j) {
          s += dyr[j] * wr[j];
        }
        dxr[k] += s;
      }
    }
  }
}

void
add_inplace(Matrix& a, const Matrix& b)
{
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    a.data[i] += b.data[i];
  }
}

Matrix
rms_norm(const Matrix& x, std::span<const double> gain, RmsCache& cache)
{
  cache.x = x;
  cache.inv_rms.assign(x.rows, 0.0);
  Matrix y(x.rows, x.cols);
  for (std::size_t i = 0; i < x.rows; ++i) {
    double ss = 0.0;
    for (double v : x.row(i)) {
      ss += v * v;
    }
    const double inv = 1.0 / std::sqrt(ss / static_cast<double>(x.cols) + kRmsEps);
    cache.inv_rms[i] = inv;
    for (std::size_t j = 0; j < x.cols; ++j) {
      y(i, j) = x(i, j) * inv * gain[j];
    }
  }
  return y;
}

void
rms_norm_backward(const RmsCache& cache, std::span<const double> gain, const Matrix& dy,
                  std::span<double> dgain, Matrix& dx)
{
  const auto& x = cache.x;
  const double n = static_cast<double>(x.cols);
  for (std::size_t i = 0; i < x.rows; ++i) {
    const double inv = cache.inv_rms[i];
    // xhat = x * inv; dxhat = dy * gain
    double dot = 0.0;
    for (std::size_t j = 0; j < x.cols; ++j) {
      const double xhat = x(i, j) * inv;
      dgain[j] += dy(i, j) * xhat;
      dot += dy(i, j) * gain[j] * xhat;
    }
    const double mean_dot = dot / n;
    for (std::size_t j = 0; j < x.cols; ++j) {
      const double xhat = x(i, j) * inv;
      dx(i, j) += inv * (dy(i, j) * gain[j] - xhat * mean_dot);
    }
  }
}

namespace {

constexpr double kGeluC = 0.044715;
const double kSqrt2OverPi = std::sqrt(2.0 / std::numbers::pi);

} // namespace

Matrix
gelu(const Matrix& x)
{
  Matrix y(x.rows, x.cols);
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const double v = x.data[i];
    const double u = kSqrt2OverPi * (v + kGeluC * v * v * v);
    y.data[i] = 0.5 * v * (1.0 + std::tanh(u));
  }
  return y;
}

void
gelu_backward(const Matrix& x, const Matrix& dy, Matrix& dx)
{
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const double v = x.data[i];
    const double u = kSqrt2OverPi * (v + kGeluC * v * v * v);
    const double t = std::tanh(u);
    const double du = kSqrt2OverPi * (1.0 + 3.0 * kGeluC * v * v);
    const double d = 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du;
    dx.data[i] += dy.data[i] * d;
  }
}

Matrix
attention(const Matrix& xq, const Matrix& xkv, const AttentionWeights& w, std::size_t heads,
          bool causal, AttentionCache& cache)
{
  const std::size_t d = xq.cols;
  const std::size_t dh = d / heads;
  const std::size_t tq = xq.rows;
  const std::size_t tk = xkv.rows;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  cache.xq = xq;
  cache.xkv = xkv;
  cache.heads = heads;
  cache.causal = causal;
  cache.q = linear(xq, w.wq, d);
  cache.k = linear(xkv, w.wk, d);
  cache.v = linear(xkv, w.wv, d);
  cache.probs.assign(heads, Matrix(tq, tk));
  cache.context = Matrix(tq, d);

  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * dh;
    Matrix& p = cache.probs[h];
    for (std::size_t i = 0; i < tq; ++i) {
      // Causal rows see keys 0..i; masked entries stay exactly zero.
      const std::size_t visible = causal ? std::min(i + 1, tk) : tk;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < visible; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < dh; ++c) {
          s += cache.q(i, off + c) * cache.k(j, off + c);
        }
        s *= scale;
        p(i, j) = s;
        mx = std::max(mx, s);
      }
      double sum = 0.0;
      for (std::size_t j = 0; j < visible; ++j) {
        p(i, j) = std::exp(p(i, j) - mx);
        sum += p(i, j);
      }
      for (std::size_t j = 0; j < visible; ++j) {
        p(i, j) /= sum;
      }
      for (std::size_t j = 0; j < visible; ++j) {
        const double pij = p(i, j);
        for (std::size_t c = 0; c < dh; ++c) {
          cache.context(i, off + c) += pij * cache.v(j, off + c);
        }
      }
    }
  }
  return linear(cache.context, w.wo, d);
}

void
attention_backward(const AttentionCache& cache, const AttentionWeights& w,
                   const AttentionGrads& g, const Matrix& dout, Matrix& dxq, Matrix& dxkv)
{
  const std::size_t d = cache.xq.cols;
  const std::size_t heads = cache.heads;
  const std::size_t dh = d / heads;
  const std::size_t tq = cache.xq.rows;
  const std::size_t tk = cache.xkv.rows;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Matrix dcontext(tq, d);
  linear_backward(cache.context, w.wo, dout, g.wo, &dcontext);

  Matrix dq(tq, d);
  Matrix dk(tk, d);
  Matrix dv(tk, d);
  std::vector<double> dp(tk);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * dh;
    const Matrix& p = cache.probs[h];
    for (std::size_t i = 0; i < tq; ++i) {
      const std::size_t visible = cache.causal ? std::min(i + 1, tk) : tk;
      double row_dot = 0.0;
      for (std::size_t j = 0; j < visible; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < dh; ++c) {
          s += dcontext(i, off + c) * cache.v(j, off + c);
          dv(j, off + c) += p(i, j) * dcontext(i, off + c);
        }
        dp[j] = s;
        row_dot += s * p(i, j);
      }
      for (std::size_t j = 0; j < visible; ++j) {
        const double ds = p(i, j) * (dp[j] - row_dot) * scale;
        for (std::size_t c = 0; c < dh; ++c) {
          dq(i, off + c) += ds * cache.k(j, off + c);
          dk(j, off + c) += ds * cache.q(i, off + c);
        }
      }
    }
  }
  linear_backward(cache.xq, w.wq, dq, g.wq, &dxq);
  linear_backward(cache.xkv, w.wk, dk, g.wk, &dxkv);
  linear_backward(cache.xkv, w.wv, dv, g.wv, &dxkv);
}

} // namespace vpt::ops
