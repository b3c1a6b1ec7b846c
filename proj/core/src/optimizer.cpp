#include "vpt/optimizer.hpp"

#include <cmath>

#include "vpt/backbone.hpp"
#include "vpt/errors.hpp"

namespace vpt {

AdamWScalarState
adamw_scalar_update(AdamWScalarState s, double grad, std::uint64_t step, const AdamWConfig& c)
{
  const double t = static_cast<double>(step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  s.m = c.beta1 * s.m + (1.0 - c.beta1) * grad;
  s.v = c.beta2 * s.v + (1.0 - c.beta2) * grad * grad;
  const double m_hat = s.m / bc1;
  const double v_hat = s.v / bc2;
  const double decay = c.lr * c.weight_decay * s.theta;
  s.theta -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
  s.theta -= decay;
  return s;
}

void
adamw_step(Parameters& params, const AdamWConfig& config)
{
  for (const auto& t : params.tensors()) {
    for (double g : t.grad) {
      if (!std::isfinite(g)) {
        throw NumericalError("refusing AdamW update: non-finite gradient in " + t.name);
      }
    }
  }
  const std::uint64_t step = params.step + 1;
  const double tt = static_cast<double>(step);
  const double bc1 = 1.0 - std::pow(config.beta1, tt);
  const double bc2 = 1.0 - std::pow(config.beta2, tt);
  const double b1 = config.beta1;
  const double b2 = config.beta2;
  for (auto& t : params.tensors()) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double g = t.grad[i];
      t.m[i] = b1 * t.m[i] + (1.0 - b1) * g;
      t.v[i] = b2 * t.v[i] + (1.0 - b2) * g * g;
      const double m_hat = t.m[i] / bc1;
      const double v_hat = t.v[i] / bc2;
      const double decay = config.lr * config.weight_decay * t.value[i];
      t.value[i] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps) + decay;
    }
  }
  params.step = step;
}

} // namespace vpt
