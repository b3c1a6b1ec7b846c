#pragma once

#include <cstdint>
#include <span>

namespace vpt {

class Parameters;

struct AdamWConfig
{
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// One AdamW update with bias correction and decoupled weight decay:
//
//   m = b1 m + (1 - b1) g          v = b2 v + (1 - b2) g^2
//   theta -= lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
//   theta -= lr * wd * theta_old
//
// Increments params.step. Refuses to touch anything (throws
// NumericalError naming the tensor) if any gradient is non-finite.
void adamw_step(Parameters& params, const AdamWConfig& config);

// Scalar form used by tests and documentation. `step` is 1-based.
struct AdamWScalarState
{
  double theta = 0.0;
  double m = 0.0;
  double v = 0.0;
};
AdamWScalarState adamw_scalar_update(AdamWScalarState s, double grad, std::uint64_t step,
                                     const AdamWConfig& config);

} // namespace vpt
