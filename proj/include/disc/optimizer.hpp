#pragma once

#include "disc/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace disc {

// Adaptive-moment optimizer with bias correction. step() descends by
// default; maximize flips the direction for objectives the trainer ascends.
struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  using Config = AdamConfig;

  explicit Adam(const ParamStore& params, Config cfg = {})
      : cfg_(cfg), m_(params.zeros_like()), v_(params.zeros_like()) {}

  long step_count() const { return t_; }

  void step(ParamStore& params, const GradStore& grads, double lr, bool maximize) {
    if (params.count() != m_.count())
      throw std::invalid_argument("adam: parameter store layout changed");
    if (!grads.all_finite()) throw std::runtime_error("adam: non-finite gradient");
    t_ += 1;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    const double sign = maximize ? 1.0 : -1.0;
    for (std::size_t i = 0; i < params.count(); ++i) {
      Tensor& p = params.tensors()[i];
      const Tensor& g = grads.tensors()[i];
      Tensor& m = m_.tensors()[i];
      Tensor& v = v_.tensors()[i];
      if (g.size() != p.size()) throw std::invalid_argument("adam: gradient shape mismatch");
      for (std::size_t k = 0; k < p.data.size(); ++k) {
        m.data[k] = cfg_.beta1 * m.data[k] + (1.0 - cfg_.beta1) * g.data[k];
        v.data[k] = cfg_.beta2 * v.data[k] + (1.0 - cfg_.beta2) * g.data[k] * g.data[k];
        const double m_hat = m.data[k] / bc1;
        const double v_hat = v.data[k] / bc2;
        p.data[k] += sign * lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
      }
    }
  }

 private:
  Config cfg_;
  ParamStore m_;
  ParamStore v_;
  long t_ = 0;
};

// Scales gradients in place so their global L2 norm does not exceed
// max_norm; returns the pre-clip norm. max_norm <= 0 disables clipping.
inline double clip_grad_norm(GradStore& grads, double max_norm) {
  double sq = 0.0;
  for (const Tensor& t : grads.tensors())
    for (double v : t.data) sq += v * v;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (Tensor& t : grads.tensors())
      for (double& v : t.data) v *= scale;
  }
  return norm;
}

}  // namespace disc
