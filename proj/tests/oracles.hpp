#pragma once

// Test-only reference implementations. Everything here is deliberately
// written as plain scalar math, independent of the library's dense-matrix
// code paths, so that the two can disagree when one of them is wrong.

#include "disc/rng.hpp"
#include "disc/tensor.hpp"

#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <vector>

namespace oracle {

// central finite-difference gradient of a scalar function of a ParamStore
inline disc::GradStore finite_difference(disc::ParamStore& params,
                                         const std::function<double()>& f,
                                         double step = 1e-6) {
  disc::GradStore g = params.zeros_like();
  for (std::size_t ti = 0; ti < params.count(); ++ti) {
    disc::Tensor& t = params.tensors()[ti];
    disc::Tensor& gt = g.tensors()[ti];
    for (std::size_t i = 0; i < t.data.size(); ++i) {
      const double saved = t.data[i];
      t.data[i] = saved + step;
      const double hi = f();
      t.data[i] = saved - step;
      const double lo = f();
      t.data[i] = saved;
      gt.data[i] = (hi - lo) / (2.0 * step);
    }
  }
  return g;
}

// true when a and b agree to relative tolerance, with an absolute floor for
// values near zero
inline bool close(double a, double b, double rel = 1e-5, double abs_floor = 1e-8) {
  const double diff = std::abs(a - b);
  if (diff <= abs_floor) return true;
  return diff <= rel * std::max(std::abs(a), std::abs(b));
}

inline double max_grad_mismatch(const disc::GradStore& a, const disc::GradStore& b,
                                double rel = 1e-5, double abs_floor = 1e-8) {
  double worst = 0.0;
  for (std::size_t ti = 0; ti < a.count(); ++ti) {
    const auto& at = a.tensors()[ti].data;
    const auto& bt = b.tensors()[ti].data;
    for (std::size_t i = 0; i < at.size(); ++i) {
      const double diff = std::abs(at[i] - bt[i]);
      if (diff <= abs_floor) continue;
      const double denom = std::max({std::abs(at[i]), std::abs(bt[i]), 1e-300});
      worst = std::max(worst, diff / denom);
    }
  }
  return worst;
}

// scalar Gaussian log density
inline double log_normal_pdf(double x, double mean, double std) {
  const double z = (x - mean) / std;
  return -0.5 * z * z - std::log(std) - 0.5 * std::log(2.0 * std::numbers::pi);
}

// naive-loop forward pass through the 2-hidden-layer tanh net
inline std::vector<double> mlp_naive(const disc::ParamStore& p,
                                     const std::vector<double>& x) {
  auto layer = [&](const std::vector<double>& in, const char* wn, const char* bn,
                   bool act) {
    const disc::Tensor& w = p.at(wn);
    const disc::Tensor& b = p.at(bn);
    const std::size_t out_n = w.shape[0];
    const std::size_t in_n = w.shape[1];
    std::vector<double> out(out_n, 0.0);
    for (std::size_t i = 0; i < out_n; ++i) {
      double acc = b.data[i];
      for (std::size_t j = 0; j < in_n; ++j) acc += w.data[i * in_n + j] * in[j];
      out[i] = act ? std::tanh(acc) : acc;
    }
    return out;
  };
  auto h1 = layer(x, "w1", "b1", true);
  auto h2 = layer(h1, "w2", "b2", true);
  return layer(h2, "w3", "b3", false);
}

// per-dimension log densities of one action under the policy, naive loops
inline std::vector<double> policy_log_prob_naive(const disc::ParamStore& policy,
                                                 const std::vector<double>& state,
                                                 const std::vector<double>& action) {
  auto mean = mlp_naive(policy, state);
  const disc::Tensor& ls = policy.at("log_std");
  std::vector<double> out(action.size());
  for (std::size_t d = 0; d < action.size(); ++d) {
    const double log_std = ls.data[ls.data.size() == 1 ? 0 : d];
    out[d] = log_normal_pdf(action[d], mean[d], std::exp(log_std));
  }
  return out;
}

// GAE by the direct O(T^2) double sum, recursion-free
inline std::vector<double> gae_direct(const std::vector<double>& delta, double gamma,
                                      double lambda,
                                      const std::vector<unsigned char>& episode_end) {
  const std::size_t n = delta.size();
  std::vector<double> adv(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double acc = 0.0;
    double w = 1.0;
    for (std::size_t l = t; l < n; ++l) {
      acc += w * delta[l];
      if (episode_end[l]) break;
      w *= gamma * lambda;
    }
    adv[t] = acc;
  }
  return adv;
}

// GAE-V by the direct truncated-trace sum: the weight on delta_l carries the
// product of min(1, rho_i) for i in (t, l]
inline std::vector<double> gae_v_direct(const std::vector<double>& delta,
                                        const std::vector<double>& rho, double gamma,
                                        double lambda,
                                        const std::vector<unsigned char>& episode_end) {
  const std::size_t n = delta.size();
  std::vector<double> adv(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double acc = delta[t];
    double w = 1.0;
    for (std::size_t l = t; l + 1 < n; ++l) {
      if (episode_end[l]) break;
      w *= gamma * lambda * std::min(1.0, rho[l + 1]);
      acc += w * delta[l + 1];
    }
    adv[t] = acc;
  }
  return adv;
}

// multi-step V-trace target by its direct definition, with the trace product
// running from i = t + 1 so that it matches the advantage-based identity when
// lambda = 1
inline std::vector<double> vtrace_direct(const std::vector<double>& delta,
                                         const std::vector<double>& rho,
                                         const std::vector<double>& values, double gamma,
                                         double lambda,
                                         const std::vector<unsigned char>& episode_end) {
  const std::size_t n = delta.size();
  std::vector<double> target(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double acc = values[t] + lambda * std::min(1.0, rho[t]) * delta[t];
    double w = lambda * std::min(1.0, rho[t]);
    for (std::size_t l = t; l + 1 < n; ++l) {
      if (episode_end[l]) break;
      w *= gamma * lambda * std::min(1.0, rho[l + 1]);
      acc += w * delta[l + 1];
    }
    target[t] = acc;
  }
  return target;
}

}  // namespace oracle
