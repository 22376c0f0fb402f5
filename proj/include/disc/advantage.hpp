#pragma once

#include "disc/nets.hpp"
#include "disc/rollout.hpp"
#include "disc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace disc {

// Advantage estimation: TD residuals, GAE, the truncated-IS GAE-V variant,
// and the matching value targets. All recursions restart at episode
// boundaries inside the fixed-length horizon.

inline Vector td_residuals_from_values(const Vector& rewards, const Vector& values,
                                       const Vector& next_values,
                                       const std::vector<std::uint8_t>& terminal,
                                       double gamma) {
  const Eigen::Index n = rewards.size();
  Vector delta(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    const double bootstrap = terminal[static_cast<std::size_t>(t)] ? 0.0 : next_values(t);
    delta(t) = rewards(t) + gamma * bootstrap - values(t);
  }
  return delta;
}

inline Vector td_residuals(const Batch& batch, const ParamStore& value_params,
                           double gamma) {
  Vector values = value_batch(value_params, batch.states);
  Vector next_values = value_batch(value_params, batch.next_states);
  return td_residuals_from_values(batch.rewards, values, next_values, batch.terminal, gamma);
}

inline Vector gae(const Vector& delta, double gamma, double lambda,
                  const std::vector<std::uint8_t>& episode_end) {
  const Eigen::Index n = delta.size();
  Vector adv(n);
  const double gl = gamma * lambda;
  double acc = 0.0;
  for (Eigen::Index t = n - 1; t >= 0; --t) {
    acc = episode_end[static_cast<std::size_t>(t)] || t == n - 1
              ? delta(t)
              : delta(t) + gl * acc;
    adv(t) = acc;
  }
  return adv;
}

// GAE with the V-trace truncation min(1, rho) on the trace; identical to gae
// when every weight is one.
inline Vector gae_v(const Vector& delta, const Vector& rho, double gamma, double lambda,
                    const std::vector<std::uint8_t>& episode_end) {
  const Eigen::Index n = delta.size();
  Vector adv(n);
  const double gl = gamma * lambda;
  double acc = 0.0;
  for (Eigen::Index t = n - 1; t >= 0; --t) {
    acc = episode_end[static_cast<std::size_t>(t)] || t == n - 1
              ? delta(t)
              : delta(t) + gl * (std::min(1.0, rho(t + 1)) * acc);
    adv(t) = acc;
  }
  return adv;
}

inline Vector vtrace_targets(const Vector& advantage, const Vector& rho,
                             const Vector& values) {
  const Eigen::Index n = advantage.size();
  Vector target(n);
  for (Eigen::Index t = 0; t < n; ++t)
    target(t) = std::min(1.0, rho(t)) * advantage(t) + values(t);
  return target;
}

inline Vector gae_targets(const Vector& advantage, const Vector& values) {
  return advantage + values;
}

struct IsWeights {
  Vector rho;
  Matrix rho_dim;
  Matrix log_rho_dim;
};

// Full and per-dimension IS weights of the given policy against the batch's
// stored behavior densities. Exponents are clamped to +/-30 before
// exponentiation so stale batches cannot overflow the product.
inline IsWeights full_is_weights(const Batch& batch, const ParamStore& policy_params) {
  IsWeights w;
  Matrix log_prob = policy_log_prob_matrix(policy_params, batch.states, batch.actions);
  w.log_rho_dim = log_prob - batch.behavior_log_prob;
  w.rho_dim = w.log_rho_dim.array().min(30.0).max(-30.0).exp();
  w.rho = w.log_rho_dim.rowwise().sum().array().min(30.0).max(-30.0).exp();
  return w;
}

// Assembles the per-iteration table for one buffered batch under the current
// snapshot. use_vtrace selects GAE-V with V-trace targets; otherwise plain
// GAE with the on-policy target.
inline AdvantageTable compute_advantage_table(const Batch& batch,
                                              const ParamStore& policy_params,
                                              const ParamStore& value_params, double gamma,
                                              double lambda, bool use_vtrace) {
  AdvantageTable table;
  IsWeights w = full_is_weights(batch, policy_params);
  table.rho = std::move(w.rho);
  table.rho_dim = std::move(w.rho_dim);
  table.log_rho_dim = std::move(w.log_rho_dim);

  Vector values = value_batch(value_params, batch.states);
  Vector next_values = value_batch(value_params, batch.next_states);
  table.delta =
      td_residuals_from_values(batch.rewards, values, next_values, batch.terminal, gamma);
  if (use_vtrace) {
    table.advantage = gae_v(table.delta, table.rho, gamma, lambda, batch.episode_end);
    table.value_target = vtrace_targets(table.advantage, table.rho, values);
  } else {
    table.advantage = gae(table.delta, gamma, lambda, batch.episode_end);
    table.value_target = gae_targets(table.advantage, values);
  }
  return table;
}

}  // namespace disc
