#pragma once

#include "disc/autodiff.hpp"
#include "disc/rng.hpp"
#include "disc/tensor.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>

namespace disc {

// Feed-forward networks: two hidden layers of 64 tanh units and a linear
// head. The policy head outputs the Gaussian mean for each action dimension;
// a separate state-independent log_std vector completes the distribution.

inline constexpr int kHiddenUnits = 64;
inline constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * ln(2*pi)

namespace detail {

inline void init_layer(Tensor& w, Rng& rng, double scale = 1.0) {
  const double fan_out = static_cast<double>(w.shape[0]);
  const double fan_in = static_cast<double>(w.shape[1]);
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  for (double& v : w.data) v = scale * rng.uniform(-bound, bound);
}

inline ParamStore make_mlp(int in_dim, int out_dim, double head_scale, Rng& rng) {
  if (in_dim < 1 || out_dim < 1) throw std::invalid_argument("mlp: bad dimensions");
  ParamStore p;
  init_layer(p.add("w1", {static_cast<std::size_t>(kHiddenUnits), static_cast<std::size_t>(in_dim)}), rng);
  p.add("b1", {static_cast<std::size_t>(kHiddenUnits)});
  init_layer(p.add("w2", {static_cast<std::size_t>(kHiddenUnits), static_cast<std::size_t>(kHiddenUnits)}), rng);
  p.add("b2", {static_cast<std::size_t>(kHiddenUnits)});
  init_layer(p.add("w3", {static_cast<std::size_t>(out_dim), static_cast<std::size_t>(kHiddenUnits)}), rng, head_scale);
  p.add("b3", {static_cast<std::size_t>(out_dim)});
  return p;
}

}  // namespace detail

// Policy parameters: mean network plus log_std ("log_std" tensor of length D,
// or length 1 when the scale is shared across dimensions). The mean head is
// scaled down so the initial policy sits near zero action.
inline ParamStore make_policy_params(int obs_dim, int act_dim, Rng& rng,
                                     bool shared_log_std = false) {
  ParamStore p = detail::make_mlp(obs_dim, act_dim, 0.01, rng);
  p.add("log_std", {static_cast<std::size_t>(shared_log_std ? 1 : act_dim)});
  return p;
}

inline ParamStore make_value_params(int obs_dim, Rng& rng) {
  return detail::make_mlp(obs_dim, 1, 1.0, rng);
}

inline int mlp_in_dim(const ParamStore& p) { return static_cast<int>(p.at("w1").shape[1]); }
inline int mlp_out_dim(const ParamStore& p) { return static_cast<int>(p.at("w3").shape[0]); }

// plain batched forward, rows = states
inline Matrix mlp_forward(const ParamStore& p, const Matrix& x) {
  if (x.cols() != mlp_in_dim(p)) throw std::invalid_argument("mlp_forward: input width mismatch");
  Matrix h1 = (x * p.at("w1").mat().transpose()).rowwise() + p.at("b1").mat().row(0);
  h1 = h1.array().tanh();
  Matrix h2 = (h1 * p.at("w2").mat().transpose()).rowwise() + p.at("b2").mat().row(0);
  h2 = h2.array().tanh();
  Matrix out = (h2 * p.at("w3").mat().transpose()).rowwise() + p.at("b3").mat().row(0);
  return out;
}

// taped forward over a constant input node
inline NodeRef mlp_forward(Tape& tape, NodeRef x) {
  auto h1 = tape.tanh(tape.affine(x, tape.param("w1"), tape.param("b1")));
  auto h2 = tape.tanh(tape.affine(h1, tape.param("w2"), tape.param("b2")));
  return tape.affine(h2, tape.param("w3"), tape.param("b3"));
}

// Diagonal Gaussian over actions; std is strictly positive by construction.
struct GaussianDiag {
  Vector mean;
  Vector std;
};

// log_std as a 1 x D row regardless of sharing
inline Eigen::RowVectorXd policy_log_std_row(const ParamStore& p, int act_dim) {
  const Tensor& t = p.at("log_std");
  if (static_cast<int>(t.size()) == act_dim) return t.mat().row(0);
  return Eigen::RowVectorXd::Constant(act_dim, t.data[0]);
}

inline GaussianDiag policy_forward(const ParamStore& p, const Vector& state) {
  Matrix row = state.transpose();
  Matrix mean = mlp_forward(p, row);
  const int d = mlp_out_dim(p);
  GaussianDiag out;
  out.mean = mean.row(0).transpose();
  out.std = policy_log_std_row(p, d).array().exp().transpose();
  return out;
}

inline Vector log_prob_per_dim(const GaussianDiag& dist, const Vector& action) {
  if (action.size() != dist.mean.size())
    throw std::invalid_argument("log_prob_per_dim: action dimension mismatch");
  if ((dist.std.array() <= 0.0).any())
    throw std::invalid_argument("log_prob_per_dim: non-positive std");
  Eigen::ArrayXd z = (action - dist.mean).array() / dist.std.array();
  return (-0.5 * z.square() - dist.std.array().log() - kHalfLog2Pi).matrix();
}

struct ActionSample {
  Vector action;
  Vector log_prob;  // per dimension, under the sampling distribution
};

inline ActionSample sample_action(const GaussianDiag& dist, Rng& rng) {
  const Eigen::Index d = dist.mean.size();
  Vector z(d);
  for (Eigen::Index i = 0; i < d; ++i) z(i) = rng.normal();
  ActionSample s;
  s.action = dist.mean + dist.std.cwiseProduct(z);
  s.log_prob = log_prob_per_dim(dist, s.action);
  return s;
}

inline double value_forward(const ParamStore& p, const Vector& state) {
  Matrix row = state.transpose();
  return mlp_forward(p, row)(0, 0);
}

inline Vector value_batch(const ParamStore& p, const Matrix& states) {
  return mlp_forward(p, states).col(0);
}

// Batched per-dimension Gaussian log densities of given actions under the
// policy. This is the canonical density evaluator: rollouts store its output
// as the behavior densities and the advantage pass recomputes it, so a batch
// evaluated under its own behavior policy yields IS weights of exactly one.
inline Matrix policy_log_prob_matrix(const ParamStore& p, const Matrix& states,
                                     const Matrix& actions) {
  Matrix mean = mlp_forward(p, states);
  if (actions.rows() != mean.rows() || actions.cols() != mean.cols())
    throw std::invalid_argument("policy_log_prob_matrix: action shape mismatch");
  Eigen::RowVectorXd log_std = policy_log_std_row(p, static_cast<int>(mean.cols()));
  Eigen::RowVectorXd inv_std = (-log_std).array().exp().matrix();
  Matrix z = actions - mean;
  z.array().rowwise() *= inv_std.array();
  Matrix out = (-0.5 * z.array().square()).matrix();
  out.array().rowwise() -= (log_std.array() + kHalfLog2Pi);
  return out;
}

}  // namespace disc
