#pragma once

#include "disc/autodiff.hpp"
#include "disc/nets.hpp"
#include "disc/rollout.hpp"
#include "disc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace disc {

// Surrogate objectives and penalties. All objectives are expressed in the
// maximization sense; the trainer ascends their gradients. Advantages arrive
// frozen in the minibatch; only ratio terms are functions of the policy.

enum class Mode { kPpo, kPpoAmber, kDisc };
enum class PenaltyKind { kIsLoss, kKlLoss };

using FlagMatrix = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline double clip_eps(double x, double eps) {
  return std::min(std::max(x, 1.0 - eps), 1.0 + eps);
}

// sign convention: sgn(0) := +1 so clip flags stay total
inline double kappa_of(double advantage) { return advantage < 0.0 ? -1.0 : 1.0; }

namespace detail {

// log-ratio exponents are clamped before exponentiation; stale replayed
// samples land in the clipped branch instead of overflowing
inline constexpr double kLogRatioClamp = 30.0;

// taped per-dimension Gaussian log densities of the minibatch actions under
// the tape's bound policy parameters
inline NodeRef taped_log_prob(Tape& tape, const Minibatch& mb) {
  const Eigen::Index m = mb.states.rows();
  const Eigen::Index d = mb.actions.cols();
  auto mean = mlp_forward(tape, tape.constant(mb.states));
  auto log_std = tape.broadcast(tape.param("log_std"), m, d);
  auto inv_std = tape.exp(tape.scale(log_std, -1.0));
  auto z = tape.mul(tape.sub(tape.constant(mb.actions), mean), inv_std);
  return tape.sub(tape.scale(tape.square(z), -0.5),
                  tape.add_scalar(log_std, kHalfLog2Pi));
}

inline NodeRef taped_log_rho_dim(Tape& tape, const Minibatch& mb) {
  return tape.sub(taped_log_prob(tape, mb), tape.constant(mb.behavior_log_prob));
}

inline Vector kappa_vector(const Vector& advantage) {
  Vector k(advantage.size());
  for (Eigen::Index i = 0; i < k.size(); ++i) k(i) = kappa_of(advantage(i));
  return k;
}

}  // namespace detail

struct SurrogateResult {
  NodeRef objective;   // scalar node, maximization sense
  Vector rho;          // full IS ratios at evaluation time
  Matrix rho_dim;      // per-dimension ratios
  Vector log_rho;      // unclamped log of the full ratio
  Vector kappa;
  FlagMatrix clipped_dim;            // dimension-wise clip flags (dimension-wise objective only)
  std::vector<std::uint8_t> clipped;  // per-sample: clipped (ppo) / fully clipped (disc)
  double fraction_clipped = 0.0;
};

// Clipped PPO surrogate in its sign-factored form:
//   mean_m min{kappa rho_m, kappa clip_eps(rho_m)} kappa A_m
// A clipped sample's term is constant in the policy, so its gradient is
// exactly zero.
inline SurrogateResult ppo_surrogate(Tape& tape, const Minibatch& mb, double eps) {
  if (eps <= 0.0) throw std::invalid_argument("ppo_surrogate: eps must be positive");
  const Eigen::Index m = mb.states.rows();

  auto log_rho_dim = detail::taped_log_rho_dim(tape, mb);
  auto log_rho = tape.row_sum(log_rho_dim);
  auto rho = tape.exp(tape.clip(log_rho, -detail::kLogRatioClamp, detail::kLogRatioClamp));

  SurrogateResult res;
  res.kappa = detail::kappa_vector(mb.advantage);
  Matrix kappa_col = res.kappa;
  Matrix kappa_adv = res.kappa.cwiseProduct(mb.advantage);

  auto kappa_node = tape.constant(kappa_col);
  auto unclipped = tape.mul(rho, kappa_node);
  auto clipped = tape.mul(tape.clip(rho, 1.0 - eps, 1.0 + eps), kappa_node);
  auto factor = tape.min(unclipped, clipped);
  res.objective = tape.mean_all(tape.mul(factor, tape.constant(kappa_adv)));

  res.log_rho = tape.value(log_rho_dim).rowwise().sum();
  res.rho = tape.value(rho).col(0);
  res.rho_dim = tape.value(log_rho_dim)
                    .array()
                    .min(detail::kLogRatioClamp)
                    .max(-detail::kLogRatioClamp)
                    .exp();

  res.clipped.assign(static_cast<std::size_t>(m), 0);
  int clipped_count = 0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double k = res.kappa(i);
    const bool flag = k * res.rho(i) > k * clip_eps(res.rho(i), eps);
    res.clipped[static_cast<std::size_t>(i)] = flag ? 1 : 0;
    clipped_count += flag ? 1 : 0;
  }
  res.fraction_clipped = static_cast<double>(clipped_count) / static_cast<double>(m);
  return res;
}

// Dimension-wise clipped surrogate:
//   mean_m [prod_d kappa_m min{kappa_m rho_{m,d}, kappa_m clip_eps(rho_{m,d})}] A_m
// Each factor is the pessimistic branch for the advantage sign (min of ratio
// and clipped ratio when A > 0, max when A < 0), so with no clipping the term
// is rho_m A_m for every sign and the expression collapses to the clipped
// surrogate at D = 1. A sample loses its gradient only when every dimension
// is clipped.
inline SurrogateResult disc_surrogate(Tape& tape, const Minibatch& mb, double eps) {
  if (eps <= 0.0) throw std::invalid_argument("disc_surrogate: eps must be positive");
  const Eigen::Index m = mb.states.rows();
  const Eigen::Index d = mb.actions.cols();

  auto log_rho_dim = detail::taped_log_rho_dim(tape, mb);
  auto rho_dim =
      tape.exp(tape.clip(log_rho_dim, -detail::kLogRatioClamp, detail::kLogRatioClamp));

  SurrogateResult res;
  res.kappa = detail::kappa_vector(mb.advantage);
  Matrix kappa_mat = res.kappa.replicate(1, d);
  Matrix advantage_col = mb.advantage;

  auto kappa_node = tape.constant(kappa_mat);
  auto unclipped = tape.mul(rho_dim, kappa_node);
  auto clipped = tape.mul(tape.clip(rho_dim, 1.0 - eps, 1.0 + eps), kappa_node);
  auto factors = tape.mul(tape.min(unclipped, clipped), kappa_node);
  auto prod = tape.row_prod(factors);
  res.objective = tape.mean_all(tape.mul(prod, tape.constant(advantage_col)));

  res.log_rho = tape.value(log_rho_dim).rowwise().sum();
  res.rho = res.log_rho.array()
                .min(detail::kLogRatioClamp)
                .max(-detail::kLogRatioClamp)
                .exp();
  res.rho_dim = tape.value(rho_dim);

  res.clipped_dim.resize(m, d);
  res.clipped.assign(static_cast<std::size_t>(m), 0);
  int fully = 0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double k = res.kappa(i);
    bool all = true;
    for (Eigen::Index j = 0; j < d; ++j) {
      const double r = res.rho_dim(i, j);
      const bool flag = k * r > k * clip_eps(r, eps);
      res.clipped_dim(i, j) = flag ? 1 : 0;
      all = all && flag;
    }
    res.clipped[static_cast<std::size_t>(i)] = all ? 1 : 0;
    fully += all ? 1 : 0;
  }
  res.fraction_clipped = static_cast<double>(fully) / static_cast<double>(m);
  return res;
}

// IS-control penalty (1 / 2M) sum (log rho_m)^2 over an on-policy minibatch;
// the log ratio is the sum of per-dimension log ratios, never exponentiated.
inline NodeRef is_loss(Tape& tape, const Minibatch& on_policy_mb) {
  auto log_rho = tape.row_sum(detail::taped_log_rho_dim(tape, on_policy_mb));
  return tape.scale(tape.mean_all(tape.square(log_rho)), 0.5);
}

inline double is_loss_value(const ParamStore& policy_params, const Minibatch& on_policy_mb) {
  Matrix log_prob =
      policy_log_prob_matrix(policy_params, on_policy_mb.states, on_policy_mb.actions);
  Vector log_rho = (log_prob - on_policy_mb.behavior_log_prob).rowwise().sum();
  return 0.5 * log_rho.array().square().mean();
}

// Closed-form diagonal-Gaussian KL from the iteration snapshot to the current
// policy, averaged over the minibatch; the ablation alternative to is_loss.
inline NodeRef kl_loss(Tape& tape, const Minibatch& on_policy_mb,
                       const ParamStore& snapshot_params) {
  const Eigen::Index m = on_policy_mb.states.rows();
  const Eigen::Index d = on_policy_mb.actions.cols();

  Matrix mean_snap = mlp_forward(snapshot_params, on_policy_mb.states);
  Eigen::RowVectorXd log_std_snap =
      policy_log_std_row(snapshot_params, static_cast<int>(d));
  Matrix log_std_snap_mat = log_std_snap.replicate(m, 1);
  Matrix var_snap_mat = (2.0 * log_std_snap).array().exp().matrix().replicate(m, 1);

  auto mean = mlp_forward(tape, tape.constant(on_policy_mb.states));
  auto log_std = tape.broadcast(tape.param("log_std"), m, d);

  auto log_term = tape.sub(log_std, tape.constant(log_std_snap_mat));
  auto num = tape.add(tape.constant(var_snap_mat),
                      tape.square(tape.sub(tape.constant(mean_snap), mean)));
  auto den = tape.scale(tape.exp(tape.scale(log_std, 2.0)), 2.0);
  auto kl_dim = tape.add_scalar(tape.add(log_term, tape.div(num, den)), -0.5);
  return tape.mean_all(tape.row_sum(kl_dim));
}

inline double kl_loss_value(const ParamStore& policy_params, const Minibatch& on_policy_mb,
                            const ParamStore& snapshot_params) {
  const Eigen::Index d = on_policy_mb.actions.cols();
  Matrix mean_snap = mlp_forward(snapshot_params, on_policy_mb.states);
  Matrix mean_cur = mlp_forward(policy_params, on_policy_mb.states);
  Eigen::RowVectorXd ls_snap = policy_log_std_row(snapshot_params, static_cast<int>(d));
  Eigen::RowVectorXd ls_cur = policy_log_std_row(policy_params, static_cast<int>(d));

  double total = 0.0;
  for (Eigen::Index i = 0; i < on_policy_mb.states.rows(); ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      const double var_snap = std::exp(2.0 * ls_snap(j));
      const double var_cur = std::exp(2.0 * ls_cur(j));
      const double dm = mean_snap(i, j) - mean_cur(i, j);
      total += (ls_cur(j) - ls_snap(j)) + (var_snap + dm * dm) / (2.0 * var_cur) - 0.5;
    }
  }
  return total / static_cast<double>(on_policy_mb.states.rows());
}

// Band controller for the penalty coefficient: halve below the target band,
// double above it, clamped to [2^-20, 2^20].
inline double update_alpha_is(double alpha_is, double j_is, double j_targ) {
  if (alpha_is <= 0.0) throw std::invalid_argument("update_alpha_is: alpha must be positive");
  if (j_is < j_targ / 1.5) alpha_is *= 0.5;
  else if (j_is > j_targ * 1.5) alpha_is *= 2.0;
  const double lo = std::ldexp(1.0, -20);
  const double hi = std::ldexp(1.0, 20);
  return std::min(std::max(alpha_is, lo), hi);
}

// MSE between the value head and its frozen targets
inline NodeRef value_loss(Tape& tape, const Minibatch& mb) {
  auto v = mlp_forward(tape, tape.constant(mb.states));
  Matrix target = mb.value_target;
  return tape.mean_all(tape.square(tape.sub(v, tape.constant(target))));
}

// Per-gradient-step record retained for the final epoch of an iteration;
// feeds the clipping diagnostics and the penalty controller.
struct LossReport {
  double surrogate = 0.0;
  double total_objective = 0.0;
  double penalty = 0.0;  // J_IS (or J_KL) value
  double value_loss = 0.0;
  Vector rho;
  Matrix rho_dim;
  std::vector<std::uint8_t> clipped;
  FlagMatrix clipped_dim;
  double fraction_fully_clipped = 0.0;
};

struct PolicyObjective {
  SurrogateResult surrogate;
  NodeRef objective;          // surrogate minus the weighted penalty
  double penalty_value = 0.0;  // J_IS (or J_KL) evaluated this step
};

// Mode dispatch for the full policy objective. The penalty term only ever
// sees the dedicated on-policy minibatch; with a zero coefficient it is
// evaluated out-of-tape so the gradient path is untouched.
inline PolicyObjective total_policy_loss(Tape& tape, Mode mode, const Minibatch& mb,
                                         const Minibatch* on_policy_mb, double eps,
                                         double alpha_is,
                                         PenaltyKind penalty = PenaltyKind::kIsLoss,
                                         const ParamStore* snapshot_params = nullptr,
                                         const ParamStore* policy_params = nullptr) {
  PolicyObjective out;
  switch (mode) {
    case Mode::kPpo:
    case Mode::kPpoAmber:
      out.surrogate = ppo_surrogate(tape, mb, eps);
      out.objective = out.surrogate.objective;
      return out;
    case Mode::kDisc: {
      out.surrogate = disc_surrogate(tape, mb, eps);
      if (on_policy_mb == nullptr)
        throw std::invalid_argument("total_policy_loss: disc mode needs an on-policy minibatch");
      if (penalty == PenaltyKind::kKlLoss && snapshot_params == nullptr)
        throw std::invalid_argument("total_policy_loss: kl penalty needs snapshot params");
      if (alpha_is > 0.0) {
        NodeRef pen = penalty == PenaltyKind::kIsLoss
                          ? is_loss(tape, *on_policy_mb)
                          : kl_loss(tape, *on_policy_mb, *snapshot_params);
        out.penalty_value = tape.scalar_value(pen);
        out.objective = tape.sub(out.surrogate.objective, tape.scale(pen, alpha_is));
      } else {
        if (policy_params == nullptr)
          throw std::invalid_argument("total_policy_loss: zero alpha needs policy params");
        out.penalty_value = penalty == PenaltyKind::kIsLoss
                                ? is_loss_value(*policy_params, *on_policy_mb)
                                : kl_loss_value(*policy_params, *on_policy_mb, *snapshot_params);
        out.objective = out.surrogate.objective;
      }
      return out;
    }
  }
  throw std::invalid_argument("total_policy_loss: unknown mode");
}

}  // namespace disc
