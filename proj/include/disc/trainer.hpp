#pragma once

#include "disc/advantage.hpp"
#include "disc/config.hpp"
#include "disc/env.hpp"
#include "disc/nets.hpp"
#include "disc/objectives.hpp"
#include "disc/obs_filter.hpp"
#include "disc/optimizer.hpp"
#include "disc/replay.hpp"
#include "disc/rng.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

namespace disc {

// One training iteration: snapshot the policy, collect a rollout, recompute
// advantage tables for every buffered batch, select batches, run the
// epoch/gradient-step loop, update the penalty coefficient, evaluate
// deterministically. Strictly sequential and seed-deterministic; every RNG
// consumer owns an isolated stream.

namespace seed_tag {
inline constexpr std::uint64_t kPolicyInit = 1;
inline constexpr std::uint64_t kValueInit = 2;
inline constexpr std::uint64_t kEnv = 3;
inline constexpr std::uint64_t kAction = 4;
inline constexpr std::uint64_t kMinibatch = 5;
inline constexpr std::uint64_t kPenaltyMinibatch = 6;
inline constexpr std::uint64_t kEval = 7;
}  // namespace seed_tag

struct IterationMetrics {
  int iteration = 0;       // 1-based
  long env_steps = 0;      // cumulative
  double mean_return = 0;  // deterministic evaluation
  double mean_rho_dev = 1;
  double mean_rho_dim_dev = 1;
  double fraction_fully_clipped = 0;
  int batches_selected = 1;
  double alpha_is = 1;
  double j_is = 0;
  double policy_loss = 0;
  double value_loss = 0;
  double learning_rate = 0;
};

inline double lr_schedule(double progress, double lr_max = 3e-4, double lr_min = 1e-4) {
  return std::max(lr_min, lr_max * (1.0 - progress));
}

// Mean episodic return of the deterministic policy (the mean network) over
// fresh evaluation episodes. Evaluation streams are derived from a dedicated
// tag plus the eval index, disjoint from all training streams; the filter is
// read-only here.
inline double deterministic_eval(const EnvSpec& spec, const ParamStore& policy_params,
                                 const ObsFilter& filter, int episodes,
                                 std::uint64_t run_seed, std::uint64_t eval_index) {
  if (episodes < 1) throw std::invalid_argument("deterministic_eval: episodes must be >= 1");
  double total = 0.0;
  for (int k = 0; k < episodes; ++k) {
    Env env(spec, derive_seed(run_seed, {seed_tag::kEval, spec.seed, eval_index,
                                         static_cast<std::uint64_t>(k)}));
    Vector obs = env.reset();
    double episode_return = 0.0;
    while (true) {
      GaussianDiag dist = policy_forward(policy_params, filter.normalize(obs));
      auto res = env.step(dist.mean);
      episode_return += res.reward;
      if (res.done) break;
      obs = std::move(res.observation);
    }
    total += episode_return;
  }
  return total / static_cast<double>(episodes);
}

struct ClipMetrics {
  double mean_rho_dev = 1.0;
  double mean_rho_dim_dev = 1.0;
  double fraction_fully_clipped = 0.0;
};

// Final-epoch diagnostics: per-minibatch means of |1 - rho| + 1, averaged
// again over the drawn minibatches, and the fraction of samples whose
// surrogate term carries no gradient.
inline ClipMetrics compute_clip_metrics(const std::vector<LossReport>& reports) {
  if (reports.empty()) return {};
  ClipMetrics out;
  double dev = 0.0, dev_dim = 0.0, frac = 0.0;
  for (const LossReport& r : reports) {
    dev += (r.rho.array() - 1.0).abs().mean() + 1.0;
    dev_dim += (r.rho_dim.array() - 1.0).abs().mean() + 1.0;
    double clipped = 0.0;
    for (std::uint8_t f : r.clipped) clipped += f;
    frac += clipped / static_cast<double>(r.clipped.size());
  }
  const double n = static_cast<double>(reports.size());
  out.mean_rho_dev = dev / n;
  out.mean_rho_dim_dev = dev_dim / n;
  out.fraction_fully_clipped = frac / n;
  return out;
}

inline void standardize(Vector& v) {
  const double mean = v.mean();
  const double sd = std::sqrt((v.array() - mean).square().mean());
  v = (v.array() - mean) / (sd + 1e-8);
}

class Trainer {
 public:
  explicit Trainer(TrainConfig cfg)
      : cfg_(std::move(cfg)),
        env_(cfg_.env, derive_seed(cfg_.seed, {seed_tag::kEnv, cfg_.env.seed})),
        filter_(2 * cfg_.env.action_dim),
        buffer_(cfg_.mode == Mode::kPpo ? 1 : cfg_.replay_length),
        action_rng_(derive_seed(cfg_.seed, {seed_tag::kAction})),
        minibatch_rng_(derive_seed(cfg_.seed, {seed_tag::kMinibatch})),
        penalty_rng_(derive_seed(cfg_.seed, {seed_tag::kPenaltyMinibatch})) {
    validate_config(cfg_);
    Rng policy_rng(derive_seed(cfg_.seed, {seed_tag::kPolicyInit}));
    Rng value_rng(derive_seed(cfg_.seed, {seed_tag::kValueInit}));
    policy_ = make_policy_params(env_.obs_dim(), env_.action_dim(), policy_rng,
                                 cfg_.shared_log_std);
    value_ = make_value_params(env_.obs_dim(), value_rng);
    policy_opt_ = Adam(policy_);
    value_opt_ = Adam(value_);
    alpha_is_ = cfg_.alpha_is_init;

    Vector obs = env_.reset();
    filter_.update(obs);
    current_obs_ = filter_.normalize(obs);
  }

  const TrainConfig& config() const { return cfg_; }
  const ParamStore& policy() const { return policy_; }
  const ParamStore& value() const { return value_; }
  const ObsFilter& filter() const { return filter_; }
  double alpha_is() const { return alpha_is_; }
  int iteration() const { return iter_; }
  const ReplayBuffer& buffer() const { return buffer_; }

  // deterministic evaluation of the current policy; index 0 is the untrained
  // baseline, training iterations use their 1-based index
  double evaluate() const {
    return deterministic_eval(cfg_.env, policy_, filter_, cfg_.eval_episodes, cfg_.seed,
                              static_cast<std::uint64_t>(iter_));
  }

  Batch collect_rollout() {
    const int n = cfg_.horizon;
    const int obs_dim = env_.obs_dim();
    const int act_dim = env_.action_dim();
    Batch b;
    b.iteration = iter_;
    b.states.resize(n, obs_dim);
    b.next_states.resize(n, obs_dim);
    b.actions.resize(n, act_dim);
    b.rewards.resize(n);
    b.terminal.assign(static_cast<std::size_t>(n), 0);
    b.episode_end.assign(static_cast<std::size_t>(n), 0);

    for (int t = 0; t < n; ++t) {
      b.states.row(t) = current_obs_.transpose();
      GaussianDiag dist = policy_forward(policy_, current_obs_);
      ActionSample sample = sample_action(dist, action_rng_);
      auto res = env_.step(sample.action);

      filter_.update(res.observation);
      Vector next_norm = filter_.normalize(res.observation);
      b.next_states.row(t) = next_norm.transpose();
      b.actions.row(t) = sample.action.transpose();
      b.rewards(t) = res.reward;
      // episodes only ever end on the time limit here: bootstrap, cut traces
      b.episode_end[static_cast<std::size_t>(t)] = res.done ? 1 : 0;

      if (res.done) {
        Vector obs = env_.reset();
        filter_.update(obs);
        current_obs_ = filter_.normalize(obs);
      } else {
        current_obs_ = std::move(next_norm);
      }
    }
    // canonical densities: recomputed batched so that the advantage pass
    // reproduces them exactly and on-policy IS weights are exactly one
    b.behavior_log_prob = policy_log_prob_matrix(policy_, b.states, b.actions);
    b.filter_snapshot = filter_;
    return b;
  }

  IterationMetrics run_iteration() {
    // the policy as of this point is the iteration snapshot; a copy is only
    // needed when the KL penalty has to evaluate the snapshot later
    ParamStore snapshot;
    const ParamStore* snapshot_ptr = nullptr;
    if (cfg_.mode == Mode::kDisc && cfg_.penalty == PenaltyKind::kKlLoss) {
      snapshot = policy_;
      snapshot_ptr = &snapshot;
    }

    buffer_.push(collect_rollout());

    const bool use_vtrace = cfg_.mode == Mode::kDisc;
    for (int i = 0; i < buffer_.size(); ++i) {
      Batch& b = buffer_.at(i);
      b.table = compute_advantage_table(b, policy_, value_, cfg_.gamma, cfg_.lambda,
                                        use_vtrace);
    }

    std::vector<const Batch*> selected;
    if (cfg_.mode == Mode::kPpo) {
      selected = {&buffer_.newest()};
    } else {
      selected = select_batches(buffer_, cfg_.epsilon_b,
                                cfg_.mode == Mode::kDisc ? DevMode::kPerDim
                                                         : DevMode::kOverall);
    }

    MinibatchSampler sampler(selected, iter_);
    const int m = std::max(1, sampler.pool_size() / cfg_.steps_per_epoch);

    MinibatchSampler penalty_sampler({&buffer_.newest()}, iter_);
    const int m_penalty = std::min(m, buffer_.newest().length());

    const double progress =
        static_cast<double>(iter_) / static_cast<double>(cfg_.total_iterations);
    const double lr = lr_schedule(progress, cfg_.lr_max, cfg_.lr_min);

    std::vector<LossReport> final_epoch;
    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
      const bool last = epoch == cfg_.epochs - 1;
      if (last) final_epoch.reserve(static_cast<std::size_t>(cfg_.steps_per_epoch));
      for (int step = 0; step < cfg_.steps_per_epoch; ++step) {
        Minibatch mb = sampler.sample(m, minibatch_rng_);
        if (cfg_.normalize_advantages) standardize(mb.advantage);

        Minibatch penalty_mb;
        const Minibatch* penalty_ptr = nullptr;
        if (cfg_.mode == Mode::kDisc) {
          penalty_mb = penalty_sampler.sample(m_penalty, penalty_rng_);
          penalty_ptr = &penalty_mb;
        }

        Tape tape(policy_);
        PolicyObjective obj =
            total_policy_loss(tape, cfg_.mode, mb, penalty_ptr, cfg_.clip_epsilon,
                              alpha_is_, cfg_.penalty, snapshot_ptr, &policy_);
        GradStore policy_grads = tape.backward(obj.objective);
        clip_grad_norm(policy_grads, cfg_.max_grad_norm);
        policy_opt_.step(policy_, policy_grads, lr, /*maximize=*/true);

        Tape value_tape(value_);
        NodeRef vloss = value_loss(value_tape, mb);
        const double vloss_value = value_tape.scalar_value(vloss);
        GradStore value_grads = value_tape.backward(vloss);
        clip_grad_norm(value_grads, cfg_.max_grad_norm);
        value_opt_.step(value_, value_grads, lr, /*maximize=*/false);

        if (last) {
          LossReport rep;
          rep.surrogate = tape.scalar_value(obj.surrogate.objective);
          rep.total_objective = tape.scalar_value(obj.objective);
          rep.penalty = cfg_.mode == Mode::kDisc ? obj.penalty_value
                                                 : on_policy_is_diagnostic(obj.surrogate, mb);
          rep.value_loss = vloss_value;
          rep.rho = std::move(obj.surrogate.rho);
          rep.rho_dim = std::move(obj.surrogate.rho_dim);
          rep.clipped = std::move(obj.surrogate.clipped);
          rep.clipped_dim = std::move(obj.surrogate.clipped_dim);
          rep.fraction_fully_clipped = obj.surrogate.fraction_clipped;
          final_epoch.push_back(std::move(rep));
        }
      }
    }

    double penalty_mean = 0.0;
    for (const LossReport& r : final_epoch) penalty_mean += r.penalty;
    penalty_mean /= static_cast<double>(final_epoch.size());
    if (cfg_.mode == Mode::kDisc && alpha_is_ > 0.0)
      alpha_is_ = update_alpha_is(alpha_is_, penalty_mean, cfg_.j_targ);

    iter_ += 1;

    IterationMetrics metrics;
    metrics.iteration = iter_;
    metrics.env_steps = static_cast<long>(iter_) * cfg_.horizon;
    metrics.mean_return = evaluate();
    const ClipMetrics clip = compute_clip_metrics(final_epoch);
    metrics.mean_rho_dev = clip.mean_rho_dev;
    metrics.mean_rho_dim_dev = clip.mean_rho_dim_dev;
    metrics.fraction_fully_clipped = clip.fraction_fully_clipped;
    metrics.batches_selected = static_cast<int>(selected.size());
    metrics.alpha_is = alpha_is_;
    metrics.j_is = penalty_mean;
    double policy_loss = 0.0, value_loss_mean = 0.0;
    for (const LossReport& r : final_epoch) {
      policy_loss += r.total_objective;
      value_loss_mean += r.value_loss;
    }
    metrics.policy_loss = policy_loss / static_cast<double>(final_epoch.size());
    metrics.value_loss = value_loss_mean / static_cast<double>(final_epoch.size());
    metrics.learning_rate = lr;
    return metrics;
  }

 private:
  // on-policy squared-log-ratio diagnostic for modes without a penalty term,
  // from the surrogate minibatch's age-zero rows
  static double on_policy_is_diagnostic(const SurrogateResult& surr, const Minibatch& mb) {
    double sum = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < mb.age.size(); ++i) {
      if (mb.age[i] != 0) continue;
      const double lr = surr.log_rho(static_cast<Eigen::Index>(i));
      sum += lr * lr;
      ++n;
    }
    return n > 0 ? 0.5 * sum / static_cast<double>(n) : 0.0;
  }

  TrainConfig cfg_;
  Env env_;
  ObsFilter filter_;
  ReplayBuffer buffer_;
  Rng action_rng_;
  Rng minibatch_rng_;
  Rng penalty_rng_;
  ParamStore policy_;
  ParamStore value_;
  Adam policy_opt_{ParamStore{}};
  Adam value_opt_{ParamStore{}};
  double alpha_is_ = 1.0;
  int iter_ = 0;
  Vector current_obs_;
};

}  // namespace disc
