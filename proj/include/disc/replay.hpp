#pragma once

#include "disc/advantage.hpp"
#include "disc/rng.hpp"
#include "disc/rollout.hpp"

#include <deque>
#include <stdexcept>
#include <utility>
#include <vector>

namespace disc {

// Replay of whole rollout batches. The buffer keeps at most L batches in
// collection order; selection re-admits an old batch only while its mean
// IS-weight deviation against the current policy stays under 1 + eps_b.

enum class DevMode { kOverall, kPerDim };

class ReplayBuffer {
 public:
  explicit ReplayBuffer(int capacity) : capacity_(capacity) {
    if (capacity < 1) throw std::invalid_argument("replay: capacity must be >= 1");
  }

  void push(Batch batch) {
    for (const Batch& b : batches_)
      if (b.iteration == batch.iteration)
        throw std::invalid_argument("replay: duplicate batch iteration index");
    batches_.push_back(std::move(batch));
    while (static_cast<int>(batches_.size()) > capacity_) batches_.pop_front();
  }

  int size() const { return static_cast<int>(batches_.size()); }
  int capacity() const { return capacity_; }
  Batch& at(int i) { return batches_[static_cast<std::size_t>(i)]; }
  const Batch& at(int i) const { return batches_[static_cast<std::size_t>(i)]; }
  Batch& newest() { return batches_.back(); }
  const Batch& newest() const { return batches_.back(); }

 private:
  int capacity_;
  std::deque<Batch> batches_;
};

// Mean shifted deviation |1 - rho| + 1 over the batch, from the advantage
// table computed against the current policy snapshot. Equals 1 exactly when
// the policy has not moved.
inline double batch_mean_dev(const AdvantageTable& table, DevMode mode) {
  if (table.empty()) throw std::invalid_argument("batch_mean_dev: table not computed");
  if (mode == DevMode::kOverall)
    return (table.rho.array() - 1.0).abs().mean() + 1.0;
  return (table.rho_dim.array() - 1.0).abs().mean() + 1.0;
}

// standalone form evaluating the weights directly against a policy
inline double batch_mean_dev(const Batch& batch, const ParamStore& policy_params,
                             DevMode mode) {
  IsWeights w = full_is_weights(batch, policy_params);
  if (mode == DevMode::kOverall) return (w.rho.array() - 1.0).abs().mean() + 1.0;
  return (w.rho_dim.array() - 1.0).abs().mean() + 1.0;
}

// The newest batch is always selected; an old batch is selected while its
// mean deviation is below 1 + eps_b. Result is ordered newest first.
inline std::vector<const Batch*> select_batches(const ReplayBuffer& buffer, double eps_b,
                                                DevMode mode) {
  if (buffer.size() == 0) throw std::invalid_argument("select_batches: empty buffer");
  std::vector<const Batch*> selected;
  selected.push_back(&buffer.newest());
  for (int i = buffer.size() - 2; i >= 0; --i) {
    const Batch& b = buffer.at(i);
    if (batch_mean_dev(b.table, mode) < 1.0 + eps_b) selected.push_back(&b);
  }
  return selected;
}

// Uniform sampling without replacement across the union of the selected
// batches' transitions. The index pool persists for a whole iteration; each
// draw runs a partial Fisher-Yates pass, which stays uniform from any
// permutation state.
class MinibatchSampler {
 public:
  MinibatchSampler(std::vector<const Batch*> batches, int current_iteration)
      : batches_(std::move(batches)), iteration_(current_iteration) {
    for (std::size_t bi = 0; bi < batches_.size(); ++bi) {
      const int n = batches_[bi]->length();
      for (int t = 0; t < n; ++t) pool_.emplace_back(static_cast<int>(bi), t);
    }
  }

  int pool_size() const { return static_cast<int>(pool_.size()); }

  Minibatch sample(int m, Rng& rng) {
    if (m < 1 || m > pool_size())
      throw std::invalid_argument("sample_minibatch: size exceeds transition pool");
    const int obs = batches_.front()->obs_dim();
    const int act = batches_.front()->action_dim();

    Minibatch mb;
    mb.states.resize(m, obs);
    mb.actions.resize(m, act);
    mb.behavior_log_prob.resize(m, act);
    mb.advantage.resize(m);
    mb.value_target.resize(m);
    mb.age.resize(static_cast<std::size_t>(m));

    for (int k = 0; k < m; ++k) {
      const std::size_t j =
          static_cast<std::size_t>(k) + rng.below(static_cast<std::uint64_t>(pool_size() - k));
      std::swap(pool_[static_cast<std::size_t>(k)], pool_[j]);
      const auto [bi, t] = pool_[static_cast<std::size_t>(k)];
      const Batch& b = *batches_[static_cast<std::size_t>(bi)];
      mb.states.row(k) = b.states.row(t);
      mb.actions.row(k) = b.actions.row(t);
      mb.behavior_log_prob.row(k) = b.behavior_log_prob.row(t);
      mb.advantage(k) = b.table.advantage(t);
      mb.value_target(k) = b.table.value_target(t);
      mb.age[static_cast<std::size_t>(k)] = iteration_ - b.iteration;
    }
    return mb;
  }

 private:
  std::vector<const Batch*> batches_;
  std::vector<std::pair<int, int>> pool_;
  int iteration_;
};

}  // namespace disc
