#pragma once

#include "disc/obs_filter.hpp"
#include "disc/tensor.hpp"

#include <cstdint>
#include <vector>

namespace disc {

// Per-transition quantities recomputed once per iteration under the current
// policy/value snapshot and frozen for the whole epoch loop.
struct AdvantageTable {
  Vector delta;         // TD residuals
  Vector advantage;     // GAE or GAE-V estimate
  Vector value_target;  // regression target for the value net
  Vector rho;           // full IS weight vs. the batch's behavior policy
  Matrix rho_dim;       // per-dimension IS weights, N x D
  Matrix log_rho_dim;   // per-dimension log ratios, N x D

  bool empty() const { return delta.size() == 0; }
};

// One on-policy rollout of N transitions; the unit of replay. Observations
// are stored normalized with the filter state in effect when each state was
// collected, so densities stay well-defined when the batch is replayed.
struct Batch {
  Matrix states;             // N x obs_dim
  Matrix next_states;        // N x obs_dim, the pre-reset successor state
  Matrix actions;            // N x D
  Matrix behavior_log_prob;  // N x D, per-dimension densities under the collector
  Vector rewards;            // N
  std::vector<std::uint8_t> terminal;     // true terminal: bootstrap with zero
  std::vector<std::uint8_t> episode_end;  // last transition of its episode
  int iteration = -1;
  ObsFilter filter_snapshot{1};
  AdvantageTable table;

  int length() const { return static_cast<int>(rewards.size()); }
  int action_dim() const { return static_cast<int>(actions.cols()); }
  int obs_dim() const { return static_cast<int>(states.cols()); }
};

// Transitions sampled across the selected batches for one gradient step.
// age is iterations since collection; age zero means the sample comes from
// the current on-policy batch.
struct Minibatch {
  Matrix states;
  Matrix actions;
  Matrix behavior_log_prob;
  Vector advantage;
  Vector value_target;
  std::vector<int> age;

  int size() const { return static_cast<int>(rewardless_size()); }
  int on_policy_count() const {
    int n = 0;
    for (int a : age) n += a == 0 ? 1 : 0;
    return n;
  }

 private:
  std::size_t rewardless_size() const { return age.size(); }
};

}  // namespace disc
