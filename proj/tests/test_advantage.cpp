#include "disc/advantage.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "oracles.hpp"

using disc::Batch;
using disc::Matrix;
using disc::ParamStore;
using disc::Rng;
using disc::Vector;

namespace {

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> to_std(const Vector& v) {
  return {v.data(), v.data() + v.size()};
}

std::vector<std::uint8_t> no_ends(std::size_t n) { return std::vector<std::uint8_t>(n, 0); }

// random episode-end pattern; the last transition always closes the horizon
std::vector<std::uint8_t> random_ends(std::size_t n, Rng& rng, double p = 0.1) {
  std::vector<std::uint8_t> ends(n, 0);
  for (std::size_t i = 0; i < n; ++i) ends[i] = rng.uniform() < p ? 1 : 0;
  if (n > 0) ends[n - 1] = 1;
  return ends;
}

Batch synthetic_batch(int n, int d, Rng& rng, const ParamStore& behavior_policy) {
  Batch b;
  b.states = Matrix(n, 2 * d);
  b.next_states = Matrix(n, 2 * d);
  b.actions = Matrix(n, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 2 * d; ++j) {
      b.states(i, j) = rng.uniform(-1.0, 1.0);
      b.next_states(i, j) = rng.uniform(-1.0, 1.0);
    }
    for (int j = 0; j < d; ++j) b.actions(i, j) = rng.uniform(-1.0, 1.0);
  }
  b.rewards = Vector::Zero(n);
  for (int i = 0; i < n; ++i) b.rewards(i) = rng.uniform(-1.0, 0.0);
  b.terminal.assign(static_cast<std::size_t>(n), 0);
  b.episode_end = no_ends(static_cast<std::size_t>(n));
  b.episode_end[static_cast<std::size_t>(n) - 1] = 1;
  b.behavior_log_prob =
      disc::policy_log_prob_matrix(behavior_policy, b.states, b.actions);
  return b;
}

}  // namespace

TEST_CASE("td residuals") {
  SECTION("constant reward with zero values") {
    Vector rewards = Vector::Ones(4);
    Vector zeros = Vector::Zero(4);
    Vector delta = disc::td_residuals_from_values(rewards, zeros, zeros, no_ends(4), 0.99);
    REQUIRE(delta == Vector::Ones(4));
  }

  SECTION("terminal step bootstraps with zero") {
    Vector rewards = Vector::Constant(1, 2.0);
    Vector values = Vector::Constant(1, 0.5);
    Vector next_values = Vector::Constant(1, 100.0);  // must be ignored
    std::vector<std::uint8_t> terminal{1};
    Vector delta = disc::td_residuals_from_values(rewards, values, next_values, terminal, 0.9);
    REQUIRE(delta(0) == 1.5);
  }

  SECTION("exact value function zeroes residuals in expectation") {
    // constant-reward-rate MDP: rewards i.i.d. uniform on [0, 2] regardless of
    // state, so V = 1 / (1 - gamma) everywhere is exact; a constant-output
    // value net realizes it for every observation
    const double gamma = 0.9;
    Rng rng(31);
    ParamStore value = disc::make_value_params(4, rng);
    for (double& v : value.at("w3").data) v = 0.0;
    value.at("b3").data[0] = 1.0 / (1.0 - gamma);

    const int n = 10000;
    Batch b;
    b.states = Matrix::Zero(n, 4);
    b.next_states = Matrix::Zero(n, 4);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < 4; ++j) {
        b.states(i, j) = rng.uniform(-1.0, 1.0);
        b.next_states(i, j) = rng.uniform(-1.0, 1.0);
      }
    b.rewards = Vector(n);
    for (int i = 0; i < n; ++i) b.rewards(i) = rng.uniform(0.0, 2.0);
    b.terminal.assign(n, 0);

    Vector delta = disc::td_residuals(b, value, gamma);
    REQUIRE(std::abs(delta.mean()) < 0.05);
  }
}

TEST_CASE("gae") {
  SECTION("two-step example") {
    Vector delta(2);
    delta << 1.0, 0.5;
    // gamma * lambda = 0.5
    Vector adv = disc::gae(delta, 1.0, 0.5, {0, 1});
    auto direct = oracle::gae_direct({1.0, 0.5}, 1.0, 0.5, {0, 1});
    REQUIRE(adv(0) == direct[0]);
    REQUIRE(adv(1) == direct[1]);
    REQUIRE(adv(0) == 1.25);
    REQUIRE(adv(1) == 0.5);
  }

  SECTION("lambda = 0 reduces to the one-step residual") {
    Rng rng(32);
    Vector delta(10);
    for (int i = 0; i < 10; ++i) delta(i) = rng.uniform(-1.0, 1.0);
    Vector adv = disc::gae(delta, 0.99, 0.0, random_ends(10, rng));
    REQUIRE(adv == delta);
  }

  SECTION("recursion equals the direct double sum with episode restarts") {
    Rng rng(33);
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t n = 2 + rng.below(49);
      std::vector<double> delta(n);
      for (double& v : delta) v = rng.uniform(-2.0, 2.0);
      auto ends = random_ends(n, rng, 0.15);
      Vector adv = disc::gae(to_vector(delta), 0.99, 0.95, ends);
      auto direct = oracle::gae_direct(delta, 0.99, 0.95, ends);
      for (std::size_t i = 0; i < n; ++i)
        REQUIRE(std::abs(adv(static_cast<Eigen::Index>(i)) - direct[i]) < 1e-10);
    }
  }
}

TEST_CASE("gae_v") {
  SECTION("all weights one reproduces gae exactly") {
    Rng rng(34);
    Vector delta(20);
    for (int i = 0; i < 20; ++i) delta(i) = rng.uniform(-2.0, 2.0);
    auto ends = random_ends(20, rng);
    Vector ones = Vector::Ones(20);
    Vector a = disc::gae(delta, 0.99, 0.95, ends);
    Vector b = disc::gae_v(delta, ones, 0.99, 0.95, ends);
    for (int i = 0; i < 20; ++i) REQUIRE(a(i) == b(i));
  }

  SECTION("two-step truncated example") {
    Vector delta(2), rho(2);
    delta << 1.0, 1.0;
    rho << 1.0, 0.5;
    Vector adv = disc::gae_v(delta, rho, 1.0, 0.5, {0, 1});
    auto direct = oracle::gae_v_direct({1.0, 1.0}, {1.0, 0.5}, 1.0, 0.5, {0, 1});
    REQUIRE(adv(0) == direct[0]);
    REQUIRE(adv(0) == 1.25);
    REQUIRE(adv(1) == 1.0);
  }

  SECTION("recursion equals the direct truncated-trace sum") {
    Rng rng(35);
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t n = 2 + rng.below(49);
      std::vector<double> delta(n), rho(n);
      for (double& v : delta) v = rng.uniform(-2.0, 2.0);
      for (double& v : rho) v = std::exp(rng.uniform(-1.5, 1.5));
      auto ends = random_ends(n, rng, 0.15);
      Vector adv = disc::gae_v(to_vector(delta), to_vector(rho), 0.99, 0.95, ends);
      auto direct = oracle::gae_v_direct(delta, rho, 0.99, 0.95, ends);
      for (std::size_t i = 0; i < n; ++i)
        REQUIRE(std::abs(adv(static_cast<Eigen::Index>(i)) - direct[i]) < 1e-10);
    }
  }

  SECTION("invariant to scaling any weight above one upward") {
    Rng rng(36);
    Vector delta(12), rho(12);
    for (int i = 0; i < 12; ++i) {
      delta(i) = rng.uniform(-1.0, 1.0);
      rho(i) = std::exp(rng.uniform(-0.5, 0.5));
    }
    auto ends = random_ends(12, rng);
    Vector base = disc::gae_v(delta, rho, 0.99, 0.95, ends);
    Vector scaled_rho = rho;
    for (int i = 0; i < 12; ++i)
      if (scaled_rho(i) >= 1.0) scaled_rho(i) *= 10.0;
    Vector scaled = disc::gae_v(delta, scaled_rho, 0.99, 0.95, ends);
    REQUIRE(base == scaled);
  }
}

TEST_CASE("vtrace targets") {
  SECTION("weight one gives the on-policy target") {
    Vector adv(2), values(2), rho = Vector::Ones(2);
    adv << 0.5, -0.25;
    values << 1.0, 2.0;
    Vector t = disc::vtrace_targets(adv, rho, values);
    REQUIRE(t(0) == 1.5);
    REQUIRE(t(1) == 1.75);
    REQUIRE(t == disc::gae_targets(adv, values));
  }

  SECTION("zero advantage gives the value itself") {
    Vector values(3);
    values << 1.0, -2.0, 0.5;
    Vector t = disc::vtrace_targets(Vector::Zero(3), Vector::Ones(3) * 7.0, values);
    REQUIRE(t == values);
  }

  SECTION("lambda = 1 identity with the direct multi-step trace") {
    Rng rng(37);
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t n = 2 + rng.below(30);
      std::vector<double> delta(n), rho(n), values(n);
      for (double& v : delta) v = rng.uniform(-2.0, 2.0);
      for (double& v : rho) v = std::exp(rng.uniform(-1.5, 1.5));
      for (double& v : values) v = rng.uniform(-3.0, 3.0);
      auto ends = random_ends(n, rng, 0.1);

      Vector adv = disc::gae_v(to_vector(delta), to_vector(rho), 0.99, 1.0, ends);
      Vector target = disc::vtrace_targets(adv, to_vector(rho), to_vector(values));
      auto direct = oracle::vtrace_direct(delta, rho, values, 0.99, 1.0, ends);
      for (std::size_t i = 0; i < n; ++i)
        REQUIRE(std::abs(target(static_cast<Eigen::Index>(i)) - direct[i]) < 1e-10);
    }
  }
}

TEST_CASE("full IS weights") {
  Rng rng(38);
  ParamStore policy = disc::make_policy_params(6, 3, rng);
  Batch batch = synthetic_batch(32, 3, rng, policy);

  SECTION("policy identical to behavior gives weights of exactly one") {
    auto w = disc::full_is_weights(batch, policy);
    REQUIRE(w.rho_dim.isOnes(0.0));
    REQUIRE(w.rho.isOnes(0.0));
    REQUIRE(w.log_rho_dim.isZero(0.0));
  }

  SECTION("full weight is the product of per-dimension weights") {
    // craft behavior densities so that rho_{t,d} is exactly (1.2, 0.9, 1.0)
    Batch b = synthetic_batch(1, 3, rng, policy);
    Matrix lp = disc::policy_log_prob_matrix(policy, b.states, b.actions);
    b.behavior_log_prob = lp;
    b.behavior_log_prob(0, 0) = lp(0, 0) - std::log(1.2);
    b.behavior_log_prob(0, 1) = lp(0, 1) - std::log(0.9);
    auto w = disc::full_is_weights(b, policy);
    REQUIRE(w.rho_dim(0, 0) == Catch::Approx(1.2).margin(1e-12));
    REQUIRE(w.rho_dim(0, 1) == Catch::Approx(0.9).margin(1e-12));
    REQUIRE(w.rho_dim(0, 2) == 1.0);
    REQUIRE(w.rho(0) == Catch::Approx(1.08).margin(1e-12));
  }

  SECTION("log of the full weight is the sum of per-dimension log ratios") {
    ParamStore perturbed = policy;
    Rng prng(39);
    for (auto& t : perturbed.tensors())
      for (double& v : t.data) v += prng.uniform(-0.05, 0.05);
    auto w = disc::full_is_weights(batch, perturbed);
    for (int i = 0; i < batch.length(); ++i) {
      REQUIRE(std::abs(std::log(w.rho(i)) - w.log_rho_dim.row(i).sum()) < 1e-12);
    }
  }

  SECTION("exponent clamp guards overflow") {
    Batch b = synthetic_batch(1, 3, rng, policy);
    b.behavior_log_prob.setConstant(-1000.0);
    auto w = disc::full_is_weights(b, policy);
    REQUIRE(std::isfinite(w.rho(0)));
    REQUIRE(w.rho(0) == std::exp(30.0));
    REQUIRE(w.rho_dim.allFinite());
  }
}
