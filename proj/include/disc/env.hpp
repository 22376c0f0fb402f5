#pragma once

#include "disc/rng.hpp"
#include "disc/tensor.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace disc {

// Synthetic continuous-control tasks with a configurable action dimension.
// point_mass: damped point mass per coordinate, quadratic state/action cost.
// coupled_chain: identical dynamics, but the clipped action is passed through
// a fixed seeded orthogonal mixing matrix before it reaches the velocities,
// so per-dimension credit assignment is no longer diagonal.

enum class EnvFamily { kPointMass, kCoupledChain };

struct EnvSpec {
  EnvFamily family = EnvFamily::kPointMass;
  int action_dim = 4;
  int episode_cap = 200;
  double noise_scale = 0.01;
  std::uint64_t seed = 0;
};

struct EnvState {
  Vector position;
  Vector velocity;
  int steps = 0;
};

class Env {
 public:
  // stream_seed drives reset draws and dynamics noise; the mixing matrix of
  // coupled_chain depends only on spec.seed so that all runs over one spec
  // share identical dynamics
  Env(const EnvSpec& spec, std::uint64_t stream_seed)
      : spec_(spec), rng_(stream_seed) {
    if (spec_.action_dim < 1) throw std::invalid_argument("env: action_dim must be >= 1");
    if (spec_.episode_cap < 1) throw std::invalid_argument("env: episode_cap must be >= 1");
    if (spec_.noise_scale < 0) throw std::invalid_argument("env: negative noise scale");
    state_.position = Vector::Zero(spec_.action_dim);
    state_.velocity = Vector::Zero(spec_.action_dim);
    if (spec_.family == EnvFamily::kCoupledChain) mixing_ = make_mixing(spec_);
  }

  int action_dim() const { return spec_.action_dim; }
  int obs_dim() const { return 2 * spec_.action_dim; }
  const EnvSpec& spec() const { return spec_; }

  Vector reset() {
    for (int i = 0; i < spec_.action_dim; ++i) state_.position(i) = rng_.uniform(-1.0, 1.0);
    state_.velocity.setZero();
    state_.steps = 0;
    done_ = false;
    return observation();
  }

  struct StepResult {
    Vector observation;
    double reward;
    bool done;
  };

  StepResult step(const Vector& action) {
    if (done_) throw std::logic_error("env: step after episode end");
    if (action.size() != spec_.action_dim)
      throw std::invalid_argument("env: action dimension mismatch");

    Vector a = action.cwiseMax(-1.0).cwiseMin(1.0);
    Vector drive = spec_.family == EnvFamily::kCoupledChain ? Vector(mixing_ * a) : a;
    state_.velocity = 0.9 * state_.velocity + 0.1 * drive;

    Vector noise(spec_.action_dim);
    for (int i = 0; i < spec_.action_dim; ++i) noise(i) = rng_.normal();
    state_.position += 0.1 * state_.velocity + 0.1 * spec_.noise_scale * noise;

    state_.steps += 1;
    done_ = state_.steps >= spec_.episode_cap;
    const double reward = -state_.position.squaredNorm() - 0.1 * a.squaredNorm();
    return {observation(), reward, done_};
  }

  bool done() const { return done_; }
  const EnvState& state() const { return state_; }

  // test hook: place the mass at a chosen state mid-episode
  void set_state(const Vector& position, const Vector& velocity) {
    state_.position = position;
    state_.velocity = velocity;
    done_ = false;
  }

  static Matrix make_mixing(const EnvSpec& spec) {
    Rng rng(derive_seed(spec.seed, {0x6d6978ull}));  // "mix"
    const int d = spec.action_dim;
    Matrix g(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) g(i, j) = rng.normal();
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ() * Matrix::Identity(d, d);
    Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < d; ++j)
      if (r(j, j) < 0) q.col(j) = -q.col(j);
    return q;
  }

 private:
  Vector observation() const {
    Vector obs(2 * spec_.action_dim);
    obs << state_.position, state_.velocity;
    return obs;
  }

  EnvSpec spec_;
  Rng rng_;
  EnvState state_;
  Matrix mixing_;
  bool done_ = true;
};

inline EnvFamily env_family_from_string(const std::string& s) {
  if (s == "point_mass") return EnvFamily::kPointMass;
  if (s == "coupled_chain") return EnvFamily::kCoupledChain;
  throw std::invalid_argument("unknown environment family: " + s);
}

inline std::string to_string(EnvFamily f) {
  return f == EnvFamily::kPointMass ? "point_mass" : "coupled_chain";
}

}  // namespace disc
