#pragma once

#include "disc/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace disc {

// Running mean/variance filter over observations (Welford). Updated only on
// freshly collected on-policy states; replayed batches keep the normalized
// observations computed at their collection time, so stored log densities
// stay consistent with what the behavior policy actually saw.
class ObsFilter {
 public:
  explicit ObsFilter(Eigen::Index dim)
      : mean_(Vector::Zero(dim)), m2_(Vector::Zero(dim)), count_(0.0) {}

  void update(const Vector& x) {
    count_ += 1.0;
    Vector delta = x - mean_;
    mean_ += delta / count_;
    m2_ += delta.cwiseProduct(x - mean_);
  }

  Vector normalize(const Vector& x) const {
    Vector var = count_ > 0.0 ? Vector(m2_ / count_) : Vector(Vector::Ones(mean_.size()));
    Vector z = (x - mean_).cwiseQuotient((var.array() + 1e-8).sqrt().matrix());
    return z.cwiseMax(-10.0).cwiseMin(10.0);
  }

  Eigen::Index dim() const { return mean_.size(); }
  double count() const { return count_; }
  const Vector& mean() const { return mean_; }
  const Vector& m2() const { return m2_; }
  Vector variance() const {
    return count_ > 0.0 ? Vector(m2_ / count_) : Vector(Vector::Ones(mean_.size()));
  }

  void set_state(Vector mean, Vector m2, double count) {
    mean_ = std::move(mean);
    m2_ = std::move(m2);
    count_ = count;
  }

 private:
  Vector mean_;
  Vector m2_;
  double count_;
};

}  // namespace disc
