#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "cnc/errors.hpp"
#include "cnc/linalg.hpp"
#include "cnc/loss.hpp"
#include "cnc/rng.hpp"

namespace cnc {

// Finite-sample half-space learning objective
//   f(w) = (1/n) sum_i phi(w.z_i) + reg_weight * ||w||^2 / 2
// with the labels folded into the data vectors (z_i = -y_i x_i) and every
// z_i inside the unit ball.
class HalfspaceProblem {
 public:
  HalfspaceProblem(std::vector<Vec> data, LossFn loss, double reg_weight)
      : data_(std::move(data)), loss_(std::move(loss)), reg_weight_(reg_weight) {
    if (data_.empty()) throw EmptyDataset();
    dim_ = data_.front().size();
    if (dim_ == 0) throw DimensionMismatch("zero-dimensional data");
    for (const Vec& z : data_) {
      if (z.size() != dim_) throw DimensionMismatch();
      if (norm2(z) > 1.0 + 1e-12) throw ValidationError("halfspace sample outside unit ball");
    }
    if (reg_weight_ < 0.0) throw ValidationError("negative reg_weight");
  }

  std::size_t dim() const { return dim_; }
  std::size_t num_samples() const { return data_.size(); }
  double sample_prob(std::size_t) const { return 1.0 / static_cast<double>(data_.size()); }
  const std::vector<Vec>& data() const { return data_; }
  const LossFn& loss() const { return loss_; }
  double reg_weight() const { return reg_weight_; }

  double value(const Vec& w) const {
    check_dim(w);
    double s = 0.0;
    for (const Vec& z : data_) s += loss_.phi(dot(w, z));
    return s / static_cast<double>(data_.size()) + 0.5 * reg_weight_ * norm2_sq(w);
  }

  Vec grad(const Vec& w) const {
    check_dim(w);
    Vec g(dim_, 0.0);
    for (const Vec& z : data_) axpy(loss_.dphi(dot(w, z)), z, g);
    double inv_n = 1.0 / static_cast<double>(data_.size());
    for (auto& x : g) x *= inv_n;
    axpy(reg_weight_, w, g);
    return g;
  }

  // Per-sample gradient; each sample carries the full regularizer gradient
  // so the average over all samples equals grad(w) exactly.
  Vec sample_grad(const Vec& w, std::size_t index) const {
    check_dim(w);
    if (index >= data_.size()) throw IndexOutOfRange();
    const Vec& z = data_[index];
    Vec g(dim_, 0.0);
    axpy(loss_.dphi(dot(w, z)), z, g);
    axpy(reg_weight_, w, g);
    return g;
  }

  Mat hessian(const Vec& w) const {
    check_dim(w);
    Mat h(dim_, dim_);
    double inv_n = 1.0 / static_cast<double>(data_.size());
    for (const Vec& z : data_) add_outer(h, inv_n * loss_.d2phi(dot(w, z)), z);
    for (std::size_t i = 0; i < dim_; ++i) h(i, i) += reg_weight_;
    return h;
  }

  // Gradient Lipschitz bound over the unit-ball data:
  //   L <= max_grid |phi''| * max_i ||z_i||^2 + reg_weight.
  double lipschitz_grad_bound(const std::vector<double>& grid) const {
    double d2max = 0.0;
    for (double a : grid) d2max = std::max(d2max, std::abs(loss_.d2phi(a)));
    double zmax = 0.0;
    for (const Vec& z : data_) zmax = std::max(zmax, norm2_sq(z));
    return d2max * zmax + reg_weight_;
  }

  // Hessian Lipschitz bound: max |phi'''| (grid scan by central differences
  // of phi'') times max ||z||^3 <= 1, with a 10% safety margin. The
  // regularizer's Hessian is constant and contributes nothing.
  double hessian_lipschitz_bound(const std::vector<double>& grid) const {
    const double h = 1e-4;
    double d3max = 0.0;
    for (double a : grid)
      d3max = std::max(d3max, std::abs((loss_.d2phi(a + h) - loss_.d2phi(a - h)) / (2.0 * h)));
    return 1.1 * d3max;
  }

 private:
  void check_dim(const Vec& w) const {
    if (w.size() != dim_) throw DimensionMismatch();
  }

  std::vector<Vec> data_;
  LossFn loss_;
  double reg_weight_ = 0.0;
  std::size_t dim_ = 0;
};

// Two-Gaussian dataset: n/2 points from N(+mu, I) labeled +1 and n/2 from
// N(-mu, I) labeled -1, mu = separation * e1. Labels are folded into the
// data (z_i = -y_i x_i) and everything is rescaled by 1 / max_i ||x_i|| so
// all samples lie in the unit ball.
inline HalfspaceProblem make_gaussian_halfspace(std::size_t n, std::size_t d, double separation,
                                                std::uint64_t seed, LossFn loss,
                                                double reg_weight = 0.0) {
  if (n < 2 || (n % 2) != 0) throw InvalidCount("n must be even and >= 2");
  if (d < 1) throw InvalidCount("d must be >= 1");
  Rng rng(seed);
  std::vector<Vec> zs;
  zs.reserve(n);
  double max_norm = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double label = (i < n / 2) ? 1.0 : -1.0;
    Vec x = rng.normal_vec(d);
    x[0] += label * separation;
    max_norm = std::max(max_norm, norm2(x));
    Vec z = -label * x;
    zs.push_back(std::move(z));
  }
  if (max_norm > 0.0) {
    double inv = 1.0 / max_norm;
    for (Vec& z : zs)
      for (double& x : z) x *= inv;
  }
  return HalfspaceProblem(std::move(zs), std::move(loss), reg_weight);
}

}  // namespace cnc
