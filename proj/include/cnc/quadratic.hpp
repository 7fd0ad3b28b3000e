#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "cnc/errors.hpp"
#include "cnc/linalg.hpp"

namespace cnc {

// One branch of a finite, zero-mean gradient-noise distribution.
struct NoiseBranch {
  Vec xi;
  double prob;
};

// Analytic quadratic testbed f(w) = w'Hw/2 + b'w with an exactly known
// Hessian. Stochastic gradients add a draw from the finite noise support,
// so every expectation over the noise can be enumerated.
class QuadraticSaddle {
 public:
  QuadraticSaddle(Mat hessian_matrix, Vec linear_term, std::vector<NoiseBranch> noise)
      : h_(std::move(hessian_matrix)), b_(std::move(linear_term)), noise_(std::move(noise)) {
    if (h_.rows() != h_.cols() || h_.rows() != b_.size()) throw DimensionMismatch();
    if (max_asymmetry(h_) > 1e-12) throw NotSymmetric("quadratic Hessian not symmetric");
    if (noise_.empty()) noise_.push_back({zeros(b_.size()), 1.0});
    double psum = 0.0;
    Vec mean = zeros(b_.size());
    for (const auto& br : noise_) {
      if (br.xi.size() != b_.size()) throw DimensionMismatch();
      if (br.prob < 0.0) throw ValidationError("negative noise probability");
      psum += br.prob;
      axpy(br.prob, br.xi, mean);
    }
    if (std::abs(psum - 1.0) > 1e-12) throw ValidationError("noise probabilities must sum to 1");
    for (double m : mean)
      if (std::abs(m) > 1e-12) throw ValidationError("noise distribution is not zero-mean");
  }

  std::size_t dim() const { return b_.size(); }
  std::size_t num_samples() const { return noise_.size(); }
  double sample_prob(std::size_t i) const {
    if (i >= noise_.size()) throw IndexOutOfRange();
    return noise_[i].prob;
  }
  const Mat& hessian_matrix() const { return h_; }
  const Vec& linear_term() const { return b_; }
  const std::vector<NoiseBranch>& noise() const { return noise_; }

  double value(const Vec& w) const {
    check_dim(w);
    return 0.5 * dot(w, matvec(h_, w)) + dot(b_, w);
  }

  Vec grad(const Vec& w) const {
    check_dim(w);
    Vec g = matvec(h_, w);
    axpy(1.0, b_, g);
    return g;
  }

  Vec sample_grad(const Vec& w, std::size_t index) const {
    if (index >= noise_.size()) throw IndexOutOfRange();
    Vec g = grad(w);
    axpy(1.0, noise_[index].xi, g);
    return g;
  }

  Mat hessian(const Vec& w) const {
    check_dim(w);
    return h_;
  }

 private:
  void check_dim(const Vec& w) const {
    if (w.size() != b_.size()) throw DimensionMismatch();
  }

  Mat h_;
  Vec b_;
  std::vector<NoiseBranch> noise_;
};

// Default noise model: {+sigma*u, -sigma*u} with probability 1/2 each, which
// makes E[(v'xi)^2] = sigma^2 (v'u)^2 available in closed form.
inline std::vector<NoiseBranch> two_point_noise(double sigma, const Vec& direction) {
  Vec plus = sigma * direction;
  Vec minus = -sigma * direction;
  return {{plus, 0.5}, {minus, 0.5}};
}

inline QuadraticSaddle make_diagonal_saddle(const Vec& diag, const Vec& b,
                                            std::vector<NoiseBranch> noise = {}) {
  return QuadraticSaddle(Mat::diagonal(diag), b, std::move(noise));
}

}  // namespace cnc
