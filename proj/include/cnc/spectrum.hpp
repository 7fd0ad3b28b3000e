#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "cnc/errors.hpp"
#include "cnc/linalg.hpp"
#include "cnc/objective.hpp"

namespace cnc {

// Full dense eigendecomposition of a symmetric matrix. Eigenvalues ascending,
// eigenvectors orthonormal and column-aligned with the eigenvalues.
struct SpectrumReport {
  Vec eigenvalues;
  std::vector<Vec> eigenvectors;
  double lambda_min = 0.0;
  Vec v_min;

  double lambda_max() const { return eigenvalues.empty() ? 0.0 : eigenvalues.back(); }
};

namespace detail {

inline double offdiag_norm(const Mat& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (i != j) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}

}  // namespace detail

// Cyclic Jacobi eigendecomposition. Deterministic: fixed sweep order
// (row-major upper triangle), convergence when the off-diagonal Frobenius
// norm falls below 1e-12 * ||A||_F, hard cap of 100 sweeps.
inline SpectrumReport sym_eig(const Mat& a) {
  if (a.rows() != a.cols()) throw DimensionMismatch("sym_eig needs a square matrix");
  const std::size_t d = a.rows();
  if (d == 0) throw DimensionMismatch("empty matrix");
  if (d > 512) throw ValidationError("sym_eig supports d <= 512");
  if (max_asymmetry(a) > 1e-10) throw NotSymmetric();

  Mat b = symmetrize(a);
  Mat v = Mat::identity(d);
  const double target = 1e-12 * frobenius_norm(b);

  bool converged = detail::offdiag_norm(b) <= target;
  for (int sweep = 0; sweep < 100 && !converged; ++sweep) {
    for (std::size_t p = 0; p + 1 < d; ++p) {
      for (std::size_t q = p + 1; q < d; ++q) {
        double apq = b(p, q);
        if (apq == 0.0) continue;
        double theta = (b(q, q) - b(p, p)) / (2.0 * apq);
        double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        // B <- J' B J applied to rows/cols p and q
        for (std::size_t k = 0; k < d; ++k) {
          double bkp = b(k, p), bkq = b(k, q);
          b(k, p) = c * bkp - s * bkq;
          b(k, q) = s * bkp + c * bkq;
        }
        for (std::size_t k = 0; k < d; ++k) {
          double bpk = b(p, k), bqk = b(q, k);
          b(p, k) = c * bpk - s * bqk;
          b(q, k) = s * bpk + c * bqk;
        }
        for (std::size_t k = 0; k < d; ++k) {
          double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
    converged = detail::offdiag_norm(b) <= target;
  }
  if (!converged) throw NotConverged("Jacobi sweep cap exceeded");

  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return b(i, i) < b(j, j); });

  SpectrumReport rep;
  rep.eigenvalues.resize(d);
  rep.eigenvectors.resize(d);
  for (std::size_t k = 0; k < d; ++k) {
    rep.eigenvalues[k] = b(order[k], order[k]);
    Vec col = v.col(order[k]);
    // sign convention: first component above 1e-12 made positive
    for (double x : col) {
      if (std::abs(x) > 1e-12) {
        if (x < 0.0)
          for (double& y : col) y = -y;
        break;
      }
    }
    rep.eigenvectors[k] = std::move(col);
  }
  rep.lambda_min = rep.eigenvalues.front();
  rep.v_min = rep.eigenvectors.front();
  return rep;
}

// Central-difference Hessian of an objective's gradient, symmetrized.
template <Objective Obj>
Mat hessian_fd(const Obj& obj, const Vec& w, double h) {
  if (!(h > 0.0)) throw ValidationError("finite-difference step must be positive");
  const std::size_t d = w.size();
  Mat b(d, d);
  for (std::size_t j = 0; j < d; ++j) {
    Vec wp = w, wm = w;
    wp[j] += h;
    wm[j] -= h;
    Vec gp = obj.grad(wp);
    Vec gm = obj.grad(wm);
    for (std::size_t i = 0; i < d; ++i) b(i, j) = (gp[i] - gm[i]) / (2.0 * h);
  }
  Mat sym = symmetrize(b);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      if (!std::isfinite(sym(i, j))) throw NonFiniteResult("non-finite Hessian entry");
  return sym;
}

inline double default_fd_step(const Vec& w) { return 1e-5 * std::max(1.0, norm2(w)); }

template <Objective Obj>
Mat hessian_fd(const Obj& obj, const Vec& w) {
  return hessian_fd(obj, w, default_fd_step(w));
}

// Analytic Hessian when the objective has one, finite differences otherwise.
template <Objective Obj>
Mat hessian_of(const Obj& obj, const Vec& w) {
  if constexpr (HasHessian<Obj>) {
    return obj.hessian(w);
  } else {
    return hessian_fd(obj, w);
  }
}

struct StationarityVerdict {
  bool is_stationary = false;
  double grad_norm = 0.0;
  double lambda_min = 0.0;
};

// ||grad f(w)|| <= eps_g  and  lambda_min(hess f(w)) >= -eps_h.
template <Objective Obj>
StationarityVerdict check_second_order_stationary(const Obj& obj, const Vec& w, double eps_g,
                                                  double eps_h) {
  if (!(eps_g > 0.0) || !(eps_h > 0.0)) throw ValidationError("thresholds must be positive");
  StationarityVerdict v;
  v.grad_norm = norm2(obj.grad(w));
  v.lambda_min = sym_eig(hessian_of(obj, w)).lambda_min;
  v.is_stationary = v.grad_norm <= eps_g && v.lambda_min >= -eps_h;
  return v;
}

}  // namespace cnc
