#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "cnc/errors.hpp"

namespace cnc {

// Scalar loss phi with its first two derivatives and the constant c of the
// second/first derivative domination condition |phi''| <= c * |phi'|.
struct LossFn {
  std::function<double(double)> phi;
  std::function<double(double)> dphi;
  std::function<double(double)> d2phi;
  double c_const = 0.0;
};

namespace detail {
inline double sigmoid(double a) {
  if (a >= 0.0) {
    return 1.0 / (1.0 + std::exp(-a));
  }
  double e = std::exp(a);
  return e / (1.0 + e);
}
}  // namespace detail

// phi(a) = 1/(1+e^{-a}); phi' = s(1-s); phi'' = phi'(1-2s); |phi''/phi'| = |1-2s| <= 1.
inline LossFn loss_sigmoid() {
  LossFn f;
  f.phi = [](double a) { return detail::sigmoid(a); };
  f.dphi = [](double a) {
    double s = detail::sigmoid(a);
    return s * (1.0 - s);
  };
  f.d2phi = [](double a) {
    double s = detail::sigmoid(a);
    return s * (1.0 - s) * (1.0 - 2.0 * s);
  };
  f.c_const = 1.0;
  return f;
}

inline LossFn loss_linear() {
  LossFn f;
  f.phi = [](double a) { return a; };
  f.dphi = [](double) { return 1.0; };
  f.d2phi = [](double) { return 0.0; };
  f.c_const = 1e-12;  // phi'' is identically zero
  return f;
}

inline LossFn loss_quadratic() {
  LossFn f;
  f.phi = [](double a) { return a * a; };
  f.dphi = [](double a) { return 2.0 * a; };
  f.d2phi = [](double) { return 2.0; };
  f.c_const = 0.0;  // |phi''|/|phi'| = 1/|a| is unbounded near 0; no finite c
  return f;
}

// Tightest empirical c over the grid: max |phi''(a)| / |phi'(a)|.
// Points with |phi'| < 1e-14 are skipped (and counted via skipped_out).
inline double verify_loss_condition(const LossFn& loss, const std::vector<double>& grid,
                                    std::size_t* skipped_out = nullptr) {
  if (grid.empty()) throw AllPointsDegenerate("empty grid");
  double worst = 0.0;
  std::size_t used = 0, skipped = 0;
  for (double a : grid) {
    double d1 = loss.dphi(a);
    if (std::abs(d1) < 1e-14) {
      ++skipped;
      continue;
    }
    worst = std::max(worst, std::abs(loss.d2phi(a)) / std::abs(d1));
    ++used;
  }
  if (skipped_out) *skipped_out = skipped;
  if (used == 0) throw AllPointsDegenerate();
  return worst;
}

inline std::vector<double> make_grid(double lo, double hi, double step) {
  std::vector<double> g;
  for (double a = lo; a <= hi + 0.5 * step; a += step) g.push_back(a);
  return g;
}

}  // namespace cnc
