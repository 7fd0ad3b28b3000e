#pragma once

#include <cmath>
#include <cstdint>

#include "cnc/errors.hpp"

namespace cnc {

// Problem constants feeding the accuracy-driven parameter derivations.
// L, ell, rho are assumed >= 1 (the derivations rely on it), gamma > 0,
// delta in (0,1), f_gap >= 0.
struct SmoothnessConstants {
  double L = 1.0;      // gradient Lipschitz constant
  double ell = 1.0;    // per-sample gradient norm bound
  double rho = 1.0;    // Hessian Lipschitz constant
  double gamma = 1.0;  // correlated-negative-curvature constant
  double delta = 0.5;  // failure probability
  double f_gap = 1.0;  // f(w0) - f*

  void validate() const {
    if (!(L >= 1.0) || !(ell >= 1.0) || !(rho >= 1.0))
      throw ValidationError("L, ell, rho must be >= 1");
    if (!(gamma > 0.0)) throw ValidationError("gamma must be positive");
    if (!(delta > 0.0 && delta < 1.0)) throw ValidationError("delta must be in (0,1)");
    if (!(f_gap >= 0.0)) throw ValidationError("f_gap must be nonnegative");
  }
};

struct PgdParams {
  double eta = 0.0;      // gradient step size
  double r = 0.0;        // perturbation step size
  std::int64_t tr = 1;   // escape window (ceiling applied)
  double f_thres = 0.0;  // function-decrease threshold
  double g_thres = 0.0;  // squared-gradient threshold
  std::int64_t t_max = 1;
  double omega = 0.0;  // log factor
  // pre-ceiling values, kept for the scaling checks
  double tr_raw = 0.0;
  double t_raw = 0.0;

  // Run-safe validation. g_thres = 0 is accepted and disables perturbations;
  // derived bundles are strictly positive in every field.
  void validate() const {
    if (!(eta > 0.0 && r > 0.0)) throw ValidationError("step sizes must be positive");
    if (f_thres < 0.0 || g_thres < 0.0) throw ValidationError("thresholds must be nonnegative");
    if (tr < 1 || t_max < 0) throw ValidationError("tr must be >= 1 and t_max >= 0");
  }
};

struct SgdParams {
  double r = 0.0;       // large step size
  double eta = 0.0;     // small step size (eta < r)
  std::int64_t tr = 1;  // large-step period
  std::int64_t t_max = 1;
  // analysis-side quantities, exposed for the distance-bound and scaling checks
  double f_thres = 0.0;
  double omega = 0.0;
  double tr_raw = 0.0;
  double t_raw = 0.0;

  void validate() const {
    if (!(eta > 0.0 && r > 0.0)) throw ValidationError("step sizes must be positive");
    if (!(eta < r)) throw StepOrderViolation("requires eta < r");
    if (tr < 1 || t_max < 0) throw ValidationError("tr must be >= 1 and t_max >= 0");
  }
};

struct PgdConstants {
  double c1 = 1.0 / 64.0;
  double c2 = 1.0;
  double c3 = 1.0 / (64.0 * 64.0);
};

struct SgdConstants {
  double c1 = 1.0 / 96.0;
  double c2 = (1.0 / 96.0) / 48.0;
  double c3 = 1.0;
  double c4 = (1.0 / 96.0) / 72.0;
};

namespace detail {
// Derived horizons grow like eps^{-10}; saturate rather than overflow (the
// raw value stays available in tr_raw / t_raw for the scaling checks).
inline std::int64_t ceil_count(double x) {
  double c = std::ceil(x);
  if (!(c >= 1.0)) return 1;
  if (c > 9.0e18) return 9000000000000000000LL;
  return static_cast<std::int64_t>(c);
}
}  // namespace detail

//   eta     = 1/L
//   r       = c1 * delta * gamma * eps^{4/5} / (ell^3 L^2)
//   omega   = log(ell L / (gamma delta eps))
//   Tr      = ceil(c2 * L * omega / (sqrt(rho) * eps^{2/5}))
//   f_thres = c3 * delta * gamma^2 * eps^{8/5} / (ell^2 L)^2
//   g_thres = f_thres / Tr
//   T       = ceil(4 * f_gap / (eta * delta * g_thres))
inline PgdParams derive_pgd_params(const SmoothnessConstants& c, double eps,
                                   const PgdConstants& k = {}) {
  c.validate();
  if (!(eps > 0.0 && eps < 1.0)) throw InvalidEps();
  PgdParams p;
  p.eta = 1.0 / c.L;
  p.r = k.c1 * c.delta * c.gamma * std::pow(eps, 0.8) / (c.ell * c.ell * c.ell * c.L * c.L);
  p.omega = std::log(c.ell * c.L / (c.gamma * c.delta * eps));
  p.tr_raw = k.c2 * c.L * p.omega / (std::sqrt(c.rho) * std::pow(eps, 0.4));
  p.tr = detail::ceil_count(p.tr_raw);
  double el2L = c.ell * c.ell * c.L;
  p.f_thres = k.c3 * c.delta * c.gamma * c.gamma * std::pow(eps, 1.6) / (el2L * el2L);
  p.g_thres = p.f_thres / static_cast<double>(p.tr);
  p.t_raw = 4.0 * c.f_gap / (p.eta * c.delta * p.g_thres);
  p.t_max = detail::ceil_count(p.t_raw);
  p.validate();
  return p;
}

//   r       = c1 * delta * gamma * eps^2 / (ell^3 L)
//   eta     = c4 * gamma^2 * delta^2 * eps^5 / (ell^6 L^2)
//   f_thres = c2 * delta * gamma^2 * eps^4 / (ell^4 L)
//   omega   = c3 * log(ell L / (eta eps r))
//   Tr      = ceil(omega / (eta eps))
//   T       = ceil(2 * Tr * f_gap / (delta * f_thres))
inline SgdParams derive_sgd_params(const SmoothnessConstants& c, double eps,
                                   const SgdConstants& k = {}) {
  c.validate();
  if (!(eps > 0.0 && eps < 1.0)) throw InvalidEps();
  SgdParams p;
  double ell3 = c.ell * c.ell * c.ell;
  double ell6 = ell3 * ell3;
  p.r = k.c1 * c.delta * c.gamma * eps * eps / (ell3 * c.L);
  p.eta = k.c4 * c.gamma * c.gamma * c.delta * c.delta * std::pow(eps, 5.0) / (ell6 * c.L * c.L);
  if (!(p.eta < p.r)) throw StepOrderViolation("derived eta >= r");
  p.f_thres =
      k.c2 * c.delta * c.gamma * c.gamma * std::pow(eps, 4.0) / (ell3 * c.ell * c.L);
  p.omega = k.c3 * std::log(c.ell * c.L / (p.eta * eps * p.r));
  p.tr_raw = p.omega / (p.eta * eps);
  p.tr = detail::ceil_count(p.tr_raw);
  p.t_raw = 2.0 * static_cast<double>(p.tr) * c.f_gap / (c.delta * p.f_thres);
  p.t_max = detail::ceil_count(p.t_raw);
  p.validate();
  return p;
}

}  // namespace cnc
