#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "cnc/errors.hpp"
#include "cnc/halfspace.hpp"
#include "cnc/linalg.hpp"
#include "cnc/objective.hpp"
#include "cnc/params.hpp"
#include "cnc/quadratic.hpp"
#include "cnc/rng.hpp"
#include "cnc/spectrum.hpp"
#include "cnc/trajectory.hpp"

namespace cnc {

// ---------------------------------------------------------------------------
// Projected second moments of stochastic gradients along Hessian eigenvectors
// ---------------------------------------------------------------------------

struct CncDirection {
  std::size_t k = 0;          // eigendirection index (ascending eigenvalues)
  double lambda = 0.0;        // eigenvalue
  double mu_raw = 0.0;        // E[(grad_z' v_k)^2], raw gradients
  double mu_normalized = 0.0; // same with gradients scaled to unit norm
};

struct CncEstimate {
  std::vector<CncDirection> records;
  std::size_t m = 0;  // number of parameter points aggregated
  std::size_t n = 0;  // number of data samples
};

// Exact finite-sum estimate at a single parameter point. The raw column is
// what the variance lower bound is stated for; the normalized column only
// serves the isotropic-noise comparison.
template <StochasticObjective Obj>
CncEstimate estimate_cnc_at(const Obj& obj, const Vec& w) {
  Mat h = hessian_of(obj, w);
  SpectrumReport spec = sym_eig(h);
  const std::size_t n = obj.num_samples();
  const std::size_t d = spec.eigenvalues.size();

  std::vector<Vec> grads(n);
  std::vector<double> probs(n), norms(n);
  for (std::size_t j = 0; j < n; ++j) {
    grads[j] = obj.sample_grad(w, j);
    probs[j] = obj.sample_prob(j);
    norms[j] = norm2(grads[j]);
  }

  CncEstimate est;
  est.m = 1;
  est.n = n;
  est.records.resize(d);
  for (std::size_t k = 0; k < d; ++k) {
    CncDirection rec;
    rec.k = k;
    rec.lambda = spec.eigenvalues[k];
    const Vec& v = spec.eigenvectors[k];
    for (std::size_t j = 0; j < n; ++j) {
      double proj = dot(grads[j], v);
      rec.mu_raw += probs[j] * proj * proj;
      if (norms[j] > 1e-300) {
        double unit_proj = proj / norms[j];
        rec.mu_normalized += probs[j] * unit_proj * unit_proj;
      }
    }
    est.records[k] = rec;
  }
  return est;
}

template <StochasticObjective Obj>
std::vector<CncEstimate> estimate_cnc(const Obj& obj, const std::vector<Vec>& w_points) {
  std::vector<CncEstimate> out;
  out.reserve(w_points.size());
  for (const Vec& w : w_points) out.push_back(estimate_cnc_at(obj, w));
  return out;
}

// Average the per-point estimates by direction index (the eigenbasis is
// re-computed at every point; aggregation is over the index k).
inline CncEstimate aggregate_cnc(const std::vector<CncEstimate>& parts) {
  if (parts.empty()) throw DegenerateInput("no estimates to aggregate");
  CncEstimate agg;
  agg.m = parts.size();
  agg.n = parts.front().n;
  agg.records.resize(parts.front().records.size());
  for (std::size_t k = 0; k < agg.records.size(); ++k) {
    agg.records[k].k = k;
    for (const CncEstimate& p : parts) {
      if (p.records.size() != agg.records.size()) throw DimensionMismatch();
      agg.records[k].lambda += p.records[k].lambda;
      agg.records[k].mu_raw += p.records[k].mu_raw;
      agg.records[k].mu_normalized += p.records[k].mu_normalized;
    }
    double inv_m = 1.0 / static_cast<double>(agg.m);
    agg.records[k].lambda *= inv_m;
    agg.records[k].mu_raw *= inv_m;
    agg.records[k].mu_normalized *= inv_m;
  }
  return agg;
}

// Mean of (v' u)^2 for u uniform on the unit sphere (ball draws normalized),
// one entry per supplied direction.
inline std::vector<double> isotropic_baseline(std::size_t d, std::size_t n_draws,
                                              const std::vector<Vec>& directions,
                                              std::uint64_t seed) {
  if (d < 1) throw InvalidCount("d must be >= 1");
  Rng rng(seed);
  std::vector<double> moments(directions.size(), 0.0);
  for (std::size_t i = 0; i < n_draws; ++i) {
    Vec u = rng.unit_sphere(d);
    for (std::size_t k = 0; k < directions.size(); ++k) {
      double p = dot(directions[k], u);
      moments[k] += p * p;
    }
  }
  if (n_draws > 0)
    for (double& m : moments) m /= static_cast<double>(n_draws);
  return moments;
}

// ---------------------------------------------------------------------------
// Lower bound mu >= (lambda/c)^2 on every negative eigenpair (half-spaces,
// unregularized, unit-ball data)
// ---------------------------------------------------------------------------

struct CncBoundRow {
  std::size_t k = 0;
  double lambda = 0.0;
  double mu = 0.0;
  double bound = 0.0;
  bool holds = false;
};

struct CncBoundReport {
  std::vector<CncBoundRow> rows;  // one per negative eigenpair
  bool all_hold = true;
};

inline CncBoundReport verify_cnc_lower_bound(const HalfspaceProblem& p, const Vec& w) {
  if (p.reg_weight() != 0.0) throw RegularizerPresent();
  Mat h = p.hessian(w);
  SpectrumReport spec = sym_eig(h);
  const double c = p.loss().c_const;
  CncBoundReport report;
  const std::size_t n = p.num_samples();
  for (std::size_t k = 0; k < spec.eigenvalues.size(); ++k) {
    double lambda = spec.eigenvalues[k];
    if (lambda >= 0.0) continue;
    if (!(c > 0.0)) throw ValidationError("loss c_const must be positive");
    CncBoundRow row;
    row.k = k;
    row.lambda = lambda;
    row.bound = (lambda / c) * (lambda / c);
    for (std::size_t j = 0; j < n; ++j) {
      double proj = dot(p.sample_grad(w, j), spec.eigenvectors[k]);
      row.mu += proj * proj;
    }
    row.mu /= static_cast<double>(n);
    row.holds = row.mu >= row.bound - 1e-9;
    report.all_hold = report.all_hold && row.holds;
    report.rows.push_back(row);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Geometric series bounds
// ---------------------------------------------------------------------------

struct SeriesBounds {
  double lhs1 = 0.0, rhs1 = 0.0;  // sum (1+b)^{t-i}       vs 2 b^-1 (1+b)^t
  double lhs2 = 0.0, rhs2 = 0.0;  // sum (1+b)^{t-i} i     vs 2 b^-2 (1+b)^t
  double lhs3 = 0.0, rhs3 = 0.0;  // sum (1+b)^{t-i} i^2   vs 6 b^-3 (1+b)^t
  bool all_hold() const { return lhs1 <= rhs1 && lhs2 <= rhs2 && lhs3 <= rhs3; }
};

inline SeriesBounds series_bounds(double beta, std::int64_t t) {
  if (!(beta > 0.0 && beta < 1.0)) throw InvalidBeta();
  if (t < 1) throw ValidationError("t must be >= 1");
  SeriesBounds s;
  const double base = 1.0 + beta;
  double power = 1.0;  // (1+b)^{t-i}, starting at i = t
  for (std::int64_t i = t; i >= 1; --i) {
    double di = static_cast<double>(i);
    s.lhs1 += power;
    s.lhs2 += power * di;
    s.lhs3 += power * di * di;
    power *= base;
  }
  double growth = std::pow(base, static_cast<double>(t));
  s.rhs1 = 2.0 / beta * growth;
  s.rhs2 = 2.0 / (beta * beta) * growth;
  s.rhs3 = 6.0 / (beta * beta * beta) * growth;
  return s;
}

// ---------------------------------------------------------------------------
// Step expansion around a stale pivot
// ---------------------------------------------------------------------------

// Vectors of the expanded step
//   w_{t+1} - pivot = u_t + eta * (delta_t + d_t + zeta_t)
// relative to the stale quadratic model anchored at the pivot. delta_t
// carries the model-vs-true gradient difference with the sign that makes
// the identity exact.
struct StepExpansion {
  std::size_t t = 0;  // power-iteration exponent; state index pivot + t + 1
  Vec u;              // (I - eta H)^t (w_1 - pivot)
  Vec delta;          // sum_i (I - eta H)^{t-i} (g(w_i) - grad f(w_i))
  Vec d;              // -sum_i (I - eta H)^{t-i} grad f(pivot)
  Vec zeta;           // sum_i (I - eta H)^{t-i} zeta_i (zero for descent steps)
  bool zeta_recovered = false;  // per-step noise recovered from the residual
  double reconstruction_error = 0.0;  // relative, against the trajectory
};

struct TrajectoryDecomposition {
  Vec pivot;
  Vec pivot_grad;
  Mat hessian;
  double lambda = 0.0;  // |min(lambda_min(H), 0)|
  double kappa = 1.0;   // 1 + eta * lambda
  std::vector<StepExpansion> steps;

  double max_reconstruction_error() const {
    double m = 0.0;
    for (const auto& s : steps) m = std::max(m, s.reconstruction_error);
    return m;
  }
};

// Expands the trajectory after pivot_index against the stale Taylor model.
// The step leaving the pivot may be a perturbation (it only enters through
// w_1); every later step must be a plain small step, so the window ends at
// the next perturbation or at the first missing snapshot.
template <Objective Obj>
TrajectoryDecomposition decompose_trajectory(const Trajectory& traj, const Obj& obj,
                                             std::size_t pivot_index, double eta) {
  if (!traj.has_snapshot(pivot_index) || !traj.has_snapshot(pivot_index + 1))
    throw MissingSnapshots("pivot and its successor must be retained");

  TrajectoryDecomposition out;
  out.pivot = traj.snapshot(pivot_index);
  out.pivot_grad = obj.grad(out.pivot);
  out.hessian = hessian_of(obj, out.pivot);
  SpectrumReport spec = sym_eig(out.hessian);
  out.lambda = std::abs(std::min(spec.lambda_min, 0.0));
  out.kappa = 1.0 + eta * out.lambda;

  const std::size_t dim = out.pivot.size();
  Mat step_matrix = Mat::identity(dim) - eta * out.hessian;

  const bool stochastic = traj.method == Method::sgd || traj.method == Method::cnc_sgd;
  Vec u = traj.snapshot(pivot_index + 1) - out.pivot;  // w_1 - pivot
  Vec delta = zeros(dim);
  Vec dvec = zeros(dim);
  Vec zeta = zeros(dim);

  for (std::size_t t = 1;; ++t) {
    std::size_t from_state = pivot_index + t;    // w_t in the expansion indexing
    std::size_t to_state = pivot_index + t + 1;  // w_{t+1}
    if (!traj.has_snapshot(to_state) || to_state > traj.steps_completed()) break;
    if (traj.perturbed_from(from_state)) break;  // large step: expansion premise gone

    const Vec& wt = traj.snapshot(from_state);
    Vec grad_t = obj.grad(wt);
    Vec model_grad = out.pivot_grad + matvec(out.hessian, wt - out.pivot);

    u = matvec(step_matrix, u);
    delta = matvec(step_matrix, delta) + (model_grad - grad_t);
    dvec = matvec(step_matrix, dvec) - out.pivot_grad;
    zeta = matvec(step_matrix, zeta);

    StepExpansion s;
    s.t = t;
    const Vec& wt1 = traj.snapshot(to_state);
    Vec displacement = wt1 - out.pivot;
    auto it = traj.step_noise.find(from_state);
    if (it != traj.step_noise.end()) {
      axpy(1.0, it->second, zeta);
    } else if (stochastic) {
      // recover the per-step noise from the exact one-step identity
      Vec partial = u + eta * (delta + dvec + zeta);
      Vec noise = (1.0 / eta) * (displacement - partial);
      axpy(1.0, noise, zeta);
      s.zeta_recovered = true;
    }
    Vec reconstructed = u + eta * (delta + dvec + zeta);
    double err = norm2(displacement - reconstructed);
    s.reconstruction_error = err / std::max(norm2(displacement), 1e-300);
    s.u = u;
    s.delta = delta;
    s.d = dvec;
    s.zeta = zeta;
    out.steps.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Power-iteration bounds on diagonalizable quadratic saddles
// ---------------------------------------------------------------------------

struct PowerIterationRow {
  std::int64_t t = 0;
  double expected_u_sq = 0.0;   // enumerated E ||u_t||^2
  double lower_bound = 0.0;     // gamma r^2 kappa^{2t}
  double max_branch_norm = 0.0; // max over noise branches of ||u_t||
  double upper_bound = 0.0;     // kappa^t ell r
  bool holds = false;
};

struct PowerIterationReport {
  double gamma = 0.0;  // enumerated E[(v' xi)^2] at the pivot
  double ell = 0.0;    // max branch stochastic-gradient norm at the pivot
  double kappa = 1.0;
  Vec pivot;
  std::vector<PowerIterationRow> rows;
  bool all_hold = true;
};

// Exact enumeration of the first-step noise at the stationary point of q.
// Both the exponential lower bound on E||u_t||^2 and the deterministic
// per-branch upper bound are checked for t = 0..t_max.
inline PowerIterationReport check_power_iteration_bounds(const QuadraticSaddle& q, double r,
                                                         double eta, std::int64_t t_max) {
  if (!(r > 0.0 && eta > 0.0)) throw ValidationError("r and eta must be positive");
  const Mat& h = q.hessian_matrix();
  SpectrumReport spec = sym_eig(h);
  if (!(spec.lambda_min < 0.0)) throw NoNegativeCurvature();
  double abs_max = std::max(std::abs(spec.lambda_min), std::abs(spec.lambda_max()));
  if (eta * abs_max > 1.0) throw ValidationError("requires eta <= 1/L");

  PowerIterationReport rep;
  double lambda = -spec.lambda_min;
  rep.kappa = 1.0 + eta * lambda;

  // stationary point: H w = -b, solved in the eigenbasis
  const std::size_t d = q.dim();
  rep.pivot = zeros(d);
  for (std::size_t k = 0; k < d; ++k) {
    double coeff = -dot(spec.eigenvectors[k], q.linear_term());
    if (std::abs(spec.eigenvalues[k]) < 1e-12) {
      if (std::abs(coeff) > 1e-12) throw ValidationError("quadratic has no stationary point");
      continue;
    }
    axpy(coeff / spec.eigenvalues[k], spec.eigenvectors[k], rep.pivot);
  }

  const auto& branches = q.noise();
  std::vector<Vec> xi(branches.size());
  for (std::size_t b = 0; b < branches.size(); ++b) {
    xi[b] = q.sample_grad(rep.pivot, b);
    double proj = dot(spec.v_min, xi[b]);
    rep.gamma += branches[b].prob * proj * proj;
    rep.ell = std::max(rep.ell, norm2(xi[b]));
  }

  Mat step_matrix = Mat::identity(d) - eta * h;
  std::vector<Vec> u(branches.size());
  for (std::size_t b = 0; b < branches.size(); ++b) u[b] = -r * xi[b];

  double kappa_t = 1.0;  // kappa^t
  for (std::int64_t t = 0; t <= t_max; ++t) {
    PowerIterationRow row;
    row.t = t;
    for (std::size_t b = 0; b < branches.size(); ++b) {
      double n2 = norm2_sq(u[b]);
      row.expected_u_sq += branches[b].prob * n2;
      row.max_branch_norm = std::max(row.max_branch_norm, std::sqrt(n2));
    }
    row.lower_bound = rep.gamma * r * r * kappa_t * kappa_t;
    row.upper_bound = kappa_t * rep.ell * r;
    row.holds = row.expected_u_sq >= row.lower_bound * (1.0 - 1e-10) &&
                row.max_branch_norm <= row.upper_bound * (1.0 + 1e-10);
    rep.all_hold = rep.all_hold && row.holds;
    rep.rows.push_back(row);
    for (auto& ub : u) ub = matvec(step_matrix, ub);
    kappa_t *= rep.kappa;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Empirical distance bounds over seed ensembles
// ---------------------------------------------------------------------------

struct DistanceBoundRow {
  std::int64_t t = 0;
  double mean_dist_sq = 0.0;
  double bound = 0.0;
  bool holds = false;
};

struct DistanceBoundReport {
  bool skipped = false;  // window hypothesis failed; conditional check not run
  std::int64_t hypothesis_violation_t = -1;
  std::vector<DistanceBoundRow> rows;
  bool all_hold = true;
};

namespace detail {

template <class BoundFn>
DistanceBoundReport check_distance_bound_impl(const std::vector<Trajectory>& trajs,
                                              std::int64_t tr, double f_thres,
                                              std::size_t pivot_index, BoundFn bound) {
  if (trajs.size() < 30) throw InsufficientSeeds("need >= 30 seeds");
  const double inv_s = 1.0 / static_cast<double>(trajs.size());

  DistanceBoundReport rep;
  // hypothesis: mean decrease stays above -f_thres over the whole window
  for (std::int64_t t = 1; t <= tr; ++t) {
    double mean_drop = 0.0;
    for (const Trajectory& traj : trajs) {
      std::size_t idx = pivot_index + static_cast<std::size_t>(t);
      if (idx >= traj.f_values.size()) throw MissingSnapshots("window exceeds trajectory");
      mean_drop += traj.f_values[idx] - traj.f_values[pivot_index];
    }
    mean_drop *= inv_s;
    if (mean_drop < -f_thres) {
      rep.skipped = true;
      rep.hypothesis_violation_t = t;
      return rep;
    }
  }

  for (std::int64_t t = 0; t <= tr; ++t) {
    DistanceBoundRow row;
    row.t = t;
    for (const Trajectory& traj : trajs) {
      const Vec& pivot = traj.snapshot(pivot_index);
      const Vec& wt = traj.snapshot(pivot_index + static_cast<std::size_t>(t));
      row.mean_dist_sq += norm2_sq(wt - pivot);
    }
    row.mean_dist_sq *= inv_s;
    row.bound = bound(static_cast<double>(t));
    row.holds = row.mean_dist_sq <= row.bound * (1.0 + 1e-10) + 1e-15;
    rep.all_hold = rep.all_hold && row.holds;
    rep.rows.push_back(row);
  }
  return rep;
}

}  // namespace detail

// Window of descent steps after a perturbation of size r:
//   E ||w_t - pivot||^2 <= 2 (2 eta f_thres + eta L (ell r)^2) t + 2 (ell r)^2.
inline DistanceBoundReport check_distance_bound(const std::vector<Trajectory>& trajs,
                                                const PgdParams& p, const SmoothnessConstants& c,
                                                std::size_t pivot_index) {
  double lr2 = (c.ell * p.r) * (c.ell * p.r);
  auto bound = [&](double t) {
    return 2.0 * (2.0 * p.eta * p.f_thres + p.eta * c.L * lr2) * t + 2.0 * lr2;
  };
  return detail::check_distance_bound_impl(trajs, p.tr, p.f_thres, pivot_index, bound);
}

// Stochastic window: two extra variance terms from the small SGD steps.
inline DistanceBoundReport check_distance_bound(const std::vector<Trajectory>& trajs,
                                                const SgdParams& p, const SmoothnessConstants& c,
                                                std::size_t pivot_index) {
  double lr2 = (c.ell * p.r) * (c.ell * p.r);
  double le2 = (c.ell * p.eta) * (c.ell * p.eta);
  double tr_term = 2.0 * c.L * p.eta * p.eta * p.eta * c.ell * c.ell * static_cast<double>(p.tr);
  auto bound = [&](double t) {
    return (4.0 * p.f_thres * p.eta + 2.0 * c.L * p.eta * lr2 + 4.0 * le2 + tr_term) * t +
           2.0 * lr2;
  };
  return detail::check_distance_bound_impl(trajs, p.tr, p.f_thres, pivot_index, bound);
}

// ---------------------------------------------------------------------------
// Stale-Taylor gradient gap
// ---------------------------------------------------------------------------

struct TaylorGapRow {
  double gap = 0.0;    // || grad f(w) - g(w) ||
  double bound = 0.0;  // (rho/2) || w - pivot ||^2
  bool holds = false;
};

template <Objective Obj>
std::vector<TaylorGapRow> check_taylor_gap(const Obj& obj, const Vec& pivot,
                                           const std::vector<Vec>& probes, double rho) {
  Mat h = hessian_of(obj, pivot);
  Vec g0 = obj.grad(pivot);
  std::vector<TaylorGapRow> rows;
  rows.reserve(probes.size());
  for (const Vec& w : probes) {
    TaylorGapRow row;
    Vec model = g0 + matvec(h, w - pivot);
    row.gap = norm2(obj.grad(w) - model);
    row.bound = 0.5 * rho * norm2_sq(w - pivot);
    row.holds = row.gap <= row.bound + 1e-9 + 1e-6 * row.bound;
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Log-log slope fit and descent-inequality audit
// ---------------------------------------------------------------------------

inline double fit_dimension_slope(const std::vector<double>& dims,
                                  const std::vector<double>& moments) {
  if (dims.size() != moments.size() || dims.size() < 3) throw DegenerateInput();
  std::vector<double> x(dims.size()), y(dims.size());
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (!(dims[i] > 0.0) || !(moments[i] > 0.0)) throw DegenerateInput("need positive values");
    x[i] = std::log(dims[i]);
    y[i] = std::log(moments[i]);
  }
  double xbar = 0.0, ybar = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xbar += x[i];
    ybar += y[i];
  }
  xbar /= static_cast<double>(x.size());
  ybar /= static_cast<double>(x.size());
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - xbar) * (x[i] - xbar);
    sxy += (x[i] - xbar) * (y[i] - ybar);
  }
  if (!(sxx > 0.0)) throw DegenerateInput("dimensions are all equal");
  return sxy / sxx;
}

// Worst violation of f_{k+1} - f_k <= -(eta/2) ||grad f_k||^2 over the
// full-gradient steps of a trajectory (perturbation steps excluded). Only
// meaningful for methods whose non-perturbed steps are full-gradient steps
// of size eta (gd, iso_pgd away from perturbations, cnc_pgd).
inline double max_descent_violation(const Trajectory& traj, double eta) {
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k + 1 < traj.f_values.size(); ++k) {
    if (traj.perturbed_from(k)) continue;
    double g = traj.grad_norms[k];
    worst = std::max(worst, traj.f_values[k + 1] - traj.f_values[k] + 0.5 * eta * g * g);
  }
  return worst;
}

}  // namespace cnc
