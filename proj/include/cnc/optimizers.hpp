#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cnc/errors.hpp"
#include "cnc/linalg.hpp"
#include "cnc/objective.hpp"
#include "cnc/params.hpp"
#include "cnc/rng.hpp"
#include "cnc/trajectory.hpp"

namespace cnc {

struct RunOptions {
  std::size_t snapshot_every = 1;  // keep full iterates every k-th state
  bool log_noise = true;           // store grad noise of stochastic steps
  double divergence_norm = 1e12;
};

namespace detail {

inline void check_iterate(const Vec& w, const RunOptions& opts) {
  if (!all_finite(w) || norm2(w) > opts.divergence_norm) throw NonFiniteIterate();
}

template <Objective Obj>
void log_state(Trajectory& traj, const Obj& obj, const Vec& w, const Vec& g) {
  traj.f_values.push_back(obj.value(w));
  traj.grad_norms.push_back(norm2(g));
}

inline void maybe_snapshot(Trajectory& traj, std::size_t state, const Vec& w,
                           const RunOptions& opts, bool force = false) {
  if (force || opts.snapshot_every == 0 || state % opts.snapshot_every == 0)
    traj.snapshots.emplace(state, w);
}

// Index sampler over the objective's finite support. Uniform supports map
// straight onto the raw integer stream; weighted supports walk the CDF.
template <StochasticObjective Obj>
class IndexSampler {
 public:
  explicit IndexSampler(const Obj& obj) {
    std::size_t n = obj.num_samples();
    double p0 = obj.sample_prob(0);
    uniform_ = true;
    cdf_.resize(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double p = obj.sample_prob(i);
      if (std::abs(p - p0) > 1e-15) uniform_ = false;
      acc += p;
      cdf_[i] = acc;
    }
  }

  std::size_t draw(Rng& rng) const {
    if (uniform_) return rng.index_below(cdf_.size());
    double u = rng.uniform01();
    for (std::size_t i = 0; i < cdf_.size(); ++i)
      if (u < cdf_[i]) return i;
    return cdf_.size() - 1;
  }

 private:
  bool uniform_ = true;
  std::vector<double> cdf_;
};

}  // namespace detail

// Plain gradient descent: w <- w - eta * grad f(w).
template <Objective Obj>
Trajectory run_gd(const Obj& obj, const Vec& w0, double eta, std::int64_t t_max,
                  const RunOptions& opts = {}) {
  if (!(eta > 0.0)) throw ValidationError("eta must be positive");
  Trajectory traj;
  traj.method = Method::gd;
  traj.params_echo = "eta=" + fmt_double(eta);
  Vec w = w0;
  detail::check_iterate(w, opts);
  detail::maybe_snapshot(traj, 0, w, opts, true);
  for (std::int64_t t = 1; t <= t_max; ++t) {
    Vec g = obj.grad(w);
    detail::log_state(traj, obj, w, g);
    axpy(-eta, g, w);
    detail::check_iterate(w, opts);
    detail::maybe_snapshot(traj, static_cast<std::size_t>(t), w, opts, t == t_max);
  }
  detail::log_state(traj, obj, w, obj.grad(w));
  return traj;
}

// SGD with batch size 1: w <- w - eta * grad f_z(w), z drawn i.i.d. per step.
template <StochasticObjective Obj>
Trajectory run_sgd(const Obj& obj, const Vec& w0, double eta, std::int64_t t_max,
                   std::uint64_t seed, const RunOptions& opts = {}) {
  if (!(eta > 0.0)) throw ValidationError("eta must be positive");
  Trajectory traj;
  traj.method = Method::sgd;
  traj.seed = seed;
  traj.params_echo = "eta=" + fmt_double(eta);
  Rng rng(seed);
  detail::IndexSampler sampler(obj);
  Vec w = w0;
  detail::check_iterate(w, opts);
  detail::maybe_snapshot(traj, 0, w, opts, true);
  for (std::int64_t t = 1; t <= t_max; ++t) {
    Vec g = obj.grad(w);
    detail::log_state(traj, obj, w, g);
    Vec gz = obj.sample_grad(w, sampler.draw(rng));
    if (opts.log_noise) traj.step_noise.emplace(static_cast<std::size_t>(t - 1), g - gz);
    axpy(-eta, gz, w);
    detail::check_iterate(w, opts);
    detail::maybe_snapshot(traj, static_cast<std::size_t>(t), w, opts, t == t_max);
  }
  detail::log_state(traj, obj, w, obj.grad(w));
  return traj;
}

// Gradient descent with isotropic ball perturbations: when the squared
// gradient norm falls below g_thres and at least tr steps passed since the
// last perturbation, the update gains an extra r * zeta with zeta uniform in
// the unit ball. g_thres = 0 disables perturbations entirely.
template <Objective Obj>
Trajectory run_iso_pgd(const Obj& obj, const Vec& w0, double eta, double r_radius, double g_thres,
                       std::int64_t tr, std::int64_t t_max, std::uint64_t seed,
                       const RunOptions& opts = {}) {
  if (!(eta > 0.0) || r_radius < 0.0 || g_thres < 0.0 || tr < 1)
    throw ValidationError("invalid iso-pgd parameters");
  Trajectory traj;
  traj.method = Method::iso_pgd;
  traj.seed = seed;
  traj.params_echo = "eta=" + fmt_double(eta) + " r=" + fmt_double(r_radius) +
                     " g_thres=" + fmt_double(g_thres) + " tr=" + std::to_string(tr);
  Rng rng(seed);
  Vec w = w0;
  detail::check_iterate(w, opts);
  detail::maybe_snapshot(traj, 0, w, opts, true);
  std::int64_t t_noise = -tr - 1;
  for (std::int64_t t = 1; t <= t_max; ++t) {
    Vec g = obj.grad(w);
    detail::log_state(traj, obj, w, g);
    axpy(-eta, g, w);
    if (g_thres > 0.0 && norm2_sq(g) <= g_thres && t - t_noise >= tr) {
      Vec zeta = rng.unit_ball(w.size());
      axpy(r_radius, zeta, w);
      t_noise = t;
      traj.perturbation_steps.push_back(t);
    }
    detail::check_iterate(w, opts);
    detail::maybe_snapshot(traj, static_cast<std::size_t>(t), w, opts, t == t_max);
  }
  detail::log_state(traj, obj, w, obj.grad(w));
  return traj;
}

// Uniformly picked iterate. Candidate set: the recorded large-step pivots
// for cnc_sgd, every retained non-final iterate otherwise.
struct PickedIterate {
  std::size_t state_index = 0;
  Vec w;
};

inline PickedIterate pick_uniform_iterate(const Trajectory& traj, std::uint64_t seed) {
  std::vector<std::size_t> candidates;
  if (traj.method == Method::cnc_sgd) {
    for (std::int64_t t : traj.perturbation_steps) {
      std::size_t state = static_cast<std::size_t>(t - 1);
      if (traj.has_snapshot(state)) candidates.push_back(state);
    }
  } else {
    std::size_t completed = traj.steps_completed();
    for (const auto& [state, w] : traj.snapshots)
      if (state < completed || (completed == 0 && state == 0)) candidates.push_back(state);
  }
  if (candidates.empty()) throw EmptyCandidateSet();
  Rng rng(seed);
  std::size_t pick = candidates[rng.index_below(candidates.size())];
  return {pick, traj.snapshot(pick)};
}

// returned is empty when the run recorded no candidate (cnc_sgd with
// t_max < tr never pivots).
template <class P>
struct CncRunResult {
  Trajectory trajectory;
  std::optional<PickedIterate> returned;
  P params;
};

// GD perturbed by a single stochastic-gradient step: full-gradient steps of
// size eta; when ||grad f||^2 <= g_thres and at least Tr steps passed since
// the last perturbation, one stochastic gradient step of size r is taken.
template <StochasticObjective Obj>
CncRunResult<PgdParams> run_cnc_pgd(const Obj& obj, const Vec& w0, const PgdParams& params,
                                    std::uint64_t seed, const RunOptions& opts = {}) {
  params.validate();
  Trajectory traj;
  traj.method = Method::cnc_pgd;
  traj.seed = seed;
  traj.params_echo = "eta=" + fmt_double(params.eta) + " r=" + fmt_double(params.r) +
                     " g_thres=" + fmt_double(params.g_thres) + " tr=" + std::to_string(params.tr);
  Rng rng(seed);
  detail::IndexSampler sampler(obj);
  Vec w = w0;
  detail::check_iterate(w, opts);
  detail::maybe_snapshot(traj, 0, w, opts, true);
  std::int64_t t_noise = -params.tr - 1;
  for (std::int64_t t = 1; t <= params.t_max; ++t) {
    Vec g = obj.grad(w);
    detail::log_state(traj, obj, w, g);
    if (params.g_thres > 0.0 && norm2_sq(g) <= params.g_thres && t - t_noise >= params.tr) {
      detail::maybe_snapshot(traj, static_cast<std::size_t>(t - 1), w, opts, true);  // pivot
      Vec gz = obj.sample_grad(w, sampler.draw(rng));
      if (opts.log_noise) traj.step_noise.emplace(static_cast<std::size_t>(t - 1), g - gz);
      axpy(-params.r, gz, w);
      t_noise = t;
      traj.perturbation_steps.push_back(t);
    } else {
      axpy(-params.eta, g, w);
    }
    detail::check_iterate(w, opts);
    detail::maybe_snapshot(traj, static_cast<std::size_t>(t), w, opts, t == params.t_max);
  }
  detail::log_state(traj, obj, w, obj.grad(w));
  PickedIterate picked = pick_uniform_iterate(traj, derive_seed(seed, 0x9c7u));
  return {std::move(traj), std::move(picked), params};
}

// SGD with a periodically enlarged step size: every Tr-th step uses the
// large step r (recording the pivot), all others the small step eta.
template <StochasticObjective Obj>
CncRunResult<SgdParams> run_cnc_sgd(const Obj& obj, const Vec& w0, const SgdParams& params,
                                    std::uint64_t seed, const RunOptions& opts = {}) {
  params.validate();
  Trajectory traj;
  traj.method = Method::cnc_sgd;
  traj.seed = seed;
  traj.params_echo = "eta=" + fmt_double(params.eta) + " r=" + fmt_double(params.r) +
                     " tr=" + std::to_string(params.tr);
  Rng rng(seed);
  detail::IndexSampler sampler(obj);
  Vec w = w0;
  detail::check_iterate(w, opts);
  detail::maybe_snapshot(traj, 0, w, opts, true);
  for (std::int64_t t = 1; t <= params.t_max; ++t) {
    Vec g = obj.grad(w);
    detail::log_state(traj, obj, w, g);
    bool large = (t % params.tr) == 0;
    if (large) {
      detail::maybe_snapshot(traj, static_cast<std::size_t>(t - 1), w, opts, true);  // pivot
      traj.perturbation_steps.push_back(t);
    }
    Vec gz = obj.sample_grad(w, sampler.draw(rng));
    if (opts.log_noise) traj.step_noise.emplace(static_cast<std::size_t>(t - 1), g - gz);
    axpy(large ? -params.r : -params.eta, gz, w);
    detail::check_iterate(w, opts);
    detail::maybe_snapshot(traj, static_cast<std::size_t>(t), w, opts, t == params.t_max);
  }
  detail::log_state(traj, obj, w, obj.grad(w));
  std::optional<PickedIterate> picked;
  if (!traj.perturbation_steps.empty())
    picked = pick_uniform_iterate(traj, derive_seed(seed, 0x9c7u));
  return {std::move(traj), std::move(picked), params};
}

}  // namespace cnc
