#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "cnc/analysis.hpp"
#include "cnc/config.hpp"
#include "cnc/csv.hpp"
#include "cnc/halfspace.hpp"
#include "cnc/harness.hpp"
#include "cnc/optimizers.hpp"
#include "cnc/params.hpp"
#include "cnc/quadratic.hpp"
#include "cnc/rng.hpp"
#include "cnc/spectrum.hpp"

namespace cnc {

struct VerifyResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

namespace verify {

namespace detail {

inline double median_or_inf(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::infinity();
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace detail

// Saddle-escape ordering on the two-Gaussian half-space setup: the median
// escape iteration of GD must exceed the median of every stochastic method,
// and each stochastic method must escape on at least 8 of 10 seeds.
inline VerifyResult escape_ordering(const std::string& out_dir) {
  detail::Timer timer;
  VerifyResult res{1, "saddle escape ordering (halfspace preset)", false, "", 0.0};
  // spectra are not needed for the ordering; keep the run fast
  ExperimentConfig cfg =
      parse_config(preset_halfspaces_appendix_e() + "eig_log_every = 0\n");
  ExperimentResult ex = run_experiment(cfg, out_dir);

  std::vector<double> gd;
  std::map<std::string, std::vector<double>> stochastic;
  std::map<std::string, int> escapes;
  std::map<std::string, int> cells;
  for (const SummaryRow& row : ex.summary) {
    double esc = row.escape_iteration ? static_cast<double>(*row.escape_iteration)
                                      : std::numeric_limits<double>::infinity();
    cells[row.method] += 1;
    if (row.escape_iteration) escapes[row.method] += 1;
    if (row.method == "gd")
      gd.push_back(esc);
    else
      stochastic[row.method].push_back(esc);
  }

  double gd_median = detail::median_or_inf(gd);
  bool ordering = true, coverage = true;
  std::ostringstream detail_ss;
  detail_ss << "median gd=" << gd_median;
  for (const auto& [name, vals] : stochastic) {
    double med = detail::median_or_inf(vals);
    detail_ss << " " << name << "=" << med << " (" << escapes[name] << "/" << cells[name] << ")";
    ordering = ordering && gd_median > med;
    coverage = coverage && escapes[name] >= 8;
  }
  res.seconds = timer.seconds();
  res.pass = ordering && coverage && res.seconds < 60.0;
  res.detail = detail_ss.str();
  return res;
}

// mu >= (lambda/c)^2 on every negative eigenpair of 20 random unregularized
// sigmoid half-space instances, exact finite-sum expectations.
inline VerifyResult cnc_lower_bound() {
  detail::Timer timer;
  VerifyResult res{2, "stochastic-gradient variance lower bound (half-spaces)", false, "", 0.0};
  std::size_t instances = 0, pairs = 0, failures = 0;
  for (std::uint64_t i = 0; i < 20; ++i) {
    HalfspaceProblem p =
        make_gaussian_halfspace(50, 6, 0.8, derive_seed(1234, i), loss_sigmoid(), 0.0);
    Rng rng(derive_seed(4321, i));
    Vec w = 3.0 * rng.unit_ball(6);
    CncBoundReport rep = verify_cnc_lower_bound(p, w);
    ++instances;
    pairs += rep.rows.size();
    for (const CncBoundRow& row : rep.rows)
      if (!row.holds) ++failures;
  }
  res.seconds = timer.seconds();
  res.pass = failures == 0 && pairs > 0 && res.seconds < 10.0;
  res.detail = std::to_string(instances) + " instances, " + std::to_string(pairs) +
               " negative eigenpairs, " + std::to_string(failures) + " failures";
  return res;
}

// Isotropic moments behave like 1/d: every mean within 5% relative, log-log
// slope within [-1.1, -0.9].
inline VerifyResult isotropic_decay() {
  detail::Timer timer;
  VerifyResult res{3, "isotropic noise variance decays like 1/d", false, "", 0.0};
  std::vector<std::size_t> dims = {8, 16, 32, 64, 128, 256};
  std::vector<double> dvals, moments;
  bool within = true;
  for (std::size_t d : dims) {
    std::vector<Vec> dirs = {unit_vector(d, 0)};
    double m = isotropic_baseline(d, 100000, dirs, derive_seed(99, d))[0];
    dvals.push_back(static_cast<double>(d));
    moments.push_back(m);
    double expected = 1.0 / static_cast<double>(d);
    if (std::abs(m - expected) > 0.05 * expected) within = false;
  }
  double slope = fit_dimension_slope(dvals, moments);
  res.seconds = timer.seconds();
  res.pass = within && slope >= -1.1 && slope <= -0.9 && res.seconds < 30.0;
  res.detail = "slope=" + fmt_double(slope) + (within ? ", all moments within 5%" : ", moment outside 5%");
  return res;
}

// f_{t+1} - f_t <= -(eta/2)||grad f_t||^2 + 1e-10 on every full-gradient step
// of a family of GD runs with eta <= 1/L.
inline VerifyResult descent_inequality() {
  detail::Timer timer;
  VerifyResult res{4, "per-step descent inequality on GD trajectories", false, "", 0.0};
  double worst = -std::numeric_limits<double>::infinity();
  std::size_t steps = 0;

  {  // convex and saddle quadratics: L = max |eig|
    QuadraticSaddle convex = make_diagonal_saddle({2.0, 1.0}, {0.3, -0.2});
    Trajectory t1 = run_gd(convex, {1.0, -2.0}, 0.5, 200);
    worst = std::max(worst, max_descent_violation(t1, 0.5));
    steps += t1.steps_completed();

    QuadraticSaddle saddle = make_diagonal_saddle({1.0, -1.0}, zeros(2));
    Trajectory t2 = run_gd(saddle, {0.7, 1e-3}, 0.25, 60);
    worst = std::max(worst, max_descent_violation(t2, 0.25));
    steps += t2.steps_completed();
  }
  {  // half-space instances: L bounded via max |phi''| * max ||z||^2 + reg
    std::vector<double> grid = make_grid(-30.0, 30.0, 0.01);
    for (std::uint64_t s = 0; s < 3; ++s) {
      HalfspaceProblem p =
          make_gaussian_halfspace(40, 4, 0.75, derive_seed(7, s), loss_sigmoid(), 0.0);
      double L = p.lipschitz_grad_bound(grid);
      double eta = 1.0 / L;
      Rng rng(derive_seed(17, s));
      Trajectory t = run_gd(p, 2.0 * rng.unit_ball(4), eta, 300);
      worst = std::max(worst, max_descent_violation(t, eta));
      steps += t.steps_completed();
    }
  }
  res.pass = worst <= 1e-10;
  res.detail = "worst violation=" + fmt_double(worst) + " over " + std::to_string(steps) + " steps";
  res.seconds = timer.seconds();
  return res;
}

// Exponential lower bound on E||u_t||^2 and per-branch deterministic upper
// bound on ||u_t||, enumerated exactly on diagonal saddles, t <= 100.
inline VerifyResult power_iteration_bounds() {
  detail::Timer timer;
  VerifyResult res{5, "power-iteration growth bounds (enumerated)", false, "", 0.0};
  bool all = true;
  std::size_t rows = 0;
  for (double eta : {0.01, 0.1}) {
    for (double lambda : {0.1, 1.0}) {
      QuadraticSaddle q = make_diagonal_saddle({1.0, -lambda}, zeros(2),
                                               two_point_noise(1.0, {0.0, 1.0}));
      PowerIterationReport rep = check_power_iteration_bounds(q, 0.1, eta, 100);
      all = all && rep.all_hold;
      rows += rep.rows.size();
      // mixed-direction noise exercises branches that are not eigenvectors
      Vec mixed{0.6, 0.8};
      QuadraticSaddle q2 = make_diagonal_saddle({1.0, -lambda}, {0.05, -0.02},
                                                two_point_noise(0.7, mixed));
      PowerIterationReport rep2 = check_power_iteration_bounds(q2, 0.1, eta, 100);
      all = all && rep2.all_hold;
      rows += rep2.rows.size();
    }
  }
  res.seconds = timer.seconds();
  res.pass = all && res.seconds < 5.0;
  res.detail = std::to_string(rows) + " (t, grid) rows checked";
  return res;
}

// Step-expansion reconstruction on GD and SGD half-space windows plus the
// vanishing of delta_t and d_t on pure quadratics with zero pivot gradient.
inline VerifyResult step_expansion_reconstruction() {
  detail::Timer timer;
  VerifyResult res{6, "step-expansion reconstruction", false, "", 0.0};
  HalfspaceProblem p = make_gaussian_halfspace(40, 4, 0.75, 7, loss_sigmoid(), 0.0);
  Rng rng(2024);
  Vec w0 = 1.5 * rng.unit_ball(4);
  double eta = 0.25;

  Trajectory gd = run_gd(p, w0, eta, 20);
  TrajectoryDecomposition dec_gd = decompose_trajectory(gd, p, 0, eta);
  double worst = dec_gd.max_reconstruction_error();
  std::size_t steps = dec_gd.steps.size();

  Trajectory sgd = run_sgd(p, w0, eta, 20, 5);
  TrajectoryDecomposition dec_sgd = decompose_trajectory(sgd, p, 0, eta);
  worst = std::max(worst, dec_sgd.max_reconstruction_error());
  steps += dec_sgd.steps.size();

  // pure quadratic, perturbed at the exact saddle: zero pivot gradient, so
  // the stale-model error and the initial-gradient term must both vanish
  QuadraticSaddle q = make_diagonal_saddle({1.0, -0.5}, zeros(2),
                                           two_point_noise(1.0, {0.0, 1.0}));
  PgdParams params;
  params.eta = 0.25;
  params.r = 0.1;
  params.g_thres = 0.01;
  params.tr = 40;
  params.t_max = 20;
  Trajectory qt = run_cnc_pgd(q, zeros(2), params, 3).trajectory;
  TrajectoryDecomposition dec_q = decompose_trajectory(qt, q, 0, 0.25);
  double quad_resid = 0.0;
  for (const StepExpansion& s : dec_q.steps)
    quad_resid = std::max({quad_resid, norm2(s.delta), norm2(s.d)});
  worst = std::max(worst, dec_q.max_reconstruction_error());

  res.pass = worst < 1e-9 && quad_resid <= 1e-12 && steps == 38 && !dec_q.steps.empty();
  res.detail = "max rel err=" + fmt_double(worst) +
               ", quadratic |delta|,|d| max=" + fmt_double(quad_resid);
  res.seconds = timer.seconds();
  return res;
}

// All three series inequalities over beta x t = {0.01,0.1,0.5,0.9} x 1..200.
inline VerifyResult series_inequalities() {
  detail::Timer timer;
  VerifyResult res{7, "geometric series bounds", false, "", 0.0};
  std::size_t checks = 0, failures = 0;
  for (double beta : {0.01, 0.1, 0.5, 0.9}) {
    for (std::int64_t t = 1; t <= 200; ++t) {
      SeriesBounds s = series_bounds(beta, t);
      checks += 3;
      if (!(s.lhs1 <= s.rhs1)) ++failures;
      if (!(s.lhs2 <= s.rhs2)) ++failures;
      if (!(s.lhs3 <= s.rhs3)) ++failures;
    }
  }
  res.pass = failures == 0 && checks == 2400;
  res.detail = std::to_string(checks) + " checks, " + std::to_string(failures) + " failures";
  res.seconds = timer.seconds();
  return res;
}

// Accuracy-scaling of the derived parameters: the ratio value(eps)/value(eps/2)
// must match the exact epsilon-exponent ratio once log factors are removed.
inline VerifyResult parameter_scaling() {
  detail::Timer timer;
  VerifyResult res{8, "parameter derivation scaling in epsilon", false, "", 0.0};
  SmoothnessConstants c;
  c.L = 2.0;
  c.ell = 1.5;
  c.rho = 3.0;
  c.gamma = 0.7;
  c.delta = 0.3;
  c.f_gap = 5.0;
  double worst = 0.0;
  auto ratio_err = [&](double got, double want) {
    return std::abs(got / want - 1.0);
  };
  for (double eps : {0.5, 0.2, 0.05}) {
    PgdParams a = derive_pgd_params(c, eps);
    PgdParams b = derive_pgd_params(c, eps / 2.0);
    worst = std::max(worst, ratio_err(a.r / b.r, std::pow(2.0, 0.8)));
    worst = std::max(worst, ratio_err(a.f_thres / b.f_thres, std::pow(2.0, 1.6)));
    // Tr scales like eps^{-2/5} after dividing out the separately computed omega
    worst = std::max(worst,
                     ratio_err((a.tr_raw / a.omega) / (b.tr_raw / b.omega), std::pow(2.0, -0.4)));

    SgdParams sa = derive_sgd_params(c, eps);
    SgdParams sb = derive_sgd_params(c, eps / 2.0);
    worst = std::max(worst, ratio_err(sa.r / sb.r, 4.0));
    worst = std::max(worst, ratio_err(sa.eta / sb.eta, 32.0));
    worst = std::max(worst, ratio_err(sa.f_thres / sb.f_thres, 16.0));
    worst = std::max(worst, ratio_err((sa.tr_raw / sa.omega) / (sb.tr_raw / sb.omega),
                                      1.0 / (32.0 * 2.0)));  // 1/(eta ratio * eps ratio)
  }
  res.pass = worst <= 1e-12;
  res.detail = "worst ratio deviation=" + fmt_double(worst);
  res.seconds = timer.seconds();
  return res;
}

// Reconstruction, orthonormality and eigen-equation residuals for 100 random
// symmetric matrices with d in {2, 8, 32, 64}.
inline VerifyResult eigensolver_batch() {
  detail::Timer timer;
  VerifyResult res{9, "eigensolver batch correctness", false, "", 0.0};
  std::vector<std::size_t> dims = {2, 8, 32, 64};
  double worst_recon = 0.0, worst_ortho = 0.0, worst_eigeq = 0.0;
  std::size_t count = 0;
  for (std::size_t rep = 0; rep < 25; ++rep) {
    for (std::size_t d : dims) {
      Rng rng(derive_seed(5150, rep * 100 + d));
      Mat a(d, d);
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i; j < d; ++j) a(i, j) = a(j, i) = rng.normal();
      SpectrumReport spec = sym_eig(a);
      ++count;
      double amax = std::max(1.0, max_abs(a));
      for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
          double recon = 0.0;
          for (std::size_t k = 0; k < d; ++k)
            recon += spec.eigenvalues[k] * spec.eigenvectors[k][i] * spec.eigenvectors[k][j];
          worst_recon = std::max(worst_recon, std::abs(recon - a(i, j)) / amax);
          double g = dot(spec.eigenvectors[i], spec.eigenvectors[j]) - (i == j ? 1.0 : 0.0);
          worst_ortho = std::max(worst_ortho, std::abs(g));
        }
        Vec resid = matvec(a, spec.eigenvectors[i]) - spec.eigenvalues[i] * spec.eigenvectors[i];
        worst_eigeq = std::max(worst_eigeq, norm2(resid) / amax);
      }
    }
  }
  res.seconds = timer.seconds();
  res.pass = count == 100 && worst_recon < 1e-9 && worst_ortho < 1e-9 && worst_eigeq < 1e-8 &&
             res.seconds < 20.0;
  res.detail = "recon=" + fmt_double(worst_recon) + " ortho=" + fmt_double(worst_ortho) +
               " eigeq=" + fmt_double(worst_eigeq);
  return res;
}

// Byte-identical reruns of the full preset grid.
inline VerifyResult determinism(const std::string& out_dir) {
  detail::Timer timer;
  VerifyResult res{10, "byte-identical outputs for identical configs", false, "", 0.0};
  std::string text = preset_halfspaces_appendix_e() + "eig_log_every = 50\n";
  text.replace(text.find("t_max = 2000"), 12, "t_max = 300 ");
  ExperimentConfig cfg = parse_config(text);
  std::string dir_a = out_dir + "/det-a";
  std::string dir_b = out_dir + "/det-b";
  run_experiment(cfg, dir_a);
  run_experiment(cfg, dir_b);
  bool same = true;
  std::vector<std::string> names;
  for (const auto& entry : std::filesystem::directory_iterator(dir_a))
    names.push_back(entry.path().filename().string());
  std::sort(names.begin(), names.end());
  for (const std::string& name : names)
    same = same && read_file(dir_a + "/" + name) == read_file(dir_b + "/" + name);
  res.pass = same && !names.empty();
  res.detail = std::to_string(names.size()) + " files compared";
  res.seconds = timer.seconds();
  return res;
}

inline std::vector<VerifyResult> run_all(const std::string& out_dir) {
  std::vector<VerifyResult> results;
  results.push_back(escape_ordering(out_dir + "/escape"));
  results.push_back(cnc_lower_bound());
  results.push_back(isotropic_decay());
  results.push_back(descent_inequality());
  results.push_back(power_iteration_bounds());
  results.push_back(step_expansion_reconstruction());
  results.push_back(series_inequalities());
  results.push_back(parameter_scaling());
  results.push_back(eigensolver_batch());
  results.push_back(determinism(out_dir));

  // The end-to-end rate statements are not reproduced at their theoretical
  // parameter scales (the prescribed horizons are astronomically large);
  // their building blocks are covered by the structural checks above.
  VerifyResult meta{11, "end-to-end rates covered structurally (1, 5, 6, 8)", false, "", 0.0};
  meta.pass = true;
  for (const VerifyResult& r : results)
    if ((r.id == 1 || r.id == 5 || r.id == 6 || r.id == 8) && !r.pass) meta.pass = false;
  meta.detail = "no quantitative rate reproduction by design";
  results.push_back(meta);
  return results;
}

// Analytical subset (skips the experiment reproduction and determinism
// runs); used by the command-line `verify` subcommand.
inline std::vector<VerifyResult> run_property_suites() {
  std::vector<VerifyResult> results;
  results.push_back(cnc_lower_bound());
  results.push_back(isotropic_decay());
  results.push_back(descent_inequality());
  results.push_back(power_iteration_bounds());
  results.push_back(step_expansion_reconstruction());
  results.push_back(series_inequalities());
  results.push_back(parameter_scaling());
  results.push_back(eigensolver_batch());
  return results;
}

}  // namespace verify
}  // namespace cnc
