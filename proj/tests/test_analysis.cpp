#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "cnc/analysis.hpp"
#include "cnc/io.hpp"
#include "cnc/halfspace.hpp"
#include "cnc/optimizers.hpp"
#include "cnc/quadratic.hpp"
#include "cnc/spectrum.hpp"

using namespace cnc;

TEST_CASE("cnc estimate on a single linear sample") {
  // gradient is exactly z = e1; zero Hessian keeps the eigenbasis axis-aligned
  HalfspaceProblem p({{1.0, 0.0, 0.0}}, loss_linear(), 0.0);
  CncEstimate est = estimate_cnc_at(p, {0.3, -0.2, 0.5});
  REQUIRE(est.records.size() == 3);
  CHECK(est.n == 1);
  double along_e1 = 0.0, elsewhere = 0.0;
  for (const CncDirection& r : est.records) {
    if (std::abs(r.mu_raw - 1.0) < 1e-12) along_e1 += r.mu_raw;
    else elsewhere += r.mu_raw;
  }
  CHECK(along_e1 == Catch::Approx(1.0));
  CHECK(elsewhere < 1e-12);
}

TEST_CASE("cnc estimate equals the brute-force double sum") {
  HalfspaceProblem p = make_gaussian_halfspace(30, 5, 0.6, 21, loss_sigmoid(), 0.0);
  Rng rng(8);
  std::vector<Vec> points;
  for (int i = 0; i < 4; ++i) points.push_back(2.5 * rng.unit_ball(5));

  CncEstimate agg = aggregate_cnc(estimate_cnc(p, points));
  CHECK(agg.m == 4);

  // independent recomputation: explicit (1/m) sum_i (1/n) sum_j loops
  for (std::size_t k = 0; k < 5; ++k) {
    double mu = 0.0;
    for (const Vec& w : points) {
      SpectrumReport spec = sym_eig(p.hessian(w));
      double inner = 0.0;
      for (std::size_t j = 0; j < p.num_samples(); ++j) {
        double proj = dot(p.sample_grad(w, j), spec.eigenvectors[k]);
        inner += proj * proj;
      }
      mu += inner / static_cast<double>(p.num_samples());
    }
    mu /= static_cast<double>(points.size());
    CHECK(std::abs(mu - agg.records[k].mu_raw) < 1e-12);
  }
}

TEST_CASE("cnc estimate on quadratic noise support") {
  // diagonal Hessian with distinct eigenvalues: eigenvectors are the axes,
  // so mu_k = g_k^2 + sigma^2 u_k^2 in closed form
  double sigma = 0.7;
  Vec u{0.6, 0.8};
  QuadraticSaddle q = make_diagonal_saddle({-1.0, 2.0}, {0.3, -0.1},
                                           two_point_noise(sigma, u));
  Vec w{0.5, 0.4};
  Vec g = q.grad(w);
  CncEstimate est = estimate_cnc_at(q, w);
  REQUIRE(est.records.size() == 2);
  // ascending eigenvalues: k=0 is lambda=-1 (axis 0), k=1 is lambda=2 (axis 1)
  CHECK(est.records[0].lambda == Catch::Approx(-1.0));
  CHECK(est.records[0].mu_raw ==
        Catch::Approx(g[0] * g[0] + sigma * sigma * u[0] * u[0]).epsilon(1e-12));
  CHECK(est.records[1].mu_raw ==
        Catch::Approx(g[1] * g[1] + sigma * sigma * u[1] * u[1]).epsilon(1e-12));

  // m=1, n=1: mu_k is exactly the squared projection of the only gradient
  QuadraticSaddle det = make_diagonal_saddle({-1.0, 2.0}, {0.3, -0.1});
  CncEstimate single = estimate_cnc_at(det, w);
  Vec g2 = det.grad(w);
  CHECK(single.records[0].mu_raw == Catch::Approx(g2[0] * g2[0]));

  // csv emits one row per direction and round-trips the values
  std::string csv = cnc_estimate_to_csv(est);
  auto lines = split(trim(csv), '\n');
  REQUIRE(lines.size() == 4);  // comment, header, two directions
  CHECK(std::stod(split(lines[2], ',')[2]) == est.records[0].mu_raw);
}

TEST_CASE("isotropic baseline") {
  // d = 1: the only unit vectors are +-1
  std::vector<double> one = isotropic_baseline(1, 100, {{1.0}}, 5);
  CHECK(one[0] == Catch::Approx(1.0));

  std::vector<Vec> dirs = {unit_vector(16, 0), unit_vector(16, 7)};
  std::vector<double> m = isotropic_baseline(16, 100000, dirs, 77);
  CHECK(std::abs(m[0] - 1.0 / 16.0) < 0.05 / 16.0);
  CHECK(std::abs(m[1] - 1.0 / 16.0) < 0.05 / 16.0);
  CHECK(m[0] / m[1] > 0.9);
  CHECK(m[0] / m[1] < 1.1);

  CHECK_THROWS_AS(isotropic_baseline(0, 10, dirs, 1), InvalidCount);
}

TEST_CASE("variance lower bound on half-spaces") {
  // linear loss: zero Hessian, no negative eigenpairs, vacuous pass
  HalfspaceProblem lin({{0.5, 0.2}}, loss_linear(), 0.0);
  CncBoundReport vac = verify_cnc_lower_bound(lin, {1.0, 0.0});
  CHECK(vac.rows.empty());
  CHECK(vac.all_hold);

  // regularizer present is rejected (the bound is for the plain objective)
  HalfspaceProblem reg = make_gaussian_halfspace(10, 3, 0.5, 2, loss_sigmoid(), 0.1);
  CHECK_THROWS_AS(verify_cnc_lower_bound(reg, zeros(3)), RegularizerPresent);

  // random sigmoid instances: exact finite-sum mu beats (lambda/c)^2
  for (std::uint64_t i = 0; i < 5; ++i) {
    HalfspaceProblem p = make_gaussian_halfspace(50, 6, 0.8, derive_seed(1234, i),
                                                 loss_sigmoid(), 0.0);
    Rng rng(derive_seed(4321, i));
    Vec w = 3.0 * rng.unit_ball(6);
    CncBoundReport rep = verify_cnc_lower_bound(p, w);
    CHECK(rep.all_hold);
    for (const CncBoundRow& row : rep.rows) {
      CHECK(row.lambda < 0.0);
      CHECK(row.mu >= row.bound - 1e-9);
    }
  }
}

TEST_CASE("series bounds") {
  SeriesBounds s = series_bounds(0.5, 1);
  CHECK(s.lhs1 == 1.0);
  CHECK(s.rhs1 == Catch::Approx(6.0));  // 2 * 2 * 1.5
  CHECK(s.lhs2 == 1.0);
  CHECK(s.lhs3 == 1.0);
  CHECK(s.all_hold());

  CHECK(series_bounds(0.9, 50).all_hold());

  // lhs by direct summation: t = 3, beta = 0.5 -> 2.25 + 1.5 + 1 = 4.75
  SeriesBounds t3 = series_bounds(0.5, 3);
  CHECK(t3.lhs1 == Catch::Approx(4.75));

  CHECK_THROWS_AS(series_bounds(0.0, 5), InvalidBeta);
  CHECK_THROWS_AS(series_bounds(1.0, 5), InvalidBeta);
  CHECK_THROWS_AS(series_bounds(0.5, 0), ValidationError);
}

TEST_CASE("decomposition of a perturbed quadratic run") {
  // exact saddle start, perturbation at t=1, then plain descent: the
  // trajectory is pure power iteration (delta = d = 0, zero pivot gradient)
  QuadraticSaddle q = make_diagonal_saddle({1.0, -0.5}, zeros(2),
                                           two_point_noise(1.0, {0.0, 1.0}));
  PgdParams params;
  params.eta = 0.25;
  params.r = 0.1;
  params.g_thres = 0.01;
  params.tr = 40;
  params.t_max = 20;
  Trajectory t = run_cnc_pgd(q, zeros(2), params, 3).trajectory;
  REQUIRE(t.perturbation_steps.size() == 1);

  TrajectoryDecomposition dec = decompose_trajectory(t, q, 0, params.eta);
  CHECK(dec.lambda == Catch::Approx(0.5));
  CHECK(dec.kappa == Catch::Approx(1.125));
  REQUIRE(dec.steps.size() == 19);
  double kappa_t = 1.0;
  const Vec w1 = t.snapshot(1);
  for (const StepExpansion& s : dec.steps) {
    kappa_t *= dec.kappa;
    CHECK(norm2(s.delta) <= 1e-12);
    CHECK(norm2(s.d) <= 1e-12);
    CHECK(norm2(s.zeta) <= 1e-12);
    CHECK(s.reconstruction_error < 1e-12);
    // the perturbation lands on the negative-curvature axis: |u_t| grows as kappa^t
    CHECK(norm2(s.u) == Catch::Approx(kappa_t * norm2(w1)).epsilon(1e-12));
  }
}

TEST_CASE("decomposition reconstructs halfspace runs") {
  HalfspaceProblem p = make_gaussian_halfspace(40, 4, 0.75, 7, loss_sigmoid(), 0.0);
  Rng rng(2024);
  Vec w0 = 1.5 * rng.unit_ball(4);

  Trajectory gd = run_gd(p, w0, 0.25, 20);
  TrajectoryDecomposition dec = decompose_trajectory(gd, p, 0, 0.25);
  CHECK(dec.steps.size() == 19);
  CHECK(dec.max_reconstruction_error() < 1e-9);

  // sgd with logged noise: zeta is the explicit propagated sum, not a residual
  Trajectory sgd = run_sgd(p, w0, 0.25, 20, 5);
  TrajectoryDecomposition dsgd = decompose_trajectory(sgd, p, 0, 0.25);
  CHECK(dsgd.max_reconstruction_error() < 1e-9);
  for (const StepExpansion& s : dsgd.steps) CHECK_FALSE(s.zeta_recovered);

  // without the noise log the residual route still reconstructs exactly
  RunOptions quiet;
  quiet.log_noise = false;
  Trajectory sgd2 = run_sgd(p, w0, 0.25, 20, 5, quiet);
  TrajectoryDecomposition drec = decompose_trajectory(sgd2, p, 0, 0.25);
  CHECK(drec.steps.back().zeta_recovered);
  CHECK(drec.max_reconstruction_error() < 1e-12);

  // decomposition window stops at the next perturbation
  PgdParams params;
  params.eta = 0.25;
  params.r = 0.1;
  params.g_thres = 1e6;  // fires whenever the window allows
  params.tr = 5;
  params.t_max = 20;
  Trajectory cnc = run_cnc_pgd(p, w0, params, 3).trajectory;
  TrajectoryDecomposition dwin = decompose_trajectory(cnc, p, 0, params.eta);
  CHECK(dwin.steps.size() == 4);  // steps 1..4 after the pivot; step 5 perturbs again

  // thinned snapshots cannot be decomposed
  RunOptions thin;
  thin.snapshot_every = 10;
  Trajectory sparse = run_gd(p, w0, 0.25, 20, thin);
  CHECK_THROWS_AS(decompose_trajectory(sparse, p, 0, 0.25), MissingSnapshots);
}

TEST_CASE("power iteration bounds on the axis-aligned case") {
  QuadraticSaddle q = make_diagonal_saddle({1.0, -1.0}, zeros(2),
                                           two_point_noise(1.0, {0.0, 1.0}));
  PowerIterationReport rep = check_power_iteration_bounds(q, 0.1, 0.1, 50);
  CHECK(rep.gamma == Catch::Approx(1.0));
  CHECK(rep.ell == Catch::Approx(1.0));
  CHECK(rep.kappa == Catch::Approx(1.1));
  CHECK(rep.all_hold);
  // noise along the minimum eigenvector: the lower bound is an equality
  for (const PowerIterationRow& row : rep.rows) {
    CHECK(row.expected_u_sq == Catch::Approx(row.lower_bound).epsilon(1e-12));
    CHECK(row.max_branch_norm == Catch::Approx(row.upper_bound).epsilon(1e-12));
  }
  CHECK(rep.rows.front().max_branch_norm <= rep.ell * 0.1 * (1 + 1e-12));

  // noise orthogonal to the negative direction: gamma = 0, bounds still hold
  QuadraticSaddle orth = make_diagonal_saddle({1.0, -1.0}, zeros(2),
                                              two_point_noise(1.0, {1.0, 0.0}));
  PowerIterationReport rep2 = check_power_iteration_bounds(orth, 0.1, 0.1, 50);
  CHECK(rep2.gamma == 0.0);
  CHECK(rep2.all_hold);

  // nonzero linear term: pivot solved to the stationary point
  QuadraticSaddle shifted = make_diagonal_saddle({1.0, -1.0}, {0.3, 0.2},
                                                 two_point_noise(1.0, {0.0, 1.0}));
  PowerIterationReport rep3 = check_power_iteration_bounds(shifted, 0.1, 0.1, 30);
  CHECK(norm2(shifted.grad(rep3.pivot)) < 1e-12);
  CHECK(rep3.all_hold);

  QuadraticSaddle convex = make_diagonal_saddle({1.0, 2.0}, zeros(2));
  CHECK_THROWS_AS(check_power_iteration_bounds(convex, 0.1, 0.1, 10), NoNegativeCurvature);
}

TEST_CASE("initial gradient term never fights the power iteration") {
  // E[u_t]' d_t >= 0 for eta <= 1/L, computed exactly
  QuadraticSaddle q = make_diagonal_saddle({1.5, -0.8, 0.3}, {0.4, -0.2, 0.1});
  double eta = 1.0 / 1.5;
  Mat step = Mat::identity(3) - eta * q.hessian_matrix();
  // pivot with nonzero gradient
  Vec pivot{0.2, 0.1, -0.3};
  Vec g = q.grad(pivot);
  double r = 0.1;
  Vec eu = -r * g;     // E[w_1 - pivot] = -r grad
  Vec dvec = zeros(3);
  for (int t = 1; t <= 50; ++t) {
    eu = matvec(step, eu);
    dvec = matvec(step, dvec) - g;
    CHECK(dot(eu, dvec) * -1.0 <= 1e-12);  // = r * sum g'(I-etaH)^{2t-i} g >= 0
  }
}

TEST_CASE("distance bound on descent windows") {
  // deterministic gd near the optimum: tiny decrease, hypothesis holds
  QuadraticSaddle q = make_diagonal_saddle({1.0, 0.5}, zeros(2));
  std::vector<Trajectory> trajs;
  for (int s = 0; s < 30; ++s) trajs.push_back(run_gd(q, {0.05, -0.03}, 0.25, 30));

  PgdParams params;
  params.eta = 0.25;
  params.r = 0.25;   // the window's first step is a plain descent step
  params.g_thres = 1.0;
  params.tr = 20;
  params.t_max = 30;
  params.f_thres = 0.1;
  SmoothnessConstants c;
  c.L = 1.0;
  c.ell = 1.0;

  DistanceBoundReport rep = check_distance_bound(trajs, params, c, 0);
  CHECK_FALSE(rep.skipped);
  CHECK(rep.all_hold);
  REQUIRE(!rep.rows.empty());
  CHECK(rep.rows.front().t == 0);
  CHECK(rep.rows.front().mean_dist_sq == 0.0);
  CHECK(rep.rows.front().bound == Catch::Approx(2.0 * 0.0625));  // 2 (ell r)^2

  // a window that genuinely descends is skipped, not failed
  std::vector<Trajectory> fast;
  for (int s = 0; s < 30; ++s) fast.push_back(run_gd(q, {2.0, 1.5}, 0.25, 30));
  PgdParams tight = params;
  tight.f_thres = 1e-6;
  DistanceBoundReport skip = check_distance_bound(fast, tight, c, 0);
  CHECK(skip.skipped);
  CHECK(skip.rows.empty());

  CHECK_THROWS_AS(check_distance_bound({trajs[0]}, params, c, 0), InsufficientSeeds);
}

TEST_CASE("distance bound on stochastic windows") {
  QuadraticSaddle q = make_diagonal_saddle({1.0, 0.5}, zeros(2),
                                           two_point_noise(0.05, {0.6, 0.8}));
  std::vector<Trajectory> trajs;
  for (std::uint64_t s = 0; s < 40; ++s)
    trajs.push_back(run_sgd(q, {0.05, -0.03}, 0.02, 25, derive_seed(7, s)));

  SgdParams params;
  params.eta = 0.02;
  params.r = 0.04;
  params.tr = 20;
  params.t_max = 25;
  params.f_thres = 0.05;
  SmoothnessConstants c;
  c.L = 1.0;
  c.ell = 1.0;  // bounds every |grad f_z| on this window

  DistanceBoundReport rep = check_distance_bound(trajs, params, c, 0);
  CHECK_FALSE(rep.skipped);
  CHECK(rep.all_hold);
}

TEST_CASE("stale taylor gap") {
  QuadraticSaddle q = make_diagonal_saddle({1.0, -0.5}, {0.1, 0.2});
  std::vector<Vec> probes{{0.0, 0.0}, {1.0, -1.0}, {3.0, 2.0}};
  for (const TaylorGapRow& row : check_taylor_gap(q, {0.2, 0.3}, probes, 0.0)) {
    CHECK(row.gap <= 1e-9);
    CHECK(row.holds);
  }

  HalfspaceProblem p = make_gaussian_halfspace(30, 4, 0.7, 11, loss_sigmoid(), 0.0);
  double rho = p.hessian_lipschitz_bound(make_grid(-30.0, 30.0, 0.01));
  Vec pivot{0.4, -0.1, 0.2, 0.0};
  std::vector<Vec> ball_probes{pivot};  // probe = pivot: 0 <= 0
  Rng rng(9);
  for (int i = 0; i < 10; ++i) {
    Vec probe = pivot;
    axpy(1.0, rng.unit_ball(4), probe);
    ball_probes.push_back(probe);
  }
  for (const TaylorGapRow& row : check_taylor_gap(p, pivot, ball_probes, rho))
    CHECK(row.holds);
}

TEST_CASE("dimension slope fit") {
  std::vector<double> dims{8, 16, 32, 64};
  std::vector<double> inv{1.0 / 8, 1.0 / 16, 1.0 / 32, 1.0 / 64};
  CHECK(fit_dimension_slope(dims, inv) == Catch::Approx(-1.0).margin(1e-12));

  std::vector<double> flat{0.3, 0.3, 0.3, 0.3};
  CHECK(fit_dimension_slope(dims, flat) == Catch::Approx(0.0).margin(1e-12));

  CHECK_THROWS_AS(fit_dimension_slope({1, 2}, {1, 2}), DegenerateInput);
  CHECK_THROWS_AS(fit_dimension_slope({1, 2, 3}, {1, -2, 3}), DegenerateInput);
  CHECK_THROWS_AS(fit_dimension_slope({2, 2, 2}, {1, 1, 1}), DegenerateInput);

  // isotropic moments on the sphere behave like 1/d
  std::vector<double> dvals, moments;
  for (std::size_t d : {8ul, 16ul, 32ul, 64ul}) {
    dvals.push_back(static_cast<double>(d));
    moments.push_back(isotropic_baseline(d, 20000, {unit_vector(d, 0)}, derive_seed(3, d))[0]);
  }
  double slope = fit_dimension_slope(dvals, moments);
  CHECK(slope > -1.1);
  CHECK(slope < -0.9);
}
