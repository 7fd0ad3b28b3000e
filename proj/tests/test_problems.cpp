#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "cnc/halfspace.hpp"
#include "cnc/loss.hpp"
#include "cnc/mlp.hpp"
#include "cnc/quadratic.hpp"
#include "cnc/spectrum.hpp"

using namespace cnc;

namespace {

// central finite differences of value(), the gradient oracle
template <class Obj>
Vec fd_grad(const Obj& obj, const Vec& w, double h) {
  Vec g(w.size());
  for (std::size_t j = 0; j < w.size(); ++j) {
    Vec wp = w, wm = w;
    wp[j] += h;
    wm[j] -= h;
    g[j] = (obj.value(wp) - obj.value(wm)) / (2.0 * h);
  }
  return g;
}

template <class Obj>
double rel_grad_error(const Obj& obj, const Vec& w, double h) {
  Vec g = obj.grad(w);
  Vec fg = fd_grad(obj, w, h);
  return norm2(g - fg) / std::max(1.0, norm2(g));
}

// exact mean of the per-sample gradients, weighted by their probabilities
template <class Obj>
Vec enumerated_mean_grad(const Obj& obj, const Vec& w) {
  Vec mean = zeros(w.size());
  for (std::size_t i = 0; i < obj.num_samples(); ++i)
    axpy(obj.sample_prob(i), obj.sample_grad(w, i), mean);
  return mean;
}

}  // namespace

TEST_CASE("sigmoid loss derivatives") {
  LossFn f = loss_sigmoid();
  CHECK(f.phi(0.0) == Catch::Approx(0.5));
  CHECK(f.dphi(0.0) == Catch::Approx(0.25));
  CHECK(f.c_const == 1.0);

  // |phi''|/|phi'| never exceeds 1 on a fine grid
  double c = verify_loss_condition(f, make_grid(-20.0, 20.0, 1e-3));
  CHECK(c <= 1.0);
  CHECK(c == Catch::Approx(1.0).margin(1e-3));  // |1-2s| approaches 1 in the tails
}

TEST_CASE("loss condition edge cases") {
  CHECK(verify_loss_condition(loss_linear(), make_grid(-5.0, 5.0, 0.5)) == 0.0);
  CHECK(verify_loss_condition(loss_quadratic(), {1.0}) == Catch::Approx(1.0));

  // quadratic loss at the origin only: |phi'| = 0 everywhere on the grid
  CHECK_THROWS_AS(verify_loss_condition(loss_quadratic(), {0.0}), AllPointsDegenerate);
  CHECK_THROWS_AS(verify_loss_condition(loss_sigmoid(), std::vector<double>{}),
                  AllPointsDegenerate);

  std::size_t skipped = 0;
  verify_loss_condition(loss_quadratic(), {0.0, 1.0}, &skipped);
  CHECK(skipped == 1);
}

TEST_CASE("gaussian halfspace construction") {
  HalfspaceProblem p = make_gaussian_halfspace(40, 4, 0.75, 7, loss_sigmoid(), 0.0);
  CHECK(p.num_samples() == 40);
  CHECK(p.dim() == 4);
  for (const Vec& z : p.data()) CHECK(norm2(z) <= 1.0 + 1e-12);

  HalfspaceProblem q = make_gaussian_halfspace(40, 4, 0.75, 7, loss_sigmoid(), 0.0);
  for (std::size_t i = 0; i < 40; ++i)
    for (std::size_t j = 0; j < 4; ++j) CHECK(p.data()[i][j] == q.data()[i][j]);

  HalfspaceProblem tiny = make_gaussian_halfspace(2, 1, 0.0, 0, loss_sigmoid(), 0.0);
  CHECK(tiny.num_samples() == 2);
  for (const Vec& z : tiny.data()) CHECK(norm2(z) <= 1.0 + 1e-12);

  CHECK_THROWS_AS(make_gaussian_halfspace(3, 2, 1.0, 0, loss_sigmoid(), 0.0), InvalidCount);
  CHECK_THROWS_AS(make_gaussian_halfspace(0, 2, 1.0, 0, loss_sigmoid(), 0.0), InvalidCount);
}

TEST_CASE("halfspace value") {
  // sigmoid at w=0 gives 0.5 regardless of the data
  HalfspaceProblem p = make_gaussian_halfspace(10, 3, 1.0, 3, loss_sigmoid(), 0.0);
  CHECK(p.value(zeros(3)) == Catch::Approx(0.5));
  CHECK_THROWS_AS(p.value(zeros(2)), DimensionMismatch);

  // single linear term
  HalfspaceProblem lin({{1.0, 0.0}}, loss_linear(), 0.0);
  CHECK(lin.value({1.0, 0.0}) == Catch::Approx(1.0));

  // phi(a)=a^2, z=e1, w=2e1, reg=1: 4 + 0.5*1*4 = 6
  HalfspaceProblem sq({{1.0, 0.0}}, loss_quadratic(), 1.0);
  CHECK(sq.value({2.0, 0.0}) == Catch::Approx(6.0));
}

TEST_CASE("halfspace stochastic gradient") {
  HalfspaceProblem lin({{0.3, -0.4}}, loss_linear(), 0.0);
  Vec g = lin.sample_grad({1.0, 1.0}, 0);
  CHECK(g[0] == Catch::Approx(0.3));
  CHECK(g[1] == Catch::Approx(-0.4));

  HalfspaceProblem p = make_gaussian_halfspace(12, 3, 0.5, 11, loss_sigmoid(), 0.0);
  Vec s = p.sample_grad(zeros(3), 4);
  Vec expect = 0.25 * p.data()[4];
  CHECK(norm2(s - expect) < 1e-15);
  CHECK_THROWS_AS(p.sample_grad(zeros(3), 12), IndexOutOfRange);

  // unbiasedness with a regularizer in play
  HalfspaceProblem reg = make_gaussian_halfspace(12, 3, 0.5, 11, loss_sigmoid(), 0.7);
  Vec w{0.2, -0.1, 0.5};
  CHECK(norm2(enumerated_mean_grad(reg, w) - reg.grad(w)) < 1e-14);
}

TEST_CASE("halfspace full gradient") {
  // symmetric +-z pairs cancel at w=0 (sigmoid' is even)
  HalfspaceProblem sym({{0.5, 0.1}, {-0.5, -0.1}}, loss_sigmoid(), 0.0);
  CHECK(norm2(sym.grad(zeros(2))) < 1e-16);

  HalfspaceProblem one({{0.4, -0.2}}, loss_sigmoid(), 0.3);
  Vec w{0.7, 0.1};
  CHECK(norm2(one.grad(w) - one.sample_grad(w, 0)) < 1e-16);

  HalfspaceProblem p = make_gaussian_halfspace(20, 4, 0.6, 5, loss_sigmoid(), 0.25);
  Rng rng(17);
  for (int rep = 0; rep < 5; ++rep) {
    Vec x = 2.0 * rng.unit_ball(4);
    CHECK(rel_grad_error(p, x, 1e-6) < 1e-6);
  }
}

TEST_CASE("halfspace hessian") {
  HalfspaceProblem lin = [] {
    std::vector<Vec> zs{{0.3, 0.1}, {-0.2, 0.4}};
    return HalfspaceProblem(zs, loss_linear(), 0.8);
  }();
  Mat h = lin.hessian({1.0, -1.0});
  CHECK(h(0, 0) == Catch::Approx(0.8));
  CHECK(h(1, 1) == Catch::Approx(0.8));
  CHECK(h(0, 1) == 0.0);

  HalfspaceProblem sq({{1.0, 0.0}}, loss_quadratic(), 0.0);
  Mat h2 = sq.hessian({3.0, 2.0});
  CHECK(h2(0, 0) == Catch::Approx(2.0));
  CHECK(h2(1, 1) == 0.0);

  HalfspaceProblem p = make_gaussian_halfspace(20, 4, 0.6, 5, loss_sigmoid(), 0.25);
  Vec w{0.3, -0.6, 0.2, 0.1};
  Mat analytic = p.hessian(w);
  Mat fd = hessian_fd(p, w, 1e-5);
  CHECK(max_abs(analytic - fd) < 1e-5);
}

TEST_CASE("quadratic saddle") {
  QuadraticSaddle q = make_diagonal_saddle({1.0, -1.0}, zeros(2));
  CHECK(q.value({1.0, 1.0}) == Catch::Approx(0.0));
  Vec g = q.grad({1.0, 1.0});
  CHECK(g[0] == 1.0);
  CHECK(g[1] == -1.0);
  CHECK(max_abs(q.hessian({0.0, 0.0}) - Mat{{1.0, 0.0}, {0.0, -1.0}}) == 0.0);

  QuadraticSaddle nq = make_diagonal_saddle({1.0, -0.5}, {0.2, 0.1},
                                            two_point_noise(0.7, {0.0, 1.0}));
  Vec w{0.4, -0.3};
  CHECK(norm2(enumerated_mean_grad(nq, w) - nq.grad(w)) < 1e-16);

  // zero-mean validation rejects a lopsided support
  std::vector<NoiseBranch> bad{{{1.0, 0.0}, 0.5}, {{0.0, 1.0}, 0.5}};
  CHECK_THROWS_AS(QuadraticSaddle(Mat::identity(2), zeros(2), bad), ValidationError);
  CHECK_THROWS_AS(make_diagonal_saddle({1.0, 1.0}, zeros(2)).value(zeros(3)),
                  DimensionMismatch);
}

TEST_CASE("tiny mlp") {
  // single linear layer, one example, zero weights: uniform softmax
  TinyMlp m({3, 4}, {{{0.5, -0.2, 0.1}, 2}});
  CHECK(m.dim() == (3 + 1) * 4);
  CHECK(m.value(zeros(m.dim())) == Catch::Approx(std::log(4.0)));

  Vec p = m.forward(zeros(m.dim()), {0.5, -0.2, 0.1});
  double sum = 0.0;
  for (double x : p) sum += x;
  CHECK(std::abs(sum - 1.0) < 1e-10);

  TinyMlp deep({3, 5, 4, 3}, make_blob_dataset(12, 3, 3, 9));
  CHECK(deep.dim() == (3 + 1) * 5 + (5 + 1) * 4 + (4 + 1) * 3);
  Rng rng(2);
  Vec w = 0.5 * rng.normal_vec(deep.dim());

  // probability simplex per example
  Vec probs = deep.forward(w, make_blob_dataset(12, 3, 3, 9)[0].input);
  double psum = 0.0;
  for (double x : probs) psum += x;
  CHECK(std::abs(psum - 1.0) < 1e-10);

  for (int rep = 0; rep < 10; ++rep) {
    Vec wr = 0.5 * rng.normal_vec(deep.dim());
    CHECK(rel_grad_error(deep, wr, 1e-5) < 1e-4);
  }
  CHECK(norm2(enumerated_mean_grad(deep, w) - deep.grad(w)) < 1e-13);

  CHECK_THROWS_AS(TinyMlp({3, 4}, {}), EmptyDataset);
  CHECK_THROWS_AS(deep.grad(zeros(3)), DimensionMismatch);
}

TEST_CASE("gradient consistency across objectives") {
  Rng rng(41);
  HalfspaceProblem hs = make_gaussian_halfspace(30, 5, 0.8, 13, loss_sigmoid(), 0.1);
  QuadraticSaddle q = make_diagonal_saddle({2.0, -0.7, 0.3}, {0.1, 0.0, -0.2});
  for (int rep = 0; rep < 10; ++rep) {
    CHECK(rel_grad_error(hs, 2.0 * rng.unit_ball(5), 1e-6) < 1e-6);
    CHECK(rel_grad_error(q, 2.0 * rng.unit_ball(3), 1e-6) < 1e-6);
  }
}
