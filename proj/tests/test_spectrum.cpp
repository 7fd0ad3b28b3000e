#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "cnc/io.hpp"
#include "cnc/quadratic.hpp"
#include "cnc/rng.hpp"
#include "cnc/spectrum.hpp"

using namespace cnc;

namespace {

Mat random_symmetric(std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  Mat a(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) a(i, j) = a(j, i) = rng.normal();
  return a;
}

double reconstruction_error(const Mat& a, const SpectrumReport& spec) {
  double worst = 0.0;
  double scale = std::max(1.0, max_abs(a));
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) {
      double r = 0.0;
      for (std::size_t k = 0; k < a.rows(); ++k)
        r += spec.eigenvalues[k] * spec.eigenvectors[k][i] * spec.eigenvectors[k][j];
      worst = std::max(worst, std::abs(r - a(i, j)) / scale);
    }
  return worst;
}

}  // namespace

TEST_CASE("diagonal and identity spectra") {
  SpectrumReport s = sym_eig(Mat::diagonal({3.0, 1.0, 2.0}));
  CHECK(s.eigenvalues[0] == Catch::Approx(1.0));
  CHECK(s.eigenvalues[1] == Catch::Approx(2.0));
  CHECK(s.eigenvalues[2] == Catch::Approx(3.0));
  CHECK(s.lambda_min == Catch::Approx(1.0));
  CHECK(s.eigenvectors[0][1] == Catch::Approx(1.0));  // axis-aligned, positive sign
  CHECK(s.eigenvectors[2][0] == Catch::Approx(1.0));

  SpectrumReport id = sym_eig(Mat::identity(4));
  for (double l : id.eigenvalues) CHECK(l == Catch::Approx(1.0));
  CHECK(id.lambda_max() == Catch::Approx(1.0));
}

TEST_CASE("eigensolver invariants on random matrices") {
  for (std::size_t d : {2ul, 8ul, 32ul}) {
    Mat a = random_symmetric(d, 100 + d);
    SpectrumReport s = sym_eig(a);
    CHECK(reconstruction_error(a, s) < 1e-9);
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        double g = dot(s.eigenvectors[i], s.eigenvectors[j]) - (i == j ? 1.0 : 0.0);
        CHECK(std::abs(g) < 1e-9);
      }
      CHECK(s.eigenvalues[i] >= (i ? s.eigenvalues[i - 1] : s.eigenvalues[0]));
      Vec resid = matvec(a, s.eigenvectors[i]) - s.eigenvalues[i] * s.eigenvectors[i];
      CHECK(norm2(resid) < 1e-8 * std::max(1.0, max_abs(a)));
    }
  }
}

TEST_CASE("eigensolver determinism and errors") {
  Mat a = random_symmetric(8, 55);
  SpectrumReport s1 = sym_eig(a);
  SpectrumReport s2 = sym_eig(a);
  for (std::size_t k = 0; k < 8; ++k) {
    CHECK(s1.eigenvalues[k] == s2.eigenvalues[k]);
    for (std::size_t i = 0; i < 8; ++i) CHECK(s1.eigenvectors[k][i] == s2.eigenvectors[k][i]);
  }

  Mat asym{{1.0, 2.0}, {0.0, 1.0}};
  CHECK_THROWS_AS(sym_eig(asym), NotSymmetric);
  CHECK_THROWS_AS(sym_eig(Mat(2, 3)), DimensionMismatch);
  CHECK_THROWS_AS(sym_eig(Mat(513, 513)), ValidationError);  // supported only up to d = 512

  // zero matrix converges immediately
  SpectrumReport z = sym_eig(Mat(3, 3));
  CHECK(z.lambda_min == 0.0);
}

TEST_CASE("finite-difference hessian") {
  QuadraticSaddle q = make_diagonal_saddle({1.0, -1.0}, {0.2, -0.1});
  Mat fd = hessian_fd(q, {0.3, 0.7}, 1e-5);
  CHECK(max_abs(fd - q.hessian_matrix()) < 1e-10);  // central differences exact on quadratics

  struct ConstantObj {
    std::size_t dim() const { return 2; }
    double value(const Vec&) const { return 3.0; }
    Vec grad(const Vec& w) const { return zeros(w.size()); }
  } constant;
  CHECK(max_abs(hessian_fd(constant, {1.0, 2.0}, 1e-5)) == 0.0);

  CHECK_THROWS_AS(hessian_fd(q, {0.3, 0.7}, 0.0), ValidationError);
}

TEST_CASE("second-order stationarity verdicts") {
  QuadraticSaddle q = make_diagonal_saddle({1.0, -0.5}, zeros(2));
  StationarityVerdict v1 = check_second_order_stationary(q, zeros(2), 0.1, 0.6);
  CHECK(v1.is_stationary);
  CHECK(v1.grad_norm == 0.0);
  CHECK(v1.lambda_min == Catch::Approx(-0.5));

  StationarityVerdict v2 = check_second_order_stationary(q, zeros(2), 0.1, 0.4);
  CHECK_FALSE(v2.is_stationary);

  // gradient norm 0.2 fails eps_g = 0.1 regardless of curvature
  QuadraticSaddle id = make_diagonal_saddle({1.0, 1.0}, zeros(2));
  StationarityVerdict v3 = check_second_order_stationary(id, {0.2, 0.0}, 0.1, 10.0);
  CHECK_FALSE(v3.is_stationary);
  CHECK(v3.grad_norm == Catch::Approx(0.2));

  CHECK_THROWS_AS(check_second_order_stationary(q, zeros(2), 0.0, 0.1), ValidationError);
}

TEST_CASE("spectrum csv round trip of values") {
  Mat a = random_symmetric(3, 77);
  SpectrumReport s = sym_eig(a);
  std::string csv = spectrum_to_csv(s);
  // one eigenvalue row per pair plus the header
  CHECK(split(trim(csv), '\n').size() == 4);
  // 17-digit output parses back to the exact double
  auto rows = split(trim(csv), '\n');
  auto fields = split(rows[1], ',');
  CHECK(std::stod(fields[0]) == s.eigenvalues[0]);
}
