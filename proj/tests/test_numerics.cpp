#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "smoothgauge/graph.hpp"
#include "smoothgauge/numerics.hpp"

using namespace smoothgauge;

TEST_CASE("pairwise distances: 3-4-5 triangle, single point, metric axioms") {
  PointsXd p(2, 2);
  p << 0, 0, 3, 4;
  const MatrixXd d = pairwise_distances(p);
  CHECK(d(0, 1) == doctest::Approx(5.0).epsilon(1e-14));
  CHECK(d(1, 0) == doctest::Approx(5.0).epsilon(1e-14));
  CHECK(d(0, 0) == 0.0);

  PointsXd one(1, 2);
  one << 2.5, -1.0;
  CHECK(pairwise_distances(one)(0, 0) == 0.0);

  Rng rng(7);
  std::uniform_real_distribution<double> unif(-10, 10);
  PointsXd pts(10, 2);
  for (int i = 0; i < 10; ++i) {
    pts(i, 0) = unif(rng);
    pts(i, 1) = unif(rng);
  }
  const MatrixXd dd = pairwise_distances(pts);
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) {
      CHECK(dd(i, j) == dd(j, i));
      for (int k = 0; k < 10; ++k)
        CHECK(dd(i, j) <= dd(i, k) + dd(k, j) + 1e-12);
    }

  PointsXd bad(1, 2);
  bad << std::nan(""), 0.0;
  CHECK_THROWS_AS(pairwise_distances(bad), input_error);
}

TEST_CASE("sym_eigen: identity, diagonal, 3-node path Laplacian") {
  const auto id = sym_eigen(MatrixXd::Identity(3, 3));
  for (int j = 0; j < 3; ++j) CHECK(id.values[j] == doctest::Approx(1.0));

  MatrixXd diag = MatrixXd::Zero(2, 2);
  diag(0, 0) = 2;
  diag(1, 1) = 5;
  const auto dd = sym_eigen(diag);
  CHECK(dd.values[0] == doctest::Approx(2.0));
  CHECK(dd.values[1] == doctest::Approx(5.0));
  CHECK(std::abs(dd.vectors(0, 0)) == doctest::Approx(1.0));

  // D - W of a path of 3 has eigenvalues 0, 1, 3
  const auto g = lattice(1, 3);
  MatrixXd q = -g.W;
  q.diagonal() = g.degrees;
  const auto es = sym_eigen(q);
  CHECK(std::abs(es.values[0]) < 1e-12);
  CHECK(es.values[1] == doctest::Approx(1.0));
  CHECK(es.values[2] == doctest::Approx(3.0));

  // reconstruction and orthonormality invariants
  const MatrixXd rec = es.vectors * es.values.asDiagonal() * es.vectors.transpose();
  CHECK((rec - q).cwiseAbs().maxCoeff() <= 1e-8 * (1 + q.cwiseAbs().maxCoeff()));
  const MatrixXd vtv = es.vectors.transpose() * es.vectors;
  CHECK((vtv - MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("pseudo_inverse: identity, singular diagonal, lattice Laplacian") {
  CHECK((pseudo_inverse(MatrixXd::Identity(4, 4)) - MatrixXd::Identity(4, 4))
            .cwiseAbs()
            .maxCoeff() < 1e-12);

  MatrixXd s = MatrixXd::Zero(2, 2);
  s(0, 0) = 2;
  Eigen::Index rank = 0;
  const MatrixXd sp = pseudo_inverse(s, 1e-10, &rank);
  CHECK(sp(0, 0) == doctest::Approx(0.5));
  CHECK(sp(1, 1) == doctest::Approx(0.0));
  CHECK(rank == 1);

  const auto g = lattice(6, 6);
  MatrixXd q = -g.W;
  q.diagonal() = g.degrees;
  const MatrixXd qp = pseudo_inverse(q, 1e-10, &rank);
  CHECK(rank == 35);  // A - 1 on a connected graph
  const MatrixXd back = q * qp * q;
  CHECK((back - q).cwiseAbs().maxCoeff() <= 1e-8 * q.cwiseAbs().maxCoeff());

  // involution on the image
  const MatrixXd qpp = pseudo_inverse(qp);
  CHECK((qpp - q).cwiseAbs().maxCoeff() <= 1e-7 * q.cwiseAbs().maxCoeff());

  MatrixXd indef(2, 2);
  indef << 1, 0, 0, -1;
  CHECK_THROWS_AS(pseudo_inverse(indef), numerical_error);
}

TEST_CASE("cholesky_psd: identity, hand 2x2, PD exponential correlation") {
  CHECK((cholesky_psd(MatrixXd::Identity(3, 3)) - MatrixXd::Identity(3, 3))
            .cwiseAbs()
            .maxCoeff() < 1e-14);

  MatrixXd s(2, 2);
  s << 4, 2, 2, 5;
  const MatrixXd l = cholesky_psd(s);
  CHECK(l(0, 0) == doctest::Approx(2.0));
  CHECK(l(1, 0) == doctest::Approx(1.0));
  CHECK(l(1, 1) == doctest::Approx(2.0));
  CHECK((MatrixXd(l * l.transpose()) - s).cwiseAbs().maxCoeff() < 1e-12);

  // exponential correlation on collinear points is PD outright
  PointsXd pts(5, 2);
  for (int i = 0; i < 5; ++i) {
    pts(i, 0) = i;
    pts(i, 1) = 0;
  }
  const MatrixXd corr = (-pairwise_distances(pts) / 2.0).array().exp();
  CHECK(sym_eigen(corr).values.minCoeff() > 0);
  const MatrixXd lc = cholesky_psd(corr);
  CHECK((MatrixXd(lc * lc.transpose()) - corr).cwiseAbs().maxCoeff() <=
        1e-8 * corr.cwiseAbs().maxCoeff());
}

TEST_CASE("bessel_k: half-integer closed forms and recurrence") {
  const double pi = std::numbers::pi;
  CHECK(bessel_k(0.5, 1.0) == doctest::Approx(std::sqrt(pi / 2) * std::exp(-1.0)).epsilon(1e-10));
  CHECK(bessel_k(1.5, 2.0) ==
        doctest::Approx(std::sqrt(pi / 4) * std::exp(-2.0) * 1.5).epsilon(1e-10));

  // K_{v+1}(x) = K_{v-1}(x) + (2v/x) K_v(x)
  const double v = 2.0, x = 1.7;
  const double lhs = bessel_k(v + 1, x);
  const double rhs = bessel_k(v - 1, x) + (2 * v / x) * bessel_k(v, x);
  CHECK(std::abs(lhs - rhs) / std::abs(lhs) < 1e-9);

  CHECK(bessel_k(2.0, 5.0) < bessel_k(2.0, 4.0));  // decreasing in x
  CHECK_THROWS_AS(bessel_k(2.0, 0.0), input_error);
}

TEST_CASE("matern: boundary value, v=1/2 exponential, v=3/2 closed form") {
  CHECK(matern(0.0, 1.25, 2.0) == 1.0);

  for (double d : {0.1, 0.7, 2.0, 5.0})
    for (double phi : {0.5, 1.0, 3.0})
      CHECK(matern(d, 0.5, phi) == doctest::Approx(std::exp(-d * phi)).epsilon(1e-12));

  // v = 3/2: (1 + x) exp(-x)
  CHECK(matern(1.0, 1.5, 1.0) == doctest::Approx(2.0 * std::exp(-1.0)).epsilon(1e-10));
  CHECK(matern(1.0, 1.5, 1.0) == doctest::Approx(0.7357588823).epsilon(1e-9));

  // monotone decreasing in distance for random (v, phi)
  Rng rng(11);
  std::uniform_real_distribution<double> uv(0.3, 3.0);
  for (int t = 0; t < 100; ++t) {
    const double v = uv(rng), phi = uv(rng);
    double prev = matern(0.05, v, phi);
    for (double d = 0.3; d < 4.0; d += 0.25) {
      const double cur = matern(d, v, phi);
      CHECK(cur <= prev + 1e-14);
      prev = cur;
    }
  }
}

TEST_CASE("sample_mvn: degenerate factor, MC moments, seed determinism") {
  VectorXd mean(2);
  mean << 1.0, -2.0;
  Rng rng(5);
  const VectorXd fixed = sample_mvn(mean, MatrixXd::Zero(2, 2), rng);
  CHECK(fixed[0] == 1.0);
  CHECK(fixed[1] == -2.0);

  MatrixXd l(2, 2);
  l << 1, 0, 0.5, 1.2;
  const MatrixXd cov = l * l.transpose();
  Rng r1(42);
  const int N = 100000;
  VectorXd m = VectorXd::Zero(2);
  MatrixXd c = MatrixXd::Zero(2, 2);
  for (int t = 0; t < N; ++t) {
    const VectorXd x = sample_mvn(VectorXd::Zero(2).eval(), l, r1);
    m += x;
    c += x * x.transpose();
  }
  m /= N;
  c = c / N - m * m.transpose();
  // 3 MC standard errors: se(mean) = sd/sqrt(N), se(var) ~ var sqrt(2/N)
  for (int i = 0; i < 2; ++i) {
    CHECK(std::abs(m[i]) < 3 * std::sqrt(cov(i, i) / N));
    CHECK(std::abs(c(i, i) - cov(i, i)) < 3 * cov(i, i) * std::sqrt(2.0 / N));
  }
  CHECK(std::abs(c(0, 1) - cov(0, 1)) < 0.02);

  Rng ra(99), rb(99);
  const VectorXd xa = sample_mvn(mean, l, ra);
  const VectorXd xb = sample_mvn(mean, l, rb);
  CHECK(xa == xb);

  VectorXd mean3(3);
  mean3.setZero();
  CHECK_THROWS_AS(sample_mvn(mean3, l, ra), input_error);
}

TEST_CASE("numerics core is scalar-templated") {
  Points<float> p(2, 2);
  p << 0.f, 0.f, 3.f, 4.f;
  const Matrix<float> d = pairwise_distances(p);
  CHECK(d(0, 1) == doctest::Approx(5.f));
  const auto es = sym_eigen(Matrix<float>::Identity(2, 2));
  CHECK(es.values[0] == doctest::Approx(1.f));
}
