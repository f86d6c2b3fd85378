#pragma once

// Dense symmetric linear algebra and special functions shared by every other
// module: pairwise distances, eigendecomposition, Moore-Penrose pseudoinverse,
// jittered Cholesky, Matern correlation, modified Bessel K, MVN sampling.
// Everything is dense; problem sizes here are a few hundred at most.

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "smoothgauge/errors.hpp"

namespace smoothgauge {

template <class Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <class Scalar>
using Points = Eigen::Matrix<Scalar, Eigen::Dynamic, 2>;  // planar coordinates

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;
using PointsXd = Points<double>;

// one generator type everywhere; reproducibility is per-platform
using Rng = std::mt19937_64;

// eigendecomposition of a symmetric matrix, values ascending, V orthonormal
template <class Scalar>
struct EigenSystem {
  Vector<Scalar> values;
  Matrix<Scalar> vectors;
};

template <class Derived>
Matrix<typename Derived::Scalar> pairwise_distances(const Eigen::MatrixBase<Derived>& pts) {
  using Scalar = typename Derived::Scalar;
  if (pts.rows() < 1 || pts.cols() != 2)
    throw input_error("pairwise_distances: need an n x 2 matrix of planar points");
  if (!pts.allFinite()) throw input_error("pairwise_distances: non-finite coordinate");
  const Eigen::Index n = pts.rows();
  Matrix<Scalar> d(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d(i, i) = Scalar(0);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const Scalar dx = pts(i, 0) - pts(j, 0), dy = pts(i, 1) - pts(j, 1);
      d(i, j) = d(j, i) = std::sqrt(dx * dx + dy * dy);
    }
  }
  return d;
}

template <class Derived>
EigenSystem<typename Derived::Scalar> sym_eigen(const Eigen::MatrixBase<Derived>& s) {
  using Scalar = typename Derived::Scalar;
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> solver(s);
  if (solver.info() != Eigen::Success)
    throw numerical_error("sym_eigen: eigensolver failed to converge");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

// Moore-Penrose inverse of a symmetric PSD matrix via its spectrum.
// Eigenvalues below rel_tol * max_eig count as zero; a clearly negative
// eigenvalue is a hard error rather than something to silently clip.
template <class Derived>
Matrix<typename Derived::Scalar> pseudo_inverse(const Eigen::MatrixBase<Derived>& s,
                                                double rel_tol = 1e-10,
                                                Eigen::Index* rank_out = nullptr) {
  using Scalar = typename Derived::Scalar;
  const auto es = sym_eigen(s);
  const Scalar max_eig = es.values.size() ? es.values.cwiseAbs().maxCoeff() : Scalar(0);
  const Scalar cut = Scalar(rel_tol) * max_eig;
  if (es.values.size() && es.values.minCoeff() < -cut) {
    std::ostringstream msg;
    msg << "pseudo_inverse: matrix is not PSD (min eigenvalue " << es.values.minCoeff() << ")";
    throw numerical_error(msg.str());
  }
  Vector<Scalar> inv = es.values;
  Eigen::Index rank = 0;
  for (Eigen::Index j = 0; j < inv.size(); ++j) {
    if (inv[j] > cut) {
      inv[j] = Scalar(1) / inv[j];
      ++rank;
    } else {
      inv[j] = Scalar(0);
    }
  }
  if (rank_out) *rank_out = rank;
  return es.vectors * inv.asDiagonal() * es.vectors.transpose();
}

// Lower Cholesky factor of a symmetric PSD matrix. On failure the diagonal is
// jittered, escalating tenfold, at most three attempts past the first.
template <class Derived>
Matrix<typename Derived::Scalar> cholesky_psd(const Eigen::MatrixBase<Derived>& s,
                                              double jitter = 0.0) {
  using Scalar = typename Derived::Scalar;
  Matrix<Scalar> m = s;
  double eps = jitter;
  for (int attempt = 0; attempt <= 3; ++attempt) {
    Matrix<Scalar> trial = m;
    if (eps > 0) trial.diagonal().array() += Scalar(eps);
    Eigen::LLT<Matrix<Scalar>> llt(trial);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    if (eps == 0) {
      const double scale = m.diagonal().cwiseAbs().maxCoeff();
      eps = 1e-12 * (scale > 0 ? scale : 1.0);
    } else {
      eps *= 10;
    }
  }
  std::ostringstream msg;
  msg << "cholesky_psd: factorization failed, final jitter " << eps;
  throw numerical_error(msg.str());
}

// modified Bessel function of the second kind, real order v > 0
inline double bessel_k(double v, double x) {
  if (!(x > 0)) throw input_error("bessel_k: x must be positive");
  const double k = std::cyl_bessel_k(v, x);
  if (!std::isfinite(k)) throw std::range_error("bessel_k: overflow (x too small for order)");
  return k;
}

// Matern correlation (1/(2^{v-1} Gamma(v))) (d phi)^v K_v(d phi); 1 at d = 0
inline double matern(double d, double v, double phi) {
  if (!(d >= 0) || !(v > 0) || !(phi > 0))
    throw input_error("matern: need d >= 0, v > 0, phi > 0");
  if (d == 0) return 1.0;
  const double x = d * phi;
  return std::pow(x, v) * bessel_k(v, x) / (std::exp2(v - 1) * std::tgamma(v));
}

// draw mean + L z with z standard normal; deterministic given the generator state
template <class D1, class D2, class Generator>
Vector<typename D1::Scalar> sample_mvn(const Eigen::MatrixBase<D1>& mean,
                                       const Eigen::MatrixBase<D2>& cov_factor,
                                       Generator& rng) {
  using Scalar = typename D1::Scalar;
  if (cov_factor.rows() != mean.size() || cov_factor.cols() != mean.size())
    throw input_error("sample_mvn: dimension mismatch between mean and factor");
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector<Scalar> z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = Scalar(gauss(rng));
  return mean + cov_factor * z;
}

// linear-interpolation quantile of an ascending-sorted sample
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw input_error("quantile: empty sample");
  const double h = p * (static_cast<double>(sorted.size()) - 1);
  const size_t lo = static_cast<size_t>(std::floor(h));
  const size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double w = h - static_cast<double>(lo);
  return (1 - w) * sorted[lo] + w * sorted[hi];
}

inline double logit(double p) {
  if (!(p > 0 && p < 1)) throw input_error("logit: argument must lie in (0,1)");
  return std::log(p / (1.0 - p));
}

// numerically stable in both tails
inline double inv_logit(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace smoothgauge
