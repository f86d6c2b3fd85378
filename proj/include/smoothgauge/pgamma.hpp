#pragma once

// Closed-form Poisson-Gamma baseline. A Gamma(a, b) prior on relative risk
// eta (mean mu = a/b, variance sigma2 = a/b^2) conjugates with Poisson counts
// to Gamma(a + O, b + E), so the posterior-mean-minus-crude discrepancy needs
// no sampling:
//     d_i = mu_r (mu_r - rhat_i) / (sigma2_r n_i + mu_r)
// on the rate scale (mu_r = rbar mu_eta, sigma2_r = rbar^2 sigma2_eta). The
// replicate curve study draws eta ~ Gamma, O ~ Poisson(E eta) and evaluates
// the smoothing metrics from this closed form across a (mu_eta, sigma2_eta)
// grid, together with the exact sigma2 = 0 reference lines
//     MSS_ref  = scale^2 rbar^2 mu_eta sum_i 1/E_i
//     RMSS_ref = scale   rbar          sum_i 1/E_i   (mu_eta cancels)
// (for the max metrics the reference is the largest per-area expected term).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "smoothgauge/errors.hpp"
#include "smoothgauge/metrics.hpp"
#include "smoothgauge/numerics.hpp"

namespace smoothgauge {

template <class Scalar>
struct GammaPriorT {
  Scalar mu;      // prior mean
  Scalar sigma2;  // prior variance
  Scalar shape() const { return mu * mu / sigma2; }
  Scalar rate() const { return mu / sigma2; }
};
using GammaPrior = GammaPriorT<double>;

template <class Scalar>
struct GammaPosteriorT {
  Scalar shape, rate;
  Scalar mean() const { return shape / rate; }
};
using GammaPosterior = GammaPosteriorT<double>;

// E_i = n_i * (sum O / sum n): expected counts under internal standardization
template <class D1, class D2>
Vector<typename D2::Scalar> internal_expected_counts(const Eigen::MatrixBase<D1>& O,
                                                     const Eigen::MatrixBase<D2>& n) {
  using Scalar = typename D2::Scalar;
  if (O.size() != n.size())
    throw input_error("internal_expected_counts: count and population lengths differ");
  if ((n.array() <= 0).any())
    throw input_error("internal_expected_counts: populations must be positive");
  const Scalar total_n = n.sum();
  if (total_n <= 0) throw input_error("internal_expected_counts: zero total population");
  const Scalar rbar = Scalar(O.sum()) / total_n;
  return n * rbar;
}

template <class Scalar>
GammaPosteriorT<Scalar> pg_posterior(const GammaPriorT<Scalar>& prior, Scalar O, Scalar E) {
  if (!(prior.sigma2 > 0)) throw input_error("pg_posterior: prior variance must be positive");
  return {prior.shape() + O, prior.rate() + E};
}

// shrinkage weight on the crude rate; 0 = shrink fully to the prior mean
template <class Scalar>
Scalar pg_weight(Scalar mu_r, Scalar sigma2_r, Scalar n_i) {
  if (!(mu_r > 0) || !(n_i > 0) || !(sigma2_r >= 0))
    throw input_error("pg_weight: need mu_r > 0, sigma2_r >= 0, n_i > 0");
  if (sigma2_r == 0) return Scalar(0);  // degenerate prior pins the rate at mu_r
  return n_i / (mu_r / sigma2_r + n_i);
}

// posterior mean minus crude rate; mu_r - rhat at sigma2_r = 0, -> 0 as
// sigma2_r grows
template <class Scalar>
Scalar pg_discrepancy(Scalar mu_r, Scalar sigma2_r, Scalar n_i, Scalar rhat_i) {
  if (!(mu_r > 0) || !(n_i > 0) || !(sigma2_r >= 0))
    throw input_error("pg_discrepancy: need mu_r > 0, sigma2_r >= 0, n_i > 0");
  return mu_r * (mu_r - rhat_i) / (sigma2_r * n_i + mu_r);
}

struct PgCurveRow {
  double mu_eta = 0, sigma2_eta = 0;
  std::string metric;  // mss | rmss | max_mss | max_rmss
  double q05 = 0, q25 = 0, q50 = 0, q75 = 0, q95 = 0;
  double reference_at_zero = 0;
  double mean = 0;  // replicate mean, alongside the quantiles
};

namespace detail {

inline Rng replicate_rng(uint64_t seed, uint64_t b) {
  return Rng(seed ^ (0x9E3779B97F4A7C15ull * (b + 1)));
}

}  // namespace detail

// replicate study over a (mu_eta, sigma2_eta) grid for fixed expected counts
// E and pooled rate rbar; closed-form posterior, no MCMC. Deterministic under
// seed; each replicate has its own derived stream.
inline std::vector<PgCurveRow> pg_curve_study(const VectorXd& E, double rbar,
                                              const std::vector<double>& mu_eta_grid,
                                              const std::vector<double>& sigma2_eta_grid,
                                              int B, uint64_t seed,
                                              double scale = default_rate_scale) {
  if (E.size() == 0 || (E.array() <= 0).any())
    throw input_error("pg_curve_study: expected counts must be positive");
  if (!(rbar > 0)) throw input_error("pg_curve_study: rbar must be positive");
  if (mu_eta_grid.empty() || sigma2_eta_grid.empty() || B < 1)
    throw input_error("pg_curve_study: empty grid or B < 1");
  const Eigen::Index A = E.size();
  const double sum_inv_E = E.cwiseInverse().sum();
  const double max_inv_E = E.cwiseInverse().maxCoeff();

  std::vector<PgCurveRow> rows;
  for (const double mu : mu_eta_grid) {
    if (!(mu > 0)) throw input_error("pg_curve_study: mu_eta must be positive");
    for (const double s2 : sigma2_eta_grid) {
      if (!(s2 >= 0)) throw input_error("pg_curve_study: sigma2_eta must be >= 0");
      std::vector<double> v_mss(B), v_rmss(B), v_maxmss(B), v_maxrmss(B);
      for (int b = 0; b < B; ++b) {
        Rng rng = detail::replicate_rng(seed, static_cast<uint64_t>(b));
        double acc_mss = 0, acc_rmss = 0, max_m = 0, max_r = 0;
        for (Eigen::Index i = 0; i < A; ++i) {
          double eta = mu;
          if (s2 > 0) {
            std::gamma_distribution<double> gamma(mu * mu / s2, s2 / mu);
            eta = gamma(rng);
          }
          std::poisson_distribution<long> pois(E[i] * eta);
          const double O = static_cast<double>(pois(rng));
          const double eta_hat = O / E[i];
          const double d_eta = mu * (mu - eta_hat) / (s2 * E[i] + mu);
          const double post_eta = eta_hat + d_eta;
          const double d = scale * rbar * d_eta;       // rate-scale discrepancy
          const double post = scale * rbar * post_eta; // rate-scale posterior mean
          acc_mss += d * d;
          acc_rmss += d * d / post;
          max_m = std::max(max_m, d * d);
          max_r = std::max(max_r, d * d / post);
        }
        v_mss[b] = acc_mss;
        v_rmss[b] = acc_rmss;
        v_maxmss[b] = max_m;
        v_maxrmss[b] = max_r;
      }
      const double mss_ref = scale * scale * rbar * rbar * mu * sum_inv_E;
      const double rmss_ref = scale * rbar * sum_inv_E;
      const double maxmss_ref = scale * scale * rbar * rbar * mu * max_inv_E;
      const double maxrmss_ref = scale * rbar * max_inv_E;
      const std::pair<const char*, std::pair<std::vector<double>*, double>> specs[] = {
          {"mss", {&v_mss, mss_ref}},
          {"rmss", {&v_rmss, rmss_ref}},
          {"max_mss", {&v_maxmss, maxmss_ref}},
          {"max_rmss", {&v_maxrmss, maxrmss_ref}},
      };
      for (const auto& [name, payload] : specs) {
        auto& vals = *payload.first;
        PgCurveRow row;
        row.mu_eta = mu;
        row.sigma2_eta = s2;
        row.metric = name;
        row.mean = Eigen::Map<const VectorXd>(vals.data(), vals.size()).mean();
        std::sort(vals.begin(), vals.end());
        row.q05 = quantile_sorted(vals, 0.05);
        row.q25 = quantile_sorted(vals, 0.25);
        row.q50 = quantile_sorted(vals, 0.50);
        row.q75 = quantile_sorted(vals, 0.75);
        row.q95 = quantile_sorted(vals, 0.95);
        row.reference_at_zero = payload.second;
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

// same study driven by raw data: E by internal standardization, rbar pooled
inline std::vector<PgCurveRow> pg_curve_study_from_data(
    const VectorXd& O, const VectorXd& n, const std::vector<double>& mu_eta_grid,
    const std::vector<double>& sigma2_eta_grid, int B, uint64_t seed,
    double scale = default_rate_scale) {
  const VectorXd E = internal_expected_counts(O, n);
  return pg_curve_study(E, O.sum() / n.sum(), mu_eta_grid, sigma2_eta_grid, B, seed, scale);
}

}  // namespace smoothgauge
