#pragma once

// Empirical smoothing metrics: squared distance between posterior mean rates
// and crude rates (MSS), its posterior-mean-relative form (RMSS), per-area
// maxima, and the smoothing proportion SP = MSS / sum((rbar - crude)^2).
// Rates enter on a reporting scale (default per 100,000); MSS scales with the
// square of that factor, RMSS linearly, SP not at all.

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "smoothgauge/errors.hpp"
#include "smoothgauge/numerics.hpp"

namespace smoothgauge {

inline constexpr double default_rate_scale = 1e5;

template <class Scalar>
struct SmoothingReportT {
  Scalar mss = 0, rmss = 0, max_mss = 0, max_rmss = 0, sp = 0;
  Scalar rate_scale = Scalar(default_rate_scale);
  Vector<Scalar> per_area_discrepancies;  // (post - crude) * rate_scale
};
using SmoothingReport = SmoothingReportT<double>;

namespace detail {
template <class D1, class D2>
void check_rate_args(const Eigen::MatrixBase<D1>& post, const Eigen::MatrixBase<D2>& crude) {
  if (post.size() != crude.size())
    throw input_error("metrics: posterior and crude rate vectors differ in length");
  if (post.size() == 0) throw input_error("metrics: empty rate vectors");
}
}  // namespace detail

template <class D1, class D2>
typename D1::Scalar mss(const Eigen::MatrixBase<D1>& post_means,
                        const Eigen::MatrixBase<D2>& crude,
                        typename D1::Scalar scale = default_rate_scale) {
  detail::check_rate_args(post_means, crude);
  return ((post_means - crude) * scale).squaredNorm();
}

template <class D1, class D2>
typename D1::Scalar rmss(const Eigen::MatrixBase<D1>& post_means,
                         const Eigen::MatrixBase<D2>& crude,
                         typename D1::Scalar scale = default_rate_scale) {
  detail::check_rate_args(post_means, crude);
  if ((post_means.array() <= 0).any())
    throw input_error("rmss: posterior means must be positive");
  const auto d = ((post_means - crude) * scale).array();
  return (d.square() / (post_means.array() * scale)).sum();
}

template <class D1, class D2>
typename D1::Scalar max_mss(const Eigen::MatrixBase<D1>& post_means,
                            const Eigen::MatrixBase<D2>& crude,
                            typename D1::Scalar scale = default_rate_scale) {
  detail::check_rate_args(post_means, crude);
  return ((post_means - crude) * scale).array().square().maxCoeff();
}

template <class D1, class D2>
typename D1::Scalar max_rmss(const Eigen::MatrixBase<D1>& post_means,
                             const Eigen::MatrixBase<D2>& crude,
                             typename D1::Scalar scale = default_rate_scale) {
  detail::check_rate_args(post_means, crude);
  if ((post_means.array() <= 0).any())
    throw input_error("max_rmss: posterior means must be positive");
  const auto d = ((post_means - crude) * scale).array();
  return (d.square() / (post_means.array() * scale)).maxCoeff();
}

// SP against the shrink-to-mean ceiling; rbar is the unweighted mean of the
// crude rates unless weights (e.g. populations) are supplied
template <class D1, class D2>
typename D1::Scalar smoothing_proportion(const Eigen::MatrixBase<D1>& post_means,
                                         const Eigen::MatrixBase<D2>& crude,
                                         const Vector<typename D1::Scalar>* weights = nullptr) {
  using Scalar = typename D1::Scalar;
  detail::check_rate_args(post_means, crude);
  Scalar rbar;
  if (weights) {
    if (weights->size() != crude.size())
      throw input_error("smoothing_proportion: weight vector length mismatch");
    rbar = (crude.cwiseProduct(*weights)).sum() / weights->sum();
  } else {
    rbar = crude.mean();
  }
  const Scalar denom = (crude.array() - rbar).square().sum();
  if (denom == Scalar(0))
    throw input_error("smoothing_proportion: all crude rates equal (zero denominator)");
  return (post_means - crude).squaredNorm() / denom;
}

template <class Scalar>
SmoothingReportT<Scalar> make_report(const Vector<Scalar>& post_means,
                                     const Vector<Scalar>& crude,
                                     Scalar scale = Scalar(default_rate_scale),
                                     const Vector<Scalar>* sp_weights = nullptr) {
  SmoothingReportT<Scalar> r;
  r.rate_scale = scale;
  r.mss = mss(post_means, crude, scale);
  r.rmss = rmss(post_means, crude, scale);
  r.max_mss = max_mss(post_means, crude, scale);
  r.max_rmss = max_rmss(post_means, crude, scale);
  r.sp = smoothing_proportion(post_means, crude, sp_weights);
  r.per_area_discrepancies = (post_means - crude) * scale;
  return r;
}

// arithmetic mean of each metric over replicates
template <class Scalar>
SmoothingReportT<Scalar> expected_metrics(const std::vector<SmoothingReportT<Scalar>>& reports) {
  if (reports.empty()) throw input_error("expected_metrics: no reports");
  SmoothingReportT<Scalar> out;
  out.rate_scale = reports.front().rate_scale;
  for (const auto& r : reports) {
    out.mss += r.mss;
    out.rmss += r.rmss;
    out.max_mss += r.max_mss;
    out.max_rmss += r.max_rmss;
    out.sp += r.sp;
  }
  const Scalar b = Scalar(reports.size());
  out.mss /= b;
  out.rmss /= b;
  out.max_mss /= b;
  out.max_rmss /= b;
  out.sp /= b;
  return out;
}

}  // namespace smoothgauge
