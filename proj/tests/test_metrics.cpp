#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "smoothgauge/errors.hpp"
#include "smoothgauge/metrics.hpp"

using namespace smoothgauge;

namespace {

VectorXd vec(std::initializer_list<double> xs) {
  VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (const double x : xs) v[i++] = x;
  return v;
}

}  // namespace

TEST_CASE("hand-worked two-area example") {
  // per-100k discrepancies: (2.0 - 1.0) -> 1.0; (20.0 - 22.0) -> -2.0
  const VectorXd post = vec({2.0e-5, 2.0e-4});
  const VectorXd crude = vec({1.0e-5, 2.2e-4});

  CHECK(mss(post, crude) == doctest::Approx(1.0 + 4.0).epsilon(1e-12));
  // posterior means per 100k are 2.0 and 20.0
  CHECK(rmss(post, crude) == doctest::Approx(1.0 / 2.0 + 4.0 / 20.0).epsilon(1e-12));
  CHECK(max_mss(post, crude) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(max_rmss(post, crude) == doctest::Approx(1.0 / 2.0).epsilon(1e-12));

  // SP: rbar = 1.15e-4, both crude rates sit 1.05e-4 away from it
  const double sp = smoothing_proportion(post, crude);
  CHECK(sp == doctest::Approx((1e-10 + 4e-10) / (2 * 1.05e-4 * 1.05e-4)).epsilon(1e-12));
}

TEST_CASE("scaling laws: mss quadratic, rmss linear, sp scale-free") {
  Rng rng(314);
  std::uniform_real_distribution<double> u(1e-5, 1e-3);
  VectorXd post(12), crude(12);
  for (int i = 0; i < 12; ++i) {
    post[i] = u(rng);
    crude[i] = u(rng);
  }
  const double s1 = 1e5, s2 = 3.7e5;
  CHECK(mss(post, crude, s2) ==
        doctest::Approx(mss(post, crude, s1) * (s2 / s1) * (s2 / s1)).epsilon(1e-12));
  CHECK(rmss(post, crude, s2) ==
        doctest::Approx(rmss(post, crude, s1) * (s2 / s1)).epsilon(1e-12));
  CHECK(max_mss(post, crude, s2) ==
        doctest::Approx(max_mss(post, crude, s1) * (s2 / s1) * (s2 / s1)).epsilon(1e-12));
  CHECK(max_rmss(post, crude, s2) ==
        doctest::Approx(max_rmss(post, crude, s1) * (s2 / s1)).epsilon(1e-12));
  // smoothing_proportion has no scale argument at all: both rate vectors enter
  // the same ratio, so rescaling the rates themselves cancels too
  const VectorXd post2 = post * 2.0, crude2 = crude * 2.0;
  CHECK(smoothing_proportion(post2, crude2) ==
        doctest::Approx(smoothing_proportion(post, crude)).epsilon(1e-12));
}

TEST_CASE("max component never exceeds the sum") {
  Rng rng(999);
  std::uniform_real_distribution<double> u(1e-5, 1e-3);
  for (int trial = 0; trial < 30; ++trial) {
    VectorXd post(8), crude(8);
    for (int i = 0; i < 8; ++i) {
      post[i] = u(rng);
      crude[i] = u(rng);
    }
    CHECK(max_mss(post, crude) <= mss(post, crude) + 1e-15);
    CHECK(max_rmss(post, crude) <= rmss(post, crude) + 1e-15);
  }
}

TEST_CASE("smoothing proportion is a ratio, not a probability") {
  const VectorXd crude = vec({1e-4, 2e-4, 3e-4});
  const double rbar = 2e-4;
  // anti-smoothing: push each rate three times as far past its crude value as
  // the mean is
  VectorXd post(3);
  for (int i = 0; i < 3; ++i) post[i] = crude[i] + 3 * (rbar - crude[i]);
  CHECK(smoothing_proportion(post, crude) == doctest::Approx(9.0).epsilon(1e-12));

  // shrink-to-mean exactly gives 1
  CHECK(smoothing_proportion(VectorXd::Constant(3, rbar), crude) ==
        doctest::Approx(1.0).epsilon(1e-12));

  // no smoothing gives 0
  CHECK(smoothing_proportion(crude, crude) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("weighted smoothing proportion uses the weighted mean") {
  const VectorXd crude = vec({1e-4, 3e-4});
  const VectorXd post = vec({1.5e-4, 2.5e-4});
  const VectorXd weights = vec({3.0, 1.0});
  // weighted rbar = 1.5e-4; denominator (0.5e-4)^2 + (1.5e-4)^2
  const double expect = (0.25e-8 + 0.25e-8) / (0.25e-8 + 2.25e-8);
  CHECK(smoothing_proportion(post, crude, &weights) ==
        doctest::Approx(expect).epsilon(1e-12));
  // equal weights reduce to the unweighted form
  const VectorXd ones = VectorXd::Ones(2);
  CHECK(smoothing_proportion(post, crude, &ones) ==
        doctest::Approx(smoothing_proportion(post, crude)).epsilon(1e-12));
}

TEST_CASE("argument validation") {
  const VectorXd a = vec({1e-4, 2e-4});
  const VectorXd b = vec({1e-4, 2e-4, 3e-4});
  CHECK_THROWS_AS(mss(a, b), input_error);
  CHECK_THROWS_AS((mss<VectorXd, VectorXd>(VectorXd(), VectorXd())), input_error);
  const VectorXd nonpos = vec({1e-4, 0.0});
  CHECK_THROWS_AS(rmss(nonpos, a), input_error);
  CHECK_THROWS_AS(max_rmss(nonpos, a), input_error);
  CHECK_THROWS_AS(smoothing_proportion(a, vec({2e-4, 2e-4})), input_error);
  const VectorXd w3 = VectorXd::Ones(3);
  CHECK_THROWS_AS(smoothing_proportion(a, a, &w3), input_error);
}

TEST_CASE("report assembles the individual metrics") {
  const VectorXd post = vec({1.1e-5, 2.0e-5, 4.0e-5});
  const VectorXd crude = vec({1.0e-5, 2.2e-5, 3.7e-5});
  const auto r = make_report(post, crude);
  CHECK(r.mss == doctest::Approx(mss(post, crude)).epsilon(1e-14));
  CHECK(r.rmss == doctest::Approx(rmss(post, crude)).epsilon(1e-14));
  CHECK(r.max_mss == doctest::Approx(max_mss(post, crude)).epsilon(1e-14));
  CHECK(r.max_rmss == doctest::Approx(max_rmss(post, crude)).epsilon(1e-14));
  CHECK(r.sp == doctest::Approx(smoothing_proportion(post, crude)).epsilon(1e-14));
  CHECK(r.rate_scale == default_rate_scale);
  REQUIRE(r.per_area_discrepancies.size() == 3);
  CHECK(r.per_area_discrepancies[0] == doctest::Approx(0.1).epsilon(1e-10));
  CHECK(r.per_area_discrepancies[1] == doctest::Approx(-0.2).epsilon(1e-10));

  std::vector<SmoothingReport> reps = {r, r, r};
  reps[1].mss = r.mss + 3.0;
  reps[2].mss = r.mss - 3.0;
  const auto mean = expected_metrics(reps);
  CHECK(mean.mss == doctest::Approx(r.mss).epsilon(1e-14));
  CHECK(mean.rmss == doctest::Approx(r.rmss).epsilon(1e-14));
  CHECK_THROWS_AS(expected_metrics<double>({}), input_error);
}

TEST_CASE("float instantiation compiles and roughly agrees") {
  Vector<float> post(2), crude(2);
  post << 2.0e-5f, 2.0e-4f;
  crude << 1.0e-5f, 2.2e-4f;
  CHECK(mss(post, crude, 1e5f) == doctest::Approx(5.0).epsilon(1e-3));
}
