#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "jrt/diagnostics.hpp"
#include "jrt/math_util.hpp"
#include "jrt/rng.hpp"

using namespace jrt;
using namespace jrt::diag;

TEST_CASE("RA pattern fit: perfect and single-item values") {
  // All p = 1, all y = 1: the log-likelihood term vanishes (up to clamping).
  Eigen::VectorXd y = Eigen::VectorXd::Ones(4);
  Eigen::VectorXd p = Eigen::VectorXd::Ones(4);
  const RaFitDraw perfect = ra_pattern_fit(y, p);
  CHECK(perfect.l0 == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));

  // Single item at p = 0.5, y = 1: l0 = ln 2.
  Eigen::VectorXd y1(1), p1(1);
  y1 << 1.0;
  p1 << 0.5;
  const RaFitDraw single = ra_pattern_fit(y1, p1);
  CHECK(single.l0 == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("RA flag threshold is the 95th normal percentile") {
  CHECK(math::normal_quantile(0.95) == doctest::Approx(1.645).epsilon(5e-4));
  Eigen::VectorXd p(40), y(40);
  for (int i = 0; i < 40; ++i) p[i] = 0.7;
  // Aberrant: all answers against the model's expectation.
  y.setZero();
  const RaFitDraw bad = ra_pattern_fit(y, p);
  CHECK(bad.ls > 1.645);
  CHECK(bad.flag);
  y.setOnes();
  const RaFitDraw good = ra_pattern_fit(y, p);
  CHECK(!good.flag);
  CHECK(good.sig_prob > 0.5);
}

TEST_CASE("RT pattern fit: zeros, chi-squared tail, and the K=170 threshold") {
  Eigen::VectorXd resid = Eigen::VectorXd::Zero(5);
  Eigen::VectorXd s2 = Eigen::VectorXd::Ones(5);
  const RtFitDraw zero = rt_pattern_fit(resid, s2);
  CHECK(zero.lt == 0.0);
  CHECK(zero.sig_prob == doctest::Approx(1.0));
  CHECK(!zero.flag);

  // One cell with standardized residual 2: lt = 4, p = P(chi2_1 > 4) ~ .0455.
  Eigen::VectorXd r1(1), s1(1);
  r1 << 2.0;
  s1 << 1.0;
  const RtFitDraw one = rt_pattern_fit(r1, s1);
  CHECK(one.lt == doctest::Approx(4.0));
  CHECK(one.sig_prob == doctest::Approx(0.0455).epsilon(2e-3));

  CHECK(chi2_critical(170) == doctest::Approx(201.4).epsilon(5e-4));
}

TEST_CASE("joint flag is the conjunction; its mean is below each margin") {
  CHECK(joint_flag(true, true));
  CHECK(!joint_flag(true, false));
  CHECK(!joint_flag(false, true));
  CHECK(!joint_flag(false, false));

  Rng rng(11);
  int a = 0, b = 0, both = 0;
  const int n = 2000;
  for (int i = 0; i < n; ++i) {
    const bool fa = rng.uniform() < 0.3;
    const bool fb = rng.uniform() < 0.4;
    a += fa;
    b += fb;
    both += joint_flag(fa, fb);
  }
  CHECK(both <= a);
  CHECK(both <= b);
}

TEST_CASE("latent RA residual expectation and extremeness") {
  const LatentResidual r1 = latent_residual_ra(1.0, 0.0);
  CHECK(r1.expected == doctest::Approx(std::sqrt(2.0 / math::kPi)).epsilon(1e-10));
  const LatentResidual r0 = latent_residual_ra(0.0, 0.0);
  CHECK(r0.expected == doctest::Approx(-std::sqrt(2.0 / math::kPi)).epsilon(1e-10));
  // P(|e| > 2 | y = 1, eta = 0) = Phi(-2) / Phi(0).
  CHECK(r1.extreme_prob ==
        doctest::Approx(math::normal_cdf(-2.0) / 0.5).epsilon(1e-10));
  CHECK(r1.extreme_prob == doctest::Approx(0.0455).epsilon(2e-3));
}

TEST_CASE("latent RA residual integrates to zero over the response distribution") {
  // Phi(eta) E[e | y=1] + (1 - Phi(eta)) E[e | y=0] = 0 identically.
  for (double eta = -4.0; eta <= 4.0; eta += 0.37) {
    const double p = math::normal_cdf(eta);
    const double total = p * latent_residual_ra(1.0, eta).expected +
                         (1.0 - p) * latent_residual_ra(0.0, eta).expected;
    CHECK(std::fabs(total) < 1e-12);
  }
}

TEST_CASE("RT residual extremeness probabilities") {
  CHECK(rt_residual_extreme_prob(0.0, 1.0, 2.0) ==
        doctest::Approx(2.0 * math::normal_cdf(-2.0)).epsilon(1e-12));
  CHECK(rt_residual_extreme_prob(0.0, 1.0, 2.0) == doctest::Approx(0.0455).epsilon(2e-3));
  // C = 0: the two tails cover the whole line.
  CHECK(rt_residual_extreme_prob(1.3, 2.0, 0.0) == doctest::Approx(1.0).epsilon(1e-12));
  // resid/sigma = 3, C = 2: Phi(-5) + 1 - Phi(-1).
  const double expect = math::normal_cdf(-5.0) + 1.0 - math::normal_cdf(-1.0);
  CHECK(rt_residual_extreme_prob(3.0, 1.0, 2.0) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(expect == doctest::Approx(0.8413).epsilon(1e-3));
}

TEST_CASE("RT residual extremeness is monotone in the residual magnitude") {
  double prev = rt_residual_extreme_prob(0.0, 1.0, 2.0);
  for (double e = 0.1; e < 6.0; e += 0.1) {
    const double p = rt_residual_extreme_prob(e, 1.0, 2.0);
    CHECK(p >= prev);
    prev = p;
    CHECK(rt_residual_extreme_prob(-e, 1.0, 2.0) == doctest::Approx(p).epsilon(1e-12));
  }
}

TEST_CASE("KS distance and p-value") {
  // Single residual: n < 5 is not applicable.
  Eigen::VectorXd one(1);
  one << 0.0;
  CHECK(!ks_test_item(one).applicable);

  // Residuals at the normal quantiles of (i-.5)/n give D = 1/(2n).
  const int n = 20;
  Eigen::VectorXd grid(n);
  for (int i = 0; i < n; ++i) grid[i] = math::normal_quantile((i + 0.5) / n);
  const KsResult ks = ks_test_item(grid);
  CHECK(ks.applicable);
  CHECK(ks.d == doctest::Approx(1.0 / (2.0 * n)).epsilon(1e-9));

  // D = 1.36 / sqrt(n) sits at the 5% point of the Kolmogorov distribution.
  CHECK(math::kolmogorov_sf(1.36) == doctest::Approx(0.05).epsilon(0.03));

  // Invariance under person relabeling.
  Rng rng(5);
  Eigen::VectorXd sample(50);
  for (int i = 0; i < 50; ++i) sample[i] = rng.normal();
  const KsResult base = ks_test_item(sample);
  Eigen::VectorXd shuffled = sample.reverse();
  std::swap(shuffled[3], shuffled[20]);
  const KsResult perm = ks_test_item(shuffled);
  CHECK(base.d == doctest::Approx(perm.d).epsilon(1e-14));
  CHECK(base.p_value == doctest::Approx(perm.p_value).epsilon(1e-14));
  CHECK(base.d <= 1.0);
  CHECK(base.d > 0.0);
}

TEST_CASE("item fit mirrors person fit on transposed patterns") {
  // A single person at p = .5 answering correctly: the column statistic l0 is
  // ln 2, identical to the person-side computation.
  Eigen::VectorXd y(1), p(1);
  y << 1.0;
  p << 0.5;
  CHECK(ra_pattern_fit(y, p).l0 == doctest::Approx(std::log(2.0)));
}

TEST_CASE("accumulator averages over draws and respects cell masks") {
  const int n = 3, k = 2;
  FitAccumulator acc(n, k);
  Eigen::MatrixXd y(n, k), rt(n, k), eta(n, k), mu(n, k);
  y << 1, 0, 1, 1, 0, 0;
  rt << 4.1, 3.9, 4.0, 4.2, 3.8, 4.0;
  eta.setZero();
  mu.setConstant(4.0);
  Eigen::VectorXd s2 = Eigen::VectorXd::Constant(k, 0.04);
  Mask s = Mask::Ones(n, k);
  Mask use_y = Mask::Ones(n, k);
  Mask use_rt = Mask::Ones(n, k);
  use_y(2, 1) = 0;  // one cell excluded
  use_rt(2, 1) = 0;

  DrawView view;
  view.y = &y;
  view.rt = &rt;
  view.eta = &eta;
  view.rt_mu = &mu;
  view.sigma2 = &s2;
  view.s = &s;
  view.use_y = &use_y;
  view.use_rt = &use_rt;
  acc.accumulate(view);
  acc.accumulate(view);
  const FitReport rep = acc.finalize();
  CHECK(rep.draws == 2);
  // Excluded cell carries no value.
  CHECK(std::isnan(rep.eap_resid(2, 1)));
  CHECK(std::isnan(rep.eap_l0(2, 1)));
  CHECK(std::isfinite(rep.eap_resid(0, 0)));
  // Joint flag probability never exceeds either margin.
  for (int i = 0; i < n; ++i) {
    CHECK(rep.eapcp3[i] <= rep.eapcp1[i] + 1e-12);
    CHECK(rep.eapcp3[i] <= rep.eapcp2[i] + 1e-12);
  }
  // Identical draws: averaging changes nothing.
  CHECK(rep.lzpt[0] == doctest::Approx((0.1 * 0.1 + 0.1 * 0.1) / 0.04).epsilon(1e-9));
  // Cell log-likelihood at p = .5 is -ln 2.
  CHECK(rep.eap_l0(0, 0) == doctest::Approx(-std::log(2.0)).epsilon(1e-9));
}
