#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "vstcs/noise.hpp"
#include "vstcs/rng.hpp"
#include "vstcs/sensing.hpp"
#include "vstcs/signals.hpp"
#include "vstcs/vst.hpp"

using namespace vstcs;

namespace {

// Bisection inverse of the standard normal CDF; test-side oracle only.
double normal_quantile(double p) {
  double lo = -10, hi = 10;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double cdf = 0.5 * std::erfc(-mid / std::sqrt(2.0));
    (cdf < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("transform values match the closed forms") {
  CHECK(vst::apply_vst_scalar(0.0, vst::VstSpec::anscombe()) ==
        doctest::Approx(std::sqrt(0.375)).epsilon(1e-12));
  CHECK(vst::apply_vst_scalar(1.0, vst::VstSpec::freeman_tukey()) ==
        doctest::Approx(1.0 + std::sqrt(2.0)).epsilon(1e-12));
  CHECK(vst::apply_vst_scalar(5.0, vst::VstSpec::bartlett()) ==
        doctest::Approx(std::sqrt(5.0)).epsilon(1e-12));
}

TEST_CASE("gat with sigma 0 reduces to anscombe") {
  const auto gat = vst::VstSpec::gat(0.0);
  const auto at = vst::VstSpec::anscombe();
  for (double y : {0.0, 0.3, 1.0, 7.5, 1e3, 1e8}) {
    CHECK(vst::apply_vst_scalar(y, gat) ==
          doctest::Approx(vst::apply_vst_scalar(y, at)).epsilon(1e-14));
  }
}

TEST_CASE("gat offset is c + sigma^2 for unit gain") {
  const auto gat = vst::VstSpec::gat(200.0);
  CHECK(gat.d() == doctest::Approx(0.375 + 200.0 * 200.0));
  CHECK(gat.offset() == doctest::Approx(gat.d()));
  // GAT(y) = sqrt(y + d) when alpha = 1, g = 0
  CHECK(vst::apply_vst_scalar(100.0, gat) ==
        doctest::Approx(std::sqrt(100.0 + gat.d())).epsilon(1e-14));
}

TEST_CASE("negative argument reports the offending index") {
  Eigen::VectorXd y(3);
  y << 1.0, -7.0, 2.0;
  try {
    vst::apply_vst(y, vst::VstSpec::anscombe());
    FAIL("expected a domain error");
  } catch (const std::domain_error& e) {
    CHECK(std::string(e.what()).find("index 1") != std::string::npos);
  }
}

TEST_CASE("transforms are strictly increasing") {
  auto gen = rng::make_stream(12, 0);
  const vst::VstSpec specs[] = {vst::VstSpec::anscombe(),
                                vst::VstSpec::bartlett(),
                                vst::VstSpec::freeman_tukey(),
                                vst::VstSpec::gat(3.0)};
  for (const auto& spec : specs) {
    for (int i = 0; i < 2000; ++i) {
      const double a = 1e6 * gen.uniform();
      const double b = a + 1e-4 + gen.uniform();
      CHECK(vst::apply_vst_scalar(b, spec) > vst::apply_vst_scalar(a, spec));
    }
  }
}

TEST_CASE("residual magnitude basics") {
  Eigen::VectorXd rates(4);
  rates << 1.0, 2.0, 3.0, 4.0;
  CHECK(vst::residual_magnitude(rates, rates, vst::VstSpec::anscombe()) == 0.0);

  Eigen::VectorXd y(2), zero(2);
  y << 1.0, 1.0;
  zero.setZero();
  CHECK(vst::residual_magnitude(y, zero, vst::VstSpec::bartlett()) ==
        doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));

  // retained-index semantics
  Eigen::VectorXd y2(3), r2(3);
  y2 << 5.0, -100.0, 5.0;
  r2 << 5.0, 1.0, 5.0;
  const std::vector<int> rejected = {1};
  CHECK(vst::residual_magnitude(y2, r2, vst::VstSpec::anscombe(), &rejected) ==
        0.0);
}

TEST_CASE("theorem-1 mean bound on a real instance") {
  // E[R] <= sqrt(N/2) with rates >= 1 (N = 500, I = 1e3, m = 1000).
  const auto mat = sensing::generate_sensing_matrix(500, 1000, 0.5, 4);
  const auto x = signals::uniform_signal(1000, 1e3, 5);
  const auto stats = vst::residual_statistics(
      mat, x, noise::NoiseModel::poisson(), vst::VstSpec::anscombe(), 2000, 6);
  CHECK(stats.mean <= std::sqrt(500.0 / 2.0));
  CHECK(stats.variance <= 0.5);  // paper observes ~0.14
}

TEST_CASE("R^2 is midpoint-convex in the signal") {
  const auto mat = sensing::generate_sensing_matrix(20, 30, 0.5, 8);
  auto gen = rng::make_stream(9, 0);
  const auto spec = vst::VstSpec::anscombe();
  Eigen::VectorXd y(20);
  for (int i = 0; i < 20; ++i) y(i) = std::floor(50.0 * gen.uniform());
  for (int rep = 0; rep < 200; ++rep) {
    Eigen::VectorXd x1(30), x2(30);
    for (int i = 0; i < 30; ++i) {
      x1(i) = 100.0 * gen.uniform();
      x2(i) = 100.0 * gen.uniform();
    }
    const auto r2 = [&](const Eigen::VectorXd& x) {
      const double r = vst::residual_magnitude(y, mat.phi * x, spec);
      return r * r;
    };
    const double mid = r2(0.5 * (x1 + x2));
    CHECK(mid <= 0.5 * (r2(x1) + r2(x2)) + 1e-9);
  }
}

TEST_CASE("ks statistic at exact gaussian quantiles") {
  const int n = 100;
  Eigen::VectorXd samples(n);
  for (int i = 0; i < n; ++i) {
    samples(i) = normal_quantile((i + 0.5) / n);
  }
  const auto ks = vst::ks_test(samples, 0.0, 1.0);
  CHECK(ks.statistic <= 0.5 / n + 1e-9);
  CHECK_FALSE(ks.reject_1pct);
}

TEST_CASE("ks calibration: gaussian draws rarely rejected at 1%") {
  int rejections = 0;
  for (int rep = 0; rep < 100; ++rep) {
    auto gen = rng::make_stream(100, rep);
    Eigen::VectorXd samples(2000);
    for (int i = 0; i < 2000; ++i) samples(i) = rng::standard_normal(gen);
    if (vst::ks_test(samples, 0.0, 1.0).reject_1pct) ++rejections;
  }
  CHECK(rejections <= 2);  // >= 98% non-rejection
}

TEST_CASE("ks power: uniform draws against a fitted gaussian") {
  auto gen = rng::make_stream(200, 0);
  Eigen::VectorXd samples(2000);
  for (int i = 0; i < 2000; ++i) samples(i) = gen.uniform();
  const double mean = samples.mean();
  const double var =
      (samples.array() - mean).square().sum() / (samples.size() - 1);
  CHECK(vst::ks_test(samples, mean, var).reject_1pct);
}

TEST_CASE("ks parameter validation") {
  Eigen::VectorXd s(4);
  s << 1, 2, 3, 4;
  CHECK_THROWS_AS(vst::ks_test(s, 0, 1), std::invalid_argument);
  Eigen::VectorXd s8 = Eigen::VectorXd::LinSpaced(8, 0, 1);
  CHECK_THROWS_AS(vst::ks_test(s8, 0, 0.0), std::invalid_argument);
}

TEST_CASE("residual statistics: serial reference matches parallel kernel") {
  const auto mat = sensing::generate_sensing_matrix(50, 80, 0.5, 13);
  const auto x = signals::uniform_signal(80, 500.0, 14);
  const Eigen::VectorXd rates = mat.phi * x;
  const auto model = noise::NoiseModel::poisson_gaussian(20.0);
  const auto spec = vst::VstSpec::gat(20.0);
  const auto par = vst::residual_statistics(rates, model, spec, 300, 15);
  const auto ser = vst::residual_statistics_serial(rates, model, spec, 300, 15);
  CHECK(par.samples == ser.samples);
  CHECK(par.mean == ser.mean);
  CHECK(par.variance == ser.variance);
  CHECK(par.ks_statistic == ser.ks_statistic);
}

TEST_CASE("one residual trial reproduces sample_measurements") {
  const auto mat = sensing::generate_sensing_matrix(30, 40, 0.5, 20);
  const auto x = signals::uniform_signal(40, 200.0, 21);
  const Eigen::VectorXd rates = mat.phi * x;
  const auto model = noise::NoiseModel::poisson();
  const auto spec = vst::VstSpec::anscombe();
  const auto stats = vst::residual_statistics(rates, model, spec, 5, 22);
  for (int t = 0; t < 5; ++t) {
    const auto ms =
        noise::sample_measurements(rates, model, vst::trial_seed(22, t));
    CHECK(stats.samples(t) ==
          doctest::Approx(vst::residual_magnitude(ms, spec)).epsilon(1e-14));
  }
}

TEST_CASE("residual statistics validates n_trials") {
  Eigen::VectorXd rates = Eigen::VectorXd::Constant(4, 1.0);
  CHECK_THROWS_AS(vst::residual_statistics(rates, noise::NoiseModel::poisson(),
                                           vst::VstSpec::anscombe(), 1, 1),
                  std::invalid_argument);
}
