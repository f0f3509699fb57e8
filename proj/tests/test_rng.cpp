#include <doctest.h>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "vstcs/poisson.hpp"
#include "vstcs/rng.hpp"

using namespace vstcs;

namespace {

// Exact central moments of Poisson(lambda) up to order k via pmf summation;
// independent of the sampler under test.
std::vector<double> exact_central_moments(double lambda, int order) {
  const long long lo =
      std::max(0LL, static_cast<long long>(lambda - 50 * std::sqrt(lambda) - 50));
  const long long hi =
      static_cast<long long>(lambda + 50 * std::sqrt(lambda) + 50);
  std::vector<double> m(order + 1, 0.0);
  for (long long k = lo; k <= hi; ++k) {
    const double logp = k * std::log(lambda) - lambda - std::lgamma(k + 1.0);
    const double p = std::exp(logp);
    const double d = k - lambda;
    double dp = 1;
    for (int j = 0; j <= order; ++j) {
      m[j] += dp * p;
      dp *= d;
    }
  }
  return m;  // m[0] ~ 1, m[1] ~ 0, m[2] = var, ...
}

}  // namespace

TEST_CASE("streams are deterministic and distinct") {
  auto a1 = rng::make_stream(42, 7);
  auto a2 = rng::make_stream(42, 7);
  auto b = rng::make_stream(42, 8);
  bool all_same = true, any_same = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a1.next(), y = a2.next(), z = b.next();
    all_same = all_same && x == y;
    any_same = any_same || x == z;
  }
  CHECK(all_same);
  CHECK_FALSE(any_same);
}

TEST_CASE("uniform doubles live in [0,1) with sane moments") {
  auto g = rng::make_stream(1, 0);
  double sum = 0, sq = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = g.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
    sq += u * u;
  }
  CHECK(std::abs(sum / n - 0.5) < 0.005);
  CHECK(std::abs(sq / n - 1.0 / 3.0) < 0.005);
}

TEST_CASE("standard normal has correct first four moments") {
  auto g = rng::make_stream(3, 0);
  const int n = 400000;
  double m1 = 0, m2 = 0, m3 = 0, m4 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = rng::standard_normal(g);
    m1 += z;
    m2 += z * z;
    m3 += z * z * z;
    m4 += z * z * z * z;
  }
  m1 /= n; m2 /= n; m3 /= n; m4 /= n;
  CHECK(std::abs(m1) < 0.01);
  CHECK(std::abs(m2 - 1.0) < 0.02);
  CHECK(std::abs(m3) < 0.05);
  CHECK(std::abs(m4 - 3.0) < 0.15);
}

TEST_CASE("poisson sampler rejects bad rates") {
  auto g = rng::make_stream(1, 1);
  CHECK_THROWS_AS(rng::sample_poisson(-1.0, g), std::domain_error);
  CHECK_THROWS_AS(rng::sample_poisson(std::nan(""), g), std::domain_error);
  CHECK_THROWS_AS(
      rng::sample_poisson(std::numeric_limits<double>::infinity(), g),
      std::domain_error);
}

TEST_CASE("poisson rate zero draws zero") {
  auto g = rng::make_stream(9, 0);
  for (int i = 0; i < 1000; ++i) CHECK(rng::sample_poisson(0.0, g) == 0);
}

TEST_CASE("poisson matches exact central moments across regimes") {
  // Covers both sampler branches (inversion and transformed rejection).
  const int n = 150000;
  int stream = 0;
  for (double lambda : {0.1, 1.0, 10.0, 1e3, 1e6}) {
    auto g = rng::make_stream(77, ++stream);
    std::vector<double> draws(n);
    const rng::PoissonRate rate(lambda);
    for (int i = 0; i < n; ++i) {
      draws[i] = static_cast<double>(rate.sample(g));
    }
    double mean = 0;
    for (double d : draws) mean += d;
    mean /= n;
    double c2 = 0, c3 = 0, c4 = 0;
    for (double d : draws) {
      const double e = d - lambda;  // central at the true mean
      c2 += e * e;
      c3 += e * e * e;
      c4 += e * e * e * e;
    }
    c2 /= n; c3 /= n; c4 /= n;
    const auto mu = exact_central_moments(lambda, 8);
    // 5-sigma bands from the delta-method variances of sample moments.
    const double se_mean = std::sqrt(mu[2] / n);
    const double se_c2 = std::sqrt(std::max(mu[4] - mu[2] * mu[2], 0.0) / n);
    const double se_c3 = std::sqrt(
        std::max(mu[6] - mu[3] * mu[3] - 6.0 * mu[2] * mu[4] +
                     9.0 * mu[2] * mu[2] * mu[2],
                 0.0) /
        n);
    const double se_c4 = std::sqrt(
        std::max(mu[8] - mu[4] * mu[4] - 8.0 * mu[3] * mu[5] +
                     16.0 * mu[2] * mu[3] * mu[3],
                 0.0) /
        n);
    INFO("lambda = ", lambda);
    CHECK(std::abs(mean - lambda) < 5 * se_mean);
    CHECK(std::abs(c2 - mu[2]) < 5 * se_c2);
    CHECK(std::abs(c3 - mu[3]) < 5 * se_c3);
    CHECK(std::abs(c4 - mu[4]) < 5 * se_c4);
  }
}

TEST_CASE("poisson dispersion at a large rate") {
  // variance/mean for Poisson is 1; a normal approximation with wrong
  // discreteness or clamping would show up here.
  const double lambda = 2e6;
  auto g = rng::make_stream(503, 0);
  const rng::PoissonRate rate(lambda);
  const int n = 10000;
  double mean = 0, m2 = 0;
  std::vector<double> draws(n);
  for (int i = 0; i < n; ++i) draws[i] = static_cast<double>(rate.sample(g));
  for (double d : draws) mean += d;
  mean /= n;
  for (double d : draws) m2 += (d - mean) * (d - mean);
  m2 /= (n - 1);
  const double dispersion = m2 / mean;
  CHECK(dispersion > 0.97);
  CHECK(dispersion < 1.03);
}

TEST_CASE("poisson mean confidence interval at rate 4") {
  auto g = rng::make_stream(6, 0);
  const rng::PoissonRate rate(4.0);
  const int n = 100000;
  double mean = 0;
  for (int i = 0; i < n; ++i) mean += static_cast<double>(rate.sample(g));
  mean /= n;
  CHECK(std::abs(mean - 4.0) <= 3.0 * std::sqrt(4.0 / n));
}
