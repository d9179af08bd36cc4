#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "mpe/distkit.hpp"

using namespace mpe;

namespace {

std::vector<double> normal_sample(std::size_t n, std::uint64_t seed, double mean = 0.0,
                                  double sd = 1.0) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal(mean, sd);
  return v;
}

std::vector<double> uniform_sample(std::size_t n, std::uint64_t seed, double lo = 0.0,
                                   double hi = 1.0) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

// O(n^2) mean absolute difference; the brute-force Gini oracle
double gini_pairwise(const std::vector<double>& v) {
  double mu = 0.0;
  for (double x : v) mu += x;
  mu /= static_cast<double>(v.size());
  double mad = 0.0;
  for (double a : v) {
    for (double b : v) mad += std::abs(a - b);
  }
  mad /= static_cast<double>(v.size()) * static_cast<double>(v.size());
  return mad / (2.0 * mu);
}

}  // namespace

TEST_CASE("ecdf: step function values") {
  EmpiricalDistribution d({1, 2, 3, 4});
  CHECK(ecdf_eval(d, 2.5) == doctest::Approx(0.5));
  CHECK(ecdf_eval(d, 0.0) == 0.0);
  CHECK(ecdf_eval(d, 4.0) == 1.0);
  CHECK(ecdf_eval(d, 2.0) == doctest::Approx(0.5));  // right continuous
}

TEST_CASE("quantile: left-continuous generalized inverse") {
  EmpiricalDistribution d({1, 2, 3, 4});
  CHECK(quantile(d, 0.5) == 2.0);
  CHECK(quantile(d, 0.51) == 3.0);
  EmpiricalDistribution degenerate({7, 7});
  CHECK(quantile(degenerate, 0.2) == 7.0);
  CHECK(quantile(degenerate, 0.9) == 7.0);
  CHECK_THROWS_AS(quantile(d, 0.0), std::domain_error);
  CHECK_THROWS_AS(quantile(d, 1.0), std::domain_error);
}

TEST_CASE("quantile/ecdf consistency on a grid") {
  EmpiricalDistribution d(normal_sample(500, 7));
  for (double tau : {0.01, 0.1, 0.25, 0.5, 0.77, 0.99}) {
    double q = quantile(d, tau);
    CHECK(ecdf_eval(d, q) >= tau);
    CHECK(ecdf_eval(d, q - 1e-9) < tau);
  }
}

TEST_CASE("kde: standard normal density at zero") {
  EmpiricalDistribution d(normal_sample(10000, 42));
  double f = kde_eval(d, KernelSpec::silverman(), 0.0);
  CHECK(f == doctest::Approx(0.3989).epsilon(0.05));
  CHECK(std::abs(f - 0.3989) < 0.02);
}

TEST_CASE("kde: single kernel closed form at a point mass") {
  EmpiricalDistribution d({5.0, 5.0, 5.0});
  double f = kde_eval(d, KernelSpec::fixed(1.0), 5.0);
  CHECK(f == doctest::Approx(0.3989422804).epsilon(1e-6));
}

TEST_CASE("kde: uniform density") {
  EmpiricalDistribution d(uniform_sample(10000, 3));
  double f = kde_eval(d, KernelSpec::silverman(), 0.5);
  CHECK(std::abs(f - 1.0) < 0.05);
}

TEST_CASE("kde: silverman on a degenerate sample is a configuration error") {
  EmpiricalDistribution d({2.0, 2.0, 2.0});
  CHECK_THROWS_AS(kde_eval(d, KernelSpec::silverman(), 2.0), ConfigurationError);
}

TEST_CASE("kde integrates to one") {
  EmpiricalDistribution d(normal_sample(2000, 11));
  double h = silverman_bandwidth(d);
  double lo = d.min() - 6.0 * h, hi = d.max() + 6.0 * h;
  const int grid = 4000;
  double step = (hi - lo) / grid;
  double acc = 0.0;
  for (int i = 0; i <= grid; ++i) {
    double w = (i == 0 || i == grid) ? 0.5 : 1.0;
    acc += w * kde_eval(d, KernelSpec::silverman(), lo + i * step);
  }
  acc *= step;
  CHECK(std::abs(acc - 1.0) < 1e-3);
}

TEST_CASE("lorenz: equality line and corner cases") {
  EmpiricalDistribution eq({3, 3, 3, 3});
  for (double p : {0.0, 0.25, 0.4, 0.75, 1.0}) {
    CHECK(lorenz(eq, p) == doctest::Approx(p).epsilon(1e-12));
  }
  EmpiricalDistribution concentrated({0, 0, 0, 1});
  CHECK(lorenz(concentrated, 0.75) == 0.0);
  CHECK_THROWS_AS(lorenz(EmpiricalDistribution({-1.0, 2.0}), 0.5), std::domain_error);
}

TEST_CASE("lorenz: uniform closed form") {
  EmpiricalDistribution d(uniform_sample(10000, 5));
  // int_0^0.5 tau dtau / 0.5 = 0.25
  CHECK(std::abs(lorenz(d, 0.5) - 0.25) < 0.01);
}

TEST_CASE("lorenz is nondecreasing and convex") {
  EmpiricalDistribution d(uniform_sample(400, 9, 1.0, 3.0));
  double prev = 0.0, prev_diff = 0.0;
  bool first = true;
  for (int i = 1; i <= 50; ++i) {
    double p = i / 50.0;
    double l = lorenz(d, p);
    CHECK(l >= prev - 1e-12);
    double diff = l - prev;
    if (!first) CHECK(diff - prev_diff >= -1e-10);
    prev = l;
    prev_diff = diff;
    first = false;
  }
}

TEST_CASE("gini: closed forms and the pairwise oracle") {
  EmpiricalDistribution eq({2, 2, 2, 2});
  CHECK(gini(eq) == doctest::Approx(0.0).epsilon(1e-12));

  EmpiricalDistribution u01(uniform_sample(100000, 13));
  CHECK(std::abs(gini(u01) - 1.0 / 3.0) < 0.01);

  EmpiricalDistribution u12(uniform_sample(100000, 17, 1.0, 2.0));
  CHECK(std::abs(gini(u12) - 1.0 / 9.0) < 0.005);

  Rng rng(23);
  for (int rep = 0; rep < 5; ++rep) {
    std::size_t n = 50 + static_cast<std::size_t>(rng.uniform() * 450);
    std::vector<double> v(n);
    for (auto& x : v) x = std::exp(rng.normal());
    EmpiricalDistribution d(v);
    CHECK(std::abs(gini(d) - gini_pairwise(v)) < 1e-6);
  }
}

TEST_CASE("phi_weight: affine in tau with slope equal to the mean") {
  EmpiricalDistribution eq({1.5, 1.5, 1.5});
  for (double tau : {0.0, 0.3, 0.5, 1.0}) {
    CHECK(phi_weight(eq, tau) == doctest::Approx(1.5 * (tau - 0.5)).epsilon(1e-12));
  }

  EmpiricalDistribution d(uniform_sample(2000, 29, 0.5, 2.5));
  double slope = phi_weight(d, 1.0) - phi_weight(d, 0.0);
  CHECK(std::abs(slope - d.mean()) < 1e-9);
  double mid = phi_weight(d, 0.25) + phi_weight(d, 0.75);
  CHECK(std::abs(mid - 2.0 * phi_weight(d, 0.5)) < 1e-9);  // affine

  EmpiricalDistribution u01(uniform_sample(100000, 31));
  CHECK(std::abs(phi_weight(u01, 0.5) - (-1.0 / 12.0)) < 0.005);
}

TEST_CASE("weighted distributions: mixture semantics") {
  EmpiricalDistribution d({1.0, 2.0, 3.0}, {0.2, 0.3, 0.5});
  CHECK(d.mean() == doctest::Approx(0.2 + 0.6 + 1.5));
  CHECK(ecdf_eval(d, 2.0) == doctest::Approx(0.5));
  CHECK(quantile(d, 0.5) == 2.0);
  CHECK(quantile(d, 0.51) == 3.0);
}

TEST_CASE("tau grid covers [0.005, 0.995] with unit-ish trapezoid mass") {
  const auto& grid = tau_grid();
  const auto& w = tau_grid_weights();
  CHECK(grid.size() == 512);
  CHECK(grid.front() == doctest::Approx(0.005));
  CHECK(grid.back() == doctest::Approx(0.995));
  double total = 0.0;
  for (double x : w) total += x;
  CHECK(total == doctest::Approx(0.99).epsilon(1e-12));
}
