#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "mpe/functionals.hpp"

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

DirectionFunction neg_density_direction(const EmpiricalDistribution& dist) {
  double h = silverman_bandwidth(dist);
  KernelSpec spec = KernelSpec::fixed(h);
  return DirectionFunction::from_callable(
      [&dist, spec](double y) { return -kde_eval(dist, spec, y); }, dist);
}

}  // namespace

TEST_CASE("eval: the four functionals") {
  EmpiricalDistribution u01(uniform_sample(20000, 3));
  CHECK(std::abs(eval(FunctionalSpec::id_at(0.5), u01) - 0.5) < 0.01);
  EmpiricalDistribution small({1, 2, 3});
  CHECK(eval(FunctionalSpec::mean(), small) == doctest::Approx(2.0));
  EmpiricalDistribution eq({4, 4, 4});
  CHECK(eval(FunctionalSpec::gini(), eq) == doctest::Approx(0.0));
  CHECK(eval(FunctionalSpec::quantile(0.5), small) == 2.0);
}

TEST_CASE("hadamard id_at returns the direction value") {
  EmpiricalDistribution d(normal_sample(500, 7));
  DirectionFunction h = DirectionFunction::from_callable([](double y) { return y * y; }, d);
  auto res = hadamard_apply(FunctionalSpec::id_at(0.7), d, KernelSpec::silverman(), h);
  CHECK(res.value == doctest::Approx(0.49).epsilon(0.02));
  CHECK(res.n_trimmed == 0);
}

TEST_CASE("hadamard quantile and mean: location direction moves at unit rate") {
  EmpiricalDistribution d(normal_sample(100000, 11));
  DirectionFunction h = neg_density_direction(d);
  auto q = hadamard_apply(FunctionalSpec::quantile(0.5), d, KernelSpec::silverman(), h);
  CHECK(std::abs(q.value - 1.0) < 0.05);
  auto m = hadamard_apply(FunctionalSpec::mean(), d, KernelSpec::silverman(), h);
  CHECK(std::abs(m.value - 1.0) < 0.05);
}

TEST_CASE("hadamard is linear in the direction") {
  EmpiricalDistribution d(uniform_sample(5000, 13, 1.0, 2.0));
  DirectionFunction h1 = DirectionFunction::from_callable([](double y) { return std::sin(y); }, d);
  DirectionFunction h2 = DirectionFunction::from_callable([](double y) { return y; }, d);
  DirectionFunction combo = DirectionFunction::from_callable(
      [](double y) { return 2.0 * std::sin(y) - 3.0 * y; }, d);
  for (auto fun : {FunctionalSpec::quantile(0.3), FunctionalSpec::mean(), FunctionalSpec::gini()}) {
    double a = hadamard_apply(fun, d, KernelSpec::silverman(), h1).value;
    double b = hadamard_apply(fun, d, KernelSpec::silverman(), h2).value;
    double c = hadamard_apply(fun, d, KernelSpec::silverman(), combo).value;
    CHECK(std::abs(c - (2.0 * a - 3.0 * b)) < 1e-9);
  }
}

TEST_CASE("mean derivative equals the change-of-variables integral") {
  EmpiricalDistribution d(normal_sample(200000, 17));
  // a smooth direction concentrated well inside the support
  auto h_fn = [](double y) { return std::exp(-y * y) * y; };
  DirectionFunction h = DirectionFunction::from_callable(h_fn, d);
  double lhs = hadamard_apply(FunctionalSpec::mean(), d, KernelSpec::silverman(), h).value;
  // -int h(y) dy over the trimmed support by fine quadrature
  double lo = quantile(d, 0.005), hi = quantile(d, 0.995);
  const int grid = 20000;
  double step = (hi - lo) / grid;
  double rhs = 0.0;
  for (int i = 0; i <= grid; ++i) {
    double w = (i == 0 || i == grid) ? 0.5 : 1.0;
    rhs += w * h_fn(lo + i * step);
  }
  rhs *= -step;
  CHECK(std::abs(lhs - rhs) < 0.02 * std::max(std::abs(rhs), 0.1));
}

TEST_CASE("gini derivative sanity: location shift of a positive law") {
  EmpiricalDistribution d(uniform_sample(100000, 19, 1.0, 2.0));
  DirectionFunction h = neg_density_direction(d);
  double lhs = hadamard_apply(FunctionalSpec::gini(), d, KernelSpec::silverman(), h).value;
  double target = -gini(d) / d.mean();  // shifted-uniform closed form
  CHECK(std::abs(lhs - target) < 0.05 * std::abs(target));
}

TEST_CASE("omega_f: weight closed forms") {
  EmpiricalDistribution d(normal_sample(20000, 23));
  double f_at = kde_eval(d, KernelSpec::silverman(), 0.3);
  auto w = omega_f(d, KernelSpec::silverman(), PolicySpec::location_shift(), 0.3, 1.0);
  CHECK(*w == doctest::Approx(-f_at));
  auto w0 = omega_f(d, KernelSpec::silverman(), PolicySpec::mean_preserving(1.0, 0.0), 0.3, 0.0);
  CHECK(*w0 == doctest::Approx(0.0));
  std::vector<double> ds = normal_sample(800, 29);
  PolicySpec rank = PolicySpec::rank_preserving(EmpiricalDistribution(ds),
                                                EmpiricalDistribution(ds));
  auto wr = omega_f(d, KernelSpec::silverman(), rank, 0.3, ds[5]);
  CHECK(*wr == doctest::Approx(0.0));
}

TEST_CASE("omega_gc: equality closed form and the U(1,2) median value") {
  EmpiricalDistribution eq({2.0, 2.0, 2.0, 2.0});
  auto w = omega_gc(eq, PolicySpec::location_shift(), 2.0, 5.0);
  // phi(F(c)) = c (F(c) - 1/2) with F(c) = 1 at the mass point
  CHECK(*w == doctest::Approx(2.0 * 2.0 * (1.0 - 0.5) / 4.0));

  EmpiricalDistribution u12(uniform_sample(200000, 31, 1.0, 2.0));
  double med = quantile(u12, 0.5);
  auto wm = omega_gc(u12, PolicySpec::location_shift(), med, 0.0);
  // phi(1/2) = tau*mu - int p Q_p dp = 0.75 - 5/6 = -1/12, omega = 2 phi / mu^2
  CHECK(std::abs(*wm - (-1.0 / 13.5)) < 0.01);
}

TEST_CASE("direction functions interpolate and clamp") {
  DirectionFunction h = DirectionFunction::from_grid({0.0, 1.0, 2.0}, {0.0, 2.0, 0.0});
  CHECK(h(0.5) == doctest::Approx(1.0));
  CHECK(h(1.5) == doctest::Approx(1.0));
  CHECK(h(-3.0) == 0.0);
  CHECK(h(9.0) == 0.0);
  CHECK_THROWS_AS(DirectionFunction::from_grid({0.0, 0.0}, {1.0, 2.0}), std::domain_error);
}

TEST_CASE("hadamard gini rejects signed supports") {
  EmpiricalDistribution d(normal_sample(1000, 37));
  DirectionFunction h = DirectionFunction::from_callable([](double) { return 1.0; }, d);
  CHECK_THROWS_AS(hadamard_apply(FunctionalSpec::gini(), d, KernelSpec::silverman(), h),
                  std::domain_error);
}
