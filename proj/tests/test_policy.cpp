#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "mpe/policy.hpp"

using namespace mpe;

namespace {

std::vector<double> normal_sample(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

}  // namespace

TEST_CASE("apply: closed forms") {
  CHECK(apply(PolicySpec::location_shift(), 3.0, 0.1) == doctest::Approx(3.1));
  CHECK(apply(PolicySpec::location_scale(0.0, 1.0, 0.0), 3.0, 0.1) == doctest::Approx(3.1));
  CHECK(apply(PolicySpec::mean_preserving(1.0, 2.0), 3.0, 0.1) == doctest::Approx(3.1));
}

TEST_CASE("apply: t outside [0,1] rejected") {
  CHECK_THROWS_AS(apply(PolicySpec::location_shift(), 0.0, -0.1), std::domain_error);
  CHECK_THROWS_AS(apply(PolicySpec::location_shift(), 0.0, 1.5), std::domain_error);
}

TEST_CASE("pi_dot: closed forms") {
  CHECK(*pi_dot(PolicySpec::location_shift(), -17.0) == 1.0);
  CHECK(*pi_dot(PolicySpec::location_scale(1.0, 0.5, 2.0), 3.0) == doctest::Approx(0.5 + 4.0));
  CHECK(*pi_dot(PolicySpec::mean_preserving(0.5, 0.0), 2.0) == doctest::Approx(1.0));
}

TEST_CASE("pi_dot_deriv: closed forms") {
  CHECK(*pi_dot_deriv(PolicySpec::location_shift(), 2.0) == 0.0);
  CHECK(*pi_dot_deriv(PolicySpec::location_scale(0.0, 1.0, 0.7), 2.0) == doctest::Approx(0.7));
  CHECK(*pi_dot_deriv(PolicySpec::mean_preserving(0.8, 1.0), 2.0) == doctest::Approx(0.8));
}

TEST_CASE("pi_0 is the identity for all variants") {
  std::vector<double> d_sample = normal_sample(2000, 5);
  PolicySpec rank = PolicySpec::rank_preserving(EmpiricalDistribution(d_sample),
                                                EmpiricalDistribution(d_sample));
  std::vector<PolicySpec> specs = {
      PolicySpec::location_shift(),
      PolicySpec::location_scale(0.3, 0.8, -0.4),
      PolicySpec::mean_preserving(-0.5, 0.1),
  };
  for (const auto& spec : specs) {
    for (double d : {-2.0, -0.5, 0.0, 0.7, 1.9}) {
      CHECK(apply(spec, d, 0.0) == d);
    }
  }
  // rank-preserving: identity on the observed support
  for (std::size_t i = 0; i < d_sample.size(); i += 97) {
    CHECK(apply(rank, d_sample[i], 0.0) == d_sample[i]);
  }
}

TEST_CASE("rank_preserving with G = F is the identity for every t") {
  std::vector<double> d_sample = normal_sample(1500, 6);
  PolicySpec rank = PolicySpec::rank_preserving(EmpiricalDistribution(d_sample),
                                                EmpiricalDistribution(d_sample));
  for (std::size_t i = 0; i < d_sample.size(); i += 131) {
    for (double t : {0.05, 0.3, 1.0}) {
      CHECK(apply(rank, d_sample[i], t) == doctest::Approx(d_sample[i]).epsilon(1e-9));
    }
    CHECK(*pi_dot(rank, d_sample[i]) == 0.0);
  }
}

TEST_CASE("rank_preserving: out-of-support evaluation is a domain error") {
  std::vector<double> d_sample = normal_sample(500, 8);
  PolicySpec rank = PolicySpec::rank_preserving(EmpiricalDistribution(d_sample),
                                                EmpiricalDistribution(d_sample));
  double beyond = 1.0 + *std::max_element(d_sample.begin(), d_sample.end());
  CHECK_THROWS_AS(apply(rank, beyond, 0.1), std::domain_error);
}

TEST_CASE("finite_diff_pi_dot: exact for affine-in-t policies") {
  CHECK(finite_diff_pi_dot(PolicySpec::location_shift(), 0.0, 1e-4) == doctest::Approx(1.0));
  CHECK(finite_diff_pi_dot(PolicySpec::location_scale(1.0, 0.0, 1.0), 2.0, 1e-4) ==
        doctest::Approx(1.0).epsilon(1e-6));
  CHECK(finite_diff_pi_dot(PolicySpec::mean_preserving(1.0, 0.0), -1.0, 1e-4) ==
        doctest::Approx(-1.0).epsilon(1e-6));
  for (const auto& spec :
       {PolicySpec::location_scale(0.4, 0.3, 0.9), PolicySpec::mean_preserving(0.6, -0.2)}) {
    for (double d : {-1.5, 0.0, 2.5}) {
      CHECK(std::abs(finite_diff_pi_dot(spec, d, 0.01) - *pi_dot(spec, d)) < 1e-12);
    }
  }
  CHECK_THROWS_AS(finite_diff_pi_dot(PolicySpec::location_shift(), 0.0, 0.2), std::domain_error);
}

TEST_CASE("rank_preserving: finite difference matches the closed-form weight") {
  std::vector<double> d_sample = normal_sample(100000, 12);
  std::vector<double> shifted(d_sample);
  for (double& v : shifted) v += 0.3;
  EmpiricalDistribution fd(d_sample);
  PolicySpec rank = PolicySpec::rank_preserving(fd, EmpiricalDistribution(shifted));
  // interior points between the 20th and 80th percentile; the step-CDF
  // inversion needs a t large enough to average several order statistics
  for (double tau : {0.2, 0.35, 0.5, 0.65, 0.8}) {
    double d = quantile(fd, tau);
    auto pd = pi_dot(rank, d);
    REQUIRE(pd.has_value());
    double fdiff = finite_diff_pi_dot(rank, d, 0.05);
    CHECK(std::abs(fdiff - *pd) < 0.05);
  }
}

TEST_CASE("mean_preserving preserves the sample mean") {
  std::vector<double> d_sample = normal_sample(3000, 21);
  double mean_d = 0.0;
  for (double v : d_sample) mean_d += v;
  mean_d /= static_cast<double>(d_sample.size());
  PolicySpec spec = PolicySpec::mean_preserving(1.0, mean_d);
  for (double t : {0.1, 0.5, 1.0}) {
    double transformed = 0.0;
    for (double v : d_sample) transformed += apply(spec, v, t);
    transformed /= static_cast<double>(d_sample.size());
    CHECK(std::abs(transformed - mean_d) < 1e-10);
  }
}

TEST_CASE("parameter guards") {
  PolicySpec spec = PolicySpec::location_scale(0.0, 0.0, -1.5);
  CHECK_THROWS_AS(apply(spec, 1.0, 0.9), std::domain_error);
  CHECK_THROWS_AS(PolicySpec::mean_preserving(1.5, 0.0), std::domain_error);
}
