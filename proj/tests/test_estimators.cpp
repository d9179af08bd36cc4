#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "mpe/checks.hpp"
#include "mpe/estimators.hpp"

using namespace mpe;

namespace {

// slope-two linear model for closed-form slope checks
StructuralDgp slope_two_dgp() {
  StructuralDgp dgp;
  dgp.name = "slope_two";
  dgp.m = [](double d, std::span<const double>, double e) { return 2.0 * d + e; };
  dgp.dm_dd = [](double, std::span<const double>, double) { return 2.0; };
  dgp.draw_d = [](Rng& rng, std::span<const double>) { return rng.normal(); };
  dgp.draw_eps_given_dx = [](Rng& rng, double, std::span<const double>) { return rng.normal(); };
  self_check(dgp);
  return dgp;
}

// Y independent of D
StructuralDgp independent_dgp() {
  StructuralDgp dgp;
  dgp.name = "independent";
  dgp.m = [](double, std::span<const double>, double e) { return e; };
  dgp.dm_dd = [](double, std::span<const double>, double) { return 0.0; };
  dgp.draw_d = [](Rng& rng, std::span<const double>) { return rng.normal(); };
  dgp.draw_eps_given_dx = [](Rng& rng, double, std::span<const double>) { return rng.normal(); };
  self_check(dgp);
  return dgp;
}

Dataset simulate_data(const StructuralDgp& dgp, std::size_t n, std::uint64_t seed) {
  return to_dataset(simulate(dgp, n, seed));
}

PolicySpec null_rank_policy(const Dataset& data) {
  return PolicySpec::rank_preserving(EmpiricalDistribution(data.d),
                                     EmpiricalDistribution(data.d));
}

}  // namespace

TEST_CASE("cond_cdf: independent outcome recovers the marginal CDF") {
  StructuralDgp dgp;
  dgp.name = "uniform_y";
  dgp.m = [](double, std::span<const double>, double e) { return e; };
  dgp.dm_dd = [](double, std::span<const double>, double) { return 0.0; };
  dgp.draw_d = [](Rng& rng, std::span<const double>) { return rng.normal(); };
  dgp.draw_eps_given_dx = [](Rng& rng, double, std::span<const double>) { return rng.uniform(); };
  self_check(dgp);
  Dataset data = simulate_data(dgp, 5000, 3);
  FirstStageConfig cfg;
  CHECK(std::abs(cond_cdf(data, cfg, 0.5, 0.0, {}) - 0.5) < 0.05);
  CHECK(cond_cdf(data, cfg, -1.0, 0.0, {}) == 0.0);  // below the support, clipped
  CHECK(cond_cdf(data, cfg, 2.0, 0.0, {}) == 1.0);   // above the support, clipped
  CHECK(std::abs(cond_cdf_dderiv(data, cfg, 0.5, 0.0, {})) < 0.05);
}

TEST_CASE("cond_cdf_dderiv: gaussian closed form") {
  Dataset data = simulate_data(make_dgp("linear_exogenous"), 10000, 5);
  FirstStageConfig cfg;
  // d/dd F_{Y|D}(y|d) = -phi(y-d); at y = d = 0 it is -0.3989
  double deriv = cond_cdf_dderiv(data, cfg, 0.0, 0.0, {});
  CHECK(std::abs(deriv - (-0.3989)) < 0.05);
}

TEST_CASE("plugin: unit effect for the additive model") {
  Dataset data = simulate_data(make_dgp("linear_exogenous"), 2000, 7);
  FirstStageConfig cfg;
  cfg.seed = 7;
  MpeEstimate est = plugin_quantile_mpe(data, PolicySpec::location_shift(), 0.5, cfg);
  CHECK(std::abs(est.value - 1.0) < 0.15);
  CHECK(est.n_used + est.n_trimmed == 2000);
  CHECK_FALSE(est.high_trim_warning);
}

TEST_CASE("plugin: zero when the outcome ignores the policy variable") {
  Dataset data = simulate_data(independent_dgp(), 2000, 9);
  FirstStageConfig cfg;
  MpeEstimate est = plugin_quantile_mpe(data, PolicySpec::location_shift(), 0.5, cfg);
  CHECK(std::abs(est.value) < 0.1);
}

TEST_CASE("plugin tracks the oracle on the quadratic model") {
  StructuralDgp dgp = make_dgp("quadratic_pure");
  double oracle = oracle_mpe(dgp, PolicySpec::location_shift(), FunctionalSpec::quantile(0.5),
                             0.01, 400000, 11);
  Dataset data = simulate_data(dgp, 5000, 11);
  FirstStageConfig cfg;
  MpeEstimate est = plugin_quantile_mpe(data, PolicySpec::location_shift(), 0.5, cfg);
  CHECK(std::abs(est.value - oracle) < 0.15);
}

TEST_CASE("location-shift plugin and the UQR estimand share a code path bit for bit") {
  Dataset data = simulate_data(make_dgp("gaussian_endogenous"), 1500, 13);
  FirstStageConfig cfg;
  cfg.seed = 99;
  double a = plugin_quantile_mpe(data, PolicySpec::location_shift(), 0.3, cfg).value;
  double b = uqr_estimand(data, 0.3, cfg);
  CHECK(a == b);
}

TEST_CASE("reweight: unit effect and the slope-two model") {
  FirstStageConfig cfg;
  Dataset data = simulate_data(make_dgp("linear_exogenous"), 2000, 17);
  MpeEstimate est = reweight_quantile_mpe(data, PolicySpec::location_shift(), 0.5, cfg);
  CHECK(std::abs(est.value - 1.0) < 0.15);

  Dataset data2 = simulate_data(slope_two_dgp(), 2000, 19);
  MpeEstimate est2 = reweight_quantile_mpe(data2, PolicySpec::location_shift(), 0.4, cfg);
  CHECK(std::abs(est2.value - 2.0) < 0.3);
}

TEST_CASE("reweight: the null rank-preserving policy gives exactly zero") {
  Dataset data = simulate_data(make_dgp("linear_exogenous"), 800, 21);
  FirstStageConfig cfg;
  MpeEstimate est = reweight_quantile_mpe(data, null_rank_policy(data), 0.5, cfg);
  CHECK(est.value == 0.0);
}

TEST_CASE("debiased: unit effect and zero under independence") {
  FirstStageConfig cfg;
  cfg.seed = 23;
  Dataset data = simulate_data(make_dgp("linear_exogenous"), 2000, 23);
  MpeEstimate est = debiased_quantile_mpe(data, PolicySpec::location_shift(), 0.5, cfg);
  CHECK(std::abs(est.value - 1.0) < 0.1);

  Dataset data2 = simulate_data(independent_dgp(), 2000, 25);
  MpeEstimate est2 = debiased_quantile_mpe(data2, PolicySpec::location_shift(), 0.5, cfg);
  CHECK(std::abs(est2.value) < 0.1);
  CHECK_THROWS_AS([&] {
    FirstStageConfig bad;
    bad.folds = 1;
    debiased_quantile_mpe(data2, PolicySpec::location_shift(), 0.5, bad);
  }(), ConfigurationError);
}

TEST_CASE("riesz representer: gaussian score closed form") {
  // alpha(1) = f'(1)/f(1) = -1; averaged over three draws at n = 10^4 to
  // keep the kernel-derivative noise well inside the tolerance
  FirstStageConfig cfg;
  double acc = 0.0;
  for (std::uint64_t seed : {27u, 28u, 29u}) {
    Dataset data = simulate_data(make_dgp("linear_exogenous"), 10000, seed);
    auto a = riesz_alpha(data, PolicySpec::location_shift(), cfg, 1.0, {});
    REQUIRE(a.has_value());
    acc += *a;
  }
  CHECK(std::abs(acc / 3.0 - (-1.0)) < 0.15);
}

TEST_CASE("riesz representer: mean-preserving closed form") {
  // alpha(d) = d/dd[pi_dot f]/f = alpha_mp + alpha_mp (d - mu) f'/f with
  // f'(d)/f(d) = -d for the standard normal
  Dataset data = simulate_data(make_dgp("linear_exogenous"), 20000, 29);
  FirstStageConfig cfg;
  PolicySpec pol = PolicySpec::mean_preserving(0.5, 0.0);
  auto a = riesz_alpha(data, pol, cfg, 1.0, {});
  REQUIRE(a.has_value());
  double expect = 0.5 + 0.5 * 1.0 * (-1.0);
  CHECK(std::abs(*a - expect) < 0.12);
}

TEST_CASE("riesz identity: integration by parts against two test functions") {
  Dataset data = simulate_data(make_dgp("linear_exogenous"), 50000, 31);
  FirstStageConfig cfg;
  std::vector<double> points(data.d.begin(), data.d.end());
  auto alphas = riesz_alpha_batch(data, PolicySpec::location_shift(), cfg, points);
  auto relerr = [&](auto g, auto dg) {
    double lhs = 0.0, rhs = 0.0;
    std::size_t m = 0;
    for (std::size_t i = 0; i < data.n(); ++i) {
      if (!alphas[i]) continue;
      lhs += *alphas[i] * g(data.d[i]);
      rhs += -dg(data.d[i]);
      ++m;
    }
    lhs /= m;
    rhs /= m;
    return std::abs(lhs - rhs) / std::abs(rhs);
  };
  CHECK(relerr([](double d) { return d * d * d; }, [](double d) { return 3.0 * d * d; }) < 0.05);
  CHECK(relerr([](double d) { return std::sin(d); }, [](double d) { return std::cos(d); }) < 0.05);
}

TEST_CASE("mean_mpe: closed-form slopes") {
  FirstStageConfig cfg;
  Dataset data = simulate_data(make_dgp("linear_exogenous"), 2000, 33);
  CHECK(std::abs(mean_mpe(data, PolicySpec::location_shift(), cfg).value - 1.0) < 0.05);

  Dataset data2 = simulate_data(slope_two_dgp(), 2000, 35);
  CHECK(std::abs(mean_mpe(data2, PolicySpec::location_shift(), cfg).value - 2.0) < 0.1);

  CHECK(mean_mpe(data, null_rank_policy(data), cfg).value == 0.0);
}

TEST_CASE("gini_mpe: shifted-uniform closed form and degenerate guards") {
  FirstStageConfig cfg;
  Dataset data = simulate_data(make_dgp("identity_uniform"), 10000, 37);
  MpeEstimate est = gini_mpe(data, PolicySpec::location_shift(), cfg);
  CHECK(std::abs(est.value - (-2.0 / 27.0)) < 0.02);

  CHECK(gini_mpe(data, null_rank_policy(data), cfg).value == 0.0);

  // near-equal outcomes: the effect on inequality is ~0 (exactly equal
  // outcomes are rejected by the zero-dispersion bandwidth guard)
  Rng rng(39);
  Dataset flat;
  flat.k = 0;
  for (int i = 0; i < 2000; ++i) {
    flat.d.push_back(rng.normal());
    flat.y.push_back(5.0 + 1e-3 * rng.normal());
  }
  MpeEstimate est2 = gini_mpe(flat, PolicySpec::location_shift(), cfg);
  CHECK(std::abs(est2.value) < 0.02);

  Dataset negative = simulate_data(make_dgp("linear_exogenous"), 500, 41);
  CHECK_THROWS_AS(gini_mpe(negative, PolicySpec::location_shift(), cfg), std::domain_error);
}

TEST_CASE("control variable: probability integral transform") {
  Dataset data = simulate_data(make_dgp("triangular_normal"), 10000, 43);
  FirstStageConfig cfg;
  ControlVariableResult cv = control_variable(data, cfg);
  CHECK(ks_uniform_statistic(cv.v) <= 0.03);
  CHECK_FALSE(cv.low_dispersion_warning);
  // V independent of the instrument
  double mz = mean_of(data.z), mv = mean_of(cv.v);
  double czv = 0.0, vz = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < data.n(); ++i) {
    czv += (data.z[i] - mz) * (cv.v[i] - mv);
    vz += (data.z[i] - mz) * (data.z[i] - mz);
    vv += (cv.v[i] - mv) * (cv.v[i] - mv);
  }
  CHECK(std::abs(czv / std::sqrt(vz * vv)) < 0.05);

  for (double v : cv.v) {
    CHECK(v >= 0.001);
    CHECK(v <= 0.999);
  }
}

TEST_CASE("control variable: degenerate selection is flagged") {
  Rng rng(45);
  Dataset data;
  data.k = 0;
  for (int i = 0; i < 2000; ++i) {
    double z = rng.normal();
    data.z.push_back(z);
    data.d.push_back(z);  // eta degenerate
    data.y.push_back(z + rng.normal());
  }
  FirstStageConfig cfg;
  ControlVariableResult cv = control_variable(data, cfg);
  CHECK(cv.low_dispersion_warning);

  Dataset no_z = simulate_data(make_dgp("linear_exogenous"), 500, 47);
  CHECK_THROWS_AS(control_variable(no_z, cfg), ConfigurationError);
}

TEST_CASE("cv estimators: unneeded instrument changes little on an exogenous DGP") {
  // D = Z + eta with eps independent of everything: the control variable is
  // well defined (Z moves D) but carries no endogeneity information
  StructuralDgp dgp;
  dgp.name = "exogenous_triangular";
  StructuralDgp::Selection sel;
  sel.draw_z = [](Rng& rng, std::span<const double>) { return rng.normal(); };
  sel.draw_eta = [](Rng& rng) { return rng.normal(); };
  sel.h = [](double z, std::span<const double>, double eta) { return z + eta; };
  sel.draw_eps_given_eta = [](Rng& rng, double, std::span<const double>) { return rng.normal(); };
  dgp.selection = std::move(sel);
  dgp.m = [](double d, std::span<const double>, double e) { return d + e; };
  dgp.dm_dd = [](double, std::span<const double>, double) { return 1.0; };
  self_check(dgp);

  Dataset data = simulate_data(dgp, 2000, 49);
  FirstStageConfig cfg;
  cfg.seed = 49;
  double plain = plugin_quantile_mpe(data, PolicySpec::location_shift(), 0.5, cfg).value;
  double with_cv = cv_quantile_mpe(data, PolicySpec::location_shift(), 0.5, cfg).value;
  CHECK(std::abs(plain - with_cv) < 0.1);
}

TEST_CASE("estimates are deterministic functions of (data, config, seed)") {
  Dataset data = simulate_data(make_dgp("linear_exogenous"), 1000, 53);
  FirstStageConfig cfg;
  cfg.seed = 1234;
  double a = debiased_quantile_mpe(data, PolicySpec::location_shift(), 0.5, cfg).value;
  double b = debiased_quantile_mpe(data, PolicySpec::location_shift(), 0.5, cfg).value;
  CHECK(a == b);
  double c = reweight_quantile_mpe(data, PolicySpec::location_shift(), 0.5, cfg).value;
  double d = reweight_quantile_mpe(data, PolicySpec::location_shift(), 0.5, cfg).value;
  CHECK(c == d);
}

TEST_CASE("hard floor on the sample size") {
  Dataset tiny = simulate_data(make_dgp("linear_exogenous"), 60, 55);
  tiny.y.resize(40);
  tiny.d.resize(40);
  FirstStageConfig cfg;
  CHECK_THROWS_AS(plugin_quantile_mpe(tiny, PolicySpec::location_shift(), 0.5, cfg),
                  ConfigurationError);
}

TEST_CASE("fold assignment: deterministic, balanced, seed-sensitive") {
  auto f1 = assign_folds(103, 5, 7);
  auto f2 = assign_folds(103, 5, 7);
  CHECK(f1 == f2);
  auto f3 = assign_folds(103, 5, 8);
  CHECK(f1 != f3);
  std::vector<int> counts(5, 0);
  for (int f : f1) ++counts[f];
  for (int c : counts) CHECK(std::abs(c - 103 / 5) <= 1);
}

TEST_CASE("bootstrap dispersion is a sane scale (plumbing)") {
  Dataset data = simulate_data(make_dgp("linear_exogenous"), 500, 57);
  FirstStageConfig cfg;
  double sd = bootstrap_dispersion(data, 8, 11, [&](const Dataset& d) {
    return mean_mpe(d, PolicySpec::location_shift(), cfg).value;
  });
  CHECK(sd > 0.0);
  CHECK(sd < 0.5);
}
