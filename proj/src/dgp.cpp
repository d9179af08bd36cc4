#include "mpe/dgp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mpe {

void self_check(const StructuralDgp& dgp) {
  if (dgp.triangular() == static_cast<bool>(dgp.draw_d)) {
    throw ConfigurationError("StructuralDgp: exactly one of draw_d / selection required");
  }
  if (!dgp.m || !dgp.dm_dd) {
    throw ConfigurationError("StructuralDgp: m and dm_dd are required");
  }
  if (dgp.x_dim > 0 && !dgp.draw_x) {
    throw ConfigurationError("StructuralDgp: x_dim > 0 without draw_x");
  }
  Rng rng(0xC0FFEEULL);
  std::vector<double> xbuf(std::max(dgp.x_dim, 1));
  const double step = 1e-5;
  for (int probe = 0; probe < 8; ++probe) {
    std::span<double> xs(xbuf.data(), static_cast<std::size_t>(dgp.x_dim));
    if (dgp.draw_x) dgp.draw_x(rng, xs);
    double d, e;
    if (dgp.triangular()) {
      const auto& sel = *dgp.selection;
      double z = sel.draw_z(rng, xs);
      double eta = sel.draw_eta(rng);
      d = sel.h(z, xs, eta);
      e = sel.draw_eps_given_eta(rng, eta, xs);
    } else {
      d = dgp.draw_d(rng, xs);
      e = dgp.draw_eps_given_dx(rng, d, xs);
    }
    double fd = (dgp.m(d + step, xs, e) - dgp.m(d - step, xs, e)) / (2.0 * step);
    double an = dgp.dm_dd(d, xs, e);
    if (std::abs(fd - an) > 1e-6 * std::max(1.0, std::abs(an))) {
      throw ConfigurationError("StructuralDgp '" + dgp.name +
                               "': dm_dd disagrees with finite difference of m");
    }
  }
}

DgpSample simulate(const StructuralDgp& dgp, std::size_t n, std::uint64_t seed) {
  if (n < 2) throw ConfigurationError("simulate: n must be >= 2");
  Rng rng(seed);
  DgpSample s;
  s.x_dim = dgp.x_dim;
  s.y.resize(n);
  s.d.resize(n);
  s.e.resize(n);
  s.x.resize(n * static_cast<std::size_t>(dgp.x_dim));
  if (dgp.triangular()) {
    s.z.resize(n);
    s.eta.resize(n);
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::span<double> xs(s.x.data() + i * static_cast<std::size_t>(dgp.x_dim),
                         static_cast<std::size_t>(dgp.x_dim));
    if (dgp.draw_x) dgp.draw_x(rng, xs);
    if (dgp.triangular()) {
      const auto& sel = *dgp.selection;
      s.z[i] = sel.draw_z(rng, xs);
      s.eta[i] = sel.draw_eta(rng);
      s.d[i] = sel.h(s.z[i], xs, s.eta[i]);
      s.e[i] = sel.draw_eps_given_eta(rng, s.eta[i], xs);
    } else {
      s.d[i] = dgp.draw_d(rng, xs);
      s.e[i] = dgp.draw_eps_given_dx(rng, s.d[i], xs);
    }
    s.y[i] = dgp.m(s.d[i], xs, s.e[i]);
  }
  return s;
}

std::vector<double> simulate_counterfactual(const StructuralDgp& dgp, const DgpSample& sample,
                                            const PolicySpec& policy, double t) {
  std::vector<double> yt(sample.n());
  for (std::size_t i = 0; i < sample.n(); ++i) {
    yt[i] = dgp.m(apply(policy, sample.d[i], t), sample.x_row(i), sample.e[i]);
  }
  return yt;
}

std::vector<double> oracle_mpe_batch(const StructuralDgp& dgp, const DgpSample& sample,
                                     const PolicySpec& policy,
                                     const std::vector<FunctionalSpec>& functionals,
                                     double t_step) {
  if (!(t_step > 0.0 && t_step <= 0.05)) {
    throw ConfigurationError("oracle_mpe: t_step must lie in (0, 0.05]");
  }
  std::vector<double> yt = simulate_counterfactual(dgp, sample, policy, t_step);
  EmpiricalDistribution base(sample.y);
  EmpiricalDistribution shifted(std::move(yt));
  std::vector<double> out(functionals.size());
  for (std::size_t i = 0; i < functionals.size(); ++i) {
    out[i] = (eval(functionals[i], shifted) - eval(functionals[i], base)) / t_step;
  }
  return out;
}

double oracle_mpe(const StructuralDgp& dgp, const PolicySpec& policy,
                  const FunctionalSpec& functional, double t_step, std::size_t n_oracle,
                  std::uint64_t seed) {
  DgpSample s = simulate(dgp, n_oracle, seed);
  return oracle_mpe_batch(dgp, s, policy, {functional}, t_step)[0];
}

std::vector<double> nw_regress(const std::vector<double>& y, const std::vector<double>& g,
                               const std::vector<double>& eval_points, double bandwidth) {
  const std::size_t n = y.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return y[a] < y[b]; });
  std::vector<double> ys(n), gs(n);
  for (std::size_t i = 0; i < n; ++i) {
    ys[i] = y[order[i]];
    gs[i] = g[order[i]];
  }
  std::vector<double> out(eval_points.size());
  const double h = bandwidth;
  for (std::size_t k = 0; k < eval_points.size(); ++k) {
    double p = eval_points[k];
    std::size_t a = std::lower_bound(ys.begin(), ys.end(), p - 5.0 * h) - ys.begin();
    std::size_t b = std::upper_bound(ys.begin(), ys.end(), p + 5.0 * h) - ys.begin();
    double sw = 0.0, swg = 0.0;
    for (std::size_t i = a; i < b; ++i) {
      double w = std::exp(-0.5 * ((ys[i] - p) / h) * ((ys[i] - p) / h));
      sw += w;
      swg += w * gs[i];
    }
    if (sw <= 0.0) {
      // widen to the nearest observations rather than return garbage
      std::size_t j = std::min<std::size_t>(
          std::lower_bound(ys.begin(), ys.end(), p) - ys.begin(), n - 1);
      out[k] = gs[j];
    } else {
      out[k] = swg / sw;
    }
  }
  return out;
}

namespace {

// pi_dot over a sample; rank-preserving trims are dropped from the
// regression sample but kept in F_Y.
struct WeightedDerivs {
  std::vector<double> y;
  std::vector<double> g;  // pi_dot(d) * dm_dd(d, x, e)
  int n_trimmed = 0;
};

WeightedDerivs weighted_structural_derivs(const StructuralDgp& dgp, const DgpSample& s,
                                          const PolicySpec& policy) {
  WeightedDerivs w;
  w.y.reserve(s.n());
  w.g.reserve(s.n());
  for (std::size_t i = 0; i < s.n(); ++i) {
    auto pd = pi_dot(policy, s.d[i]);
    if (!pd) {
      ++w.n_trimmed;
      continue;
    }
    w.y.push_back(s.y[i]);
    w.g.push_back(*pd * dgp.dm_dd(s.d[i], s.x_row(i), s.e[i]));
  }
  if (w.y.size() < 2) throw EstimationError("structural oracle: sample fully trimmed");
  return w;
}

}  // namespace

std::vector<double> oracle_structural_batch(const StructuralDgp& dgp, const DgpSample& sample,
                                            const PolicySpec& policy,
                                            const std::vector<FunctionalSpec>& functionals,
                                            const KernelSpec& cond_kernel) {
  WeightedDerivs wd = weighted_structural_derivs(dgp, sample, policy);
  EmpiricalDistribution fy(sample.y);

  double nw_h = resolve_bandwidth(fy, cond_kernel);
  KernelSpec kde = KernelSpec::silverman();
  double kde_h = resolve_bandwidth(fy, kde);
  KernelSpec kde_fixed = KernelSpec::fixed(kde_h, kde.kernel);

  // h(y) = -f_Y(y) E[pi_dot dm | Y=y] on the grid quantiles of F_Y
  const auto& grid = tau_grid();
  std::vector<double> qs;
  qs.reserve(grid.size());
  for (double tau : grid) {
    double q = quantile(fy, tau);
    if (qs.empty() || q > qs.back()) qs.push_back(q);
  }
  std::vector<double> cond = nw_regress(wd.y, wd.g, qs, nw_h);
  std::vector<double> hs(qs.size());
  for (std::size_t k = 0; k < qs.size(); ++k) {
    hs[k] = -kde_eval(fy, kde_fixed, qs[k]) * cond[k];
  }
  DirectionFunction h = DirectionFunction::from_grid(std::move(qs), std::move(hs));
  std::vector<double> out(functionals.size());
  for (std::size_t i = 0; i < functionals.size(); ++i) {
    out[i] = hadamard_apply(functionals[i], fy, kde, h).value;
  }
  return out;
}

double oracle_structural_side(const StructuralDgp& dgp, const PolicySpec& policy,
                              const FunctionalSpec& functional, std::size_t n_oracle,
                              std::uint64_t seed, const KernelSpec& cond_kernel) {
  DgpSample s = simulate(dgp, n_oracle, seed);
  return oracle_structural_batch(dgp, s, policy, {functional}, cond_kernel)[0];
}

std::vector<double> oracle_lasd_batch(const StructuralDgp& dgp, const DgpSample& sample,
                                      const PolicySpec& policy, const std::vector<double>& taus,
                                      const KernelSpec& cond_kernel) {
  WeightedDerivs wd = weighted_structural_derivs(dgp, sample, policy);
  EmpiricalDistribution fy(sample.y);
  double nw_h = resolve_bandwidth(fy, cond_kernel);
  std::vector<double> qs(taus.size());
  for (std::size_t i = 0; i < taus.size(); ++i) qs[i] = quantile(fy, taus[i]);
  return nw_regress(wd.y, wd.g, qs, nw_h);
}

double oracle_conditional_lasd(const StructuralDgp& dgp, const PolicySpec& policy, double tau,
                               std::size_t n_oracle, std::uint64_t seed,
                               const KernelSpec& cond_kernel) {
  DgpSample s = simulate(dgp, n_oracle, seed);
  return oracle_lasd_batch(dgp, s, policy, {tau}, cond_kernel)[0];
}

UqrDecomposition oracle_uqr_decomposition(const StructuralDgp& dgp, double tau,
                                          std::size_t n_oracle, std::uint64_t seed,
                                          const KernelSpec& cond_kernel) {
  if (dgp.triangular()) {
    throw ConfigurationError(
        "oracle_uqr_decomposition: needs the single-equation conditional error law");
  }
  DgpSample s = simulate(dgp, n_oracle, seed);
  std::vector<double> dm(s.n());
  for (std::size_t i = 0; i < s.n(); ++i) {
    dm[i] = dgp.dm_dd(s.d[i], s.x_row(i), s.e[i]);
  }
  std::vector<double> y_copy = s.y;
  EmpiricalDistribution fy(std::move(y_copy));
  double q = quantile(fy, tau);
  double nw_h = resolve_bandwidth(fy, cond_kernel);

  UqrDecomposition out;
  out.lasd_term = nw_regress(s.y, dm, {q}, nw_h)[0];

  double fq = kde_eval(fy, KernelSpec::silverman(), q);
  double acc = 0.0;
  for (std::size_t i = 0; i < s.n(); ++i) {
    if (s.y[i] > q) continue;
    double dl = dgp.dlogf_eps_dd ? dgp.dlogf_eps_dd(s.e[i], s.d[i], s.x_row(i)) : 0.0;
    acc += dl;
  }
  out.bias_term = acc / static_cast<double>(s.n()) / fq;
  out.beta_uqr = out.lasd_term - out.bias_term;
  return out;
}

namespace {

void check_params(const std::string& name, const std::map<std::string, double>& params,
                  std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : params) {
    bool ok = false;
    for (const char* a : allowed) {
      if (key == a) ok = true;
    }
    if (!ok) throw ConfigurationError("dgp '" + name + "': unknown parameter '" + key + "'");
  }
}

double param_or(const std::map<std::string, double>& params, const std::string& key,
                double fallback) {
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

}  // namespace

std::vector<std::string> dgp_registry() {
  return {"linear_exogenous",   "random_coefficient", "quadratic_exogenous",
          "gaussian_endogenous", "triangular_normal",  "identity_uniform",
          "quadratic_pure"};
}

StructuralDgp make_dgp(const std::string& name, const std::map<std::string, double>& params) {
  StructuralDgp dgp;
  dgp.name = name;
  auto std_normal_d = [](Rng& rng, std::span<const double>) { return rng.normal(); };
  auto indep_eps = [](Rng& rng, double, std::span<const double>) { return rng.normal(); };
  auto unif12_d = [](Rng& rng, std::span<const double>) { return rng.uniform(1.0, 2.0); };

  if (name == "linear_exogenous") {
    check_params(name, params, {});
    dgp.m = [](double d, std::span<const double>, double e) { return d + e; };
    dgp.dm_dd = [](double, std::span<const double>, double) { return 1.0; };
    dgp.draw_d = std_normal_d;
    dgp.draw_eps_given_dx = indep_eps;
  } else if (name == "random_coefficient") {
    // Y = b0(e) + b1(e) D with b0(e) = e and b1(e) = 1 + 0.5 tanh(e);
    // E[b1(eps)] = 1 by symmetry.
    check_params(name, params, {});
    dgp.m = [](double d, std::span<const double>, double e) {
      return e + (1.0 + 0.5 * std::tanh(e)) * d;
    };
    dgp.dm_dd = [](double, std::span<const double>, double e) { return 1.0 + 0.5 * std::tanh(e); };
    dgp.draw_d = std_normal_d;
    dgp.draw_eps_given_dx = indep_eps;
  } else if (name == "quadratic_exogenous") {
    check_params(name, params, {});
    dgp.x_dim = 1;
    dgp.m = [](double d, std::span<const double> x, double e) { return d * d + x[0] + e; };
    dgp.dm_dd = [](double d, std::span<const double>, double) { return 2.0 * d; };
    dgp.draw_x = [](Rng& rng, std::span<double> x) { x[0] = rng.normal(); };
    dgp.draw_d = unif12_d;
    dgp.draw_eps_given_dx = indep_eps;
  } else if (name == "gaussian_endogenous") {
    // eps | D=d ~ N(rho d, 1 - rho^2): endogeneity testbed with closed-form
    // bias decomposition; beta_uqr = 1 + rho for every tau.
    check_params(name, params, {"rho"});
    double rho = param_or(params, "rho", 0.5);
    if (!(rho > -1.0 && rho < 1.0)) {
      throw ConfigurationError("gaussian_endogenous: rho must lie in (-1,1)");
    }
    double s2 = 1.0 - rho * rho;
    dgp.m = [](double d, std::span<const double>, double e) { return d + e; };
    dgp.dm_dd = [](double, std::span<const double>, double) { return 1.0; };
    dgp.draw_d = std_normal_d;
    dgp.draw_eps_given_dx = [rho, s2](Rng& rng, double d, std::span<const double>) {
      return rng.normal(rho * d, std::sqrt(s2));
    };
    dgp.dlogf_eps_dd = [rho, s2](double e, double d, std::span<const double>) {
      return rho * (e - rho * d) / s2;
    };
  } else if (name == "triangular_normal") {
    // D = Z + eta with eps = (eta + nu)/sqrt(2): eps is independent of Z but
    // correlated with D through eta, and stays nondegenerate given (D, V).
    // The outcome scales the policy coefficient with the disturbance.
    check_params(name, params, {});
    StructuralDgp::Selection sel;
    sel.draw_z = [](Rng& rng, std::span<const double>) { return rng.normal(); };
    sel.draw_eta = [](Rng& rng) { return rng.normal(); };
    sel.h = [](double z, std::span<const double>, double eta) { return z + eta; };
    sel.draw_eps_given_eta = [](Rng& rng, double eta, std::span<const double>) {
      return (eta + rng.normal()) / std::sqrt(2.0);
    };
    dgp.selection = std::move(sel);
    dgp.m = [](double d, std::span<const double>, double e) {
      return d * (1.0 + 0.5 * std::tanh(e)) + e;
    };
    dgp.dm_dd = [](double, std::span<const double>, double e) { return 1.0 + 0.5 * std::tanh(e); };
  } else if (name == "identity_uniform") {
    // Y = D with D ~ U(1,2); closed-form Gini MPE targets.
    check_params(name, params, {});
    dgp.m = [](double d, std::span<const double>, double) { return d; };
    dgp.dm_dd = [](double, std::span<const double>, double) { return 1.0; };
    dgp.draw_d = unif12_d;
    dgp.draw_eps_given_dx = indep_eps;
  } else if (name == "quadratic_pure") {
    check_params(name, params, {});
    dgp.m = [](double d, std::span<const double>, double) { return d * d; };
    dgp.dm_dd = [](double d, std::span<const double>, double) { return 2.0 * d; };
    dgp.draw_d = unif12_d;
    dgp.draw_eps_given_dx = indep_eps;
  } else {
    throw LookupError("make_dgp: unknown preset '" + name + "'");
  }
  self_check(dgp);
  return dgp;
}

}  // namespace mpe
