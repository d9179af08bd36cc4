#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mpe/functionals.hpp"

namespace mpe {

// A structural data-generating process with everything the oracles need:
// the outcome equation, its closed-form d-derivative, the laws of the
// observables, and (when endogeneity is modeled through the conditional
// error law) the d-derivative of ln f_{e|D,X}. Exactly one of draw_d /
// selection is present.
struct StructuralDgp {
  std::string name;
  int x_dim = 0;

  std::function<double(double d, std::span<const double> x, double e)> m;
  std::function<double(double d, std::span<const double> x, double e)> dm_dd;

  std::function<void(Rng&, std::span<double> x_out)> draw_x;  // null when x_dim == 0

  // single-equation branch
  std::function<double(Rng&, std::span<const double> x)> draw_d;
  std::function<double(Rng&, double d, std::span<const double> x)> draw_eps_given_dx;
  // zero under conditional independence; null means identically zero
  std::function<double(double e, double d, std::span<const double> x)> dlogf_eps_dd;

  // triangular branch: D = h(Z, X, eta), eps drawn jointly with eta
  struct Selection {
    std::function<double(Rng&, std::span<const double> x)> draw_z;
    std::function<double(Rng&)> draw_eta;
    std::function<double(double z, std::span<const double> x, double eta)> h;
    std::function<double(Rng&, double eta, std::span<const double> x)> draw_eps_given_eta;
  };
  std::optional<Selection> selection;

  bool triangular() const { return selection.has_value(); }
};

// Simulated data; latent columns are oracle-only and are stripped by the
// estimator handoff (see estimators.hpp / to_dataset).
struct DgpSample {
  std::vector<double> y;
  std::vector<double> d;
  std::vector<double> x;  // row-major n * x_dim
  int x_dim = 0;
  std::vector<double> z;    // empty unless triangular
  std::vector<double> e;    // latent
  std::vector<double> eta;  // latent, triangular only

  std::size_t n() const { return y.size(); }
  std::span<const double> x_row(std::size_t i) const {
    return {x.data() + static_cast<std::ptrdiff_t>(i) * x_dim, static_cast<std::size_t>(x_dim)};
  }
};

// Validates that dm_dd matches a central finite difference of m at random
// probe points; throws ConfigurationError on mismatch.
void self_check(const StructuralDgp& dgp);

DgpSample simulate(const StructuralDgp& dgp, std::size_t n, std::uint64_t seed);

// y^t_i = m(pi_t(d_i), x_i, e_i), reusing the sample's (x_i, e_i): common
// random numbers by construction.
std::vector<double> simulate_counterfactual(const StructuralDgp& dgp, const DgpSample& sample,
                                            const PolicySpec& policy, double t);

// Ground-truth MPE oracle: one-sided difference of Gamma along the
// counterfactual path at t_step, with common random numbers.
double oracle_mpe(const StructuralDgp& dgp, const PolicySpec& policy,
                  const FunctionalSpec& functional, double t_step, std::size_t n_oracle,
                  std::uint64_t seed);

// Batched variants over a pre-simulated sample; the seed overload is the
// one-element case. The verification suite uses these to share one large
// simulation across functionals.
std::vector<double> oracle_mpe_batch(const StructuralDgp& dgp, const DgpSample& sample,
                                     const PolicySpec& policy,
                                     const std::vector<FunctionalSpec>& functionals,
                                     double t_step);
std::vector<double> oracle_structural_batch(const StructuralDgp& dgp, const DgpSample& sample,
                                            const PolicySpec& policy,
                                            const std::vector<FunctionalSpec>& functionals,
                                            const KernelSpec& cond_kernel);
std::vector<double> oracle_lasd_batch(const StructuralDgp& dgp, const DgpSample& sample,
                                      const PolicySpec& policy, const std::vector<double>& taus,
                                      const KernelSpec& cond_kernel);

// The structural side of the representation theorem: builds
// h(y) = -f_Y(y) E[pi_dot(D) dm(D,X,e) | Y=y] by Nadaraya-Watson regression
// on Y (latents allowed; this is the oracle side) and applies the Hadamard
// derivative of the functional to it.
double oracle_structural_side(const StructuralDgp& dgp, const PolicySpec& policy,
                              const FunctionalSpec& functional, std::size_t n_oracle,
                              std::uint64_t seed,
                              const KernelSpec& cond_kernel = KernelSpec::silverman());

// E[pi_dot(D) dm | Y = q_tau], the quantile-representation oracle.
double oracle_conditional_lasd(const StructuralDgp& dgp, const PolicySpec& policy, double tau,
                               std::size_t n_oracle, std::uint64_t seed,
                               const KernelSpec& cond_kernel = KernelSpec::silverman());

struct UqrDecomposition {
  double lasd_term = 0.0;
  double bias_term = 0.0;
  double beta_uqr = 0.0;
};

// Structural decomposition of the UQR estimand: lasd_term is the kernel
// conditional mean of dm at Y = q_tau, bias_term the endogeneity correction
// E[1{Y<=q} dlnf_{e|D,X}] / f_Y(q). Requires the closed-form log-density
// derivative.
UqrDecomposition oracle_uqr_decomposition(const StructuralDgp& dgp, double tau,
                                          std::size_t n_oracle, std::uint64_t seed,
                                          const KernelSpec& cond_kernel = KernelSpec::silverman());

std::vector<std::string> dgp_registry();
// Named presets; params override preset constants (e.g. {"rho", 0.7} for
// gaussian_endogenous). Unknown name -> LookupError.
StructuralDgp make_dgp(const std::string& name,
                       const std::map<std::string, double>& params = {});

// Nadaraya-Watson regression of g on y at the evaluation points, gaussian
// kernel, bandwidth resolved on y. Exposed for the oracle checks.
std::vector<double> nw_regress(const std::vector<double>& y, const std::vector<double>& g,
                               const std::vector<double>& eval_points, double bandwidth);

}  // namespace mpe
