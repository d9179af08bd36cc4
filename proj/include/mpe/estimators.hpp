#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mpe/dgp.hpp"
#include "mpe/local_linear.hpp"

namespace mpe {

// Observables only; the DgpSample -> Dataset handoff strips latents, so
// estimators cannot read them by construction.
struct Dataset {
  std::vector<double> y;
  std::vector<double> d;
  std::vector<double> x;  // row-major n * k
  int k = 0;
  std::vector<double> z;  // empty = absent

  std::size_t n() const { return y.size(); }
  bool has_z() const { return !z.empty(); }
};

Dataset to_dataset(const DgpSample& sample);

struct FirstStageConfig {
  Kernel kernel = Kernel::gaussian;
  double bandwidth_scale = 1.0;  // multiplies the per-dimension rule of thumb
  double trim_floor = 1e-4;
  double min_ess = 20.0;
  int folds = 5;
  int alpha_grid = 99;  // equispaced levels 0.01 .. 0.99
  int y_grid = 48;      // conditional-CDF profile resolution
  std::uint64_t seed = 0;
  int threads = 1;
};

enum class EstimatorMethod {
  plugin_quantile,
  reweight_quantile,
  debiased_quantile,
  mean,
  gini,
  cv_quantile,
  cv_mean,
  cv_gini,
};

std::string method_name(EstimatorMethod m);

struct MpeEstimate {
  double value = 0.0;
  EstimatorMethod method = EstimatorMethod::plugin_quantile;
  std::string policy;
  std::string functional;
  double tau = 0.0;  // quantile methods only
  int n_used = 0;
  int n_trimmed = 0;
  int grid_trimmed = 0;  // gini methods: trimmed tau-grid points
  bool high_trim_warning = false;
  std::map<std::string, double> bandwidths;
};

// Local-linear conditional CDF of Y given (D, X) at (d, x), clipped to [0,1].
double cond_cdf(const Dataset& data, const FirstStageConfig& cfg, double y, double d,
                const std::vector<double>& x);
// The D-slope of the same local-linear fit.
double cond_cdf_dderiv(const Dataset& data, const FirstStageConfig& cfg, double y, double d,
                       const std::vector<double>& x);

// theta_hat_Q(tau): plug-in from the conditional-CDF derivative.
MpeEstimate plugin_quantile_mpe(const Dataset& data, const PolicySpec& policy, double tau,
                                const FirstStageConfig& cfg);

// Reweighting form: conditional-quantile slopes at the matched rank
// zeta_tau(d,x), kernel-reweighted to Y = q_tau.
MpeEstimate reweight_quantile_mpe(const Dataset& data, const PolicySpec& policy, double tau,
                                  const FirstStageConfig& cfg);

// Cross-fitted orthogonal-score estimator; first stages and the Riesz
// representer are fit leaving out each observation's fold.
MpeEstimate debiased_quantile_mpe(const Dataset& data, const PolicySpec& policy, double tau,
                                  const FirstStageConfig& cfg);

MpeEstimate mean_mpe(const Dataset& data, const PolicySpec& policy, const FirstStageConfig& cfg);

MpeEstimate gini_mpe(const Dataset& data, const PolicySpec& policy, const FirstStageConfig& cfg);

struct ControlVariableResult {
  std::vector<double> v;  // clipped to [0.001, 0.999]
  int n_trimmed = 0;
  bool low_dispersion_warning = false;
};

// V_hat = F_hat_{D|Z,X}(D|Z,X) at each observation.
ControlVariableResult control_variable(const Dataset& data, const FirstStageConfig& cfg);

// Control-variable estimators: identical machinery with conditioning set
// (D, V_hat, X) in every first stage.
MpeEstimate cv_quantile_mpe(const Dataset& data, const PolicySpec& policy, double tau,
                            const FirstStageConfig& cfg);
MpeEstimate cv_mean_mpe(const Dataset& data, const PolicySpec& policy,
                        const FirstStageConfig& cfg);
MpeEstimate cv_gini_mpe(const Dataset& data, const PolicySpec& policy,
                        const FirstStageConfig& cfg);

// beta_hat^UQR(tau): the location-shift specialization (pi_dot == 1); shares
// the plugin code path bit for bit.
double uqr_estimand(const Dataset& data, double tau, const FirstStageConfig& cfg);

// Riesz representer alpha(d,x) = d/dd [pi_dot(d) f_{D,X}(d,x)] / f_{D,X}(d,x)
// from a product-Gaussian KDE with analytic d-derivative. Exposed for the
// orthogonality and Riesz-identity checks. Returns nullopt when the density
// falls below the trim floor or the policy trims the point.
std::optional<double> riesz_alpha(const Dataset& data, const PolicySpec& policy,
                                  const FirstStageConfig& cfg, double d,
                                  const std::vector<double>& x, int exclude_fold = -1,
                                  const std::vector<int>* folds = nullptr);

// Batched riesz_alpha at many points; `points` is row-major with 1 + k
// coordinates per row (d first). Builds the KDE once.
std::vector<std::optional<double>> riesz_alpha_batch(const Dataset& data,
                                                     const PolicySpec& policy,
                                                     const FirstStageConfig& cfg,
                                                     const std::vector<double>& points);

// Seeded fold assignment by permutation; deterministic in (n, folds, seed).
std::vector<int> assign_folds(std::size_t n, int folds, std::uint64_t seed);

// Pairs bootstrap dispersion (plumbing only, no coverage claims): standard
// deviation of B re-estimates on resampled rows.
double bootstrap_dispersion(const Dataset& data, int b_reps, std::uint64_t seed,
                            const std::function<double(const Dataset&)>& estimator);

}  // namespace mpe
