#pragma once

#include <string>
#include <vector>

#include "mpe/estimators.hpp"

namespace mpe {

struct CheckResult {
  std::string name;
  bool pass = false;
  double value = 0.0;      // observed statistic
  double threshold = 0.0;  // bound it was compared against
  std::string detail;
};

// Scales for the verification suite. Defaults are the full desk-scale runs;
// the CLI can lower n_oracle / reps for a quick pass.
struct CheckScale {
  std::size_t n_oracle = 1000000;
  double t_step = 0.01;
  std::size_t n_est = 2000;
  int mc_reps = 100;
  int threads = 1;
  std::uint64_t seed = 90210;
};

// Representation identity: |oracle_mpe - oracle_structural_side| <= 3
// combined MC SEs over presets x policies x functionals.
std::vector<CheckResult> check_theorem1_identity(const CheckScale& scale);

// Quantile representation: quantile MPE vs E[pi_dot dm | Y = q_tau].
std::vector<CheckResult> check_corollary1(const CheckScale& scale);

// UQR decomposition into the conditional structural derivative and the
// endogeneity bias term; the bias is statistically zero under independence.
std::vector<CheckResult> check_theorem2(const CheckScale& scale);

// Known-truth estimation on Y = D + eps (the single-equation identification
// route): MC means and declining RMSE for the plugin, reweighting, debiased
// and mean estimators.
std::vector<CheckResult> check_known_truth(const CheckScale& scale);

// Gini MPE closed form on Y = D, D ~ U(1,2).
std::vector<CheckResult> check_gini_closed_form(const CheckScale& scale);

// Hadamard derivatives vs path finite differences with error halving.
std::vector<CheckResult> check_hadamard_fd(const CheckScale& scale);

// Control-variable suite: V_hat uniformity (probability integral transform),
// endogeneity correction vs the naive plugin on the triangular system.
std::vector<CheckResult> check_control_variable(const CheckScale& scale);

// psi_Q orthogonality slope and the Riesz integration-by-parts identity.
std::vector<CheckResult> check_orthogonality_riesz(const CheckScale& scale);

// Byte-identical rerun and first-k replication stability.
std::vector<CheckResult> check_determinism(const CheckScale& scale);

std::vector<CheckResult> run_all_checks(const CheckScale& scale);

// sup_t |F_hat(t) - t| against the uniform law on [0,1].
double ks_uniform_statistic(std::vector<double> values);

}  // namespace mpe
