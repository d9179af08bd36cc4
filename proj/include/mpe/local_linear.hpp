#pragma once

#include <span>
#include <vector>

#include "mpe/distkit.hpp"

namespace mpe {

// One locally weighted least-squares fit: window into the engine's
// col0-sorted order, kernel weights, and the Cholesky factor of the moment
// matrix. The factor is reused across responses (CDF indicators at many
// thresholds, conditional mean, smoothed density) at the same target.
struct LLFit {
  bool ok = false;
  int q = 0;  // 1 + #regressors
  std::size_t win_begin = 0, win_end = 0;
  double sum_w = 0.0;
  double ess = 0.0;
  std::vector<double> target;  // fit point; responses use the same centering
  std::vector<double> w;       // weights for [win_begin, win_end)
  std::vector<double> chol;    // lower-triangular factor, q*q
};

// Local-linear smoother for responses regressed on a shared set of
// regressors (D first, then V and/or X). Observations are stored sorted by
// the first regressor so Gaussian windows can be cut by binary search.
class LocalLinearEngine {
 public:
  LocalLinearEngine(const std::vector<double>& regs_rowmajor, int p,
                    const std::vector<double>& y, std::vector<double> bandwidths,
                    Kernel kernel, double min_ess);

  std::size_t n() const { return n_; }
  int p() const { return p_; }
  const std::vector<double>& bandwidths() const { return bw_; }

  // fold ids indexed like the constructor inputs; enables leave-fold-out fits
  void set_folds(const std::vector<int>& fold_by_input_index);

  // target has p coordinates; exclude_fold < 0 means use every observation
  bool fit_at(std::span<const double> target, int exclude_fold, LLFit& fit) const;

  struct Eval {
    double value = 0.0;
    double dslope = 0.0;  // slope in the first regressor
  };

  // local-linear regression of 1{Y <= y}; value clipped to [0,1]
  Eval cdf_at(const LLFit& fit, double y) const;
  // local-linear regression of Y
  Eval mean_at(const LLFit& fit) const;
  // smoothed conditional density: regression of K_hy(Y - y); clipped at 0
  double density_at(const LLFit& fit, double y, double hy) const;
  // CDF values at an ascending y-grid, monotone-rearranged (PAV) and clipped;
  // optionally also the raw D-slopes at every grid point (no rearrangement)
  void cdf_profile(const LLFit& fit, const std::vector<double>& y_grid,
                   std::vector<double>& out, std::vector<double>* dslopes = nullptr) const;

 private:
  void solve(const LLFit& fit, const double* rhs, double* beta) const;

  std::size_t n_ = 0;
  int p_ = 0;
  Kernel kernel_ = Kernel::gaussian;
  double min_ess_ = 20.0;
  double radius_ = 6.0;  // kernel support in bandwidth units
  std::vector<double> bw_;
  std::vector<std::size_t> order_;  // sorted position -> input index
  std::vector<double> col0_;        // sorted first regressor
  std::vector<double> regs_;        // n x p, sorted by col0
  std::vector<double> y_;           // sorted by col0
  std::vector<int> folds_;          // sorted by col0; empty = no folds
};

// Pool-adjacent-violators: smallest-squares nondecreasing rearrangement.
void pav_nondecreasing(std::vector<double>& v);

// Per-dimension rule-of-thumb bandwidth 1.06 * robust_scale * n^(-1/(4+p)).
std::vector<double> rule_of_thumb_bandwidths(const std::vector<double>& regs_rowmajor, int p,
                                             std::size_t n, double scale);

}  // namespace mpe
