#include "mpe/local_linear.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mpe {

void pav_nondecreasing(std::vector<double>& v) {
  const std::size_t n = v.size();
  if (n < 2) return;
  std::vector<double> level(n);
  std::vector<double> weight(n);
  std::vector<std::size_t> count(n);
  std::size_t top = 0;
  for (std::size_t i = 0; i < n; ++i) {
    level[top] = v[i];
    weight[top] = 1.0;
    count[top] = 1;
    ++top;
    while (top > 1 && level[top - 2] > level[top - 1]) {
      double wsum = weight[top - 2] + weight[top - 1];
      level[top - 2] = (weight[top - 2] * level[top - 2] + weight[top - 1] * level[top - 1]) / wsum;
      weight[top - 2] = wsum;
      count[top - 2] += count[top - 1];
      --top;
    }
  }
  std::size_t pos = 0;
  for (std::size_t b = 0; b < top; ++b) {
    for (std::size_t c = 0; c < count[b]; ++c) v[pos++] = level[b];
  }
}

std::vector<double> rule_of_thumb_bandwidths(const std::vector<double>& regs_rowmajor, int p,
                                             std::size_t n, double scale) {
  std::vector<double> bw(p);
  double expn = std::pow(static_cast<double>(n), -1.0 / (4.0 + static_cast<double>(p)));
  std::vector<double> col(n);
  for (int j = 0; j < p; ++j) {
    for (std::size_t i = 0; i < n; ++i) col[i] = regs_rowmajor[i * p + j];
    EmpiricalDistribution dist(col);
    double s = dist.robust_scale();
    if (!(s > 0.0)) {
      throw ConfigurationError("rule_of_thumb_bandwidths: regressor " + std::to_string(j) +
                               " has zero dispersion");
    }
    bw[j] = 1.06 * s * expn * scale;
  }
  return bw;
}

LocalLinearEngine::LocalLinearEngine(const std::vector<double>& regs_rowmajor, int p,
                                     const std::vector<double>& y,
                                     std::vector<double> bandwidths, Kernel kernel,
                                     double min_ess)
    : n_(y.size()),
      p_(p),
      kernel_(kernel),
      min_ess_(min_ess),
      radius_(kernel == Kernel::gaussian ? 5.0 : 1.0),
      bw_(std::move(bandwidths)) {
  if (p < 1 || p > 7) throw ConfigurationError("LocalLinearEngine: p out of range");
  if (regs_rowmajor.size() != n_ * static_cast<std::size_t>(p)) {
    throw ConfigurationError("LocalLinearEngine: regressor matrix shape mismatch");
  }
  if (static_cast<int>(bw_.size()) != p) {
    throw ConfigurationError("LocalLinearEngine: need one bandwidth per regressor");
  }
  order_.resize(n_);
  std::iota(order_.begin(), order_.end(), 0);
  std::sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
    return regs_rowmajor[a * p] < regs_rowmajor[b * p];
  });
  col0_.resize(n_);
  regs_.resize(n_ * p);
  y_.resize(n_);
  for (std::size_t i = 0; i < n_; ++i) {
    std::size_t src = order_[i];
    col0_[i] = regs_rowmajor[src * p];
    for (int j = 0; j < p; ++j) regs_[i * p + j] = regs_rowmajor[src * p + j];
    y_[i] = y[src];
  }
}

void LocalLinearEngine::set_folds(const std::vector<int>& fold_by_input_index) {
  if (fold_by_input_index.size() != n_) {
    throw ConfigurationError("set_folds: fold vector size mismatch");
  }
  folds_.resize(n_);
  for (std::size_t i = 0; i < n_; ++i) folds_[i] = fold_by_input_index[order_[i]];
}

bool LocalLinearEngine::fit_at(std::span<const double> target, int exclude_fold,
                               LLFit& fit) const {
  const int q = p_ + 1;
  fit.ok = false;
  fit.q = q;
  fit.target.assign(target.begin(), target.end());
  double t0 = target[0];
  double r0 = radius_ * bw_[0];
  fit.win_begin = std::lower_bound(col0_.begin(), col0_.end(), t0 - r0) - col0_.begin();
  fit.win_end = std::upper_bound(col0_.begin(), col0_.end(), t0 + r0) - col0_.begin();
  if (fit.win_end <= fit.win_begin) return false;
  const std::size_t m = fit.win_end - fit.win_begin;
  fit.w.assign(m, 0.0);

  double M[64] = {0.0};  // q x q lower triangle, q <= 8
  double sw = 0.0, sw2 = 0.0;
  double phi[8];
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t row = fit.win_begin + i;
    if (exclude_fold >= 0 && !folds_.empty() && folds_[row] == exclude_fold) continue;
    const double* r = &regs_[row * p_];
    double w = 1.0;
    for (int j = 0; j < p_; ++j) {
      double u = (r[j] - target[j]) / bw_[j];
      if (kernel_ != Kernel::gaussian && std::abs(u) >= 1.0) {
        w = 0.0;
        break;
      }
      w *= kernel_value(kernel_, u);
    }
    if (w <= 0.0) continue;
    fit.w[i] = w;
    sw += w;
    sw2 += w * w;
    phi[0] = 1.0;
    for (int j = 0; j < p_; ++j) phi[j + 1] = r[j] - target[j];
    for (int a = 0; a < q; ++a) {
      for (int b = 0; b <= a; ++b) M[a * q + b] += w * phi[a] * phi[b];
    }
  }
  if (sw <= 0.0 || sw2 <= 0.0) return false;
  fit.sum_w = sw;
  fit.ess = sw * sw / sw2;
  if (fit.ess < min_ess_) return false;

  // Cholesky with a small ridge; a failed pivot marks a singular local design
  fit.chol.assign(static_cast<std::size_t>(q) * q, 0.0);
  for (int a = 0; a < q; ++a) M[a * q + a] += 1e-10 * (1.0 + M[a * q + a]);
  for (int a = 0; a < q; ++a) {
    for (int b = 0; b <= a; ++b) {
      double s = M[a * q + b];
      for (int c = 0; c < b; ++c) s -= fit.chol[a * q + c] * fit.chol[b * q + c];
      if (a == b) {
        if (s <= 0.0) return false;
        fit.chol[a * q + a] = std::sqrt(s);
      } else {
        fit.chol[a * q + b] = s / fit.chol[b * q + b];
      }
    }
  }
  fit.ok = true;
  return true;
}

void LocalLinearEngine::solve(const LLFit& fit, const double* rhs, double* beta) const {
  const int q = fit.q;
  double tmp[8];
  for (int a = 0; a < q; ++a) {
    double s = rhs[a];
    for (int c = 0; c < a; ++c) s -= fit.chol[a * q + c] * tmp[c];
    tmp[a] = s / fit.chol[a * q + a];
  }
  for (int a = q - 1; a >= 0; --a) {
    double s = tmp[a];
    for (int c = a + 1; c < q; ++c) s -= fit.chol[c * q + a] * beta[c];
    beta[a] = s / fit.chol[a * q + a];
  }
}

LocalLinearEngine::Eval LocalLinearEngine::cdf_at(const LLFit& fit, double y) const {
  double rhs[8] = {0.0};
  double phi[8];
  double hit_w = 0.0;
  for (std::size_t i = 0; i < fit.w.size(); ++i) {
    double w = fit.w[i];
    if (w <= 0.0) continue;
    std::size_t row = fit.win_begin + i;
    if (y_[row] > y) continue;
    hit_w += w;
    const double* r = &regs_[row * p_];
    phi[0] = 1.0;
    for (int j = 0; j < p_; ++j) phi[j + 1] = r[j] - fit.target[j];
    for (int a = 0; a < fit.q; ++a) rhs[a] += w * phi[a];
  }
  // saturated responses are exact, independent of the ridge
  if (hit_w <= 0.0) return {0.0, 0.0};
  if (hit_w >= fit.sum_w) return {1.0, 0.0};
  double beta[8];
  solve(fit, rhs, beta);
  return {std::clamp(beta[0], 0.0, 1.0), beta[1]};
}

LocalLinearEngine::Eval LocalLinearEngine::mean_at(const LLFit& fit) const {
  double rhs[8] = {0.0};
  double phi[8];
  for (std::size_t i = 0; i < fit.w.size(); ++i) {
    double w = fit.w[i];
    if (w <= 0.0) continue;
    std::size_t row = fit.win_begin + i;
    double resp = y_[row];
    const double* r = &regs_[row * p_];
    phi[0] = 1.0;
    for (int j = 0; j < p_; ++j) phi[j + 1] = r[j] - fit.target[j];
    for (int a = 0; a < fit.q; ++a) rhs[a] += w * resp * phi[a];
  }
  double beta[8];
  solve(fit, rhs, beta);
  return {beta[0], beta[1]};
}

double LocalLinearEngine::density_at(const LLFit& fit, double y, double hy) const {
  double rhs[8] = {0.0};
  double phi[8];
  for (std::size_t i = 0; i < fit.w.size(); ++i) {
    double w = fit.w[i];
    if (w <= 0.0) continue;
    std::size_t row = fit.win_begin + i;
    double u = (y_[row] - y) / hy;
    if (std::abs(u) > 8.0) continue;
    double resp = kernel_value(Kernel::gaussian, u) / hy;
    const double* r = &regs_[row * p_];
    phi[0] = 1.0;
    for (int j = 0; j < p_; ++j) phi[j + 1] = r[j] - fit.target[j];
    for (int a = 0; a < fit.q; ++a) rhs[a] += w * resp * phi[a];
  }
  double beta[8];
  solve(fit, rhs, beta);
  return std::max(beta[0], 0.0);
}

void LocalLinearEngine::cdf_profile(const LLFit& fit, const std::vector<double>& y_grid,
                                    std::vector<double>& out,
                                    std::vector<double>* dslopes) const {
  const std::size_t g_count = y_grid.size();
  const int q = fit.q;
  // bucket g holds sum of w*phi over observations whose Y lands in
  // (y_{g-1}, y_g]; prefix sums give the indicator RHS at every grid point
  std::vector<double> buckets((g_count + 1) * static_cast<std::size_t>(q), 0.0);
  double phi[8];
  for (std::size_t i = 0; i < fit.w.size(); ++i) {
    double w = fit.w[i];
    if (w <= 0.0) continue;
    std::size_t row = fit.win_begin + i;
    std::size_t g = std::lower_bound(y_grid.begin(), y_grid.end(), y_[row]) - y_grid.begin();
    const double* r = &regs_[row * p_];
    phi[0] = 1.0;
    for (int j = 0; j < p_; ++j) phi[j + 1] = r[j] - fit.target[j];
    double* slot = &buckets[g * q];
    for (int a = 0; a < q; ++a) slot[a] += w * phi[a];
  }
  out.assign(g_count, 0.0);
  if (dslopes) dslopes->assign(g_count, 0.0);
  double rhs[8] = {0.0};
  double beta[8];
  for (std::size_t g = 0; g < g_count; ++g) {
    const double* slot = &buckets[g * q];
    for (int a = 0; a < q; ++a) rhs[a] += slot[a];
    solve(fit, rhs, beta);
    out[g] = beta[0];
    if (dslopes) (*dslopes)[g] = beta[1];
  }
  pav_nondecreasing(out);
  for (double& v : out) v = std::clamp(v, 0.0, 1.0);
}

}  // namespace mpe
