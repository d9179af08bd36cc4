#include "mpe/distkit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mpe {

const std::vector<double>& tau_grid() {
  static const std::vector<double> grid = [] {
    std::vector<double> g(kTauGridSize);
    double step = (kTauGridHi - kTauGridLo) / (kTauGridSize - 1);
    for (int i = 0; i < kTauGridSize; ++i) g[i] = kTauGridLo + step * i;
    return g;
  }();
  return grid;
}

const std::vector<double>& tau_grid_weights() {
  static const std::vector<double> w = [] {
    std::vector<double> v(kTauGridSize);
    double step = (kTauGridHi - kTauGridLo) / (kTauGridSize - 1);
    for (int i = 0; i < kTauGridSize; ++i) v[i] = step;
    v.front() *= 0.5;
    v.back() *= 0.5;
    return v;
  }();
  return w;
}

EmpiricalDistribution::EmpiricalDistribution(std::vector<double> values)
    : EmpiricalDistribution(std::move(values), {}) {}

EmpiricalDistribution::EmpiricalDistribution(std::vector<double> values,
                                             std::vector<double> weights) {
  if (values.size() < 2) {
    throw std::domain_error("EmpiricalDistribution: need at least 2 observations");
  }
  const std::size_t n = values.size();
  if (weights.empty()) {
    std::sort(values.begin(), values.end());
    values_ = std::move(values);
    weights_.assign(n, 1.0 / static_cast<double>(n));
  } else {
    if (weights.size() != n) {
      throw std::domain_error("EmpiricalDistribution: weights/values size mismatch");
    }
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    values_.resize(n);
    weights_.resize(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double w = weights[idx[i]];
      if (w < 0.0 || !std::isfinite(w)) {
        throw std::domain_error("EmpiricalDistribution: weights must be nonnegative");
      }
      values_[i] = values[idx[i]];
      weights_[i] = w;
      total += w;
    }
    if (total <= 0.0) {
      throw std::domain_error("EmpiricalDistribution: weights sum to zero");
    }
    for (double& w : weights_) w /= total;
  }
  for (double v : values_) {
    if (!std::isfinite(v)) throw std::domain_error("EmpiricalDistribution: non-finite value");
  }
  cum_weights_.resize(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += weights_[i];
    cum_weights_[i] = acc;
    mean_ += weights_[i] * values_[i];
  }
  cum_weights_.back() = 1.0;
}

double EmpiricalDistribution::sd() const {
  double s = 0.0;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    double d = values_[i] - mean_;
    s += weights_[i] * d * d;
  }
  return std::sqrt(s);
}

double EmpiricalDistribution::iqr() const {
  return quantile(*this, 0.75) - quantile(*this, 0.25);
}

double EmpiricalDistribution::robust_scale() const {
  double s = sd();
  double r = iqr() / 1.349;
  if (r <= 0.0) return s;
  return std::min(s, r);
}

KernelSpec KernelSpec::fixed(double h, Kernel k) {
  if (!(h > 0.0)) throw ConfigurationError("KernelSpec: explicit bandwidth must be > 0");
  return KernelSpec{k, BandwidthRule::explicit_value, h};
}

double kernel_value(Kernel k, double u) {
  switch (k) {
    case Kernel::gaussian:
      return gauss_pdf(u);
    case Kernel::epanechnikov:
      return std::abs(u) < 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
  }
  return 0.0;
}

double kernel_deriv(Kernel k, double u) {
  switch (k) {
    case Kernel::gaussian:
      return -u * gauss_pdf(u);
    case Kernel::epanechnikov:
      return std::abs(u) < 1.0 ? -1.5 * u : 0.0;
  }
  return 0.0;
}

double silverman_bandwidth(const EmpiricalDistribution& dist) {
  double scale = dist.robust_scale();
  if (!(scale > 0.0)) {
    throw ConfigurationError("silverman_bandwidth: zero-dispersion sample");
  }
  return 1.06 * scale * std::pow(static_cast<double>(dist.size()), -0.2);
}

double resolve_bandwidth(const EmpiricalDistribution& dist, const KernelSpec& spec) {
  if (spec.rule == BandwidthRule::explicit_value) {
    if (!(spec.bandwidth > 0.0)) {
      throw ConfigurationError("resolve_bandwidth: explicit bandwidth must be > 0");
    }
    return spec.bandwidth;
  }
  return silverman_bandwidth(dist);
}

double ecdf_eval(const EmpiricalDistribution& dist, double y) {
  const auto& v = dist.values();
  auto it = std::upper_bound(v.begin(), v.end(), y);
  if (it == v.begin()) return 0.0;
  std::size_t i = static_cast<std::size_t>(it - v.begin()) - 1;
  return dist.cum_weights()[i];
}

double quantile(const EmpiricalDistribution& dist, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw std::domain_error("quantile: tau must lie in (0,1)");
  }
  const auto& cw = dist.cum_weights();
  auto it = std::lower_bound(cw.begin(), cw.end(), tau);
  if (it == cw.end()) --it;
  return dist.values()[static_cast<std::size_t>(it - cw.begin())];
}

double kde_eval(const EmpiricalDistribution& dist, const KernelSpec& spec, double y) {
  double h = resolve_bandwidth(dist, spec);
  const auto& v = dist.values();
  const auto& w = dist.weights();
  // all kernels here have support within |u| <= 8
  double lo = y - 8.0 * h;
  double hi = y + 8.0 * h;
  std::size_t a = std::lower_bound(v.begin(), v.end(), lo) - v.begin();
  std::size_t b = std::upper_bound(v.begin(), v.end(), hi) - v.begin();
  double s = 0.0;
  for (std::size_t i = a; i < b; ++i) {
    s += w[i] * kernel_value(spec.kernel, (y - v[i]) / h);
  }
  return s / h;
}

namespace {

void require_lorenz_preconditions(const EmpiricalDistribution& dist) {
  if (dist.min() < 0.0) {
    throw std::domain_error("lorenz/gini: values must be nonnegative");
  }
  if (!(dist.mean() > 0.0)) {
    throw std::domain_error("lorenz/gini: mean must be positive");
  }
}

}  // namespace

// sum_i y_(i) (W_i^2 - W_{i-1}^2) / 2 with cumulative weights W.
double quantile_rank_integral(const EmpiricalDistribution& dist) {
  const auto& v = dist.values();
  const auto& w = dist.weights();
  const auto& cw = dist.cum_weights();
  double s = 0.0;
  double prev = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    s += 0.5 * v[i] * w[i] * (cw[i] + prev);
    prev = cw[i];
  }
  return s;
}

double lorenz(const EmpiricalDistribution& dist, double p) {
  require_lorenz_preconditions(dist);
  if (p < 0.0 || p > 1.0) throw std::domain_error("lorenz: p must lie in [0,1]");
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return 1.0;
  const auto& v = dist.values();
  const auto& w = dist.weights();
  const auto& cw = dist.cum_weights();
  double acc = 0.0;
  double prev = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (cw[i] >= p) {
      acc += v[i] * (p - prev);
      break;
    }
    acc += v[i] * w[i];
    prev = cw[i];
  }
  return acc / dist.mean();
}

double gini(const EmpiricalDistribution& dist) {
  require_lorenz_preconditions(dist);
  // 1 - 2 int_0^1 L_p dp with int L exact for the piecewise-linear Lorenz
  // curve; algebra collapses to sum_i y_(i)(W_i^2 - W_{i-1}^2)/mean - 1.
  return 2.0 * quantile_rank_integral(dist) / dist.mean() - 1.0;
}

double phi_weight(const EmpiricalDistribution& dist, double tau) {
  require_lorenz_preconditions(dist);
  if (tau < 0.0 || tau > 1.0) throw std::domain_error("phi_weight: tau must lie in [0,1]");
  return tau * dist.mean() - quantile_rank_integral(dist);
}

}  // namespace mpe
