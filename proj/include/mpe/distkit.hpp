#pragma once

#include <optional>
#include <vector>

#include "mpe/common.hpp"

namespace mpe {

// Quantile-grid used by every integral that involves estimated densities
// (Hadamard derivatives of the mean and Gini, the Gini MPE estimator).
// Integrals of bounded sample quantities (Lorenz, Gini, phi) are computed
// exactly instead; see gini()/phi_weight().
inline constexpr int kTauGridSize = 512;
inline constexpr double kTauGridLo = 0.005;
inline constexpr double kTauGridHi = 0.995;

const std::vector<double>& tau_grid();
// Trapezoid weights for tau_grid(); they sum to kTauGridHi - kTauGridLo.
const std::vector<double>& tau_grid_weights();

// A sorted, optionally weighted sample. The concrete stand-in for the
// outcome law: ECDF, left-continuous quantile, KDE, Lorenz/Gini services.
class EmpiricalDistribution {
 public:
  explicit EmpiricalDistribution(std::vector<double> values);
  EmpiricalDistribution(std::vector<double> values, std::vector<double> weights);

  std::size_t size() const { return values_.size(); }
  const std::vector<double>& values() const { return values_; }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<double>& cum_weights() const { return cum_weights_; }

  double min() const { return values_.front(); }
  double max() const { return values_.back(); }
  double mean() const { return mean_; }
  double sd() const;
  double iqr() const;
  // min(sd, iqr/1.349), the robust scale behind the Silverman rule;
  // falls back to sd when the IQR degenerates.
  double robust_scale() const;

 private:
  std::vector<double> values_;
  std::vector<double> weights_;
  std::vector<double> cum_weights_;
  double mean_ = 0.0;
};

enum class Kernel { gaussian, epanechnikov };
enum class BandwidthRule { explicit_value, silverman };

struct KernelSpec {
  Kernel kernel = Kernel::gaussian;
  BandwidthRule rule = BandwidthRule::silverman;
  double bandwidth = 0.0;  // used when rule == explicit_value; must be > 0

  static KernelSpec silverman(Kernel k = Kernel::gaussian) {
    return KernelSpec{k, BandwidthRule::silverman, 0.0};
  }
  static KernelSpec fixed(double h, Kernel k = Kernel::gaussian);
};

double kernel_value(Kernel k, double u);
// d/du of the kernel; needed for analytic KDE derivatives.
double kernel_deriv(Kernel k, double u);

// h = 1.06 * min(sd, IQR/1.349) * n^(-1/5); throws ConfigurationError on a
// zero-dispersion sample.
double silverman_bandwidth(const EmpiricalDistribution& dist);
double resolve_bandwidth(const EmpiricalDistribution& dist, const KernelSpec& spec);

// P[Y <= y], right-continuous step function.
double ecdf_eval(const EmpiricalDistribution& dist, double y);

// Left-continuous generalized inverse inf{y : F(y) >= tau}; no interpolation.
double quantile(const EmpiricalDistribution& dist, double tau);

double kde_eval(const EmpiricalDistribution& dist, const KernelSpec& spec, double y);

// Lorenz curve L_p = int_0^p Q_tau dtau / mean, computed exactly on the
// piecewise-linear empirical Lorenz curve. Requires values >= 0, mean > 0.
double lorenz(const EmpiricalDistribution& dist, double p);

// Gini coefficient 1 - 2 int_0^1 L_p dp, exact for the empirical law.
double gini(const EmpiricalDistribution& dist);

// phi(tau) = int_0^1 (tau - p) Q_p dp = tau * mean - int_0^1 p Q_p dp,
// affine in tau with slope equal to the sample mean.
double phi_weight(const EmpiricalDistribution& dist, double tau);

// int_0^1 p Q_p dp, exact for the empirical step quantile; the tau-free
// part of phi_weight, exposed so grid loops can hoist it.
double quantile_rank_integral(const EmpiricalDistribution& dist);

}  // namespace mpe
