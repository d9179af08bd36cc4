#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mpe/distkit.hpp"
#include "mpe/policy.hpp"

namespace mpe {

enum class FunctionalKind { id_at, quantile, mean, gini };

// Gamma: a scalar distributional functional with a closed-form Hadamard
// derivative. param is the evaluation point y for id_at and the level tau
// for quantile; unused otherwise.
struct FunctionalSpec {
  FunctionalKind kind = FunctionalKind::mean;
  double param = 0.0;

  static FunctionalSpec id_at(double y) { return {FunctionalKind::id_at, y}; }
  static FunctionalSpec quantile(double tau);
  static FunctionalSpec mean() { return {FunctionalKind::mean, 0.0}; }
  static FunctionalSpec gini() { return {FunctionalKind::gini, 0.0}; }
};

std::string functional_name(const FunctionalSpec& spec);

// A direction h : R -> R represented by its values at the reference
// quantiles q_tau over the shared tau-grid, with linear interpolation in y.
// Every Hadamard derivative used here evaluates h only at quantiles, which
// makes the mean and Gini derivatives one-pass integrals over this grid.
class DirectionFunction {
 public:
  static DirectionFunction from_callable(const std::function<double(double)>& h,
                                         const EmpiricalDistribution& ref);
  static DirectionFunction from_grid(std::vector<double> ys, std::vector<double> hs);

  double operator()(double y) const;

 private:
  DirectionFunction() = default;
  std::vector<double> ys_;  // ascending, deduplicated
  std::vector<double> hs_;
};

// Gamma(F_hat) using distkit primitives.
double eval(const FunctionalSpec& spec, const EmpiricalDistribution& dist);

struct HadamardResult {
  double value = 0.0;
  int n_used = 0;
  int n_trimmed = 0;
};

// Gamma'_F(h):
//   id_at(y)    ->  h(y)
//   quantile(t) -> -h(q_t) / f(q_t)
//   mean        ->  int_0^1 -h(q_tau)/f(q_tau) dtau
//   gini        ->  (2/mean^2) int_0^1 phi(tau) (-h(q_tau)/f(q_tau)) dtau
// Grid points where the fitted density falls below max(1e-4, 0.01 max f) are
// excluded and counted, with the trapezoid weights renormalized to unit
// measure. All grid points trimmed -> EstimationError.
HadamardResult hadamard_apply(const FunctionalSpec& spec, const EmpiricalDistribution& dist,
                              const KernelSpec& kde, const DirectionFunction& h);

// omega^f(y,d) = -f_Y(y) pi_dot(d); nullopt when the policy trims the point.
std::optional<double> omega_f(const EmpiricalDistribution& dist, const KernelSpec& kde,
                              const PolicySpec& policy, double y, double d);

// omega^GC(y,d) = 2 phi(F_Y(y)) pi_dot(d) / mean^2.
std::optional<double> omega_gc(const EmpiricalDistribution& dist, const PolicySpec& policy,
                               double y, double d);

}  // namespace mpe
