#pragma once

#include <memory>
#include <optional>
#include <string>

#include "mpe/distkit.hpp"

namespace mpe {

enum class PolicyKind { location_shift, location_scale, mean_preserving, rank_preserving };

// Payload for the rank-preserving transformation pi_t(d) = H_t^{-1}(F_D(d))
// with H_t = F_D + t (G_D - F_D). The density f_D enters the pi-dot weight
// denominator, so evaluation points below the fitted density floor are
// reported as trimmed rather than divided through.
struct RankPreservingData {
  EmpiricalDistribution f_d;
  EmpiricalDistribution g_d;
  KernelSpec kde;
  double bandwidth = 0.0;      // resolved against f_d
  double density_floor = 0.0;  // 1st percentile of fitted density values
};

// A pi_t family with closed-form pathwise derivative at t = 0.
//   location_shift:   pi_t(d) = d + t
//   location_scale:   pi_t(d) = mu + l_dot t + (d - mu)(1 + s_dot t)
//   mean_preserving:  pi_t(d) = mean_d + (1 + alpha t)(d - mean_d)
//   rank_preserving:  pi_t(d) = H_t^{-1}(F_D(d))
struct PolicySpec {
  PolicyKind kind = PolicyKind::location_shift;
  double mu = 0.0, l_dot = 1.0, s_dot = 0.0;  // location_scale
  double alpha = 0.0, mean_d = 0.0;           // mean_preserving
  std::shared_ptr<const RankPreservingData> rank;

  static PolicySpec location_shift();
  static PolicySpec location_scale(double mu, double l_dot, double s_dot);
  static PolicySpec mean_preserving(double alpha, double mean_d);
  static PolicySpec rank_preserving(EmpiricalDistribution f_d, EmpiricalDistribution g_d,
                                    KernelSpec kde = KernelSpec::silverman());
};

std::string policy_name(const PolicySpec& spec);

// pi_t(d). Requires t in [0,1]; rank_preserving requires d inside the
// observed support of F_D.
double apply(const PolicySpec& spec, double d, double t);

// d/dt pi_t(d) at t = 0. Returns nullopt only for rank_preserving points
// where the fitted f_D falls below the density floor (the caller drops the
// observation and counts it).
std::optional<double> pi_dot(const PolicySpec& spec, double d);

// d/dd of pi_dot; needed by the Riesz representer. Closed form for the
// affine-in-t variants, central finite difference for rank_preserving.
std::optional<double> pi_dot_deriv(const PolicySpec& spec, double d);

// (pi_t(d) - d)/t; property-test probe of pi_dot.
double finite_diff_pi_dot(const PolicySpec& spec, double d, double t_step);

}  // namespace mpe
