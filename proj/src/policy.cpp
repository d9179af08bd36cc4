#include "mpe/policy.hpp"

#include <algorithm>
#include <cmath>

namespace mpe {

PolicySpec PolicySpec::location_shift() { return PolicySpec{}; }

PolicySpec PolicySpec::location_scale(double mu, double l_dot, double s_dot) {
  PolicySpec s;
  s.kind = PolicyKind::location_scale;
  s.mu = mu;
  s.l_dot = l_dot;
  s.s_dot = s_dot;
  return s;
}

PolicySpec PolicySpec::mean_preserving(double alpha, double mean_d) {
  if (alpha < -1.0 || alpha > 1.0) {
    throw std::domain_error("mean_preserving: alpha must lie in [-1,1]");
  }
  PolicySpec s;
  s.kind = PolicyKind::mean_preserving;
  s.alpha = alpha;
  s.mean_d = mean_d;
  return s;
}

PolicySpec PolicySpec::rank_preserving(EmpiricalDistribution f_d, EmpiricalDistribution g_d,
                                       KernelSpec kde) {
  auto data = std::make_shared<RankPreservingData>(
      RankPreservingData{std::move(f_d), std::move(g_d), kde, 0.0, 0.0});
  data->bandwidth = resolve_bandwidth(data->f_d, kde);
  KernelSpec resolved = KernelSpec::fixed(data->bandwidth, kde.kernel);
  // density floor: 1st percentile of fitted density values at the sample points
  std::vector<double> fitted(data->f_d.size());
  for (std::size_t i = 0; i < fitted.size(); ++i) {
    fitted[i] = kde_eval(data->f_d, resolved, data->f_d.values()[i]);
  }
  std::sort(fitted.begin(), fitted.end());
  std::size_t idx = static_cast<std::size_t>(0.01 * static_cast<double>(fitted.size()));
  data->density_floor = fitted[std::min(idx, fitted.size() - 1)];
  PolicySpec s;
  s.kind = PolicyKind::rank_preserving;
  s.rank = std::move(data);
  return s;
}

std::string policy_name(const PolicySpec& spec) {
  switch (spec.kind) {
    case PolicyKind::location_shift:
      return "location_shift";
    case PolicyKind::location_scale:
      return "location_scale";
    case PolicyKind::mean_preserving:
      return "mean_preserving";
    case PolicyKind::rank_preserving:
      return "rank_preserving";
  }
  return "unknown";
}

namespace {

// inf{u : H_t(u) >= tau} for the step mixture H_t = F_D + t (G_D - F_D),
// located by bisection; the form F + t(G - F) keeps H_t == F_D exact when
// G_D is numerically identical to F_D.
double ht_inverse(const RankPreservingData& rp, double tau, double t) {
  const auto ht = [&](double u) {
    double f = ecdf_eval(rp.f_d, u);
    return f + t * (ecdf_eval(rp.g_d, u) - f);
  };
  double lo = std::min(rp.f_d.min(), rp.g_d.min());
  double hi = std::max(rp.f_d.max(), rp.g_d.max());
  if (ht(lo) >= tau) return lo;
  // bisection on a monotone step function; 1e-10 interval tolerance
  for (int it = 0; it < 200 && hi - lo > 1e-10 * (1.0 + std::abs(hi)); ++it) {
    double mid = 0.5 * (lo + hi);
    if (ht(mid) >= tau) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

}  // namespace

double apply(const PolicySpec& spec, double d, double t) {
  if (t < 0.0 || t > 1.0) throw std::domain_error("policy apply: t must lie in [0,1]");
  if (t == 0.0 && spec.kind != PolicyKind::rank_preserving) return d;  // pi_0 = id, exactly
  switch (spec.kind) {
    case PolicyKind::location_shift:
      return d + t;
    case PolicyKind::location_scale: {
      double s = 1.0 + spec.s_dot * t;
      if (!(s > 0.0)) throw std::domain_error("location_scale: implied scale not positive");
      return spec.mu + spec.l_dot * t + (d - spec.mu) * s;
    }
    case PolicyKind::mean_preserving:
      return spec.mean_d + (1.0 + spec.alpha * t) * (d - spec.mean_d);
    case PolicyKind::rank_preserving: {
      const auto& rp = *spec.rank;
      if (d < rp.f_d.min() || d > rp.f_d.max()) {
        throw std::domain_error("rank_preserving: d outside the support of F_D");
      }
      if (t == 0.0) return d;
      return ht_inverse(rp, ecdf_eval(rp.f_d, d), t);
    }
  }
  return d;
}

std::optional<double> pi_dot(const PolicySpec& spec, double d) {
  switch (spec.kind) {
    case PolicyKind::location_shift:
      return 1.0;
    case PolicyKind::location_scale:
      return spec.l_dot + (d - spec.mu) * spec.s_dot;
    case PolicyKind::mean_preserving:
      return spec.alpha * (d - spec.mean_d);
    case PolicyKind::rank_preserving: {
      const auto& rp = *spec.rank;
      KernelSpec resolved = KernelSpec::fixed(rp.bandwidth, rp.kde.kernel);
      double fd = kde_eval(rp.f_d, resolved, d);
      if (fd < rp.density_floor || fd <= 0.0) return std::nullopt;
      return -(ecdf_eval(rp.g_d, d) - ecdf_eval(rp.f_d, d)) / fd;
    }
  }
  return 1.0;
}

std::optional<double> pi_dot_deriv(const PolicySpec& spec, double d) {
  switch (spec.kind) {
    case PolicyKind::location_shift:
      return 0.0;
    case PolicyKind::location_scale:
      return spec.s_dot;
    case PolicyKind::mean_preserving:
      return spec.alpha;
    case PolicyKind::rank_preserving: {
      const auto& rp = *spec.rank;
      double step = 0.5 * rp.bandwidth;
      auto up = pi_dot(spec, std::min(d + step, rp.f_d.max()));
      auto dn = pi_dot(spec, std::max(d - step, rp.f_d.min()));
      if (!up || !dn) return std::nullopt;
      double width = std::min(d + step, rp.f_d.max()) - std::max(d - step, rp.f_d.min());
      if (width <= 0.0) return std::nullopt;
      return (*up - *dn) / width;
    }
  }
  return 0.0;
}

double finite_diff_pi_dot(const PolicySpec& spec, double d, double t_step) {
  if (!(t_step > 0.0 && t_step <= 0.05)) {
    throw std::domain_error("finite_diff_pi_dot: t_step must lie in (0, 0.05]");
  }
  return (apply(spec, d, t_step) - d) / t_step;
}

}  // namespace mpe
