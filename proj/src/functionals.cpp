#include "mpe/functionals.hpp"

#include <algorithm>
#include <cmath>

namespace mpe {

FunctionalSpec FunctionalSpec::quantile(double tau) {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw std::domain_error("FunctionalSpec::quantile: tau must lie in (0,1)");
  }
  return {FunctionalKind::quantile, tau};
}

std::string functional_name(const FunctionalSpec& spec) {
  switch (spec.kind) {
    case FunctionalKind::id_at:
      return "id_at";
    case FunctionalKind::quantile:
      return "quantile";
    case FunctionalKind::mean:
      return "mean";
    case FunctionalKind::gini:
      return "gini";
  }
  return "unknown";
}

DirectionFunction DirectionFunction::from_callable(const std::function<double(double)>& h,
                                                   const EmpiricalDistribution& ref) {
  const auto& grid = tau_grid();
  std::vector<double> ys;
  std::vector<double> hs;
  ys.reserve(grid.size());
  hs.reserve(grid.size());
  for (double tau : grid) {
    double y = quantile(ref, tau);
    if (!ys.empty() && y <= ys.back()) continue;  // step quantiles repeat
    ys.push_back(y);
    hs.push_back(h(y));
  }
  if (ys.size() < 2) {
    // degenerate reference; keep a flat representation
    ys = {ref.min(), ref.min() + 1.0};
    double v = h(ref.min());
    hs = {v, v};
  }
  return from_grid(std::move(ys), std::move(hs));
}

DirectionFunction DirectionFunction::from_grid(std::vector<double> ys, std::vector<double> hs) {
  if (ys.size() != hs.size() || ys.size() < 2) {
    throw std::domain_error("DirectionFunction: need >= 2 grid points");
  }
  for (std::size_t i = 1; i < ys.size(); ++i) {
    if (!(ys[i] > ys[i - 1])) {
      throw std::domain_error("DirectionFunction: grid must be strictly ascending");
    }
  }
  DirectionFunction d;
  d.ys_ = std::move(ys);
  d.hs_ = std::move(hs);
  return d;
}

double DirectionFunction::operator()(double y) const {
  if (y <= ys_.front()) return hs_.front();
  if (y >= ys_.back()) return hs_.back();
  auto it = std::upper_bound(ys_.begin(), ys_.end(), y);
  std::size_t i = static_cast<std::size_t>(it - ys_.begin());
  double t = (y - ys_[i - 1]) / (ys_[i] - ys_[i - 1]);
  return hs_[i - 1] + t * (hs_[i] - hs_[i - 1]);
}

double eval(const FunctionalSpec& spec, const EmpiricalDistribution& dist) {
  switch (spec.kind) {
    case FunctionalKind::id_at:
      return ecdf_eval(dist, spec.param);
    case FunctionalKind::quantile:
      return quantile(dist, spec.param);
    case FunctionalKind::mean:
      return dist.mean();
    case FunctionalKind::gini:
      return gini(dist);
  }
  return 0.0;
}

namespace {

struct GridDensities {
  std::vector<double> q;      // quantiles at the tau grid
  std::vector<double> f;      // fitted density at those quantiles
  double floor = 0.0;
};

GridDensities grid_densities(const EmpiricalDistribution& dist, const KernelSpec& kde) {
  const auto& grid = tau_grid();
  GridDensities g;
  g.q.resize(grid.size());
  g.f.resize(grid.size());
  double h = resolve_bandwidth(dist, kde);
  KernelSpec resolved = KernelSpec::fixed(h, kde.kernel);
  double fmax = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    g.q[k] = quantile(dist, grid[k]);
    g.f[k] = kde_eval(dist, resolved, g.q[k]);
    fmax = std::max(fmax, g.f[k]);
  }
  g.floor = std::max(1e-4, 0.01 * fmax);
  return g;
}

}  // namespace

HadamardResult hadamard_apply(const FunctionalSpec& spec, const EmpiricalDistribution& dist,
                              const KernelSpec& kde, const DirectionFunction& h) {
  HadamardResult out;
  switch (spec.kind) {
    case FunctionalKind::id_at: {
      out.value = h(spec.param);
      out.n_used = 1;
      return out;
    }
    case FunctionalKind::quantile: {
      // density floor relative to the full-grid maximum, as in the integrals
      GridDensities g = grid_densities(dist, kde);
      double q = quantile(dist, spec.param);
      double f = kde_eval(dist, KernelSpec::fixed(resolve_bandwidth(dist, kde), kde.kernel), q);
      if (f < g.floor) {
        throw EstimationError("hadamard_apply: density below floor at the required quantile");
      }
      out.value = -h(q) / f;
      out.n_used = 1;
      return out;
    }
    case FunctionalKind::mean:
    case FunctionalKind::gini: {
      GridDensities g = grid_densities(dist, kde);
      const auto& grid = tau_grid();
      const auto& gw = tau_grid_weights();
      double acc = 0.0;
      double kept_measure = 0.0;
      bool is_gini = spec.kind == FunctionalKind::gini;
      double mu = dist.mean();
      if (is_gini && (dist.min() < 0.0 || !(mu > 0.0))) {
        throw std::domain_error("hadamard_apply(gini): needs nonnegative values, positive mean");
      }
      double rank_int = is_gini ? quantile_rank_integral(dist) : 0.0;
      for (std::size_t k = 0; k < grid.size(); ++k) {
        if (g.f[k] < g.floor) {
          ++out.n_trimmed;
          continue;
        }
        double integrand = -h(g.q[k]) / g.f[k];
        if (is_gini) integrand *= grid[k] * mu - rank_int;
        acc += gw[k] * integrand;
        kept_measure += gw[k];
        ++out.n_used;
      }
      if (out.n_used == 0) {
        throw EstimationError("hadamard_apply: all grid points trimmed");
      }
      acc /= kept_measure;  // renormalize trapezoid weights to unit measure
      out.value = is_gini ? 2.0 * acc / (mu * mu) : acc;
      return out;
    }
  }
  return out;
}

std::optional<double> omega_f(const EmpiricalDistribution& dist, const KernelSpec& kde,
                              const PolicySpec& policy, double y, double d) {
  auto pd = pi_dot(policy, d);
  if (!pd) return std::nullopt;
  return -kde_eval(dist, kde, y) * (*pd);
}

std::optional<double> omega_gc(const EmpiricalDistribution& dist, const PolicySpec& policy,
                               double y, double d) {
  auto pd = pi_dot(policy, d);
  if (!pd) return std::nullopt;
  double mu = dist.mean();
  if (!(mu > 0.0)) throw std::domain_error("omega_gc: mean must be positive");
  return 2.0 * phi_weight(dist, ecdf_eval(dist, y)) * (*pd) / (mu * mu);
}

}  // namespace mpe
