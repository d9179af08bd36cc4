#include "mpe/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mpe {

Dataset to_dataset(const DgpSample& sample) {
  Dataset d;
  d.y = sample.y;
  d.d = sample.d;
  d.x = sample.x;
  d.k = sample.x_dim;
  d.z = sample.z;
  return d;
}

std::string method_name(EstimatorMethod m) {
  switch (m) {
    case EstimatorMethod::plugin_quantile:
      return "plugin_quantile";
    case EstimatorMethod::reweight_quantile:
      return "reweight_quantile";
    case EstimatorMethod::debiased_quantile:
      return "debiased_quantile";
    case EstimatorMethod::mean:
      return "mean";
    case EstimatorMethod::gini:
      return "gini";
    case EstimatorMethod::cv_quantile:
      return "cv_quantile";
    case EstimatorMethod::cv_mean:
      return "cv_mean";
    case EstimatorMethod::cv_gini:
      return "cv_gini";
  }
  return "unknown";
}

std::vector<int> assign_folds(std::size_t n, int folds, std::uint64_t seed) {
  if (folds < 2) throw ConfigurationError("assign_folds: folds must be >= 2");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(derive_seed(seed, 0x0F01D5));
  for (std::size_t i = n; i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(i));
    if (j >= i) j = i - 1;
    std::swap(perm[i - 1], perm[j]);
  }
  std::vector<int> fold(n);
  for (std::size_t pos = 0; pos < n; ++pos) {
    fold[perm[pos]] = static_cast<int>(pos % static_cast<std::size_t>(folds));
  }
  return fold;
}

namespace {

constexpr double kTrimNan = std::numeric_limits<double>::quiet_NaN();

void validate(const Dataset& data) {
  if (data.n() < 50) {
    throw ConfigurationError("estimators: need at least 50 observations");
  }
  if (data.d.size() != data.n() ||
      data.x.size() != data.n() * static_cast<std::size_t>(data.k) ||
      (!data.z.empty() && data.z.size() != data.n())) {
    throw ConfigurationError("estimators: column length mismatch");
  }
}

// regressors in conditioning order: d, (v), x1..xk
std::vector<double> build_regs(const Dataset& data, const std::vector<double>* v) {
  const std::size_t n = data.n();
  const int p = 1 + (v ? 1 : 0) + data.k;
  std::vector<double> regs(n * static_cast<std::size_t>(p));
  for (std::size_t i = 0; i < n; ++i) {
    double* row = &regs[i * p];
    int c = 0;
    row[c++] = data.d[i];
    if (v) row[c++] = (*v)[i];
    for (int j = 0; j < data.k; ++j) row[c++] = data.x[i * data.k + j];
  }
  return regs;
}

struct Prep {
  std::vector<double> regs;
  int p = 0;
  std::vector<double> bw;
  EmpiricalDistribution fy;
  double fy_bandwidth = 0.0;

  Prep(const Dataset& data, const FirstStageConfig& cfg, const std::vector<double>* v)
      : regs(build_regs(data, v)),
        p(1 + (v ? 1 : 0) + data.k),
        bw(rule_of_thumb_bandwidths(regs, p, data.n(), cfg.bandwidth_scale)),
        fy(data.y) {
    fy_bandwidth = silverman_bandwidth(fy) * cfg.bandwidth_scale;
  }

  double fy_at(double y, const FirstStageConfig& cfg) const {
    return kde_eval(fy, KernelSpec::fixed(fy_bandwidth, cfg.kernel), y);
  }

  std::map<std::string, double> bandwidth_record() const {
    std::map<std::string, double> rec;
    for (int j = 0; j < p; ++j) rec["h_reg" + std::to_string(j)] = bw[j];
    rec["h_fy"] = fy_bandwidth;
    return rec;
  }
};

void finalize_counts(MpeEstimate& est, const std::vector<double>& contrib) {
  for (double c : contrib) {
    if (std::isnan(c)) {
      ++est.n_trimmed;
    } else {
      ++est.n_used;
    }
  }
  if (est.n_used == 0) throw EstimationError("estimator: every observation was trimmed");
  est.high_trim_warning =
      est.n_trimmed > 0.2 * static_cast<double>(est.n_used + est.n_trimmed);
}

double mean_over_used(const std::vector<double>& contrib) {
  double s = 0.0;
  std::size_t m = 0;
  for (double c : contrib) {
    if (!std::isnan(c)) {
      s += c;
      ++m;
    }
  }
  return s / static_cast<double>(m);
}

// piecewise-linear inverse of a monotone CDF profile; nullopt when alpha is
// not reached on the grid
std::optional<double> invert_profile(const std::vector<double>& ygrid,
                                     const std::vector<double>& prof, double alpha) {
  if (prof.back() < alpha) return std::nullopt;
  auto it = std::lower_bound(prof.begin(), prof.end(), alpha);
  std::size_t g = static_cast<std::size_t>(it - prof.begin());
  if (g == 0) return ygrid.front();
  double f0 = prof[g - 1], f1 = prof[g];
  if (f1 <= f0) return ygrid[g];
  double t = (alpha - f0) / (f1 - f0);
  return ygrid[g - 1] + t * (ygrid[g] - ygrid[g - 1]);
}

std::vector<double> make_y_grid(const EmpiricalDistribution& fy, int g_count) {
  std::vector<double> grid;
  grid.reserve(g_count);
  grid.push_back(fy.min());
  for (int g = 1; g + 1 < g_count; ++g) {
    double tau = static_cast<double>(g) / (g_count - 1);
    double y = quantile(fy, tau);
    if (y > grid.back()) grid.push_back(y);
  }
  if (fy.max() > grid.back()) grid.push_back(fy.max());
  if (grid.size() < 4) {
    throw EstimationError("make_y_grid: outcome grid degenerate");
  }
  return grid;
}

// Product-kernel KDE of the conditioning variables with an analytic
// d-derivative; backs the Riesz representer.
class ProductKde {
 public:
  ProductKde(const std::vector<double>& regs_rowmajor, int p, std::vector<double> bw,
             Kernel kernel)
      : p_(p), kernel_(kernel), bw_(std::move(bw)) {
    n_ = regs_rowmajor.size() / static_cast<std::size_t>(p);
    std::vector<std::size_t> order(n_);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return regs_rowmajor[a * p] < regs_rowmajor[b * p];
    });
    regs_.resize(n_ * p);
    col0_.resize(n_);
    order_ = order;
    for (std::size_t i = 0; i < n_; ++i) {
      for (int j = 0; j < p; ++j) regs_[i * p + j] = regs_rowmajor[order[i] * p + j];
      col0_[i] = regs_[i * p];
    }
    norm_ = 1.0;
    for (int j = 0; j < p; ++j) norm_ /= bw_[j];
  }

  void set_folds(const std::vector<int>& fold_by_input_index) {
    folds_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) folds_[i] = fold_by_input_index[order_[i]];
  }

  struct Density {
    double f = 0.0;        // density level
    double dlog_dd = 0.0;  // d/dd log f
    std::size_t m = 0;     // contributing observations
  };

  Density at(std::span<const double> point, int exclude_fold) const {
    double radius = (kernel_ == Kernel::gaussian ? 5.0 : 1.0) * bw_[0];
    std::size_t a =
        std::lower_bound(col0_.begin(), col0_.end(), point[0] - radius) - col0_.begin();
    std::size_t b =
        std::upper_bound(col0_.begin(), col0_.end(), point[0] + radius) - col0_.begin();
    double sw = 0.0, sdw = 0.0;
    std::size_t m = 0;
    for (std::size_t i = a; i < b; ++i) {
      if (exclude_fold >= 0 && !folds_.empty() && folds_[i] == exclude_fold) continue;
      const double* r = &regs_[i * p_];
      double u0 = (point[0] - r[0]) / bw_[0];
      double w = kernel_value(kernel_, u0);
      double dw = kernel_deriv(kernel_, u0) / bw_[0];
      bool zero = w <= 0.0;
      for (int j = 1; j < p_ && !zero; ++j) {
        double u = (point[j] - r[j]) / bw_[j];
        double kj = kernel_value(kernel_, u);
        if (kj <= 0.0) {
          zero = true;
          break;
        }
        w *= kj;
        dw *= kj;
      }
      if (zero) continue;
      sw += w;
      sdw += dw;
      ++m;
    }
    Density out;
    out.m = m;
    if (sw <= 0.0) return out;
    double denom = static_cast<double>(count_total(exclude_fold));
    out.f = norm_ * sw / denom;
    out.dlog_dd = sdw / sw;
    return out;
  }

 private:
  std::size_t count_total(int exclude_fold) const {
    if (exclude_fold < 0 || folds_.empty()) return n_;
    std::size_t c = 0;
    for (int f : folds_) {
      if (f != exclude_fold) ++c;
    }
    return c;
  }

  std::size_t n_ = 0;
  int p_ = 0;
  Kernel kernel_;
  std::vector<double> bw_;
  double norm_ = 1.0;
  std::vector<double> regs_;
  std::vector<double> col0_;
  std::vector<std::size_t> order_;
  std::vector<int> folds_;
};

MpeEstimate quantile_plugin_impl(const Dataset& data, const PolicySpec& policy, double tau,
                                 const FirstStageConfig& cfg, const std::vector<double>* v,
                                 EstimatorMethod tag) {
  validate(data);
  Prep prep(data, cfg, v);
  double q = quantile(prep.fy, tau);
  double fq = prep.fy_at(q, cfg);
  if (fq <= cfg.trim_floor) {
    throw EstimationError("plugin_quantile_mpe: f_Y at the quantile is below the trim floor");
  }
  LocalLinearEngine engine(prep.regs, prep.p, data.y, prep.bw, cfg.kernel, cfg.min_ess);

  const std::size_t n = data.n();
  std::vector<double> contrib(n, kTrimNan);
  parallel_for(n, cfg.threads, [&](std::size_t i) {
    auto pd = pi_dot(policy, data.d[i]);
    if (!pd) return;
    LLFit fit;
    if (!engine.fit_at({&prep.regs[i * prep.p], static_cast<std::size_t>(prep.p)}, -1, fit)) {
      return;
    }
    contrib[i] = *pd * engine.cdf_at(fit, q).dslope;
  });

  MpeEstimate est;
  est.method = tag;
  est.policy = policy_name(policy);
  est.functional = "quantile";
  est.tau = tau;
  est.bandwidths = prep.bandwidth_record();
  finalize_counts(est, contrib);
  est.value = -mean_over_used(contrib) / fq;
  return est;
}

MpeEstimate reweight_impl(const Dataset& data, const PolicySpec& policy, double tau,
                          const FirstStageConfig& cfg, const std::vector<double>* v,
                          EstimatorMethod tag) {
  validate(data);
  Prep prep(data, cfg, v);
  double q = quantile(prep.fy, tau);
  double fq = prep.fy_at(q, cfg);
  if (fq <= cfg.trim_floor) {
    throw EstimationError("reweight_quantile_mpe: f_Y at the quantile is below the trim floor");
  }
  LocalLinearEngine engine(prep.regs, prep.p, data.y, prep.bw, cfg.kernel, cfg.min_ess);
  std::vector<double> ygrid = make_y_grid(prep.fy, cfg.y_grid);

  const double alpha_lo = 0.01, alpha_hi = 0.99;
  const double zeta_tol = 1e-3 * prep.fy.iqr();
  const double hy = prep.fy_bandwidth;
  const std::size_t n = data.n();
  std::vector<double> num(n, kTrimNan);
  std::vector<double> den(n, 0.0);

  parallel_for(n, cfg.threads, [&](std::size_t i) {
    auto pd = pi_dot(policy, data.d[i]);
    if (!pd) return;
    LLFit fit;
    if (!engine.fit_at({&prep.regs[i * prep.p], static_cast<std::size_t>(prep.p)}, -1, fit)) {
      return;
    }
    std::vector<double> prof;
    engine.cdf_profile(fit, ygrid, prof);
    auto q_lo = invert_profile(ygrid, prof, alpha_lo);
    auto q_hi = invert_profile(ygrid, prof, alpha_hi);
    if (!q_lo || !q_hi || q < *q_lo || q > *q_hi) return;  // zeta root not bracketed

    // bisection for zeta_tau on the alpha grid
    double lo = alpha_lo, hi = alpha_hi;
    const int levels = cfg.alpha_grid;
    for (int a = 1; a < levels; ++a) {
      double alpha = 0.01 + (0.99 - 0.01) * static_cast<double>(a) / (levels - 1);
      auto qa = invert_profile(ygrid, prof, alpha);
      if (!qa) break;
      if (*qa >= q) {
        hi = alpha;
        break;
      }
      lo = alpha;
    }
    double zeta = 0.5 * (lo + hi);
    double y_at_zeta = q;
    for (int it = 0; it < 80; ++it) {
      zeta = 0.5 * (lo + hi);
      auto qz = invert_profile(ygrid, prof, zeta);
      if (!qz) break;
      y_at_zeta = *qz;
      if (std::abs(*qz - q) <= zeta_tol) break;
      if (*qz < q) {
        lo = zeta;
      } else {
        hi = zeta;
      }
    }

    double fcond = engine.density_at(fit, y_at_zeta, hy);
    if (fcond <= cfg.trim_floor) return;
    double slope = engine.cdf_at(fit, y_at_zeta).dslope;
    double beta_cqd = -slope / fcond;
    double kw = gauss_pdf((data.y[i] - q) / hy);
    num[i] = *pd * beta_cqd * kw;
    den[i] = kw;
  });

  MpeEstimate est;
  est.method = tag;
  est.policy = policy_name(policy);
  est.functional = "quantile";
  est.tau = tau;
  est.bandwidths = prep.bandwidth_record();
  finalize_counts(est, num);
  double snum = 0.0, sden = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::isnan(num[i])) continue;
    snum += num[i];
    sden += den[i];
  }
  if (sden <= 1e-6) {
    throw EstimationError("reweight_quantile_mpe: kernel weight mass below 1e-6");
  }
  est.value = snum / sden;
  return est;
}

MpeEstimate mean_impl(const Dataset& data, const PolicySpec& policy,
                      const FirstStageConfig& cfg, const std::vector<double>* v,
                      EstimatorMethod tag) {
  validate(data);
  Prep prep(data, cfg, v);
  LocalLinearEngine engine(prep.regs, prep.p, data.y, prep.bw, cfg.kernel, cfg.min_ess);
  const std::size_t n = data.n();
  std::vector<double> contrib(n, kTrimNan);
  parallel_for(n, cfg.threads, [&](std::size_t i) {
    auto pd = pi_dot(policy, data.d[i]);
    if (!pd) return;
    LLFit fit;
    if (!engine.fit_at({&prep.regs[i * prep.p], static_cast<std::size_t>(prep.p)}, -1, fit)) {
      return;
    }
    contrib[i] = *pd * engine.mean_at(fit).dslope;
  });
  MpeEstimate est;
  est.method = tag;
  est.policy = policy_name(policy);
  est.functional = "mean";
  est.bandwidths = prep.bandwidth_record();
  finalize_counts(est, contrib);
  est.value = mean_over_used(contrib);
  return est;
}

MpeEstimate gini_impl(const Dataset& data, const PolicySpec& policy,
                      const FirstStageConfig& cfg, const std::vector<double>* v,
                      EstimatorMethod tag) {
  validate(data);
  Prep prep(data, cfg, v);
  if (prep.fy.min() < 0.0 || !(prep.fy.mean() > 0.0)) {
    throw std::domain_error("gini_mpe: outcomes must be nonnegative with positive mean");
  }
  const auto& grid = tau_grid();
  const auto& gw = tau_grid_weights();
  const std::size_t g_count = grid.size();

  std::vector<double> qs(g_count), fs(g_count);
  double fmax = 0.0;
  KernelSpec fy_spec = KernelSpec::fixed(prep.fy_bandwidth, cfg.kernel);
  for (std::size_t k = 0; k < g_count; ++k) {
    qs[k] = quantile(prep.fy, grid[k]);
    fs[k] = kde_eval(prep.fy, fy_spec, qs[k]);
    fmax = std::max(fmax, fs[k]);
  }
  double floor = std::max(cfg.trim_floor, 0.01 * fmax);

  LocalLinearEngine engine(prep.regs, prep.p, data.y, prep.bw, cfg.kernel, cfg.min_ess);

  // deterministic chunked accumulation of the per-grid numerator
  const std::size_t n = data.n();
  const std::size_t chunk = 256;
  const std::size_t n_chunks = (n + chunk - 1) / chunk;
  std::vector<double> partial(n_chunks * g_count, 0.0);
  std::vector<int> used_in_chunk(n_chunks, 0);
  std::vector<int> trimmed_in_chunk(n_chunks, 0);

  parallel_for(n_chunks, cfg.threads, [&](std::size_t c) {
    std::vector<double> prof, slopes;
    LLFit fit;
    double* acc = &partial[c * g_count];
    for (std::size_t i = c * chunk; i < std::min(n, (c + 1) * chunk); ++i) {
      auto pd = pi_dot(policy, data.d[i]);
      if (!pd) {
        ++trimmed_in_chunk[c];
        continue;
      }
      if (!engine.fit_at({&prep.regs[i * prep.p], static_cast<std::size_t>(prep.p)}, -1, fit)) {
        ++trimmed_in_chunk[c];
        continue;
      }
      engine.cdf_profile(fit, qs, prof, &slopes);
      for (std::size_t k = 0; k < g_count; ++k) acc[k] += *pd * slopes[k];
      ++used_in_chunk[c];
    }
  });

  MpeEstimate est;
  est.method = tag;
  est.policy = policy_name(policy);
  est.functional = "gini";
  est.bandwidths = prep.bandwidth_record();
  for (std::size_t c = 0; c < n_chunks; ++c) {
    est.n_used += used_in_chunk[c];
    est.n_trimmed += trimmed_in_chunk[c];
  }
  if (est.n_used == 0) throw EstimationError("gini_mpe: every observation was trimmed");
  est.high_trim_warning =
      est.n_trimmed > 0.2 * static_cast<double>(est.n_used + est.n_trimmed);

  double mu = prep.fy.mean();
  double rank_int = quantile_rank_integral(prep.fy);
  double acc = 0.0, kept = 0.0;
  for (std::size_t k = 0; k < g_count; ++k) {
    if (fs[k] < floor) {
      ++est.grid_trimmed;
      continue;
    }
    double numer = 0.0;
    for (std::size_t c = 0; c < n_chunks; ++c) numer += partial[c * g_count + k];
    numer /= static_cast<double>(est.n_used);
    double beta_uqr = -numer / fs[k];
    double phi = grid[k] * mu - rank_int;
    acc += gw[k] * phi * beta_uqr;
    kept += gw[k];
  }
  if (kept <= 0.0) throw EstimationError("gini_mpe: all tau-grid points trimmed");
  est.value = 2.0 * (acc / kept) / (mu * mu);
  return est;
}

MpeEstimate debiased_impl(const Dataset& data, const PolicySpec& policy, double tau,
                          const FirstStageConfig& cfg, EstimatorMethod tag) {
  validate(data);
  if (cfg.folds < 2) throw ConfigurationError("debiased_quantile_mpe: folds must be >= 2");
  Prep prep(data, cfg, nullptr);
  double q = quantile(prep.fy, tau);
  double fq = prep.fy_at(q, cfg);
  if (fq <= cfg.trim_floor) {
    throw EstimationError("debiased_quantile_mpe: f_Y at the quantile is below the trim floor");
  }
  std::vector<int> folds = assign_folds(data.n(), cfg.folds, cfg.seed);
  LocalLinearEngine engine(prep.regs, prep.p, data.y, prep.bw, cfg.kernel, cfg.min_ess);
  engine.set_folds(folds);
  ProductKde kde(prep.regs, prep.p, prep.bw, cfg.kernel);
  kde.set_folds(folds);

  const std::size_t n = data.n();
  // The orthogonal score needs d/dd of the SAME fitted CDF function gamma
  // that appears in the correction term; the per-point slope coefficient is
  // not that derivative (its design-density bias is not cancelled by the
  // Riesz term), so the value field is differentiated directly.
  const double fd_step = 0.25 * prep.bw[0];
  std::vector<double> contrib(n, kTrimNan);
  parallel_for(n, cfg.threads, [&](std::size_t i) {
    auto pd = pi_dot(policy, data.d[i]);
    auto pdd = pi_dot_deriv(policy, data.d[i]);
    if (!pd || !pdd) return;
    std::span<const double> point{&prep.regs[i * prep.p], static_cast<std::size_t>(prep.p)};
    LLFit fit;
    if (!engine.fit_at(point, folds[i], fit)) return;
    auto dens = kde.at(point, folds[i]);
    if (dens.f <= cfg.trim_floor) return;
    double alpha = *pdd + *pd * dens.dlog_dd;
    auto cdf = engine.cdf_at(fit, q);

    std::vector<double> shifted(point.begin(), point.end());
    LLFit fit_up, fit_dn;
    shifted[0] = point[0] + fd_step;
    bool up_ok = engine.fit_at(shifted, folds[i], fit_up);
    shifted[0] = point[0] - fd_step;
    bool dn_ok = engine.fit_at(shifted, folds[i], fit_dn);
    if (!up_ok || !dn_ok) return;
    double dgamma =
        (engine.cdf_at(fit_up, q).value - engine.cdf_at(fit_dn, q).value) / (2.0 * fd_step);

    double indicator = data.y[i] <= q ? 1.0 : 0.0;
    contrib[i] = *pd * dgamma - alpha * (indicator - cdf.value);
  });

  MpeEstimate est;
  est.method = tag;
  est.policy = policy_name(policy);
  est.functional = "quantile";
  est.tau = tau;
  est.bandwidths = prep.bandwidth_record();
  finalize_counts(est, contrib);
  est.value = -mean_over_used(contrib) / fq;
  return est;
}

}  // namespace

double cond_cdf(const Dataset& data, const FirstStageConfig& cfg, double y, double d,
                const std::vector<double>& x) {
  validate(data);
  if (static_cast<int>(x.size()) != data.k) {
    throw ConfigurationError("cond_cdf: covariate size mismatch");
  }
  Prep prep(data, cfg, nullptr);
  LocalLinearEngine engine(prep.regs, prep.p, data.y, prep.bw, cfg.kernel, cfg.min_ess);
  std::vector<double> point(1 + data.k);
  point[0] = d;
  for (int j = 0; j < data.k; ++j) point[1 + j] = x[j];
  LLFit fit;
  if (!engine.fit_at(point, -1, fit)) {
    throw EstimationError("cond_cdf: point trimmed (effective local sample too small)");
  }
  return engine.cdf_at(fit, y).value;
}

double cond_cdf_dderiv(const Dataset& data, const FirstStageConfig& cfg, double y, double d,
                       const std::vector<double>& x) {
  validate(data);
  if (static_cast<int>(x.size()) != data.k) {
    throw ConfigurationError("cond_cdf_dderiv: covariate size mismatch");
  }
  Prep prep(data, cfg, nullptr);
  LocalLinearEngine engine(prep.regs, prep.p, data.y, prep.bw, cfg.kernel, cfg.min_ess);
  std::vector<double> point(1 + data.k);
  point[0] = d;
  for (int j = 0; j < data.k; ++j) point[1 + j] = x[j];
  LLFit fit;
  if (!engine.fit_at(point, -1, fit)) {
    throw EstimationError("cond_cdf_dderiv: point trimmed (effective local sample too small)");
  }
  return engine.cdf_at(fit, y).dslope;
}

MpeEstimate plugin_quantile_mpe(const Dataset& data, const PolicySpec& policy, double tau,
                                const FirstStageConfig& cfg) {
  return quantile_plugin_impl(data, policy, tau, cfg, nullptr,
                              EstimatorMethod::plugin_quantile);
}

MpeEstimate reweight_quantile_mpe(const Dataset& data, const PolicySpec& policy, double tau,
                                  const FirstStageConfig& cfg) {
  return reweight_impl(data, policy, tau, cfg, nullptr, EstimatorMethod::reweight_quantile);
}

MpeEstimate debiased_quantile_mpe(const Dataset& data, const PolicySpec& policy, double tau,
                                  const FirstStageConfig& cfg) {
  return debiased_impl(data, policy, tau, cfg, EstimatorMethod::debiased_quantile);
}

MpeEstimate mean_mpe(const Dataset& data, const PolicySpec& policy,
                     const FirstStageConfig& cfg) {
  return mean_impl(data, policy, cfg, nullptr, EstimatorMethod::mean);
}

MpeEstimate gini_mpe(const Dataset& data, const PolicySpec& policy,
                     const FirstStageConfig& cfg) {
  return gini_impl(data, policy, cfg, nullptr, EstimatorMethod::gini);
}

ControlVariableResult control_variable(const Dataset& data, const FirstStageConfig& cfg) {
  validate(data);
  if (!data.has_z()) {
    throw ConfigurationError("control_variable: dataset has no z column");
  }
  const std::size_t n = data.n();
  const int p = 1 + data.k;
  std::vector<double> regs(n * static_cast<std::size_t>(p));
  for (std::size_t i = 0; i < n; ++i) {
    regs[i * p] = data.z[i];
    for (int j = 0; j < data.k; ++j) regs[i * p + 1 + j] = data.x[i * data.k + j];
  }
  std::vector<double> bw = rule_of_thumb_bandwidths(regs, p, n, cfg.bandwidth_scale);
  // response is D: the fitted CDF of D given (Z, X)
  LocalLinearEngine engine(regs, p, data.d, bw, cfg.kernel, cfg.min_ess);

  ControlVariableResult out;
  out.v.assign(n, 0.0);
  std::vector<int> trimmed(n, 0);
  // unconditional rank fallback for trimmed fits
  EmpiricalDistribution fd(data.d);
  parallel_for(n, cfg.threads, [&](std::size_t i) {
    LLFit fit;
    double v;
    if (engine.fit_at({&regs[i * p], static_cast<std::size_t>(p)}, -1, fit)) {
      v = engine.cdf_at(fit, data.d[i]).value;
    } else {
      v = ecdf_eval(fd, data.d[i]);
      trimmed[i] = 1;
    }
    out.v[i] = std::clamp(v, 0.001, 0.999);
  });
  for (int t : trimmed) out.n_trimmed += t;
  out.low_dispersion_warning = sd_of(out.v) < 0.15;
  return out;
}

namespace {

MpeEstimate with_control_variable(
    const Dataset& data, const FirstStageConfig& cfg,
    const std::function<MpeEstimate(const std::vector<double>*)>& call) {
  ControlVariableResult cv = control_variable(data, cfg);
  MpeEstimate est = call(&cv.v);
  return est;
}

}  // namespace

MpeEstimate cv_quantile_mpe(const Dataset& data, const PolicySpec& policy, double tau,
                            const FirstStageConfig& cfg) {
  return with_control_variable(data, cfg, [&](const std::vector<double>* v) {
    return quantile_plugin_impl(data, policy, tau, cfg, v, EstimatorMethod::cv_quantile);
  });
}

MpeEstimate cv_mean_mpe(const Dataset& data, const PolicySpec& policy,
                        const FirstStageConfig& cfg) {
  return with_control_variable(data, cfg, [&](const std::vector<double>* v) {
    return mean_impl(data, policy, cfg, v, EstimatorMethod::cv_mean);
  });
}

MpeEstimate cv_gini_mpe(const Dataset& data, const PolicySpec& policy,
                        const FirstStageConfig& cfg) {
  return with_control_variable(data, cfg, [&](const std::vector<double>* v) {
    return gini_impl(data, policy, cfg, v, EstimatorMethod::cv_gini);
  });
}

double uqr_estimand(const Dataset& data, double tau, const FirstStageConfig& cfg) {
  // location-shift specialization: same code path as the plugin with
  // pi_dot == 1, bit for bit
  return plugin_quantile_mpe(data, PolicySpec::location_shift(), tau, cfg).value;
}

std::optional<double> riesz_alpha(const Dataset& data, const PolicySpec& policy,
                                  const FirstStageConfig& cfg, double d,
                                  const std::vector<double>& x, int exclude_fold,
                                  const std::vector<int>* folds) {
  validate(data);
  if (static_cast<int>(x.size()) != data.k) {
    throw ConfigurationError("riesz_alpha: covariate size mismatch");
  }
  std::vector<double> regs = build_regs(data, nullptr);
  int p = 1 + data.k;
  std::vector<double> bw = rule_of_thumb_bandwidths(regs, p, data.n(), cfg.bandwidth_scale);
  ProductKde kde(regs, p, bw, cfg.kernel);
  if (folds) kde.set_folds(*folds);
  std::vector<double> point(p);
  point[0] = d;
  for (int j = 0; j < data.k; ++j) point[1 + j] = x[j];
  auto dens = kde.at(point, exclude_fold);
  if (dens.f <= cfg.trim_floor) return std::nullopt;
  auto pd = pi_dot(policy, d);
  auto pdd = pi_dot_deriv(policy, d);
  if (!pd || !pdd) return std::nullopt;
  return *pdd + *pd * dens.dlog_dd;
}

std::vector<std::optional<double>> riesz_alpha_batch(const Dataset& data,
                                                     const PolicySpec& policy,
                                                     const FirstStageConfig& cfg,
                                                     const std::vector<double>& points) {
  validate(data);
  const int p = 1 + data.k;
  if (points.size() % static_cast<std::size_t>(p) != 0) {
    throw ConfigurationError("riesz_alpha_batch: points width must be 1 + k");
  }
  std::vector<double> regs = build_regs(data, nullptr);
  std::vector<double> bw = rule_of_thumb_bandwidths(regs, p, data.n(), cfg.bandwidth_scale);
  ProductKde kde(regs, p, bw, cfg.kernel);
  const std::size_t m = points.size() / static_cast<std::size_t>(p);
  std::vector<std::optional<double>> out(m);
  parallel_for(m, cfg.threads, [&](std::size_t i) {
    std::span<const double> point{&points[i * p], static_cast<std::size_t>(p)};
    auto dens = kde.at(point, -1);
    if (dens.f <= cfg.trim_floor) return;
    auto pd = pi_dot(policy, point[0]);
    auto pdd = pi_dot_deriv(policy, point[0]);
    if (!pd || !pdd) return;
    out[i] = *pdd + *pd * dens.dlog_dd;
  });
  return out;
}

double bootstrap_dispersion(const Dataset& data, int b_reps, std::uint64_t seed,
                            const std::function<double(const Dataset&)>& estimator) {
  if (b_reps < 2) throw ConfigurationError("bootstrap_dispersion: need at least 2 replicates");
  const std::size_t n = data.n();
  std::vector<double> values(b_reps);
  for (int b = 0; b < b_reps; ++b) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(b)));
    Dataset resampled;
    resampled.k = data.k;
    resampled.y.resize(n);
    resampled.d.resize(n);
    resampled.x.resize(n * static_cast<std::size_t>(data.k));
    if (data.has_z()) resampled.z.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(n));
      if (j >= n) j = n - 1;
      resampled.y[i] = data.y[j];
      resampled.d[i] = data.d[j];
      for (int c = 0; c < data.k; ++c) {
        resampled.x[i * data.k + c] = data.x[j * data.k + c];
      }
      if (data.has_z()) resampled.z[i] = data.z[j];
    }
    values[b] = estimator(resampled);
  }
  return sd_of(values);
}

}  // namespace mpe
