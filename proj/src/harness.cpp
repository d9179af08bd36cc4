#include "mpe/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace mpe {

RunMode parse_mode(const std::string& s) {
  if (s == "oracle") return RunMode::oracle;
  if (s == "estimate") return RunMode::estimate;
  if (s == "mc" || s == "mc_study") return RunMode::mc_study;
  if (s == "check") return RunMode::check;
  throw ConfigurationError("unknown mode '" + s + "'");
}

std::string mode_name(RunMode m) {
  switch (m) {
    case RunMode::oracle:
      return "oracle";
    case RunMode::estimate:
      return "estimate";
    case RunMode::mc_study:
      return "mc";
    case RunMode::check:
      return "check";
  }
  return "unknown";
}

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  char* end = nullptr;
  double v = std::strtod(value.c_str(), &end);
  if (end == value.c_str() || *end != '\0') {
    throw ConfigurationError("config key '" + key + "': not a number: '" + value + "'");
  }
  return v;
}

long long parse_int(const std::string& key, const std::string& value) {
  char* end = nullptr;
  long long v = std::strtoll(value.c_str(), &end, 10);
  if (end == value.c_str() || *end != '\0') {
    throw ConfigurationError("config key '" + key + "': not an integer: '" + value + "'");
  }
  return v;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "run.mode") {
    cfg.mode = parse_mode(value);
  } else if (key == "run.n") {
    cfg.n = static_cast<std::size_t>(parse_int(key, value));
  } else if (key == "run.n_oracle") {
    cfg.n_oracle = static_cast<std::size_t>(parse_int(key, value));
  } else if (key == "run.t_step") {
    cfg.t_step = parse_double(key, value);
  } else if (key == "run.replications") {
    cfg.replications = static_cast<int>(parse_int(key, value));
  } else if (key == "run.seed") {
    cfg.seed = static_cast<std::uint64_t>(parse_int(key, value));
  } else if (key == "run.out") {
    cfg.out_path = value;
  } else if (key == "run.format") {
    if (value != "json" && value != "csv") {
      throw ConfigurationError("run.format must be json or csv");
    }
    cfg.format = value;
  } else if (key == "run.data") {
    cfg.data_path = value;
  } else if (key == "run.export_sample") {
    cfg.export_sample_path = value;
  } else if (key == "run.with_latents") {
    cfg.with_latents = value == "1" || value == "true";
  } else if (key == "dgp.name") {
    cfg.dgp_name = value;
  } else if (key.rfind("dgp.", 0) == 0) {
    cfg.dgp_params[key.substr(4)] = parse_double(key, value);
  } else if (key == "policy.kind") {
    cfg.policy_kind = value;
  } else if (key.rfind("policy.", 0) == 0) {
    cfg.policy_params[key.substr(7)] = parse_double(key, value);
  } else if (key == "functional.kind") {
    cfg.functional_kind = value;
  } else if (key == "functional.tau") {
    cfg.tau = parse_double(key, value);
  } else if (key == "functional.y") {
    cfg.id_at_y = parse_double(key, value);
  } else if (key == "estimator.method") {
    cfg.estimator = value;
  } else if (key == "estimator.folds") {
    cfg.first_stage.folds = static_cast<int>(parse_int(key, value));
    if (cfg.first_stage.folds < 2) {
      throw ConfigurationError("estimator.folds must be >= 2");
    }
  } else if (key == "estimator.threads") {
    cfg.first_stage.threads = static_cast<int>(parse_int(key, value));
  } else if (key == "estimator.bandwidth_scale") {
    cfg.first_stage.bandwidth_scale = parse_double(key, value);
  } else if (key == "estimator.trim_floor") {
    cfg.first_stage.trim_floor = parse_double(key, value);
    if (!(cfg.first_stage.trim_floor > 0.0)) {
      throw ConfigurationError("estimator.trim_floor must be > 0");
    }
  } else if (key == "estimator.min_ess") {
    cfg.first_stage.min_ess = parse_double(key, value);
  } else if (key == "estimator.alpha_grid") {
    cfg.first_stage.alpha_grid = static_cast<int>(parse_int(key, value));
  } else if (key == "estimator.y_grid") {
    cfg.first_stage.y_grid = static_cast<int>(parse_int(key, value));
  } else if (key == "estimator.kernel") {
    if (value == "gaussian") {
      cfg.first_stage.kernel = Kernel::gaussian;
    } else if (value == "epanechnikov") {
      cfg.first_stage.kernel = Kernel::epanechnikov;
    } else {
      throw ConfigurationError("estimator.kernel must be gaussian or epanechnikov");
    }
  } else if (key == "estimator.bootstrap") {
    cfg.bootstrap = static_cast<int>(parse_int(key, value));
  } else {
    throw ConfigurationError("unknown config key '" + key + "'");
  }
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot open config file '" + path + "'");
  ExperimentConfig cfg;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[' && t.back() == ']') {
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    std::size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigurationError(path + ":" + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (section.empty()) {
      throw ConfigurationError(path + ":" + std::to_string(lineno) + ": key outside a section");
    }
    apply_override(cfg, section + "." + key, value);
  }
  return cfg;
}

void validate_config(const ExperimentConfig& cfg) {
  switch (cfg.mode) {
    case RunMode::estimate:
      if (cfg.data_path.empty()) {
        throw ConfigurationError("estimate mode requires run.data (CSV path)");
      }
      break;
    case RunMode::mc_study:
      if (cfg.dgp_name.empty()) throw ConfigurationError("mc mode requires dgp.name");
      if (cfg.replications < 10) {
        throw ConfigurationError("mc mode requires replications >= 10");
      }
      break;
    case RunMode::oracle:
      if (cfg.dgp_name.empty()) throw ConfigurationError("oracle mode requires dgp.name");
      break;
    case RunMode::check:
      break;
  }
  if (cfg.functional_kind == "quantile" && !(cfg.tau > 0.0 && cfg.tau < 1.0)) {
    throw ConfigurationError("functional.tau must lie in (0,1)");
  }
}

namespace {

std::vector<std::pair<std::string, std::string>> echo_config(const ExperimentConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> kv;
  kv.emplace_back("run.mode", mode_name(cfg.mode));
  kv.emplace_back("run.n", std::to_string(cfg.n));
  kv.emplace_back("run.n_oracle", std::to_string(cfg.n_oracle));
  kv.emplace_back("run.t_step", fmt_double(cfg.t_step));
  kv.emplace_back("run.replications", std::to_string(cfg.replications));
  kv.emplace_back("run.seed", std::to_string(cfg.seed));
  if (!cfg.data_path.empty()) kv.emplace_back("run.data", cfg.data_path);
  if (!cfg.dgp_name.empty()) kv.emplace_back("dgp.name", cfg.dgp_name);
  for (const auto& [k, v] : cfg.dgp_params) kv.emplace_back("dgp." + k, fmt_double(v));
  kv.emplace_back("policy.kind", cfg.policy_kind);
  for (const auto& [k, v] : cfg.policy_params) kv.emplace_back("policy." + k, fmt_double(v));
  kv.emplace_back("functional.kind", cfg.functional_kind);
  if (cfg.functional_kind == "quantile") kv.emplace_back("functional.tau", fmt_double(cfg.tau));
  if (cfg.functional_kind == "id_at") kv.emplace_back("functional.y", fmt_double(cfg.id_at_y));
  kv.emplace_back("estimator.method", cfg.estimator);
  kv.emplace_back("estimator.kernel",
                  cfg.first_stage.kernel == Kernel::gaussian ? "gaussian" : "epanechnikov");
  kv.emplace_back("estimator.bandwidth_scale", fmt_double(cfg.first_stage.bandwidth_scale));
  kv.emplace_back("estimator.trim_floor", fmt_double(cfg.first_stage.trim_floor));
  kv.emplace_back("estimator.min_ess", fmt_double(cfg.first_stage.min_ess));
  kv.emplace_back("estimator.folds", std::to_string(cfg.first_stage.folds));
  kv.emplace_back("estimator.alpha_grid", std::to_string(cfg.first_stage.alpha_grid));
  kv.emplace_back("estimator.y_grid", std::to_string(cfg.first_stage.y_grid));
  if (cfg.bootstrap > 0) kv.emplace_back("estimator.bootstrap", std::to_string(cfg.bootstrap));
  return kv;
}

}  // namespace

std::string config_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  auto mix = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001B3ULL;
    }
    h ^= 0x1F;
    h *= 0x100000001B3ULL;
  };
  for (const auto& [k, v] : echo_config(cfg)) {
    mix(k);
    mix(v);
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

PolicySpec make_policy(const std::string& kind, const std::map<std::string, double>& params,
                       const std::vector<double>& d_context) {
  auto get = [&](const std::string& key, std::optional<double> fallback) {
    auto it = params.find(key);
    if (it != params.end()) return it->second;
    if (fallback) return *fallback;
    throw ConfigurationError("policy '" + kind + "' needs parameter '" + key + "'");
  };
  if (kind == "location_shift") return PolicySpec::location_shift();
  if (kind == "location_scale") {
    return PolicySpec::location_scale(get("mu", 0.0), get("l_dot", 1.0), get("s_dot", 0.0));
  }
  if (kind == "mean_preserving") {
    std::optional<double> mean_d;
    if (!d_context.empty()) mean_d = mean_of(d_context);
    return PolicySpec::mean_preserving(get("alpha", 1.0), get("mean_d", mean_d));
  }
  if (kind == "rank_preserving") {
    if (d_context.size() < 2) {
      throw ConfigurationError("rank_preserving policy needs a d sample for F_D");
    }
    double shift = get("shift", 0.2);
    std::vector<double> shifted(d_context);
    for (double& v : shifted) v += shift;
    return PolicySpec::rank_preserving(EmpiricalDistribution(d_context),
                                       EmpiricalDistribution(shifted));
  }
  throw ConfigurationError("unknown policy kind '" + kind + "'");
}

FunctionalSpec make_functional(const ExperimentConfig& cfg) {
  if (cfg.functional_kind == "quantile") return FunctionalSpec::quantile(cfg.tau);
  if (cfg.functional_kind == "mean") return FunctionalSpec::mean();
  if (cfg.functional_kind == "gini") return FunctionalSpec::gini();
  if (cfg.functional_kind == "id_at") return FunctionalSpec::id_at(cfg.id_at_y);
  throw ConfigurationError("unknown functional kind '" + cfg.functional_kind + "'");
}

Dataset load_csv(const std::string& path, int* dropped_rows) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw IngestionError(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(trim(cell));
  }
  int y_col = -1, d_col = -1, z_col = -1;
  std::map<int, int> x_cols;  // x index (1-based) -> column
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string& name = header[c];
    if (name == "y") {
      y_col = static_cast<int>(c);
    } else if (name == "d") {
      d_col = static_cast<int>(c);
    } else if (name == "z") {
      z_col = static_cast<int>(c);
    } else if (name.size() > 1 && name[0] == 'x') {
      bool digits = true;
      for (std::size_t i = 1; i < name.size(); ++i) digits = digits && std::isdigit(name[i]);
      if (digits) x_cols[std::stoi(name.substr(1))] = static_cast<int>(c);
    }
    // other columns (e.g. exported latents) are ignored
  }
  std::string missing;
  if (y_col < 0) missing += "y";
  if (d_col < 0) missing += missing.empty() ? "d" : ", d";
  if (!missing.empty()) {
    throw IngestionError(path + ": missing required column(s): " + missing);
  }
  int k = static_cast<int>(x_cols.size());
  for (int j = 1; j <= k; ++j) {
    if (!x_cols.count(j)) {
      throw IngestionError(path + ": covariate columns must be contiguous x1..xk (missing x" +
                           std::to_string(j) + ")");
    }
  }

  Dataset data;
  data.k = k;
  int dropped = 0;
  std::vector<std::string> cells;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    cells.clear();
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    while (cells.size() < header.size()) cells.emplace_back("");
    auto cell_value = [&](int col, double* out) {
      if (col >= static_cast<int>(cells.size())) return false;
      const std::string& s = cells[col];
      if (s.empty()) return false;
      char* end = nullptr;
      double v = std::strtod(s.c_str(), &end);
      if (end == s.c_str() || *end != '\0' || !std::isfinite(v)) return false;
      *out = v;
      return true;
    };
    double yv, dv, zv = 0.0;
    std::vector<double> xv(k);
    bool ok = cell_value(y_col, &yv) && cell_value(d_col, &dv);
    if (ok && z_col >= 0) ok = cell_value(z_col, &zv);
    for (int j = 1; j <= k && ok; ++j) ok = cell_value(x_cols[j], &xv[j - 1]);
    if (!ok) {
      ++dropped;
      continue;
    }
    data.y.push_back(yv);
    data.d.push_back(dv);
    for (int j = 0; j < k; ++j) data.x.push_back(xv[j]);
    if (z_col >= 0) data.z.push_back(zv);
  }
  if (dropped_rows) *dropped_rows = dropped;
  if (data.n() < 50) {
    throw IngestionError(path + ": fewer than 50 valid rows (" + std::to_string(data.n()) + ")");
  }
  return data;
}

void write_csv(const DgpSample& sample, const std::string& path, bool with_latents) {
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write '" + path + "'");
  out << "y,d";
  for (int j = 1; j <= sample.x_dim; ++j) out << ",x" << j;
  if (!sample.z.empty()) out << ",z";
  if (with_latents) {
    out << ",e";
    if (!sample.eta.empty()) out << ",eta";
  }
  out << "\n";
  for (std::size_t i = 0; i < sample.n(); ++i) {
    out << fmt_double(sample.y[i]) << "," << fmt_double(sample.d[i]);
    for (int j = 0; j < sample.x_dim; ++j) out << "," << fmt_double(sample.x[i * sample.x_dim + j]);
    if (!sample.z.empty()) out << "," << fmt_double(sample.z[i]);
    if (with_latents) {
      out << "," << fmt_double(sample.e[i]);
      if (!sample.eta.empty()) out << "," << fmt_double(sample.eta[i]);
    }
    out << "\n";
  }
}

namespace {

// estimator -> functional it targets; unknown methods are rejected here so
// configuration problems surface before any replication runs
void validate_dispatch(const std::string& method, const std::string& functional) {
  static const std::map<std::string, std::string> pairing = {
      {"plugin", "quantile"},   {"reweight", "quantile"}, {"debiased", "quantile"},
      {"uqr", "quantile"},      {"mean", "mean"},         {"gini", "gini"},
      {"cv_quantile", "quantile"}, {"cv_mean", "mean"},   {"cv_gini", "gini"},
  };
  auto it = pairing.find(method);
  if (it == pairing.end()) {
    throw ConfigurationError("unknown estimator method '" + method + "'");
  }
  if (it->second != functional) {
    throw ConfigurationError("estimator '" + method + "' pairs with functional '" + it->second +
                             "', got '" + functional + "'");
  }
}

MpeEstimate dispatch_estimator(const std::string& method, const Dataset& data,
                               const PolicySpec& policy, const ExperimentConfig& cfg,
                               const FirstStageConfig& fs) {
  validate_dispatch(method, cfg.functional_kind);
  const std::string& f = cfg.functional_kind;
  auto need = [&](const char* functional) {
    if (f != functional) {
      throw ConfigurationError("estimator '" + method + "' pairs with functional '" +
                               functional + "', got '" + f + "'");
    }
  };
  if (method == "plugin") {
    need("quantile");
    return plugin_quantile_mpe(data, policy, cfg.tau, fs);
  }
  if (method == "reweight") {
    need("quantile");
    return reweight_quantile_mpe(data, policy, cfg.tau, fs);
  }
  if (method == "debiased") {
    need("quantile");
    return debiased_quantile_mpe(data, policy, cfg.tau, fs);
  }
  if (method == "uqr") {
    need("quantile");
    MpeEstimate est;
    est.value = uqr_estimand(data, cfg.tau, fs);
    est.method = EstimatorMethod::plugin_quantile;
    est.policy = "location_shift";
    est.functional = "quantile";
    est.tau = cfg.tau;
    return est;
  }
  if (method == "mean") {
    need("mean");
    return mean_mpe(data, policy, fs);
  }
  if (method == "gini") {
    need("gini");
    return gini_mpe(data, policy, fs);
  }
  if (method == "cv_quantile") {
    need("quantile");
    return cv_quantile_mpe(data, policy, cfg.tau, fs);
  }
  if (method == "cv_mean") {
    need("mean");
    return cv_mean_mpe(data, policy, fs);
  }
  if (method == "cv_gini") {
    need("gini");
    return cv_gini_mpe(data, policy, fs);
  }
  throw ConfigurationError("unknown estimator method '" + method + "'");
}

}  // namespace

ResultRecord run(const ExperimentConfig& cfg) {
  validate_config(cfg);
  auto t0 = std::chrono::steady_clock::now();
  ResultRecord rec;
  rec.mode = cfg.mode;
  rec.hash = config_hash(cfg);
  rec.config_echo = echo_config(cfg);

  switch (cfg.mode) {
    case RunMode::oracle: {
      StructuralDgp dgp = make_dgp(cfg.dgp_name, cfg.dgp_params);
      DgpSample context = simulate(dgp, cfg.n, cfg.seed);
      PolicySpec policy = make_policy(cfg.policy_kind, cfg.policy_params, context.d);
      FunctionalSpec functional = make_functional(cfg);
      rec.oracle_value =
          oracle_mpe(dgp, policy, functional, cfg.t_step, cfg.n_oracle, cfg.seed);
      rec.oracle_structural =
          oracle_structural_side(dgp, policy, functional, cfg.n_oracle, cfg.seed);
      if (!cfg.export_sample_path.empty()) {
        write_csv(context, cfg.export_sample_path, cfg.with_latents);
      }
      break;
    }
    case RunMode::estimate: {
      Dataset data = load_csv(cfg.data_path, &rec.dropped_rows);
      PolicySpec policy = make_policy(cfg.policy_kind, cfg.policy_params, data.d);
      FirstStageConfig fs = cfg.first_stage;
      fs.seed = cfg.seed;
      MpeEstimate est = dispatch_estimator(cfg.estimator, data, policy, cfg, fs);
      rec.replications.push_back({est.value, est.n_used, est.n_trimmed});
      rec.mean = est.value;
      rec.total_used = est.n_used;
      rec.total_trimmed = est.n_trimmed;
      if (cfg.bootstrap > 0) {
        rec.bootstrap_sd = bootstrap_dispersion(
            data, cfg.bootstrap, cfg.seed, [&](const Dataset& resampled) {
              PolicySpec p2 = make_policy(cfg.policy_kind, cfg.policy_params, resampled.d);
              return dispatch_estimator(cfg.estimator, resampled, p2, cfg, fs).value;
            });
      }
      break;
    }
    case RunMode::mc_study: {
      validate_dispatch(cfg.estimator, cfg.functional_kind);
      StructuralDgp dgp = make_dgp(cfg.dgp_name, cfg.dgp_params);
      DgpSample context = simulate(dgp, std::max<std::size_t>(cfg.n, 1000), cfg.seed);
      PolicySpec policy = make_policy(cfg.policy_kind, cfg.policy_params, context.d);
      FunctionalSpec functional = make_functional(cfg);
      rec.oracle_value =
          oracle_mpe(dgp, policy, functional, cfg.t_step, cfg.n_oracle, cfg.seed);

      const int reps = cfg.replications;
      rec.replications.assign(reps, {});
      std::vector<std::string> failures(reps);
      parallel_for(reps, cfg.first_stage.threads, [&](std::size_t r) {
        std::uint64_t rep_seed = derive_seed(cfg.seed, r);
        try {
          DgpSample sample = simulate(dgp, cfg.n, rep_seed);
          Dataset data = to_dataset(sample);
          FirstStageConfig fs = cfg.first_stage;
          fs.seed = rep_seed;
          fs.threads = 1;  // replication loop owns the parallelism
          MpeEstimate est = dispatch_estimator(cfg.estimator, data, policy, cfg, fs);
          rec.replications[r] = {est.value, est.n_used, est.n_trimmed};
        } catch (const std::exception& e) {
          failures[r] = e.what();
        }
      });
      for (int r = 0; r < reps; ++r) {
        if (!failures[r].empty()) {
          throw EstimationError("replication " + std::to_string(r) + " (seed " +
                                std::to_string(derive_seed(cfg.seed, r)) +
                                ") failed: " + failures[r]);
        }
      }
      std::vector<double> values(reps);
      for (int r = 0; r < reps; ++r) {
        values[r] = rec.replications[r].value;
        rec.total_used += rec.replications[r].n_used;
        rec.total_trimmed += rec.replications[r].n_trimmed;
      }
      rec.mean = mean_of(values);
      rec.bias = rec.mean - *rec.oracle_value;
      double sq = 0.0;
      for (double v : values) sq += (v - *rec.oracle_value) * (v - *rec.oracle_value);
      rec.rmse = std::sqrt(sq / reps);
      rec.mc_se = sd_of(values) / std::sqrt(static_cast<double>(reps));
      break;
    }
    case RunMode::check: {
      CheckScale scale;
      scale.n_oracle = cfg.n_oracle;
      scale.t_step = cfg.t_step;
      scale.n_est = cfg.n;
      scale.mc_reps = cfg.replications;
      scale.threads = cfg.first_stage.threads;
      scale.seed = cfg.seed;
      rec.checks = run_all_checks(scale);
      break;
    }
  }
  auto t1 = std::chrono::steady_clock::now();
  rec.wall_clock_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  return rec;
}

std::string emit_to_string(const ResultRecord& rec, EmitFormat format) {
  if (format == EmitFormat::json) {
    nlohmann::ordered_json j;
    j["mode"] = mode_name(rec.mode);
    j["config_hash"] = rec.hash;
    nlohmann::ordered_json cfg;
    for (const auto& [k, v] : rec.config_echo) cfg[k] = v;
    j["config"] = cfg;
    if (rec.oracle_value) j["oracle_value"] = *rec.oracle_value;
    if (rec.oracle_structural) j["oracle_structural"] = *rec.oracle_structural;
    if (!rec.replications.empty()) {
      nlohmann::ordered_json reps = nlohmann::ordered_json::array();
      for (std::size_t r = 0; r < rec.replications.size(); ++r) {
        const auto& rr = rec.replications[r];
        reps.push_back({{"rep", r},
                        {"value", rr.value},
                        {"n_used", rr.n_used},
                        {"n_trimmed", rr.n_trimmed}});
      }
      j["replications"] = reps;
      j["summary"] = {{"mean", rec.mean},
                      {"bias", rec.bias},
                      {"rmse", rec.rmse},
                      {"mc_se", rec.mc_se},
                      {"total_used", rec.total_used},
                      {"total_trimmed", rec.total_trimmed}};
    }
    if (rec.bootstrap_sd) j["bootstrap_sd"] = *rec.bootstrap_sd;
    if (rec.dropped_rows > 0) j["dropped_rows"] = rec.dropped_rows;
    if (!rec.checks.empty()) {
      nlohmann::ordered_json checks = nlohmann::ordered_json::array();
      for (const auto& c : rec.checks) {
        checks.push_back({{"name", c.name},
                          {"pass", c.pass},
                          {"value", c.value},
                          {"threshold", c.threshold},
                          {"detail", c.detail}});
      }
      j["checks"] = checks;
    }
    j["wall_clock_ms"] = rec.wall_clock_ms;
    return j.dump(2) + "\n";
  }

  // CSV: one row per replication plus a summary row tagged in `kind`
  std::ostringstream out;
  out << "config_hash,kind,rep,value,n_used,n_trimmed,oracle,bias,rmse,mc_se\n";
  std::string oracle = rec.oracle_value ? fmt_double(*rec.oracle_value) : "";
  for (std::size_t r = 0; r < rec.replications.size(); ++r) {
    const auto& rr = rec.replications[r];
    out << rec.hash << ",replication," << r << "," << fmt_double(rr.value) << "," << rr.n_used
        << "," << rr.n_trimmed << "," << oracle << ",,,\n";
  }
  for (const auto& c : rec.checks) {
    out << rec.hash << "," << (c.pass ? "check_pass" : "check_fail") << ",," << fmt_double(c.value)
        << ",,," << fmt_double(c.threshold) << ",,,\n";
  }
  out << rec.hash << ",summary,," << fmt_double(rec.mean) << "," << rec.total_used << ","
      << rec.total_trimmed << "," << oracle << "," << fmt_double(rec.bias) << ","
      << fmt_double(rec.rmse) << "," << fmt_double(rec.mc_se) << "\n";
  return out.str();
}

void emit(const ResultRecord& record, const std::string& out_path, EmitFormat format) {
  std::ofstream out(out_path);
  if (!out) throw IngestionError("cannot write '" + out_path + "'");
  out << emit_to_string(record, format);
}

}  // namespace mpe
