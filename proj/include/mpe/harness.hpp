#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mpe/checks.hpp"
#include "mpe/estimators.hpp"

namespace mpe {

enum class RunMode { oracle, estimate, mc_study, check };

RunMode parse_mode(const std::string& s);
std::string mode_name(RunMode m);

// One serializable source of truth per experiment; CLI flags override file
// values. Flat sections: [run], [dgp], [policy], [functional], [estimator].
struct ExperimentConfig {
  RunMode mode = RunMode::mc_study;

  std::string dgp_name;
  std::map<std::string, double> dgp_params;

  std::string data_path;

  std::string policy_kind = "location_shift";
  std::map<std::string, double> policy_params;

  std::string functional_kind = "quantile";
  double tau = 0.5;
  double id_at_y = 0.0;

  std::string estimator = "plugin";
  FirstStageConfig first_stage;
  int bootstrap = 0;  // estimate mode: pairs-bootstrap replicates (0 = off)

  std::size_t n = 2000;
  std::size_t n_oracle = 1000000;
  double t_step = 0.01;
  int replications = 100;
  std::uint64_t seed = 1;

  std::string out_path;
  std::string format = "json";

  // oracle mode: optional sample export
  std::string export_sample_path;
  bool with_latents = false;
};

ExperimentConfig parse_config_file(const std::string& path);
// key paths like "run.seed", "policy.kind", "estimator.method"
void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value);
void validate_config(const ExperimentConfig& cfg);

// FNV-1a over the resolved semantic fields (everything except output paths).
std::string config_hash(const ExperimentConfig& cfg);

// Policy/functional builders. mean_preserving defaults mean_d to the mean of
// d_context when the parameter is absent; rank_preserving builds F_D from
// d_context and G_D from a location shift of it (params: shift).
PolicySpec make_policy(const std::string& kind, const std::map<std::string, double>& params,
                       const std::vector<double>& d_context);
FunctionalSpec make_functional(const ExperimentConfig& cfg);

Dataset load_csv(const std::string& path, int* dropped_rows = nullptr);
void write_csv(const DgpSample& sample, const std::string& path, bool with_latents);

struct ReplicationResult {
  double value = 0.0;
  int n_used = 0;
  int n_trimmed = 0;
};

struct ResultRecord {
  RunMode mode = RunMode::mc_study;
  std::string hash;
  std::vector<std::pair<std::string, std::string>> config_echo;  // ordered key/value
  std::vector<ReplicationResult> replications;
  std::optional<double> oracle_value;
  std::optional<double> oracle_structural;
  std::optional<double> bootstrap_sd;
  int dropped_rows = 0;
  // summary over replications
  double mean = 0.0, bias = 0.0, rmse = 0.0, mc_se = 0.0;
  long total_used = 0, total_trimmed = 0;
  double wall_clock_ms = 0.0;
  std::vector<CheckResult> checks;
};

ResultRecord run(const ExperimentConfig& cfg);

enum class EmitFormat { json, csv };
void emit(const ResultRecord& record, const std::string& out_path, EmitFormat format);
std::string emit_to_string(const ResultRecord& record, EmitFormat format);

}  // namespace mpe
