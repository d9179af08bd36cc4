// Command-line front end: oracle / estimate / mc / check subcommands over a
// shared config file with flag overrides. Exit codes: 0 success, 1
// estimation failure (or any failed check), 2 configuration/ingestion error.

#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "mpe/harness.hpp"

namespace {

struct Cli {
  std::string config_path;
  std::string dgp, policy, functional, estimator;
  std::string tau, n, reps, seed, out, format, data, n_oracle, t_step, threads;
  std::string export_sample;
  bool with_latents = false;
  std::string bootstrap;
};

// "name" or "name(k=v,k=v)"; bare numbers allowed for quantile/id_at, e.g.
// "quantile(0.5)".
void parse_descriptor(const std::string& text, std::string* name,
                      std::map<std::string, std::string>* params) {
  std::size_t open = text.find('(');
  if (open == std::string::npos) {
    *name = text;
    return;
  }
  if (text.back() != ')') {
    throw mpe::ConfigurationError("descriptor '" + text + "': unbalanced parentheses");
  }
  *name = text.substr(0, open);
  std::string inner = text.substr(open + 1, text.size() - open - 2);
  std::stringstream ss(inner);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t eq = item.find('=');
    if (eq == std::string::npos) {
      (*params)["_bare"] = item;
    } else {
      (*params)[item.substr(0, eq)] = item.substr(eq + 1);
    }
  }
}

void add_common(CLI::App* sub, Cli& cli) {
  sub->add_option("--config", cli.config_path, "config file (key = value sections)");
  sub->add_option("--dgp", cli.dgp, "dgp preset name, e.g. linear_exogenous");
  sub->add_option("--policy", cli.policy, "policy descriptor, e.g. mean_preserving(alpha=1)");
  sub->add_option("--functional", cli.functional, "functional descriptor, e.g. quantile(0.5)");
  sub->add_option("--estimator", cli.estimator, "estimator method name");
  sub->add_option("--tau", cli.tau, "quantile level");
  sub->add_option("--n", cli.n, "sample size per replication");
  sub->add_option("--n-oracle", cli.n_oracle, "oracle simulation size");
  sub->add_option("--t-step", cli.t_step, "oracle finite-difference step");
  sub->add_option("--reps", cli.reps, "Monte Carlo replications");
  sub->add_option("--seed", cli.seed, "master seed");
  sub->add_option("--threads", cli.threads, "worker threads");
  sub->add_option("--out", cli.out, "output path");
  sub->add_option("--format", cli.format, "json or csv");
}

mpe::ExperimentConfig build_config(const Cli& cli, mpe::RunMode mode) {
  mpe::ExperimentConfig cfg;
  if (!cli.config_path.empty()) cfg = mpe::parse_config_file(cli.config_path);
  cfg.mode = mode;

  auto maybe = [&](const std::string& key, const std::string& value) {
    if (!value.empty()) mpe::apply_override(cfg, key, value);
  };
  maybe("dgp.name", cli.dgp);
  if (!cli.policy.empty()) {
    std::string name;
    std::map<std::string, std::string> params;
    parse_descriptor(cli.policy, &name, &params);
    mpe::apply_override(cfg, "policy.kind", name);
    for (const auto& [k, v] : params) {
      if (k == "_bare") throw mpe::ConfigurationError("policy parameters must be named");
      mpe::apply_override(cfg, "policy." + k, v);
    }
  }
  if (!cli.functional.empty()) {
    std::string name;
    std::map<std::string, std::string> params;
    parse_descriptor(cli.functional, &name, &params);
    mpe::apply_override(cfg, "functional.kind", name);
    for (const auto& [k, v] : params) {
      if (k == "_bare") {
        mpe::apply_override(cfg, name == "id_at" ? "functional.y" : "functional.tau", v);
      } else {
        mpe::apply_override(cfg, "functional." + k, v);
      }
    }
  }
  maybe("estimator.method", cli.estimator);
  maybe("functional.tau", cli.tau);
  maybe("run.n", cli.n);
  maybe("run.n_oracle", cli.n_oracle);
  maybe("run.t_step", cli.t_step);
  maybe("run.replications", cli.reps);
  maybe("run.seed", cli.seed);
  maybe("run.out", cli.out);
  maybe("run.format", cli.format);
  maybe("run.data", cli.data);
  maybe("estimator.threads", cli.threads);
  maybe("run.export_sample", cli.export_sample);
  if (cli.with_latents) mpe::apply_override(cfg, "run.with_latents", "true");
  maybe("estimator.bootstrap", cli.bootstrap);
  return cfg;
}

int execute(const mpe::ExperimentConfig& cfg) {
  mpe::ResultRecord rec = mpe::run(cfg);
  mpe::EmitFormat format =
      cfg.format == "csv" ? mpe::EmitFormat::csv : mpe::EmitFormat::json;
  if (cfg.out_path.empty()) {
    std::cout << mpe::emit_to_string(rec, format);
  } else {
    mpe::emit(rec, cfg.out_path, format);
  }
  if (cfg.mode == mpe::RunMode::check) {
    int failed = 0;
    for (const auto& c : rec.checks) {
      std::fprintf(stderr, "[%s] %s: %s\n", c.pass ? "PASS" : "FAIL", c.name.c_str(),
                   c.detail.c_str());
      failed += c.pass ? 0 : 1;
    }
    std::fprintf(stderr, "%zu checks, %d failed\n", rec.checks.size(), failed);
    if (failed > 0) return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"marginal policy effect estimation"};
  app.require_subcommand(1);
  Cli cli;

  CLI::App* oracle = app.add_subcommand("oracle", "ground-truth MPE by simulation");
  add_common(oracle, cli);
  oracle->add_option("--export-sample", cli.export_sample, "write the context sample as CSV");
  oracle->add_flag("--with-latents", cli.with_latents, "include latent columns in the export");

  CLI::App* estimate = app.add_subcommand("estimate", "one estimate on a CSV dataset");
  add_common(estimate, cli);
  estimate->add_option("--data", cli.data, "input CSV (header: y,d[,x1..xk][,z])");
  estimate->add_option("--bootstrap", cli.bootstrap, "pairs-bootstrap replicates (0 = off)");

  CLI::App* mc = app.add_subcommand("mc", "Monte Carlo study against the oracle");
  add_common(mc, cli);

  CLI::App* check = app.add_subcommand("check", "run the identity/verification suite");
  add_common(check, cli);

  CLI11_PARSE(app, argc, argv);

  try {
    mpe::RunMode mode = mpe::RunMode::check;
    if (oracle->parsed()) mode = mpe::RunMode::oracle;
    if (estimate->parsed()) mode = mpe::RunMode::estimate;
    if (mc->parsed()) mode = mpe::RunMode::mc_study;
    return execute(build_config(cli, mode));
  } catch (const mpe::EstimationError& e) {
    std::fprintf(stderr, "estimation failure: %s\n", e.what());
    return 1;
  } catch (const mpe::ConfigurationError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const mpe::IngestionError& e) {
    std::fprintf(stderr, "ingestion error: %s\n", e.what());
    return 2;
  } catch (const mpe::LookupError& e) {
    std::fprintf(stderr, "lookup error: %s\n", e.what());
    return 2;
  } catch (const std::domain_error& e) {
    std::fprintf(stderr, "domain error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "invalid argument: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
