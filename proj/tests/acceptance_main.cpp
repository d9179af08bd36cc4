// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Runs the full desk-scale verification (takes a while).

#include <cstdio>
#include <string>
#include <vector>

#include "mpe/checks.hpp"

namespace {

struct Criterion {
  std::string label;
  std::vector<mpe::CheckResult> results;
};

bool report(const Criterion& c) {
  int failed = 0;
  for (const auto& r : c.results) failed += r.pass ? 0 : 1;
  std::printf("[%s] %s (%zu/%zu sub-checks)\n", failed == 0 ? "PASS" : "FAIL", c.label.c_str(),
              c.results.size() - failed, c.results.size());
  for (const auto& r : c.results) {
    std::printf("    %s %s: %s\n", r.pass ? "ok  " : "FAIL", r.name.c_str(), r.detail.c_str());
  }
  std::fflush(stdout);
  return failed == 0;
}

}  // namespace

int main() {
  mpe::CheckScale scale;
  scale.n_oracle = 1000000;
  scale.t_step = 0.01;
  scale.n_est = 2000;
  scale.mc_reps = 120;
  scale.threads = 1;
  scale.seed = 90210;

  using Runner = std::vector<mpe::CheckResult> (*)(const mpe::CheckScale&);
  const std::vector<std::pair<std::string, Runner>> plan = {
      {"criterion 1: structural representation identity", mpe::check_theorem1_identity},
      {"criterion 2: quantile representation", mpe::check_corollary1},
      {"criterion 3: UQR decomposition", mpe::check_theorem2},
      {"criterion 4: known-truth estimation", mpe::check_known_truth},
      {"criterion 5: Gini MPE closed form", mpe::check_gini_closed_form},
      {"criterion 6: Hadamard derivative finite differences", mpe::check_hadamard_fd},
      {"criterion 7: control-variable suite", mpe::check_control_variable},
      {"criterion 8: orthogonality and Riesz identity", mpe::check_orthogonality_riesz},
      {"criterion 9: determinism", mpe::check_determinism},
  };
  int failures = 0;
  std::size_t total = 0;
  for (const auto& [label, runner] : plan) {
    Criterion c{label, runner(scale)};
    total += 1;
    failures += report(c) ? 0 : 1;
  }
  std::printf("%zu criteria, %d failed\n", total, failures);
  return failures == 0 ? 0 : 1;
}
