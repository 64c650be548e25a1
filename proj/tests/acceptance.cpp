// Acceptance suite: one line per criterion, nonzero exit if any fails.
// Criteria 1-9 run the library verification stages on the default desk-scale
// configuration; criterion 10 exercises the CLI end to end.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "klgame/harness.hpp"
#include "klgame/io.hpp"

using namespace klgame;
namespace fs = std::filesystem;

namespace {

struct CriterionResult {
  bool passed = true;
  Scalar max_violation = 0;
  double seconds = 0;
};

int run_cli(const std::string& args) {
  const std::string cmd = std::string(KLGAME_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  return WEXITSTATUS(std::system(cmd.c_str()));
}

bool files_equal(const fs::path& a, const fs::path& b) {
  return fs::exists(a) && fs::exists(b) && read_file(a) == read_file(b);
}

CriterionResult reproducibility_criterion() {
  CriterionResult result;
  const auto start = std::chrono::steady_clock::now();

  const fs::path root = fs::temp_directory_path() / "klgame_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path cfg = root / "config.json";
  {
    std::ofstream out(cfg);
    out << R"({
  "num_contexts": 3,
  "num_actions": 3,
  "class_size": 8,
  "n_grid": [128, 256, 512, 1024],
  "t_grid": [1, 4, 16, 64],
  "num_seeds": 3,
  "n_fixed": 256,
  "master_seed": 20250801
})";
  }
  const std::string base = " --config " + cfg.string() + " --out ";

  // verify twice: identical bounds.json regardless of pass/fail status.
  const int v1 = run_cli("verify" + base + (root / "v1").string());
  const int v2 = run_cli("verify" + base + (root / "v2").string());
  if (v1 == 2 || v2 == 2 || !files_equal(root / "v1" / "bounds.json", root / "v2" / "bounds.json"))
    result.passed = false;

  const int s1 = run_cli("sweep-n" + base + (root / "s1").string());
  const int s2 = run_cli("sweep-n" + base + (root / "s2").string());
  if (s1 != 0 || s2 != 0 || !files_equal(root / "s1" / "sweep.csv", root / "s2" / "sweep.csv") ||
      !files_equal(root / "s1" / "plotdata_minimax.csv", root / "s2" / "plotdata_minimax.csv") ||
      !files_equal(root / "s1" / "plotdata_baseline.csv", root / "s2" / "plotdata_baseline.csv"))
    result.passed = false;

  result.max_violation = result.passed ? -1.0 : 1.0;
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  fs::remove_all(root);
  return result;
}

}  // namespace

int main() {
  ExperimentConfig config;  // desk-scale defaults

  struct StageOutcome {
    std::map<std::string, BoundReport> reports;
    double seconds = 0;
  };
  std::map<std::string, StageOutcome> stages;

  for (auto& [name, fn] : verification_steps(config)) {
    if (name == "reproducibility") continue;  // covered through the CLI below
    const auto start = std::chrono::steady_clock::now();
    StageOutcome outcome;
    for (BoundReport& report : run_step_guarded(name, fn))
      outcome.reports[report.name] = std::move(report);
    outcome.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    stages[name] = std::move(outcome);
    std::fflush(stdout);
  }

  struct Criterion {
    int id;
    std::string label;
    std::string stage;
    std::vector<std::string> reports;
    double limit_seconds;
    bool shared_runtime = false;  // budget accounted under another criterion
  };
  const std::vector<Criterion> criteria = {
      {1, "identity suite (best-response and gap decompositions)", "identities",
       {"br_suboptimality_identity", "gap_kl_identities"}, 10.0},
      {2, "softmax KL bound via logit distance", "kl_logit_bound", {"kl_logit_bound"}, 5.0},
      {3, "equilibrium stability under payoff perturbation", "stability",
       {"stability_bound"}, 60.0},
      {4, "self-play last-iterate convergence envelope", "selfplay_convergence",
       {"selfplay_convergence"}, 120.0},
      {5, "least-squares concentration bounds", "concentration",
       {"insample_error_bound", "pairwise_generalization_bound"}, 120.0},
      {6, "fast rate of the offline pipeline", "rate_sweep", {"minimax_fast_rate"}, 600.0},
      {7, "conservative baseline contrast", "rate_sweep", {"baseline_contrast"}, 600.0, true},
      {8, "self-play rate: decrease then plateau", "selfplay_rate", {"selfplay_rate"}, 300.0},
      {9, "oracle validity", "oracle_validity", {"oracle_validity"}, 60.0},
  };

  int failures = 0;
  for (const Criterion& criterion : criteria) {
    const StageOutcome& outcome = stages.at(criterion.stage);
    bool passed = true;
    Scalar worst = -1e300;
    for (const std::string& name : criterion.reports) {
      const auto it = outcome.reports.find(name);
      if (it == outcome.reports.end()) {
        passed = false;
        continue;
      }
      passed = passed && it->second.passed;
      if (it->second.max_violation > worst) worst = it->second.max_violation;
    }
    const bool in_budget = criterion.shared_runtime || outcome.seconds <= criterion.limit_seconds;
    passed = passed && in_budget;
    if (!passed) ++failures;
    std::printf("[%s] criterion %d: %s (max_violation=%.3e, %.1fs of %.0fs)\n",
                passed ? "PASS" : "FAIL", criterion.id, criterion.label.c_str(), worst,
                outcome.seconds, criterion.limit_seconds);
    std::fflush(stdout);
  }

  const CriterionResult repro = reproducibility_criterion();
  if (!repro.passed) ++failures;
  std::printf("[%s] criterion 10: byte-identical verify and sweep-n reruns (%.1fs)\n",
              repro.passed ? "PASS" : "FAIL", repro.seconds);

  if (failures > 0) std::printf("%d criterion(s) failed\n", failures);
  return failures > 0 ? 1 : 0;
}
