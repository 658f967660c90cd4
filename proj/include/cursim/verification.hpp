#pragma once

// Verification suites and the release acceptance checks. Suites bundle the
// statistical/enumeration oracles (estimator unbiasedness, second-moment
// bound, finite-difference gradients, projection properties, utility
// additivity) behind the CLI `verify` subcommand; acceptance_checks() runs
// the ten release checks, each with pinned tolerances and a wall-clock
// budget, and reports one result per check.

#include <string>
#include <vector>

namespace cursim {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;  // measured margins and values
};

std::vector<CheckResult> verify_unbiasedness();
std::vector<CheckResult> verify_second_moment();
std::vector<CheckResult> verify_gradients();
std::vector<CheckResult> verify_projections();
std::vector<CheckResult> verify_additivity();

// name in {unbiasedness, second_moment, gradients, projections, additivity,
// all}; throws std::invalid_argument otherwise.
std::vector<CheckResult> verify_suite(const std::string& name);

// Individual acceptance criteria (each enforces its own runtime budget).
CheckResult acceptance_estimator_unbiasedness();   // 1
CheckResult acceptance_utility_sum_identity();     // 2
CheckResult acceptance_second_moment_bound();      // 3
CheckResult acceptance_regret_scaling();           // 4
CheckResult acceptance_curator_gradients();        // 7
CheckResult acceptance_closed_forms();             // 8
CheckResult acceptance_first_order_additivity();   // 9

// Criteria 5, 6, and 10 share one batch of curriculum runs.
struct StudyRun {
  long steps_to_target = -1;  // -1 = never reached
  double final_j = 0.0;
  double early_difficulty = 0.0;  // mean selected difficulty, first quartile
  double late_difficulty = 0.0;   // mean selected difficulty, last quartile
};

struct CurriculumStudy {
  std::vector<StudyRun> tabular;
  std::vector<StudyRun> clipped;
  std::vector<StudyRun> uniform_baseline;
  std::vector<StudyRun> abs_advantage;
  std::vector<StudyRun> regression;
  long total_steps = 0;
  double seconds = 0.0;
};

CurriculumStudy run_curriculum_study();
CheckResult acceptance_curriculum_speedup(const CurriculumStudy& study);      // 5
CheckResult acceptance_ablation_ordering(const CurriculumStudy& study);       // 6
CheckResult acceptance_difficulty_progression(const CurriculumStudy& study);  // 10

// All ten release checks, in order.
std::vector<CheckResult> acceptance_checks();

}  // namespace cursim
