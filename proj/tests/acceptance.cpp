// Release acceptance gate: runs the ten release checks in order and prints
// one PASS/FAIL line per check as it completes. Exit status is the number of
// failed checks (0 = release-ready). Three of the checks share one batch of
// curriculum runs, executed once between checks 4 and 5.

#include <cstdio>

#include "cursim/verification.hpp"

namespace {

int report(const cursim::CheckResult& r) {
  std::printf("%s %s: %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
  std::fflush(stdout);
  return r.passed ? 0 : 1;
}

}  // namespace

int main() {
  int failures = 0;
  failures += report(cursim::acceptance_estimator_unbiasedness());
  failures += report(cursim::acceptance_utility_sum_identity());
  failures += report(cursim::acceptance_second_moment_bound());
  failures += report(cursim::acceptance_regret_scaling());

  const cursim::CurriculumStudy study = cursim::run_curriculum_study();
  std::printf("(curriculum study: %zu runs of %ld steps in %.1fs)\n",
              5 * study.tabular.size(), study.total_steps, study.seconds);
  std::fflush(stdout);

  failures += report(cursim::acceptance_curriculum_speedup(study));
  failures += report(cursim::acceptance_ablation_ordering(study));
  failures += report(cursim::acceptance_curator_gradients());
  failures += report(cursim::acceptance_closed_forms());
  failures += report(cursim::acceptance_first_order_additivity());
  failures += report(cursim::acceptance_difficulty_progression(study));

  if (failures == 0) {
    std::printf("all 10 release checks passed\n");
  } else {
    std::printf("%d release check(s) failed\n", failures);
  }
  return failures;
}
