#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"

#include "cursim/actor.hpp"
#include "cursim/problem_bank.hpp"
#include "cursim/rng.hpp"
#include "cursim/tabular_curator.hpp"
#include "cursim/utility.hpp"

using namespace cursim;

namespace {

struct Instance {
  ProblemBank bank;
  TabularPolicy old_policy;
  TabularPolicy new_policy;
  GateState gates;
};

Instance make_instance(std::uint64_t seed) {
  BankSpec spec;
  spec.size = 6;
  spec.answer_count = 3;
  spec.structure = BankStructure::independent;
  spec.difficulty_law = DifficultyLaw::uniform;
  spec.bucket_count = 2;
  spec.seed = 1000 + seed;
  Instance inst{generate_bank(spec), TabularPolicy::uniform(6, 3), TabularPolicy::uniform(6, 3), {}};
  Rng rng = Rng::substream(8800, seed);
  for (double& l : inst.old_policy.logits) l = 0.6 * rng.normal();
  inst.new_policy = inst.old_policy;
  for (double& l : inst.new_policy.logits) l += 0.4 * rng.normal();
  inst.gates = compute_gates(inst.old_policy, inst.bank);
  return inst;
}

// All k-subsets of {0..n-1}.
void subsets(int n, int k, std::vector<std::vector<int>>& out) {
  std::vector<int> cur(k);
  // Iterative combination walk.
  for (int i = 0; i < k; ++i) cur[i] = i;
  while (true) {
    out.push_back(cur);
    int i = k - 1;
    while (i >= 0 && cur[i] == n - k + i) --i;
    if (i < 0) break;
    ++cur[i];
    for (int j = i + 1; j < k; ++j) cur[j] = cur[j - 1] + 1;
  }
}

}  // namespace

TEST_CASE("the exact utility equals eval weight times the analytic advantage") {
  for (std::uint64_t s = 0; s < 6; ++s) {
    const Instance inst = make_instance(s);
    for (int x = 0; x < inst.bank.size(); ++x) {
      const double u = exact_utility(inst.old_policy, inst.new_policy, inst.bank, inst.gates, x);
      const double a = analytic_importance_advantage(inst.old_policy, inst.new_policy, inst.bank, inst.gates, x);
      CHECK(u == doctest::Approx(inst.bank.problems[x].eval_weight * a).epsilon(1e-10));
      // The gates-from-old-policy overload agrees when given the same gates.
      CHECK(exact_utility(inst.old_policy, inst.new_policy, inst.bank, x) == doctest::Approx(u).epsilon(1e-10));
    }
  }
}

TEST_CASE("utilities sum to the exact performance delta at fixed gates") {
  for (std::uint64_t s = 0; s < 6; ++s) {
    const Instance inst = make_instance(s);
    double total = 0.0;
    for (int x = 0; x < inst.bank.size(); ++x)
      total += exact_utility(inst.old_policy, inst.new_policy, inst.bank, inst.gates, x);
    const double dj = exact_performance(inst.new_policy, inst.bank, inst.gates) -
                      exact_performance(inst.old_policy, inst.bank, inst.gates);
    CHECK(total == doctest::Approx(dj).epsilon(1e-10));
  }
}

TEST_CASE("full enumeration of both sampling stages reproduces the exact utility") {
  const Instance inst = make_instance(3);
  const int K = inst.bank.size();
  const int k = 3;
  const int b = 2;

  CuratorDistribution curator = CuratorDistribution::uniform(K, 0.02, 1.0);
  {
    Rng rng = Rng::substream(8801, 0);
    for (double& w : curator.weights) w = 0.2 + rng.uniform01();
    curator.weights = floor_project(curator.weights, curator.alpha);
  }

  std::vector<std::vector<int>> cand_sets;
  subsets(K, k, cand_sets);
  const double p_set = 1.0 / static_cast<double>(cand_sets.size());
  const double q = static_cast<double>(k) / K;  // symmetry of uniform subsets

  for (int x = 0; x < K; ++x) {
    const double a_x = analytic_importance_advantage(inst.old_policy, inst.new_policy, inst.bank, inst.gates, x);
    const double u_x = exact_utility(inst.old_policy, inst.new_policy, inst.bank, inst.gates, x);
    double mean_two_stage = 0.0;
    for (const std::vector<int>& set : cand_sets) {
      const std::vector<double> cond = conditional_distribution(curator, set);
      // Enumerate every ordered pair of i.i.d. conditional draws.
      for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
          const double p_draw = cond[i] * cond[j];
          const bool selected = set[i] == x || set[j] == x;
          if (!selected) continue;
          int pos = set[i] == x ? i : j;
          const double eff = 1.0 - std::pow(1.0 - cond[pos], static_cast<double>(b));
          mean_two_stage += p_set * p_draw *
                            estimate_two_stage(inst.bank.problems[x].eval_weight, true, q, eff, a_x);
        }
      }
    }
    CHECK(mean_two_stage == doctest::Approx(u_x).epsilon(1e-10));

    // Single stage: the candidate set is the whole bank.
    std::vector<int> all_ids(K);
    for (int i = 0; i < K; ++i) all_ids[i] = i;
    const std::vector<double> cond = conditional_distribution(curator, all_ids);
    double mean_single = 0.0;
    for (int i = 0; i < K; ++i) {
      for (int j = 0; j < K; ++j) {
        const double p_draw = cond[i] * cond[j];
        if (i != x && j != x) continue;
        const int pos = i == x ? i : j;
        const double eff = 1.0 - std::pow(1.0 - cond[pos], static_cast<double>(b));
        mean_single += p_draw * estimate_single_stage(inst.bank.problems[x].eval_weight, true, eff, a_x);
      }
    }
    CHECK(mean_single == doctest::Approx(u_x).epsilon(1e-10));
  }
}

TEST_CASE("estimators are zero for unselected problems and scale by inclusion") {
  CHECK(estimate_single_stage(0.1, false, 0.5, 2.0) == 0.0);
  CHECK(estimate_two_stage(0.1, false, 0.4, 0.5, 2.0) == 0.0);
  CHECK(estimate_single_stage(0.1, true, 0.5, 2.0) == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(estimate_two_stage(0.1, true, 0.4, 0.5, 2.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(estimate_two_stage(0.1, true, 0.0, 0.5, 2.0), std::invalid_argument);
}

TEST_CASE("the sampled importance advantage requires updated log-probabilities") {
  RolloutGroup g;
  g.problem_id = 0;
  g.answers = {0, 1};
  g.rewards = {1.0, 0.0};
  g.logprob_old = {-1.0, -1.5};
  g.lengths = {1, 1};
  CHECK_THROWS(importance_advantage(g));

  g.logprob_new = {-0.5, -2.0};
  // ratios r_i = exp(new - old); mean-baseline advantages are (0.5, -0.5).
  const double expect = 0.5 * (std::exp(0.5) * 0.5 + std::exp(-0.5) * -0.5);
  CHECK(importance_advantage(g) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("the first-order utility is linear and matches a directional derivative") {
  const Instance inst = make_instance(4);
  const int x = 2;
  std::vector<double> delta(inst.bank.answer_count());
  Rng rng = Rng::substream(8802, 0);
  for (double& d : delta) d = rng.normal();

  CHECK(first_order_utility(inst.old_policy, inst.bank, inst.gates, x, std::vector<double>(delta.size(), 0.0)) ==
        0.0);

  const double lin = first_order_utility(inst.old_policy, inst.bank, inst.gates, x, delta);
  std::vector<double> twice(delta);
  for (double& d : twice) d *= 2.0;
  CHECK(first_order_utility(inst.old_policy, inst.bank, inst.gates, x, twice) ==
        doctest::Approx(2.0 * lin).epsilon(1e-12));

  const double h = 1e-6;
  TabularPolicy moved = inst.old_policy;
  for (std::size_t a = 0; a < delta.size(); ++a) moved.row(x)[a] += h * delta[a];
  const double fd =
      (exact_performance(moved, inst.bank, inst.gates) - exact_performance(inst.old_policy, inst.bank, inst.gates)) /
      h;
  CHECK(lin == doctest::Approx(fd).epsilon(1e-4));
}

TEST_CASE("the mean absolute advantage has the closed Bernoulli form") {
  CHECK(mean_abs_advantage(0.0) == 0.0);
  CHECK(mean_abs_advantage(1.0) == 0.0);
  CHECK(mean_abs_advantage(0.5) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(mean_abs_advantage(0.3) == doctest::Approx(2.0 * std::sqrt(0.3 * 0.7)).epsilon(1e-12));
  CHECK_THROWS(mean_abs_advantage(-0.1));
  CHECK_THROWS(mean_abs_advantage(1.1));
}
