#pragma once

// Fully enumerable actor: one softmax row of logits per problem. Rewards are
// binary (answer == correct_answer, and for prerequisite banks the problem's
// gate must be open). Everything downstream of the policy -- success
// probabilities, performance J, gates -- is computed exactly by enumeration.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cursim/problem_bank.hpp"
#include "cursim/rng.hpp"

namespace cursim {

enum class UpdateRule { reinforce_mean_baseline, grpo_std_normalized, gspo_sequence };

std::string to_string(UpdateRule r);
UpdateRule update_rule_from_string(const std::string& s);

struct TabularPolicy {
  int n_problems = 0;
  int n_answers = 0;
  std::vector<double> logits;  // row-major [n_problems][n_answers]
  double learning_rate = 0.1;
  UpdateRule update_rule = UpdateRule::reinforce_mean_baseline;
  std::optional<std::pair<double, double>> clip_range;  // (low, high), 1 inside
  long step = 0;

  static TabularPolicy uniform(int n_problems, int n_answers);

  double* row(int problem) { return logits.data() + static_cast<std::size_t>(problem) * n_answers; }
  const double* row(int problem) const { return logits.data() + static_cast<std::size_t>(problem) * n_answers; }

  // Softmax over one row / log-probability of one answer.
  std::vector<double> answer_probs(int problem) const;
  double log_prob(int problem, int answer) const;

  void validate() const;
};

// Per-bucket gate state. For non-prerequisite banks every gate is open.
struct GateState {
  std::vector<std::uint8_t> open;  // indexed by bucket
  bool all_open = true;
};

// Gates derive from the policy's exact mean success per bucket: bucket b is
// open iff every prerequisite bucket's mean correct-answer probability
// strictly exceeds the bank's gate threshold.
GateState compute_gates(const TabularPolicy& policy, const ProblemBank& bank);

bool gate_open(const GateState& gates, const ProblemBank& bank, int problem_id);

// One group of independent single-answer rollouts on one problem.
struct RolloutGroup {
  int problem_id = -1;
  std::vector<int> answers;
  std::vector<double> rewards;
  std::vector<double> logprob_old;
  std::vector<double> logprob_new;  // filled by actor_update
  std::vector<int> lengths;         // per-sample token count; 1 in the simulator
};

RolloutGroup rollout(const TabularPolicy& policy, const ProblemBank& bank, const GateState& gates,
                     int problem_id, int group_size, Rng& rng);

// Group advantages. Mean rule: A_i = r_i - mean(r). Std rule additionally
// divides by the population standard deviation; an all-equal group yields
// zeros under both rules.
std::vector<double> group_advantage(const RolloutGroup& group, UpdateRule rule);

// Length-normalized sequence ratios exp((logprob_new - logprob_old)/length).
// Requires logprob_new to be populated.
std::vector<double> sequence_ratio(const RolloutGroup& group);

struct ActorUpdateResult {
  TabularPolicy policy;
  double grad_norm = 0.0;
};

// One gradient-ascent step on the configured surrogate over the dataset
// (per-group mean, summed across groups). Fills logprob_new on every group
// under the updated policy.
ActorUpdateResult actor_update(const TabularPolicy& policy, std::vector<RolloutGroup>& dataset);

// J(pi) = sum_x p_X(x) * E_{y~pi}[R(y|x)], exact.
double exact_performance(const TabularPolicy& policy, const ProblemBank& bank, const GateState& gates);
double exact_performance(const TabularPolicy& policy, const ProblemBank& bank);  // gates from this policy

// Exact success probability pi(correct|x) (reward-weighted, i.e. zero when the
// gate is closed).
double exact_success(const TabularPolicy& policy, const ProblemBank& bank, const GateState& gates, int problem_id);

// Gradient of E_{y~pi}[R(y|x)] with respect to problem x's logit row.
std::vector<double> exact_reward_gradient(const TabularPolicy& policy, const ProblemBank& bank,
                                          const GateState& gates, int problem_id);

// Closed-form expected-gradient step of the mean-baseline rule on a single
// problem (the infinite-group limit); used by sanity checks.
TabularPolicy expected_single_problem_step(const TabularPolicy& policy, const ProblemBank& bank,
                                           const GateState& gates, int problem_id);

void save_policy(const TabularPolicy& policy, const std::string& path);
TabularPolicy load_policy(const std::string& path);

}  // namespace cursim
