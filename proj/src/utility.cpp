#include "cursim/utility.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace cursim {

double importance_advantage(const RolloutGroup& group) {
  const std::size_t n = group.answers.size();
  if (n == 0) throw std::invalid_argument("importance_advantage: empty group");
  if (group.logprob_new.size() != n) throw std::logic_error("importance_advantage: logprob_new not populated");
  const std::vector<double> adv = group_advantage(group, UpdateRule::reinforce_mean_baseline);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sum += std::exp(group.logprob_new[i] - group.logprob_old[i]) * adv[i];
  }
  return sum / static_cast<double>(n);
}

namespace {

void check_shapes(const TabularPolicy& old_policy, const TabularPolicy& new_policy, const ProblemBank& bank,
                  int problem_id) {
  if (old_policy.n_problems != bank.size() || old_policy.n_answers != bank.answer_count())
    throw std::invalid_argument("old policy shape does not match bank");
  if (new_policy.n_problems != old_policy.n_problems || new_policy.n_answers != old_policy.n_answers)
    throw std::invalid_argument("policy shapes differ");
  if (problem_id < 0 || problem_id >= bank.size()) throw std::out_of_range("problem id out of range");
}

}  // namespace

double exact_utility(const TabularPolicy& old_policy, const TabularPolicy& new_policy, const ProblemBank& bank,
                     const GateState& gates, int problem_id) {
  check_shapes(old_policy, new_policy, bank, problem_id);
  const double px = eval_distribution(bank)[problem_id];
  const bool open = gate_open(gates, bank, problem_id);
  const int correct = bank.problems[problem_id].correct_answer;

  const std::vector<double> p_old = old_policy.answer_probs(problem_id);
  const std::vector<double> p_new = new_policy.answer_probs(problem_id);

  double mean_old = 0.0;
  for (int y = 0; y < old_policy.n_answers; ++y) {
    const double r = (open && y == correct) ? 1.0 : 0.0;
    mean_old += p_old[y] * r;
  }

  // Importance form: sum_y pi_old(y) * (pi_new(y)/pi_old(y)) * (R(y) - mean).
  double importance_form = 0.0;
  for (int y = 0; y < old_policy.n_answers; ++y) {
    const double r = (open && y == correct) ? 1.0 : 0.0;
    importance_form += p_old[y] * (p_new[y] / p_old[y]) * (r - mean_old);
  }
  importance_form *= px;

  double mean_new = 0.0;
  for (int y = 0; y < old_policy.n_answers; ++y) {
    const double r = (open && y == correct) ? 1.0 : 0.0;
    mean_new += p_new[y] * r;
  }
  const double difference_form = px * (mean_new - mean_old);

  if (std::abs(importance_form - difference_form) > 1e-10) {
    std::ostringstream msg;
    msg << "exact_utility forms disagree on problem " << problem_id << ": " << importance_form << " vs "
        << difference_form;
    throw std::runtime_error(msg.str());
  }
  return difference_form;
}

double exact_utility(const TabularPolicy& old_policy, const TabularPolicy& new_policy, const ProblemBank& bank,
                     int problem_id) {
  return exact_utility(old_policy, new_policy, bank, compute_gates(old_policy, bank), problem_id);
}

double analytic_importance_advantage(const TabularPolicy& old_policy, const TabularPolicy& new_policy,
                                     const ProblemBank& bank, const GateState& gates, int problem_id) {
  check_shapes(old_policy, new_policy, bank, problem_id);
  const double px = eval_distribution(bank)[problem_id];
  if (px <= 0.0) throw std::invalid_argument("problem has zero evaluation weight");
  return exact_utility(old_policy, new_policy, bank, gates, problem_id) / px;
}

double first_order_utility(const TabularPolicy& policy, const ProblemBank& bank, const GateState& gates,
                           int problem_id, const std::vector<double>& row_delta) {
  if (static_cast<int>(row_delta.size()) != policy.n_answers)
    throw std::invalid_argument("row_delta length must equal the answer count");
  const double px = eval_distribution(bank)[problem_id];
  const std::vector<double> grad = exact_reward_gradient(policy, bank, gates, problem_id);
  double dot = 0.0;
  for (int k = 0; k < policy.n_answers; ++k) dot += grad[k] * row_delta[k];
  return px * dot;
}

double estimate_single_stage(double eval_weight, bool selected, double sample_prob, double a_hat) {
  if (!selected) return 0.0;
  if (!(sample_prob > 0.0)) throw std::invalid_argument("selected problem has zero sampling probability");
  if (sample_prob > 1.0) throw std::invalid_argument("sampling probability exceeds 1");
  return eval_weight / sample_prob * a_hat;
}

double estimate_two_stage(double eval_weight, bool selected, double q, double cond_p, double a_hat, double q_min) {
  if (!selected) return 0.0;
  if (!(q >= q_min)) {
    std::ostringstream msg;
    msg << "proposal inclusion probability " << q << " below floor " << q_min;
    throw std::invalid_argument(msg.str());
  }
  if (!(cond_p > 0.0) || cond_p > 1.0) throw std::invalid_argument("conditional probability must lie in (0, 1]");
  return eval_weight / (q * cond_p) * a_hat;
}

double mean_abs_advantage(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("success probability must lie in [0, 1]");
  return 2.0 * std::sqrt(p * (1.0 - p));
}

}  // namespace cursim
