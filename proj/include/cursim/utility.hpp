#pragma once

// Per-problem policy-improvement utilities and their unbiased estimators.
// The realized utility of problem x across an actor update pi -> pi' is
//   u_x = p_X(x) * E_{y~pi}[ (pi'(y|x)/pi(y|x)) * (R(y|x) - E_{y'~pi}R) ]
// which telescopes to p_X(x) * (E_{pi'}R - E_{pi}R). Estimators correct for
// which problems were actually observed: single-stage divides by the sampling
// probability of x, two-stage additionally divides by the proposal inclusion
// probability q(x).

#include <vector>

#include "cursim/actor.hpp"
#include "cursim/problem_bank.hpp"

namespace cursim {

// One record per candidate problem per step, appended to the metrics stream.
struct UtilityFeedback {
  int problem_id = -1;
  bool selected = false;
  bool in_candidates = false;
  double q = 1.0;       // proposal inclusion probability
  double cond_p = 1.0;  // curator conditional on the candidate set
  double a_hat = 0.0;   // importance-weighted advantage estimate
  double u_hat = 0.0;   // utility estimate (0 unless selected)
  double eval_weight = 0.0;
};

// Ahat = (1/n) sum_j exp(logprob_new - logprob_old) * A_j with mean-baseline
// advantages. Requires logprob_new (state error otherwise).
double importance_advantage(const RolloutGroup& group);

// Exact utility of problem x for the update old_policy -> new_policy, with
// rewards held fixed at the given gate state. Both the importance form and
// the reward-difference form are evaluated and must agree to 1e-10.
double exact_utility(const TabularPolicy& old_policy, const TabularPolicy& new_policy,
                     const ProblemBank& bank, const GateState& gates, int problem_id);
// Gates from the pre-update policy.
double exact_utility(const TabularPolicy& old_policy, const TabularPolicy& new_policy,
                     const ProblemBank& bank, int problem_id);

// The infinite-group limit of importance_advantage under the true-mean
// baseline: E_{y~old}[ratio * A]. Equals exact_utility / p_X(x).
double analytic_importance_advantage(const TabularPolicy& old_policy, const TabularPolicy& new_policy,
                                     const ProblemBank& bank, const GateState& gates, int problem_id);

// First-order (in the logit step) prediction of u_x for an update that moves
// only problem x's row by `row_delta`. Exact utility minus this shrinks
// quadratically as the step size shrinks.
double first_order_utility(const TabularPolicy& policy, const ProblemBank& bank, const GateState& gates,
                           int problem_id, const std::vector<double>& row_delta);

// Uhat = p_X(x) * 1{selected} / sample_prob * a_hat.
double estimate_single_stage(double eval_weight, bool selected, double sample_prob, double a_hat);

// Uhat = p_X(x) * 1{selected} / (q * cond_p) * a_hat. q below q_min is an error.
double estimate_two_stage(double eval_weight, bool selected, double q, double cond_p, double a_hat,
                          double q_min = 1e-12);

// Mean absolute std-normalized advantage of a Bernoulli(p) group in closed
// form: 2*sqrt(p*(1-p)). Domain error outside [0, 1].
double mean_abs_advantage(double p);

}  // namespace cursim
