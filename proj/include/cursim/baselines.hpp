#pragma once

// Baseline curricula: uniform selection, bucket-level TD curator with
// Boltzmann sampling, target-success-closest selection over a value model,
// Boltzmann regression curator, and the mean-absolute-advantage utility used
// by the ablation curator. All selectors return distinct problem ids.

#include <vector>

#include "cursim/actor.hpp"
#include "cursim/problem_bank.hpp"
#include "cursim/rng.hpp"

namespace cursim {

std::vector<int> uniform_select(const ProblemBank& bank, int batch, Rng& rng);

// Per-bucket Q values with TD updates Q <- rate * r + (1 - rate) * Q and
// Boltzmann bucket sampling p(b) ∝ exp(Q_b / temperature).
struct SecState {
  std::vector<double> q_values;
  double td_rate = 0.3;
  double temperature = 0.2;

  static SecState init(int buckets, double td_rate, double temperature);
};

SecState sec_update(SecState state, int bucket, double reward);

// Repeatedly: draw a bucket from the Boltzmann distribution over buckets with
// at least one candidate, then a candidate uniformly inside it; rejected if
// already chosen. Returns `batch` distinct ids, sorted.
std::vector<int> sec_select(const SecState& state, const ProblemBank& bank, const std::vector<int>& candidates,
                            int batch, Rng& rng);

// Linear value model over problem features (plus bias).
struct ValueModel {
  std::vector<double> theta;  // feature_dim + 1
  double lr = 0.1;
  int epochs = 1;

  static ValueModel zero(int feature_dim);
};

double value_predict(const ValueModel& model, const Problem& problem);

// The m candidates whose clamped-[0,1] prediction is closest to the target
// success rate; ties break toward the lower id.
std::vector<int> pcl_select(const ValueModel& model, const ProblemBank& bank, const std::vector<int>& candidates,
                            int m, double target);

// Gradient steps on sum_i (prediction - observed_i)^2 over the given batch.
ValueModel value_regress(ValueModel model, const ProblemBank& bank, const std::vector<int>& ids,
                         const std::vector<double>& observed);

// Mean absolute std-normalized advantage of a rollout group.
double abs_adv_utility(const RolloutGroup& group);

// Boltzmann conditional p(x) ∝ exp(prediction(x) / temperature) over the
// candidate set, in candidate order.
std::vector<double> regression_conditional(const ValueModel& model, const ProblemBank& bank,
                                           const std::vector<int>& candidates, double temperature);

}  // namespace cursim
