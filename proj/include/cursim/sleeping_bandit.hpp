#pragma once

// Sleeping-bandit theory harness. Each round a uniform k-subset of K arms is
// available; the player draws s i.i.d. arms from its distribution conditioned
// on availability, observes their losses, forms an importance-weighted loss
// estimate, and takes a floored exponentiated mirror step (loss direction).
// Optional block restarts reset the distribution to uniform, which is what
// yields sublinear regret against drifting loss sequences.
//
// Regret is accounted in expected per-round form, exactly from the true loss
// table: algorithm loss s*<cond, l_t>, best-available-arm comparator s*l*_t,
// and the floored comparator s*<q_t, l_t> with
// q_t = (1 - k*alpha) e_{best} + alpha 1_{available}.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cursim/rng.hpp"

namespace cursim {

enum class LossModel { piecewise_constant, bounded_random_walk, abrupt_switch };

std::string to_string(LossModel m);
LossModel loss_model_from_string(const std::string& s);

struct BanditConfig {
  int total_arms = 2;       // K
  int available_arms = 1;   // k per round
  int pulls_per_round = 1;  // s
  long horizon = 1000;      // T
  double eta = 0.1;
  double alpha = 0.01;
  std::optional<long> restart_block_length;
  LossModel loss_model = LossModel::piecewise_constant;
  int num_switches = 4;     // piecewise_constant / abrupt_switch
  double walk_step = 0.02;  // bounded_random_walk
  std::uint64_t seed = 0;

  void validate() const;
};

std::vector<std::vector<double>> generate_loss_table(const BanditConfig& config);

// Lhat_i = (1/s) sum_r 1{pull_r = i} * losses_i / cond_p_i. Arms with zero
// conditional probability must not appear among the pulls.
std::vector<double> loss_estimator(const std::vector<double>& cond_p, const std::vector<int>& pulls,
                                   const std::vector<double>& losses, int s);

// Empirical mean and standard error of sum_j cond_p_j * Lhat_j^2 over a batch
// of estimator samples drawn under cond_p.
std::pair<double, double> second_moment(const std::vector<double>& cond_p,
                                        const std::vector<std::vector<double>>& lhat_samples);

// Total drift V_T = sum_{t>=2} max_i |l_{t,i} - l_{t-1,i}| and the per-step
// drift sequence. Tables with fewer than two rows have zero drift.
std::pair<double, std::vector<double>> drift(const std::vector<std::vector<double>>& loss_table);

// Closed-form tuned block length and learning rate for a drift budget V.
double tuned_block_length(long horizon, double drift_total, int pulls, int available, double alpha);
double tuned_eta(long horizon, double drift_total, int pulls, int available, double alpha);

struct RegretLedger {
  BanditConfig config;
  std::vector<double> step_alg_loss;        // s * <cond, l_t>
  std::vector<double> step_best_arm_loss;   // s * min available loss
  std::vector<double> step_best_avail_loss; // s * <q_t, l_t>
  std::vector<double> drift_steps;
  double drift_total = 0.0;
  std::vector<long> restart_steps;
  std::vector<std::vector<int>> pulls;      // realized pulls per round
  std::vector<double> second_moment_steps;  // sum_j cond_j * Lhat_j^2 per round

  double best_arm_regret() const;
  double best_available_regret() const;
  // Cumulative best-available regret at logarithmically spaced checkpoints.
  std::vector<std::pair<long, double>> checkpoints(int count = 8) const;
};

RegretLedger run_sleeping_osmd(const BanditConfig& config);
RegretLedger run_sleeping_osmd(const BanditConfig& config, const std::vector<std::vector<double>>& loss_table);

struct RegretSummary {
  double drift_total = 0.0;
  double best_arm_regret = 0.0;
  double best_available_regret = 0.0;
  std::vector<std::pair<long, double>> checkpoints;
  double loglog_slope = 0.0;  // regression of log regret on log t over checkpoints
};

RegretSummary regret_report(const RegretLedger& ledger);

}  // namespace cursim
