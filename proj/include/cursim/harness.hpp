#pragma once

// End-to-end orchestration of the curation loop:
//   propose candidates -> curator picks a training batch -> rollouts ->
//   actor update -> per-problem utility estimates -> curator update,
// with exact performance bookkeeping every step, plus the bandit wrapper and
// the sweep runner.
//
// Randomness: the master seed is split into independent substreams (bank
// generation, rollouts, proposal, selection, curator init), so switching the
// curator kind never perturbs the other streams — enabling paired-seed
// comparisons. A bank spec seed of 0 means "derive from the master seed";
// nonzero pins the bank across seeds.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "cursim/actor.hpp"
#include "cursim/config.hpp"
#include "cursim/problem_bank.hpp"
#include "cursim/sleeping_bandit.hpp"
#include "cursim/utility.hpp"

namespace cursim {

struct StepMetrics {
  long step = 0;
  double j_exact = 0.0;  // exact J of the policy entering the step
  double delta_j = 0.0;  // exact J after the update minus j_exact
  double actor_grad_norm = 0.0;
  double curator_loss = 0.0;
  double curator_grad_norm = 0.0;
  double mean_selected_difficulty = 0.0;
  // Cumulative bandit-feedback proxy: per step, the best estimated utility
  // among candidates minus the mean estimated utility of the selected batch
  // (clamped at zero). Shrinks as the curator concentrates on high-utility
  // problems.
  double curator_regret_proxy = 0.0;
  std::vector<UtilityFeedback> feedback;  // one record per candidate
};

nlohmann::json to_json(const StepMetrics& m);

struct RunResult {
  std::vector<StepMetrics> metrics;
  TabularPolicy final_policy;
  double initial_j = 0.0;
  double final_j = 0.0;
  double peak_j = 0.0;  // max over post-update J values (and the initial J)
  std::uint64_t metrics_hash = 0;
  std::uint64_t bank_hash = 0;
  long curator_overflow_clips = 0;  // tabular utility-cap saturations
};

// Materializes the configured bank: loads bank_path when set, otherwise
// generates from the bank spec (bank seed 0 -> derived from the master seed).
ProblemBank materialize_bank(const RunConfig& config, std::uint64_t master_seed);

// Runs the full loop under one master seed. When metrics_path is nonempty the
// run header and one record per step are streamed there as JSONL.
RunResult run_curriculum(const RunConfig& config, std::uint64_t master_seed,
                         const std::string& metrics_path = "");

// First step index whose post-update J reaches the target; -1 if never.
long steps_to_target(const RunResult& result, double target);

// Thin wrapper over run_sleeping_osmd: returns the summary record
// (config echo, drift, both regrets, checkpoints, log-log slope).
nlohmann::json run_bandit(const BanditConfig& config);

struct SweepGrid {
  // (dot-path into the run config, values to take). The Cartesian product of
  // all axes is crossed with the config's seed list.
  std::vector<std::pair<std::string, std::vector<nlohmann::json>>> axes;
};

struct SweepTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// One row per (grid cell, seed), in grid-major order; jobs > 1 evaluates rows
// in parallel without changing the output.
SweepTable run_sweep(const nlohmann::json& base_config, const SweepGrid& grid, int jobs = 1);

}  // namespace cursim
