#pragma once

// Run configuration: parsing, validation, serialization, and dot-path
// overrides. Config files are JSON with the keys mirrored by RunConfig.
// Malformed configs raise ConfigError, which the CLI maps to exit code 2.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "cursim/actor.hpp"
#include "cursim/problem_bank.hpp"
#include "cursim/sleeping_bandit.hpp"

namespace cursim {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class CuratorKind {
  tabular_osmd,
  approx_surrogate,
  approx_clipped,
  uniform,
  sec,
  pcl,
  regression,
  abs_adv,
};

enum class EstimatorMode { single_stage, two_stage };
enum class SelectionMode { iid_draws, without_replacement };
enum class ProposalMode { uniform, difficulty_weighted };

std::string to_string(CuratorKind k);
std::string to_string(EstimatorMode m);
std::string to_string(SelectionMode m);
std::string to_string(ProposalMode m);
CuratorKind curator_kind_from_string(const std::string& s);
EstimatorMode estimator_mode_from_string(const std::string& s);
SelectionMode selection_mode_from_string(const std::string& s);
ProposalMode proposal_mode_from_string(const std::string& s);

struct ActorConfig {
  double learning_rate = 0.5;
  UpdateRule update_rule = UpdateRule::reinforce_mean_baseline;
  std::optional<std::pair<double, double>> clip_range;
};

struct CuratorConfig {
  CuratorKind kind = CuratorKind::tabular_osmd;
  // Shared temperature: tabular mirror step, approx surrogate/clipped, and the
  // regression curator's Boltzmann selection.
  double eta = 50.0;
  // Tabular floor; negative means the default 0.5 / bank size.
  double alpha = -1.0;
  double utility_cap = 30.0;
  // Approximate curator.
  double clip_low = 0.8;
  double clip_high = 1.2;
  double optimizer_lr = 0.05;
  int epochs_per_step = 20;
  bool kl_global = false;
  // Bucket TD baseline.
  double sec_td_rate = 0.3;
  double sec_temperature = 0.2;
  // Target-success selection.
  double pcl_target = 0.5;
  // Linear value model (target-success and regression curators).
  double value_lr = 0.1;
  int value_epochs = 1;
};

struct RunConfig {
  std::string bank_path;  // when nonempty the bank is loaded, not generated
  BankSpec bank;
  ActorConfig actor;
  CuratorConfig curator;
  int candidate_batch = 8;      // k
  int training_batch = 4;       // b
  int rollouts_per_problem = 4; // n
  int total_steps = 100;        // T
  int dormant_steps = 0;
  int warmup_steps = 0;
  bool sampling_prior = false;
  EstimatorMode estimator = EstimatorMode::two_stage;
  SelectionMode selection = SelectionMode::iid_draws;
  ProposalMode proposal = ProposalMode::uniform;
  std::vector<std::uint64_t> seeds{1};
  std::string output;

  // Throws ConfigError on violations. bank_size < 0 skips size-dependent
  // checks (used before the bank is materialized).
  void validate(int bank_size = -1) const;
};

nlohmann::json to_json(const BankSpec& spec);
BankSpec bank_spec_from_json(const nlohmann::json& j);

nlohmann::json to_json(const RunConfig& config);
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

nlohmann::json to_json(const BanditConfig& config);
BanditConfig bandit_config_from_json(const nlohmann::json& j);

// Applies "dot.path=value" to a JSON tree; the value is parsed as JSON when
// possible and treated as a string otherwise. Intermediate objects must
// already exist except at the final key.
void apply_override(nlohmann::json& config, const std::string& assignment);

}  // namespace cursim
