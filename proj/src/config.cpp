#include "cursim/config.hpp"

#include <fstream>
#include <set>

namespace cursim {

namespace {

// Rejects unrecognized keys so typos fail loudly instead of silently using
// defaults.
void require_keys(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + where);
  }
}

template <typename T>
T get_or(const nlohmann::json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad value for '" + key + "': " + e.what());
  }
}

}  // namespace

std::string to_string(CuratorKind k) {
  switch (k) {
    case CuratorKind::tabular_osmd: return "tabular_osmd";
    case CuratorKind::approx_surrogate: return "approx_surrogate";
    case CuratorKind::approx_clipped: return "approx_clipped";
    case CuratorKind::uniform: return "uniform";
    case CuratorKind::sec: return "sec";
    case CuratorKind::pcl: return "pcl";
    case CuratorKind::regression: return "regression";
    case CuratorKind::abs_adv: return "abs_adv";
  }
  throw std::logic_error("unreachable curator kind");
}

std::string to_string(EstimatorMode m) {
  return m == EstimatorMode::single_stage ? "single_stage" : "two_stage";
}

std::string to_string(SelectionMode m) {
  return m == SelectionMode::iid_draws ? "iid_draws" : "without_replacement";
}

std::string to_string(ProposalMode m) {
  return m == ProposalMode::uniform ? "uniform" : "difficulty_weighted";
}

CuratorKind curator_kind_from_string(const std::string& s) {
  for (CuratorKind k : {CuratorKind::tabular_osmd, CuratorKind::approx_surrogate, CuratorKind::approx_clipped,
                        CuratorKind::uniform, CuratorKind::sec, CuratorKind::pcl, CuratorKind::regression,
                        CuratorKind::abs_adv}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown curator kind: " + s);
}

EstimatorMode estimator_mode_from_string(const std::string& s) {
  if (s == "single_stage") return EstimatorMode::single_stage;
  if (s == "two_stage") return EstimatorMode::two_stage;
  throw ConfigError("unknown estimator mode: " + s);
}

SelectionMode selection_mode_from_string(const std::string& s) {
  if (s == "iid_draws") return SelectionMode::iid_draws;
  if (s == "without_replacement") return SelectionMode::without_replacement;
  throw ConfigError("unknown selection mode: " + s);
}

ProposalMode proposal_mode_from_string(const std::string& s) {
  if (s == "uniform") return ProposalMode::uniform;
  if (s == "difficulty_weighted") return ProposalMode::difficulty_weighted;
  throw ConfigError("unknown proposal mode: " + s);
}

void RunConfig::validate(int bank_size) const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (bank_path.empty()) {
    try {
      bank.validate();
    } catch (const std::invalid_argument& e) {
      fail(std::string("bank: ") + e.what());
    }
  }
  if (training_batch < 1) fail("training_batch must be >= 1");
  if (candidate_batch < training_batch) fail("candidate_batch must be >= training_batch");
  if (bank_size >= 0 && candidate_batch > bank_size) fail("candidate_batch exceeds bank size");
  if (rollouts_per_problem < 1) fail("rollouts_per_problem must be >= 1");
  if (total_steps < 1) fail("total_steps must be >= 1");
  if (dormant_steps < 0 || warmup_steps < 0) fail("dormant_steps and warmup_steps must be >= 0");
  if (dormant_steps + warmup_steps > total_steps) fail("dormant_steps + warmup_steps must be <= total_steps");
  if (seeds.empty()) fail("seeds must be nonempty");
  if (estimator == EstimatorMode::single_stage && bank_size >= 0 && candidate_batch != bank_size)
    fail("single_stage estimation requires candidate_batch == bank size (no proposal stage)");
  if (!(actor.learning_rate > 0.0)) fail("actor.learning_rate must be positive");
  if (actor.clip_range) {
    if (!(actor.clip_range->first < 1.0 && 1.0 < actor.clip_range->second))
      fail("actor clip range must straddle 1");
  }
  if (!(curator.eta > 0.0)) fail("curator.eta must be positive");
  if (curator.alpha >= 0.0 && bank_size > 0 && curator.alpha * bank_size > 1.0 + 1e-12)
    fail("curator.alpha * bank size must be <= 1");
  if (!(curator.utility_cap > 0.0)) fail("curator.utility_cap must be positive");
  if (!(curator.clip_low < 1.0 && 1.0 < curator.clip_high)) fail("curator clip range must straddle 1");
  if (!(curator.optimizer_lr > 0.0)) fail("curator.optimizer_lr must be positive");
  if (curator.epochs_per_step < 1) fail("curator.epochs_per_step must be >= 1");
  if (!(curator.sec_td_rate > 0.0 && curator.sec_td_rate <= 1.0)) fail("curator.sec_td_rate must be in (0, 1]");
  if (!(curator.sec_temperature > 0.0)) fail("curator.sec_temperature must be positive");
  if (!(curator.pcl_target >= 0.0 && curator.pcl_target <= 1.0)) fail("curator.pcl_target must be in [0, 1]");
  if (!(curator.value_lr > 0.0)) fail("curator.value_lr must be positive");
  if (curator.value_epochs < 1) fail("curator.value_epochs must be >= 1");
}

nlohmann::json to_json(const BankSpec& spec) {
  nlohmann::json j{
      {"size", spec.size},
      {"answer_count", spec.answer_count},
      {"structure", to_string(spec.structure)},
      {"difficulty_law", to_string(spec.difficulty_law)},
      {"bucket_count", spec.bucket_count},
      {"gate_threshold", spec.gate_threshold},
      {"seed", spec.seed},
  };
  if (!spec.eval_weights.empty()) j["eval_weights"] = spec.eval_weights;
  return j;
}

BankSpec bank_spec_from_json(const nlohmann::json& j) {
  require_keys(j,
               {"size", "answer_count", "structure", "difficulty_law", "bucket_count", "gate_threshold", "seed",
                "eval_weights"},
               "bank");
  BankSpec spec;
  spec.size = get_or(j, "size", spec.size);
  spec.answer_count = get_or(j, "answer_count", spec.answer_count);
  if (j.contains("structure")) spec.structure = bank_structure_from_string(j.at("structure").get<std::string>());
  if (j.contains("difficulty_law"))
    spec.difficulty_law = difficulty_law_from_string(j.at("difficulty_law").get<std::string>());
  spec.bucket_count = get_or(j, "bucket_count", spec.bucket_count);
  spec.gate_threshold = get_or(j, "gate_threshold", spec.gate_threshold);
  spec.seed = get_or(j, "seed", spec.seed);
  spec.eval_weights = get_or(j, "eval_weights", spec.eval_weights);
  return spec;
}

nlohmann::json to_json(const RunConfig& config) {
  nlohmann::json actor{
      {"learning_rate", config.actor.learning_rate},
      {"update_rule", to_string(config.actor.update_rule)},
  };
  if (config.actor.clip_range) {
    actor["clip_low"] = config.actor.clip_range->first;
    actor["clip_high"] = config.actor.clip_range->second;
  }
  nlohmann::json curator{
      {"kind", to_string(config.curator.kind)},
      {"eta", config.curator.eta},
      {"alpha", config.curator.alpha},
      {"utility_cap", config.curator.utility_cap},
      {"clip_low", config.curator.clip_low},
      {"clip_high", config.curator.clip_high},
      {"optimizer_lr", config.curator.optimizer_lr},
      {"epochs_per_step", config.curator.epochs_per_step},
      {"kl_global", config.curator.kl_global},
      {"sec_td_rate", config.curator.sec_td_rate},
      {"sec_temperature", config.curator.sec_temperature},
      {"pcl_target", config.curator.pcl_target},
      {"value_lr", config.curator.value_lr},
      {"value_epochs", config.curator.value_epochs},
  };
  nlohmann::json j{
      {"actor", actor},
      {"curator", curator},
      {"candidate_batch", config.candidate_batch},
      {"training_batch", config.training_batch},
      {"rollouts_per_problem", config.rollouts_per_problem},
      {"total_steps", config.total_steps},
      {"dormant_steps", config.dormant_steps},
      {"warmup_steps", config.warmup_steps},
      {"sampling_prior", config.sampling_prior},
      {"estimator", to_string(config.estimator)},
      {"selection", to_string(config.selection)},
      {"proposal", to_string(config.proposal)},
      {"seeds", config.seeds},
      {"output", config.output},
  };
  if (config.bank_path.empty()) j["bank"] = to_json(config.bank);
  else j["bank_path"] = config.bank_path;
  return j;
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  require_keys(j,
               {"bank", "bank_path", "actor", "curator", "candidate_batch", "training_batch",
                "rollouts_per_problem", "total_steps", "dormant_steps", "warmup_steps", "sampling_prior",
                "estimator", "selection", "proposal", "seeds", "output"},
               "config");
  RunConfig c;
  if (j.contains("bank_path") && j.contains("bank")) throw ConfigError("give either bank or bank_path, not both");
  if (j.contains("bank_path")) c.bank_path = j.at("bank_path").get<std::string>();
  else if (j.contains("bank")) c.bank = bank_spec_from_json(j.at("bank"));

  if (j.contains("actor")) {
    const auto& a = j.at("actor");
    require_keys(a, {"learning_rate", "update_rule", "clip_low", "clip_high"}, "actor");
    c.actor.learning_rate = get_or(a, "learning_rate", c.actor.learning_rate);
    if (a.contains("update_rule")) c.actor.update_rule = update_rule_from_string(a.at("update_rule").get<std::string>());
    if (a.contains("clip_low") != a.contains("clip_high"))
      throw ConfigError("actor clip_low and clip_high must be given together");
    if (a.contains("clip_low"))
      c.actor.clip_range = {a.at("clip_low").get<double>(), a.at("clip_high").get<double>()};
  }

  if (j.contains("curator")) {
    const auto& u = j.at("curator");
    require_keys(u,
                 {"kind", "eta", "alpha", "utility_cap", "clip_low", "clip_high", "optimizer_lr",
                  "epochs_per_step", "kl_global", "sec_td_rate", "sec_temperature", "pcl_target", "value_lr",
                  "value_epochs"},
                 "curator");
    if (u.contains("kind")) c.curator.kind = curator_kind_from_string(u.at("kind").get<std::string>());
    c.curator.eta = get_or(u, "eta", c.curator.eta);
    c.curator.alpha = get_or(u, "alpha", c.curator.alpha);
    c.curator.utility_cap = get_or(u, "utility_cap", c.curator.utility_cap);
    c.curator.clip_low = get_or(u, "clip_low", c.curator.clip_low);
    c.curator.clip_high = get_or(u, "clip_high", c.curator.clip_high);
    c.curator.optimizer_lr = get_or(u, "optimizer_lr", c.curator.optimizer_lr);
    c.curator.epochs_per_step = get_or(u, "epochs_per_step", c.curator.epochs_per_step);
    c.curator.kl_global = get_or(u, "kl_global", c.curator.kl_global);
    c.curator.sec_td_rate = get_or(u, "sec_td_rate", c.curator.sec_td_rate);
    c.curator.sec_temperature = get_or(u, "sec_temperature", c.curator.sec_temperature);
    c.curator.pcl_target = get_or(u, "pcl_target", c.curator.pcl_target);
    c.curator.value_lr = get_or(u, "value_lr", c.curator.value_lr);
    c.curator.value_epochs = get_or(u, "value_epochs", c.curator.value_epochs);
  }

  c.candidate_batch = get_or(j, "candidate_batch", c.candidate_batch);
  c.training_batch = get_or(j, "training_batch", c.training_batch);
  c.rollouts_per_problem = get_or(j, "rollouts_per_problem", c.rollouts_per_problem);
  c.total_steps = get_or(j, "total_steps", c.total_steps);
  c.dormant_steps = get_or(j, "dormant_steps", c.dormant_steps);
  c.warmup_steps = get_or(j, "warmup_steps", c.warmup_steps);
  c.sampling_prior = get_or(j, "sampling_prior", c.sampling_prior);
  if (j.contains("estimator")) c.estimator = estimator_mode_from_string(j.at("estimator").get<std::string>());
  if (j.contains("selection")) c.selection = selection_mode_from_string(j.at("selection").get<std::string>());
  if (j.contains("proposal")) c.proposal = proposal_mode_from_string(j.at("proposal").get<std::string>());
  c.seeds = get_or(j, "seeds", c.seeds);
  c.output = get_or(j, "output", c.output);
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  return run_config_from_json(j);
}

nlohmann::json to_json(const BanditConfig& config) {
  nlohmann::json j{
      {"total_arms", config.total_arms},
      {"available_arms", config.available_arms},
      {"pulls_per_round", config.pulls_per_round},
      {"horizon", config.horizon},
      {"eta", config.eta},
      {"alpha", config.alpha},
      {"loss_model", to_string(config.loss_model)},
      {"num_switches", config.num_switches},
      {"walk_step", config.walk_step},
      {"seed", config.seed},
  };
  if (config.restart_block_length) j["restart_block_length"] = *config.restart_block_length;
  return j;
}

BanditConfig bandit_config_from_json(const nlohmann::json& j) {
  require_keys(j,
               {"total_arms", "available_arms", "pulls_per_round", "horizon", "eta", "alpha",
                "restart_block_length", "loss_model", "num_switches", "walk_step", "seed"},
               "bandit config");
  BanditConfig c;
  c.total_arms = get_or(j, "total_arms", c.total_arms);
  c.available_arms = get_or(j, "available_arms", c.available_arms);
  c.pulls_per_round = get_or(j, "pulls_per_round", c.pulls_per_round);
  c.horizon = get_or(j, "horizon", c.horizon);
  c.eta = get_or(j, "eta", c.eta);
  c.alpha = get_or(j, "alpha", c.alpha);
  if (j.contains("restart_block_length")) c.restart_block_length = j.at("restart_block_length").get<long>();
  if (j.contains("loss_model")) c.loss_model = loss_model_from_string(j.at("loss_model").get<std::string>());
  c.num_switches = get_or(j, "num_switches", c.num_switches);
  c.walk_step = get_or(j, "walk_step", c.walk_step);
  c.seed = get_or(j, "seed", c.seed);
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

void apply_override(nlohmann::json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key.path=value: " + assignment);
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);

  nlohmann::json value;
  try {
    value = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::exception&) {
    value = raw;  // unquoted strings (e.g. curator.kind=uniform)
  }

  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    if (dot == std::string::npos) {
      parts.push_back(path.substr(start));
      break;
    }
    parts.push_back(path.substr(start, dot - start));
    start = dot + 1;
  }
  for (const auto& p : parts)
    if (p.empty()) throw ConfigError("override path has an empty segment: " + assignment);

  nlohmann::json* node = &config;
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->is_object()) throw ConfigError("override path crosses a non-object: " + assignment);
    node = &(*node)[parts[i]];
    if (node->is_null()) *node = nlohmann::json::object();
  }
  if (!node->is_object()) throw ConfigError("override path crosses a non-object: " + assignment);
  (*node)[parts.back()] = value;
}

}  // namespace cursim
