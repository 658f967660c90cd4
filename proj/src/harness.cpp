#include "cursim/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <thread>

#include "cursim/approx_curator.hpp"
#include "cursim/baselines.hpp"
#include "cursim/io.hpp"
#include "cursim/tabular_curator.hpp"

namespace cursim {

namespace {

// Substream ids for the master-seed split.
constexpr std::uint64_t kBankStream = 1;
constexpr std::uint64_t kRolloutStream = 2;
constexpr std::uint64_t kProposalStream = 3;
constexpr std::uint64_t kSelectionStream = 4;
constexpr std::uint64_t kCuratorInitStream = 5;
constexpr std::uint64_t kInclusionStream = 6;
constexpr std::uint64_t kProposalInclusionStream = 7;

// Distinct indices with probability proportional to weights, via exponential
// races (equivalent to successive weighted draws without replacement).
// Returned sorted.
std::vector<int> weighted_subset(const std::vector<double>& weights, int k, Rng& rng) {
  const int n = static_cast<int>(weights.size());
  if (k < 0 || k > n) throw std::invalid_argument("weighted_subset: need 0 <= k <= n");
  std::vector<std::pair<double, int>> race(n);
  for (int i = 0; i < n; ++i) {
    if (!(weights[i] > 0.0)) throw std::invalid_argument("weighted_subset: weights must be positive");
    double u = rng.uniform01();
    while (u <= 0.0) u = rng.uniform01();
    race[i] = {-std::log(u) / weights[i], i};
  }
  std::nth_element(race.begin(), race.begin() + k, race.end());
  std::vector<int> out(k);
  for (int i = 0; i < k; ++i) out[i] = race[i].second;
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<double> gather(const std::vector<double>& values, const std::vector<int>& ids) {
  std::vector<double> out(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) out[i] = values[ids[i]];
  return out;
}

int candidate_position(const std::vector<int>& sorted_candidates, int id) {
  const auto it = std::lower_bound(sorted_candidates.begin(), sorted_candidates.end(), id);
  if (it == sorted_candidates.end() || *it != id)
    throw std::logic_error("selected problem is missing from the candidate set");
  return static_cast<int>(it - sorted_candidates.begin());
}

double mean_reward(const RolloutGroup& group) {
  double s = 0.0;
  for (double r : group.rewards) s += r;
  return s / static_cast<double>(group.rewards.size());
}

void hash_metrics(StreamHash& h, const StepMetrics& m) {
  h.add_int(m.step);
  h.add_double(m.j_exact);
  h.add_double(m.delta_j);
  h.add_double(m.actor_grad_norm);
  h.add_double(m.curator_loss);
  h.add_double(m.curator_grad_norm);
  h.add_double(m.mean_selected_difficulty);
  h.add_double(m.curator_regret_proxy);
  for (const UtilityFeedback& r : m.feedback) {
    h.add_int(r.problem_id);
    h.add_int(r.selected ? 1 : 0);
    h.add_int(r.in_candidates ? 1 : 0);
    h.add_double(r.q);
    h.add_double(r.cond_p);
    h.add_double(r.a_hat);
    h.add_double(r.u_hat);
    h.add_double(r.eval_weight);
  }
}

}  // namespace

nlohmann::json to_json(const StepMetrics& m) {
  nlohmann::json fb = nlohmann::json::array();
  for (const UtilityFeedback& r : m.feedback) {
    fb.push_back({
        {"problem_id", r.problem_id},
        {"selected", r.selected},
        {"in_candidates", r.in_candidates},
        {"q", r.q},
        {"cond_p", r.cond_p},
        {"a_hat", r.a_hat},
        {"u_hat", r.u_hat},
        {"eval_weight", r.eval_weight},
    });
  }
  return nlohmann::json{
      {"record", "step"},
      {"step", m.step},
      {"j_exact", m.j_exact},
      {"delta_j", m.delta_j},
      {"actor_grad_norm", m.actor_grad_norm},
      {"curator_loss", m.curator_loss},
      {"curator_grad_norm", m.curator_grad_norm},
      {"mean_selected_difficulty", m.mean_selected_difficulty},
      {"curator_regret_proxy", m.curator_regret_proxy},
      {"feedback", fb},
  };
}

ProblemBank materialize_bank(const RunConfig& config, std::uint64_t master_seed) {
  if (!config.bank_path.empty()) return load_bank(config.bank_path);
  BankSpec spec = config.bank;
  if (spec.seed == 0) {
    spec.seed = Rng::substream(master_seed, kBankStream).next();
    if (spec.seed == 0) spec.seed = 1;
  }
  return generate_bank(spec);
}

RunResult run_curriculum(const RunConfig& config, std::uint64_t master_seed, const std::string& metrics_path) {
  const ProblemBank bank = materialize_bank(config, master_seed);
  config.validate(bank.size());

  const int K = bank.size();
  const int k = config.candidate_batch;
  const int b = config.training_batch;
  const int n = config.rollouts_per_problem;
  const CuratorKind kind = config.curator.kind;
  const std::vector<double> p_x = eval_distribution(bank);

  Rng rollout_rng = Rng::substream(master_seed, kRolloutStream);
  Rng proposal_rng = Rng::substream(master_seed, kProposalStream);
  Rng selection_rng = Rng::substream(master_seed, kSelectionStream);
  Rng inclusion_rng = Rng::substream(master_seed, kInclusionStream);
  // Reserved so future curators with random init do not disturb the streams
  // above; every current curator initializes deterministically.
  Rng curator_init_rng = Rng::substream(master_seed, kCuratorInitStream);
  (void)curator_init_rng;

  TabularPolicy policy = TabularPolicy::uniform(K, bank.answer_count());
  policy.learning_rate = config.actor.learning_rate;
  policy.update_rule = config.actor.update_rule;
  policy.clip_range = config.actor.clip_range;

  std::vector<int> every_id(K);
  std::iota(every_id.begin(), every_id.end(), 0);

  // Proposal inclusion probabilities q(x), constant across steps.
  std::vector<double> proposal_weights;
  std::vector<double> q_all(K, static_cast<double>(k) / K);
  if (k == K) {
    q_all.assign(K, 1.0);
  } else if (config.proposal == ProposalMode::difficulty_weighted) {
    proposal_weights.resize(K);
    for (int i = 0; i < K; ++i) proposal_weights[i] = 0.5 + bank.problems[i].difficulty;
    Rng qrng = Rng::substream(master_seed, kProposalInclusionStream);
    const int reps = 100000;
    std::vector<long> counts(K, 0);
    for (int rep = 0; rep < reps; ++rep)
      for (int id : weighted_subset(proposal_weights, k, qrng)) ++counts[id];
    for (int i = 0; i < K; ++i)
      q_all[i] = std::max<double>(static_cast<double>(counts[i]), 1.0) / static_cast<double>(reps);
  }

  // Curator states; only the configured kind is consulted.
  const double alpha = config.curator.alpha < 0.0 ? 0.5 / K : config.curator.alpha;
  CuratorDistribution tabular = CuratorDistribution::uniform(K, alpha, config.curator.eta);
  tabular.utility_cap = config.curator.utility_cap;
  CuratorParams params = CuratorParams::zero(std::max(1, bank.feature_dim()));
  params.eta = config.curator.eta;
  params.clip_low = config.curator.clip_low;
  params.clip_high = config.curator.clip_high;
  params.optimizer_lr = config.curator.optimizer_lr;
  params.epochs_per_step = config.curator.epochs_per_step;
  params.sampling_prior = config.sampling_prior;
  params.kl_global = config.curator.kl_global;
  SecState sec = SecState::init(static_cast<int>(bank.bucket_members.size()), config.curator.sec_td_rate,
                                config.curator.sec_temperature);
  ValueModel value = ValueModel::zero(std::max(1, bank.feature_dim()));
  value.lr = config.curator.value_lr;
  value.epochs = config.curator.value_epochs;

  RunResult out;
  out.bank_hash = bank_hash(bank);
  GateState gates = compute_gates(policy, bank);
  double j_curr = exact_performance(policy, bank, gates);
  out.initial_j = j_curr;
  out.peak_j = j_curr;
  double regret_accum = 0.0;

  std::optional<JsonlWriter> writer;
  if (!metrics_path.empty()) {
    writer.emplace(metrics_path);
    writer->write(nlohmann::json{{"record", "run_header"},
                                 {"master_seed", master_seed},
                                 {"bank_hash", out.bank_hash},
                                 {"config", to_json(config)}});
  }

  out.metrics.reserve(config.total_steps);
  for (long t = 0; t < config.total_steps; ++t) {
    const bool dormant = t < config.dormant_steps;
    double ramp = 1.0;
    if (!dormant && config.warmup_steps > 0) {
      const long after = t - config.dormant_steps;
      if (after < config.warmup_steps) ramp = static_cast<double>(after + 1) / config.warmup_steps;
    }

    // Coverage stage: candidate proposal.
    std::vector<int> candidates;
    if (k == K) candidates = every_id;
    else if (config.proposal == ProposalMode::uniform) candidates = proposal_rng.sample_without_replacement(K, k);
    else candidates = weighted_subset(proposal_weights, k, proposal_rng);

    // Curation stage: conditional over the candidates, then the batch.
    // Bucket-TD and target-success selectors pick the batch directly and have
    // no per-problem conditional (their records carry cond_p = 1).
    const bool direct_selector = !dormant && (kind == CuratorKind::sec || kind == CuratorKind::pcl);
    std::vector<double> cond(candidates.size(), 1.0 / static_cast<double>(candidates.size()));
    if (!dormant) {
      switch (kind) {
        case CuratorKind::uniform:
        case CuratorKind::sec:
        case CuratorKind::pcl:
          break;
        case CuratorKind::tabular_osmd:
          cond = conditional_distribution(tabular, candidates);
          break;
        case CuratorKind::approx_surrogate:
        case CuratorKind::approx_clipped:
        case CuratorKind::abs_adv: {
          std::vector<double> prior;
          if (config.sampling_prior) prior = gather(q_all, candidates);
          cond = induced_conditional(params, bank, candidates, config.sampling_prior ? &prior : nullptr);
          break;
        }
        case CuratorKind::regression:
          cond = regression_conditional(value, bank, candidates, config.curator.eta);
          break;
      }
    }

    std::vector<int> sel_pos;                       // positions into candidates, ascending
    std::vector<double> eff_p(candidates.size(), 1.0);  // selection-stage inclusion probability
    if (direct_selector) {
      std::vector<int> ids = kind == CuratorKind::sec
                                 ? sec_select(sec, bank, candidates, b, selection_rng)
                                 : pcl_select(value, bank, candidates, b, config.curator.pcl_target);
      sel_pos.reserve(ids.size());
      for (int id : ids) sel_pos.push_back(candidate_position(candidates, id));
    } else if (config.selection == SelectionMode::iid_draws) {
      std::vector<std::uint8_t> hit(candidates.size(), 0);
      for (int d = 0; d < b; ++d) hit[selection_rng.sample(cond)] = 1;
      for (std::size_t i = 0; i < hit.size(); ++i)
        if (hit[i]) sel_pos.push_back(static_cast<int>(i));
      for (std::size_t i = 0; i < candidates.size(); ++i)
        eff_p[i] = 1.0 - std::pow(1.0 - cond[i], static_cast<double>(b));
    } else {
      sel_pos = selection_rng.weighted_sample_without_replacement(cond, b);
      std::sort(sel_pos.begin(), sel_pos.end());
      // No closed form for joint inclusion under successive draws: estimate.
      const int reps = 512;
      std::vector<long> counts(candidates.size(), 0);
      for (int rep = 0; rep < reps; ++rep)
        for (int pos : inclusion_rng.weighted_sample_without_replacement(cond, b)) ++counts[pos];
      for (std::size_t i = 0; i < candidates.size(); ++i)
        eff_p[i] = std::max<double>(static_cast<double>(counts[i]), 1.0) / static_cast<double>(reps);
    }

    // Rollouts and actor update.
    std::vector<RolloutGroup> groups;
    groups.reserve(sel_pos.size());
    for (int pos : sel_pos) groups.push_back(rollout(policy, bank, gates, candidates[pos], n, rollout_rng));
    ActorUpdateResult ares = actor_update(policy, groups);

    GateState new_gates = compute_gates(ares.policy, bank);
    const double j_after = exact_performance(ares.policy, bank, new_gates);

    // Utility estimates and curator payloads.
    std::vector<double> a_hat(candidates.size(), 0.0);
    std::vector<double> u_hat(candidates.size(), 0.0);
    std::vector<double> payload(candidates.size(), 0.0);
    std::vector<std::uint8_t> sel_flag(candidates.size(), 0);
    for (std::size_t gi = 0; gi < sel_pos.size(); ++gi) {
      const int pos = sel_pos[gi];
      const int id = candidates[pos];
      sel_flag[pos] = 1;
      const double a = importance_advantage(groups[gi]);
      a_hat[pos] = a;
      u_hat[pos] = config.estimator == EstimatorMode::single_stage
                       ? estimate_single_stage(p_x[id], true, eff_p[pos], a)
                       : estimate_two_stage(p_x[id], true, q_all[id], eff_p[pos], a);
      // The absolute-advantage ablation feeds the raw heuristic signal; the
      // policy-improvement payload carries the eval-weight/proposal correction.
      payload[pos] = kind == CuratorKind::abs_adv ? abs_adv_utility(groups[gi])
                                                  : p_x[id] * a / q_all[id];
    }

    StepMetrics m;
    m.step = t;
    m.j_exact = j_curr;
    m.delta_j = j_after - j_curr;
    m.actor_grad_norm = ares.grad_norm;
    m.feedback.resize(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      UtilityFeedback& r = m.feedback[i];
      r.problem_id = candidates[i];
      r.selected = sel_flag[i] != 0;
      r.in_candidates = true;
      r.q = q_all[candidates[i]];
      r.cond_p = direct_selector ? 1.0 : cond[i];
      r.a_hat = a_hat[i];
      r.u_hat = u_hat[i];
      r.eval_weight = p_x[candidates[i]];
    }

    double sel_difficulty = 0.0;
    for (int pos : sel_pos) sel_difficulty += bank.problems[candidates[pos]].difficulty;
    m.mean_selected_difficulty = sel_difficulty / static_cast<double>(sel_pos.size());

    // Curator update.
    if (!dormant) {
      switch (kind) {
        case CuratorKind::uniform:
          break;
        case CuratorKind::tabular_osmd: {
          std::vector<std::pair<int, double>> sparse;
          double norm2 = 0.0;
          for (int pos : sel_pos) {
            sparse.push_back({candidates[pos], u_hat[pos]});
            m.curator_loss -= cond[pos] * u_hat[pos];
            norm2 += u_hat[pos] * u_hat[pos];
          }
          m.curator_grad_norm = std::sqrt(norm2);
          tabular = osmd_step(tabular, sparse, ramp);
          out.curator_overflow_clips = tabular.overflow_clips;
          break;
        }
        case CuratorKind::approx_surrogate:
        case CuratorKind::approx_clipped:
        case CuratorKind::abs_adv: {
          CuratorBatchFeedback cfb;
          cfb.candidate_ids = candidates;
          cfb.old_cond_p = cond;
          cfb.selected = sel_flag;
          cfb.g = payload;
          cfb.q = gather(q_all, candidates);
          if (config.curator.kl_global) {
            CuratorParams plain = params;
            plain.sampling_prior = false;
            cfb.old_global_p = induced_conditional(plain, bank, every_id, nullptr);
          }
          const CuratorLoss loss_kind =
              kind == CuratorKind::approx_surrogate ? CuratorLoss::surrogate : CuratorLoss::clipped;
          CuratorUpdateResult cres = curator_update(params, bank, cfb, loss_kind, ramp);
          params = std::move(cres.params);
          m.curator_loss = cres.final_loss;
          m.curator_grad_norm = cres.grad_norm;
          break;
        }
        case CuratorKind::sec: {
          for (std::size_t gi = 0; gi < sel_pos.size(); ++gi) {
            const int id = candidates[sel_pos[gi]];
            const double r = abs_adv_utility(groups[gi]);
            const double err = r - sec.q_values[bank.bucket_of[id]];
            m.curator_loss += err * err;
            sec = sec_update(std::move(sec), bank.bucket_of[id], r);
          }
          m.curator_loss /= static_cast<double>(sel_pos.size());
          break;
        }
        case CuratorKind::pcl:
        case CuratorKind::regression: {
          std::vector<int> ids;
          std::vector<double> observed;
          for (std::size_t gi = 0; gi < sel_pos.size(); ++gi) {
            const int pos = sel_pos[gi];
            ids.push_back(candidates[pos]);
            observed.push_back(kind == CuratorKind::pcl ? mean_reward(groups[gi]) : payload[pos]);
          }
          value = value_regress(std::move(value), bank, ids, observed);
          for (std::size_t i = 0; i < ids.size(); ++i) {
            const double err = value_predict(value, bank.problems[ids[i]]) - observed[i];
            m.curator_loss += err * err;
          }
          m.curator_loss /= static_cast<double>(ids.size());
          break;
        }
      }
    }

    double best_u = 0.0;
    double sel_u = 0.0;
    for (std::size_t i = 0; i < candidates.size(); ++i) best_u = std::max(best_u, u_hat[i]);
    for (int pos : sel_pos) sel_u += u_hat[pos];
    sel_u /= static_cast<double>(sel_pos.size());
    regret_accum += std::max(0.0, best_u - sel_u);
    m.curator_regret_proxy = regret_accum;

    if (writer) writer->write(to_json(m));
    out.metrics.push_back(std::move(m));

    policy = std::move(ares.policy);
    gates = std::move(new_gates);
    j_curr = j_after;
    out.peak_j = std::max(out.peak_j, j_curr);
  }

  out.final_policy = std::move(policy);
  out.final_j = j_curr;
  StreamHash h;
  for (const StepMetrics& m : out.metrics) hash_metrics(h, m);
  out.metrics_hash = h.value();
  if (writer) {
    writer->write(nlohmann::json{{"record", "run_summary"},
                                 {"initial_j", out.initial_j},
                                 {"final_j", out.final_j},
                                 {"peak_j", out.peak_j},
                                 {"metrics_hash", out.metrics_hash},
                                 {"curator_overflow_clips", out.curator_overflow_clips}});
    writer->flush();
  }
  return out;
}

long steps_to_target(const RunResult& result, double target) {
  if (result.initial_j >= target) return 0;
  for (const StepMetrics& m : result.metrics)
    if (m.j_exact + m.delta_j >= target) return m.step + 1;
  return -1;
}

nlohmann::json run_bandit(const BanditConfig& config) {
  const RegretLedger ledger = run_sleeping_osmd(config);
  const RegretSummary s = regret_report(ledger);
  nlohmann::json checkpoints = nlohmann::json::array();
  for (const auto& [t, reg] : s.checkpoints) checkpoints.push_back({t, reg});
  return nlohmann::json{
      {"record", "bandit_summary"},
      {"config", to_json(config)},
      {"drift_total", s.drift_total},
      {"best_arm_regret", s.best_arm_regret},
      {"best_available_regret", s.best_available_regret},
      {"checkpoints", checkpoints},
      {"loglog_slope", s.loglog_slope},
  };
}

SweepTable run_sweep(const nlohmann::json& base_config, const SweepGrid& grid, int jobs) {
  for (const auto& [key, values] : grid.axes)
    if (values.empty()) throw ConfigError("sweep axis '" + key + "' has no values");

  struct Task {
    RunConfig config;
    std::uint64_t seed = 0;
    std::vector<std::string> cell;  // axis value strings
  };
  std::vector<Task> tasks;

  std::vector<std::size_t> index(grid.axes.size(), 0);
  for (;;) {
    nlohmann::json cfg = base_config;
    std::vector<std::string> cell;
    for (std::size_t a = 0; a < grid.axes.size(); ++a) {
      const nlohmann::json& v = grid.axes[a].second[index[a]];
      apply_override(cfg, grid.axes[a].first + "=" + v.dump());
      cell.push_back(v.is_string() ? v.get<std::string>() : v.dump());
    }
    const RunConfig rc = run_config_from_json(cfg);
    for (std::uint64_t seed : rc.seeds) tasks.push_back({rc, seed, cell});

    // Advance the mixed-radix counter, last axis fastest; stop on full wrap.
    if (grid.axes.empty()) break;
    bool wrapped = true;
    for (std::size_t a = grid.axes.size(); a-- > 0;) {
      if (++index[a] < grid.axes[a].second.size()) {
        wrapped = false;
        break;
      }
      index[a] = 0;
    }
    if (wrapped) break;
  }

  SweepTable table;
  for (const auto& [key, values] : grid.axes) table.header.push_back(key);
  table.header.insert(table.header.end(), {"seed", "initial_j", "final_j", "peak_j", "metrics_hash"});
  table.rows.resize(tasks.size());

  std::atomic<std::size_t> cursor{0};
  auto work = [&] {
    for (;;) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= tasks.size()) return;
      const Task& task = tasks[i];
      const RunResult r = run_curriculum(task.config, task.seed);
      std::vector<std::string> row = task.cell;
      row.push_back(std::to_string(task.seed));
      row.push_back(format_double(r.initial_j));
      row.push_back(format_double(r.final_j));
      row.push_back(format_double(r.peak_j));
      row.push_back(std::to_string(r.metrics_hash));
      table.rows[i] = std::move(row);
    }
  };
  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(tasks.size())));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  return table;
}

}  // namespace cursim
