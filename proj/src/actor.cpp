#include "cursim/actor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace cursim {

std::string to_string(UpdateRule r) {
  switch (r) {
    case UpdateRule::reinforce_mean_baseline: return "reinforce_mean_baseline";
    case UpdateRule::grpo_std_normalized: return "grpo_std_normalized";
    case UpdateRule::gspo_sequence: return "gspo_sequence";
  }
  throw std::logic_error("unreachable update rule");
}

UpdateRule update_rule_from_string(const std::string& s) {
  if (s == "reinforce_mean_baseline") return UpdateRule::reinforce_mean_baseline;
  if (s == "grpo_std_normalized") return UpdateRule::grpo_std_normalized;
  if (s == "gspo_sequence") return UpdateRule::gspo_sequence;
  throw std::invalid_argument("unknown update rule: " + s);
}

TabularPolicy TabularPolicy::uniform(int n_problems, int n_answers) {
  if (n_problems < 1 || n_answers < 2) throw std::invalid_argument("policy needs >= 1 problem and >= 2 answers");
  TabularPolicy p;
  p.n_problems = n_problems;
  p.n_answers = n_answers;
  p.logits.assign(static_cast<std::size_t>(n_problems) * n_answers, 0.0);
  return p;
}

void TabularPolicy::validate() const {
  if (n_problems < 1 || n_answers < 2) throw std::invalid_argument("policy needs >= 1 problem and >= 2 answers");
  if (logits.size() != static_cast<std::size_t>(n_problems) * n_answers)
    throw std::invalid_argument("logits size does not match policy shape");
  for (double z : logits) {
    if (!std::isfinite(z)) throw std::invalid_argument("policy logits must be finite");
  }
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (clip_range) {
    const auto [lo, hi] = *clip_range;
    if (!(lo < 1.0 && 1.0 < hi)) throw std::invalid_argument("clip_range must straddle 1");
    if (!(lo > 0.0)) throw std::invalid_argument("clip_range low end must be positive");
  }
}

namespace {

void check_problem_index(const TabularPolicy& policy, int problem) {
  if (problem < 0 || problem >= policy.n_problems) throw std::out_of_range("problem index out of range");
}

double row_logsumexp(const double* z, int n) {
  double m = z[0];
  for (int i = 1; i < n; ++i) m = std::max(m, z[i]);
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += std::exp(z[i] - m);
  return m + std::log(s);
}

}  // namespace

std::vector<double> TabularPolicy::answer_probs(int problem) const {
  check_problem_index(*this, problem);
  const double* z = row(problem);
  const double lse = row_logsumexp(z, n_answers);
  std::vector<double> p(n_answers);
  for (int i = 0; i < n_answers; ++i) p[i] = std::exp(z[i] - lse);
  return p;
}

double TabularPolicy::log_prob(int problem, int answer) const {
  check_problem_index(*this, problem);
  if (answer < 0 || answer >= n_answers) throw std::out_of_range("answer index out of range");
  const double* z = row(problem);
  return z[answer] - row_logsumexp(z, n_answers);
}

GateState compute_gates(const TabularPolicy& policy, const ProblemBank& bank) {
  if (policy.n_problems != bank.size() || policy.n_answers != bank.answer_count())
    throw std::invalid_argument("policy shape does not match bank");
  GateState gates;
  const int buckets = static_cast<int>(bank.bucket_members.size());
  gates.open.assign(buckets, 1);
  if (bank.spec.structure != BankStructure::prerequisite) return gates;

  std::vector<double> mean_success(buckets, 1.0);
  for (int b = 0; b < buckets; ++b) {
    const auto& members = bank.bucket_members[b];
    if (members.empty()) continue;  // empty bucket cannot block anything
    double s = 0.0;
    for (int id : members) s += policy.answer_probs(id)[bank.problems[id].correct_answer];
    mean_success[b] = s / members.size();
  }
  for (int b = 0; b < buckets; ++b) {
    bool open = true;
    for (int pre : bank.bucket_prereqs[b]) {
      if (!(mean_success[pre] > bank.spec.gate_threshold)) {
        open = false;
        break;
      }
    }
    gates.open[b] = open ? 1 : 0;
    if (!open) gates.all_open = false;
  }
  return gates;
}

bool gate_open(const GateState& gates, const ProblemBank& bank, int problem_id) {
  if (problem_id < 0 || problem_id >= bank.size()) throw std::out_of_range("problem id out of range");
  if (gates.all_open) return true;
  const int b = bank.bucket_of[problem_id];
  if (b < 0 || b >= static_cast<int>(gates.open.size())) throw std::out_of_range("bucket out of range for gates");
  return gates.open[b] != 0;
}

RolloutGroup rollout(const TabularPolicy& policy, const ProblemBank& bank, const GateState& gates,
                     int problem_id, int group_size, Rng& rng) {
  if (group_size < 1) throw std::invalid_argument("group_size must be >= 1");
  if (problem_id < 0 || problem_id >= bank.size()) throw std::out_of_range("problem id out of range");
  const bool open = gate_open(gates, bank, problem_id);
  const int correct = bank.problems[problem_id].correct_answer;
  const std::vector<double> probs = policy.answer_probs(problem_id);

  RolloutGroup g;
  g.problem_id = problem_id;
  g.answers.reserve(group_size);
  g.rewards.reserve(group_size);
  g.logprob_old.reserve(group_size);
  g.lengths.assign(group_size, 1);
  for (int i = 0; i < group_size; ++i) {
    const int y = rng.sample(probs);
    g.answers.push_back(y);
    g.rewards.push_back(open && y == correct ? 1.0 : 0.0);
    g.logprob_old.push_back(policy.log_prob(problem_id, y));
  }
  return g;
}

std::vector<double> group_advantage(const RolloutGroup& group, UpdateRule rule) {
  const std::size_t n = group.rewards.size();
  if (n == 0) throw std::invalid_argument("group_advantage: empty group");
  double mean = 0.0;
  for (double r : group.rewards) mean += r;
  mean /= static_cast<double>(n);

  std::vector<double> adv(n);
  for (std::size_t i = 0; i < n; ++i) adv[i] = group.rewards[i] - mean;

  if (rule == UpdateRule::grpo_std_normalized || rule == UpdateRule::gspo_sequence) {
    double var = 0.0;
    for (double a : adv) var += a * a;
    var /= static_cast<double>(n);  // population variance
    const double sd = std::sqrt(var);
    if (sd == 0.0) {
      std::fill(adv.begin(), adv.end(), 0.0);  // all-equal group
    } else {
      for (double& a : adv) a /= sd;
    }
  }
  return adv;
}

std::vector<double> sequence_ratio(const RolloutGroup& group) {
  if (group.logprob_new.size() != group.logprob_old.size() || group.logprob_new.empty())
    throw std::logic_error("sequence_ratio: logprob_new not populated");
  if (group.lengths.size() != group.logprob_old.size())
    throw std::logic_error("sequence_ratio: lengths not populated");
  std::vector<double> s(group.logprob_old.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    const int len = group.lengths[i];
    if (len < 1) throw std::invalid_argument("sequence length must be >= 1");
    s[i] = std::exp((group.logprob_new[i] - group.logprob_old[i]) / len);
  }
  return s;
}

ActorUpdateResult actor_update(const TabularPolicy& policy, std::vector<RolloutGroup>& dataset) {
  policy.validate();
  std::vector<double> grad(policy.logits.size(), 0.0);

  for (const RolloutGroup& g : dataset) {
    check_problem_index(policy, g.problem_id);
    const std::size_t n = g.answers.size();
    if (n == 0 || g.rewards.size() != n || g.logprob_old.size() != n)
      throw std::invalid_argument("actor_update: malformed rollout group");

    const std::vector<double> adv = group_advantage(g, policy.update_rule);
    const std::vector<double> probs = policy.answer_probs(g.problem_id);
    double* grow = grad.data() + static_cast<std::size_t>(g.problem_id) * policy.n_answers;

    for (std::size_t i = 0; i < n; ++i) {
      const int y = g.answers[i];
      if (y < 0 || y >= policy.n_answers) throw std::out_of_range("answer index out of range in group");
      const double a = adv[i];
      if (a == 0.0) continue;

      const int len = std::max(1, i < g.lengths.size() ? g.lengths[i] : 1);
      const double log_ratio = policy.log_prob(g.problem_id, y) - g.logprob_old[i];
      // GSPO uses the length-normalized sequence ratio; the others use the
      // plain ratio. With on-policy data both are 1 and the branches agree.
      const bool normalize = policy.update_rule == UpdateRule::gspo_sequence;
      const double ratio = std::exp(normalize ? log_ratio / len : log_ratio);

      double coeff = ratio;  // d(surrogate_i)/d(log pi(y)) modulo advantage
      if (normalize) coeff = ratio / len;
      if (policy.clip_range) {
        const auto [lo, hi] = *policy.clip_range;
        // min(ratio*A, clip(ratio)*A): a saturated clip branch contributes no
        // gradient. Ties resolve to the unclipped branch.
        const bool saturated = (a > 0.0 && ratio > hi) || (a < 0.0 && ratio < lo);
        if (saturated) continue;
      }
      const double scale = a * coeff / static_cast<double>(n);  // per-group mean
      for (int k = 0; k < policy.n_answers; ++k) {
        grow[k] += scale * ((k == y ? 1.0 : 0.0) - probs[k]);
      }
    }
  }

  double norm2 = 0.0;
  for (double gv : grad) {
    if (!std::isfinite(gv)) {
      std::ostringstream msg;
      msg << "actor_update produced a non-finite gradient (lr=" << policy.learning_rate
          << ", groups=" << dataset.size() << ")";
      throw std::runtime_error(msg.str());
    }
    norm2 += gv * gv;
  }

  ActorUpdateResult result;
  result.policy = policy;
  for (std::size_t i = 0; i < grad.size(); ++i) result.policy.logits[i] += policy.learning_rate * grad[i];
  result.policy.step = policy.step + 1;
  result.grad_norm = std::sqrt(norm2);

  for (RolloutGroup& g : dataset) {
    g.logprob_new.resize(g.answers.size());
    for (std::size_t i = 0; i < g.answers.size(); ++i)
      g.logprob_new[i] = result.policy.log_prob(g.problem_id, g.answers[i]);
  }
  return result;
}

double exact_success(const TabularPolicy& policy, const ProblemBank& bank, const GateState& gates, int problem_id) {
  if (problem_id < 0 || problem_id >= bank.size()) throw std::out_of_range("problem id out of range");
  if (!gate_open(gates, bank, problem_id)) return 0.0;
  return policy.answer_probs(problem_id)[bank.problems[problem_id].correct_answer];
}

double exact_performance(const TabularPolicy& policy, const ProblemBank& bank, const GateState& gates) {
  if (policy.n_problems != bank.size() || policy.n_answers != bank.answer_count())
    throw std::invalid_argument("policy shape does not match bank");
  const std::vector<double> px = eval_distribution(bank);
  double j = 0.0;
  for (int x = 0; x < bank.size(); ++x) j += px[x] * exact_success(policy, bank, gates, x);
  return j;
}

double exact_performance(const TabularPolicy& policy, const ProblemBank& bank) {
  return exact_performance(policy, bank, compute_gates(policy, bank));
}

std::vector<double> exact_reward_gradient(const TabularPolicy& policy, const ProblemBank& bank,
                                          const GateState& gates, int problem_id) {
  // E[R] = pi(correct) when the gate is open, else 0; softmax gradient
  // d pi(a)/d z_k = pi(a) * (1{k=a} - pi(k)).
  std::vector<double> grad(policy.n_answers, 0.0);
  if (!gate_open(gates, bank, problem_id)) return grad;
  const int a = bank.problems[problem_id].correct_answer;
  const std::vector<double> p = policy.answer_probs(problem_id);
  for (int k = 0; k < policy.n_answers; ++k) grad[k] = p[a] * ((k == a ? 1.0 : 0.0) - p[k]);
  return grad;
}

TabularPolicy expected_single_problem_step(const TabularPolicy& policy, const ProblemBank& bank,
                                           const GateState& gates, int problem_id) {
  TabularPolicy next = policy;
  const std::vector<double> grad = exact_reward_gradient(policy, bank, gates, problem_id);
  double* z = next.row(problem_id);
  for (int k = 0; k < policy.n_answers; ++k) z[k] += policy.learning_rate * grad[k];
  next.step = policy.step + 1;
  return next;
}

void save_policy(const TabularPolicy& policy, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  nlohmann::json header{
      {"record", "policy_header"},
      {"n_problems", policy.n_problems},
      {"n_answers", policy.n_answers},
      {"learning_rate", policy.learning_rate},
      {"update_rule", to_string(policy.update_rule)},
      {"step", policy.step},
  };
  if (policy.clip_range) header["clip_range"] = {policy.clip_range->first, policy.clip_range->second};
  out << header.dump() << '\n';
  for (int x = 0; x < policy.n_problems; ++x) {
    nlohmann::json rec{{"id", x}, {"logits", std::vector<double>(policy.row(x), policy.row(x) + policy.n_answers)}};
    out << rec.dump() << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

TabularPolicy load_policy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty policy file: " + path);
  nlohmann::json header = nlohmann::json::parse(line);
  if (header.value("record", "") != "policy_header") throw std::runtime_error("missing policy_header record: " + path);

  TabularPolicy p = TabularPolicy::uniform(header.at("n_problems").get<int>(), header.at("n_answers").get<int>());
  p.learning_rate = header.at("learning_rate").get<double>();
  p.update_rule = update_rule_from_string(header.at("update_rule").get<std::string>());
  p.step = header.at("step").get<long>();
  if (header.contains("clip_range")) {
    p.clip_range = std::make_pair(header["clip_range"][0].get<double>(), header["clip_range"][1].get<double>());
  }
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json rec = nlohmann::json::parse(line);
    const int id = rec.at("id").get<int>();
    if (id < 0 || id >= p.n_problems) throw std::runtime_error("policy row id out of range in " + path);
    const auto row = rec.at("logits").get<std::vector<double>>();
    if (static_cast<int>(row.size()) != p.n_answers) throw std::runtime_error("policy row width mismatch in " + path);
    std::copy(row.begin(), row.end(), p.row(id));
    ++rows;
  }
  if (rows != p.n_problems) throw std::runtime_error("policy file row count mismatch in " + path);
  return p;
}

}  // namespace cursim
