#include "cursim/sleeping_bandit.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cursim/tabular_curator.hpp"

namespace cursim {

std::string to_string(LossModel m) {
  switch (m) {
    case LossModel::piecewise_constant: return "piecewise_constant";
    case LossModel::bounded_random_walk: return "bounded_random_walk";
    case LossModel::abrupt_switch: return "abrupt_switch";
  }
  throw std::logic_error("unreachable loss model");
}

LossModel loss_model_from_string(const std::string& s) {
  if (s == "piecewise_constant") return LossModel::piecewise_constant;
  if (s == "bounded_random_walk") return LossModel::bounded_random_walk;
  if (s == "abrupt_switch") return LossModel::abrupt_switch;
  throw std::invalid_argument("unknown loss model: " + s);
}

void BanditConfig::validate() const {
  if (total_arms < 1) throw std::invalid_argument("total_arms must be >= 1");
  if (available_arms < 1 || available_arms > total_arms)
    throw std::invalid_argument("available_arms must lie in [1, total_arms]");
  if (pulls_per_round < 1) throw std::invalid_argument("pulls_per_round must be >= 1");
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  if (!(eta >= 0.0)) throw std::invalid_argument("eta must be nonnegative");
  if (alpha < 0.0 || alpha * available_arms >= 1.0)
    throw std::invalid_argument("alpha must satisfy 0 <= alpha < 1/available_arms");
  if (restart_block_length && *restart_block_length < 1)
    throw std::invalid_argument("restart_block_length must be >= 1");
  if (num_switches < 0) throw std::invalid_argument("num_switches must be >= 0");
  if (!(walk_step >= 0.0)) throw std::invalid_argument("walk_step must be nonnegative");
}

std::vector<std::vector<double>> generate_loss_table(const BanditConfig& config) {
  config.validate();
  Rng rng = Rng::substream(config.seed, 0x105eULL);
  const long T = config.horizon;
  const int K = config.total_arms;
  std::vector<std::vector<double>> table(T, std::vector<double>(K, 0.0));

  switch (config.loss_model) {
    case LossModel::piecewise_constant: {
      const int segments = config.num_switches + 1;
      const long seg_len = std::max<long>(1, (T + segments - 1) / segments);
      std::vector<double> level(K, 0.0);
      for (long t = 0; t < T; ++t) {
        if (t % seg_len == 0) {
          for (int i = 0; i < K; ++i) level[i] = rng.uniform01();
        }
        table[t] = level;
      }
      break;
    }
    case LossModel::bounded_random_walk: {
      std::vector<double> level(K);
      for (int i = 0; i < K; ++i) level[i] = rng.uniform01();
      for (long t = 0; t < T; ++t) {
        if (t > 0) {
          for (int i = 0; i < K; ++i) {
            const double step = config.walk_step * (2.0 * rng.uniform01() - 1.0);
            level[i] = std::clamp(level[i] + step, 0.0, 1.0);
          }
        }
        table[t] = level;
      }
      break;
    }
    case LossModel::abrupt_switch: {
      // Each phase has one good arm (loss 0.1) and the rest bad (loss 0.9);
      // the good arm's identity jumps at each switch.
      const int phases = config.num_switches + 1;
      const long phase_len = std::max<long>(1, (T + phases - 1) / phases);
      for (long t = 0; t < T; ++t) {
        const long phase = std::min<long>(t / phase_len, phases - 1);
        const int good = static_cast<int>((phase * 7) % K);
        for (int i = 0; i < K; ++i) table[t][i] = i == good ? 0.1 : 0.9;
      }
      break;
    }
  }
  return table;
}

std::vector<double> loss_estimator(const std::vector<double>& cond_p, const std::vector<int>& pulls,
                                   const std::vector<double>& losses, int s) {
  if (cond_p.size() != losses.size()) throw std::invalid_argument("loss_estimator: size mismatch");
  if (s < 1 || static_cast<int>(pulls.size()) != s)
    throw std::invalid_argument("loss_estimator: pulls must hold exactly s entries");
  std::vector<double> lhat(cond_p.size(), 0.0);
  for (int a : pulls) {
    if (a < 0 || a >= static_cast<int>(cond_p.size())) throw std::out_of_range("pulled arm out of range");
    if (!(cond_p[a] > 0.0)) throw std::logic_error("pulled arm has zero conditional probability");
    lhat[a] += losses[a] / cond_p[a];
  }
  for (double& v : lhat) v /= static_cast<double>(s);
  return lhat;
}

std::pair<double, double> second_moment(const std::vector<double>& cond_p,
                                        const std::vector<std::vector<double>>& lhat_samples) {
  if (lhat_samples.empty()) throw std::invalid_argument("second_moment: no samples");
  double mean = 0.0, m2 = 0.0;
  long n = 0;
  for (const auto& lhat : lhat_samples) {
    if (lhat.size() != cond_p.size()) throw std::invalid_argument("second_moment: sample size mismatch");
    double v = 0.0;
    for (std::size_t j = 0; j < cond_p.size(); ++j) v += cond_p[j] * lhat[j] * lhat[j];
    ++n;
    const double d = v - mean;
    mean += d / n;
    m2 += d * (v - mean);
  }
  const double se = n > 1 ? std::sqrt(m2 / (n - 1) / n) : 0.0;
  return {mean, se};
}

std::pair<double, std::vector<double>> drift(const std::vector<std::vector<double>>& loss_table) {
  std::vector<double> steps;
  double total = 0.0;
  for (std::size_t t = 1; t < loss_table.size(); ++t) {
    if (loss_table[t].size() != loss_table[t - 1].size()) throw std::invalid_argument("drift: ragged loss table");
    double d = 0.0;
    for (std::size_t i = 0; i < loss_table[t].size(); ++i)
      d = std::max(d, std::abs(loss_table[t][i] - loss_table[t - 1][i]));
    steps.push_back(d);
    total += d;
  }
  return {total, steps};
}

double tuned_block_length(long horizon, double drift_total, int pulls, int available, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("tuned_block_length: alpha must lie in (0, 1)");
  if (!(drift_total > 0.0)) throw std::invalid_argument("tuned_block_length: drift must be positive");
  const double inner = static_cast<double>(horizon) / drift_total *
                       std::sqrt(pulls * available * std::log(1.0 / alpha) / 2.0);
  return std::pow(inner, 2.0 / 3.0);
}

double tuned_eta(long horizon, double drift_total, int pulls, int available, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("tuned_eta: alpha must lie in (0, 1)");
  if (!(drift_total > 0.0)) throw std::invalid_argument("tuned_eta: drift must be positive");
  return std::pow(2.0, 2.0 / 3.0) * std::pow(std::log(1.0 / alpha), 1.0 / 3.0) *
         std::pow(static_cast<double>(pulls * available), -2.0 / 3.0) *
         std::pow(drift_total / static_cast<double>(horizon), 1.0 / 3.0);
}

double RegretLedger::best_arm_regret() const {
  double r = 0.0;
  for (std::size_t t = 0; t < step_alg_loss.size(); ++t) r += step_alg_loss[t] - step_best_arm_loss[t];
  return r;
}

double RegretLedger::best_available_regret() const {
  double r = 0.0;
  for (std::size_t t = 0; t < step_alg_loss.size(); ++t) r += step_alg_loss[t] - step_best_avail_loss[t];
  return r;
}

std::vector<std::pair<long, double>> RegretLedger::checkpoints(int count) const {
  const long T = static_cast<long>(step_alg_loss.size());
  if (T == 0 || count < 1) return {};
  std::vector<long> marks;
  for (int i = count - 1; i >= 0; --i) {
    const long m = static_cast<long>(std::llround(T / std::pow(2.0, i)));
    if (m >= 1 && (marks.empty() || m > marks.back())) marks.push_back(m);
  }
  std::vector<std::pair<long, double>> out;
  double cum = 0.0;
  std::size_t next = 0;
  for (long t = 0; t < T && next < marks.size(); ++t) {
    cum += step_alg_loss[t] - step_best_avail_loss[t];
    if (t + 1 == marks[next]) {
      out.push_back({t + 1, cum});
      ++next;
    }
  }
  return out;
}

RegretLedger run_sleeping_osmd(const BanditConfig& config) {
  return run_sleeping_osmd(config, generate_loss_table(config));
}

RegretLedger run_sleeping_osmd(const BanditConfig& config, const std::vector<std::vector<double>>& loss_table) {
  config.validate();
  if (static_cast<long>(loss_table.size()) != config.horizon)
    throw std::invalid_argument("loss table length must equal the horizon");
  const int K = config.total_arms;
  const int k = config.available_arms;
  const int s = config.pulls_per_round;

  Rng avail_rng = Rng::substream(config.seed, 0xa7a1ULL);
  Rng pull_rng = Rng::substream(config.seed, 0x9011ULL);

  RegretLedger ledger;
  ledger.config = config;
  ledger.step_alg_loss.reserve(config.horizon);
  ledger.step_best_arm_loss.reserve(config.horizon);
  ledger.step_best_avail_loss.reserve(config.horizon);
  ledger.pulls.reserve(config.horizon);
  ledger.second_moment_steps.reserve(config.horizon);

  std::vector<double> p(K, 1.0 / K);
  if (config.alpha > 0.0) p = floor_project(p, config.alpha);

  for (long t = 0; t < config.horizon; ++t) {
    if (config.restart_block_length && t > 0 && t % *config.restart_block_length == 0) {
      std::fill(p.begin(), p.end(), 1.0 / K);
      ledger.restart_steps.push_back(t);
    }
    const std::vector<double>& l = loss_table[t];
    if (static_cast<int>(l.size()) != K) throw std::invalid_argument("loss row width must equal total_arms");

    const std::vector<int> avail = avail_rng.sample_without_replacement(K, k);

    // Conditional distribution on the availability set (plain restriction).
    double z = 0.0;
    for (int i : avail) z += p[i];
    std::vector<double> cond(K, 0.0);
    for (int i : avail) cond[i] = p[i] / z;

    // Comparators, exact from the loss table. Ties go to the lowest index.
    int best = avail.front();
    for (int i : avail)
      if (l[i] < l[best]) best = i;
    double avg_cond_loss = 0.0;
    for (int i : avail) avg_cond_loss += cond[i] * l[i];
    double floored_comparator = (1.0 - k * config.alpha) * l[best];
    for (int i : avail) floored_comparator += config.alpha * l[i];

    ledger.step_alg_loss.push_back(s * avg_cond_loss);
    ledger.step_best_arm_loss.push_back(s * l[best]);
    ledger.step_best_avail_loss.push_back(s * floored_comparator);

    // Pulls and the importance-weighted loss estimate.
    std::vector<double> cond_avail(avail.size());
    for (std::size_t i = 0; i < avail.size(); ++i) cond_avail[i] = cond[avail[i]];
    std::vector<int> pulls(s);
    for (int r = 0; r < s; ++r) pulls[r] = avail[pull_rng.sample(cond_avail)];
    ledger.pulls.push_back(pulls);

    const std::vector<double> lhat = loss_estimator(cond, pulls, l, s);
    double sm = 0.0;
    for (int i : avail) sm += cond[i] * lhat[i] * lhat[i];
    ledger.second_moment_steps.push_back(sm);

    // Mirror step in the loss direction, then the floored projection.
    p = exponentiated_step(p, lhat, -config.eta, config.alpha, 30.0, nullptr);
  }

  auto [total, steps] = drift(loss_table);
  ledger.drift_total = total;
  ledger.drift_steps = std::move(steps);
  return ledger;
}

RegretSummary regret_report(const RegretLedger& ledger) {
  RegretSummary s;
  s.drift_total = ledger.drift_total;
  s.best_arm_regret = ledger.best_arm_regret();
  s.best_available_regret = ledger.best_available_regret();
  s.checkpoints = ledger.checkpoints();

  // Least-squares slope of log regret vs log t over checkpoints with
  // positive regret.
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int n = 0;
  for (const auto& [t, reg] : s.checkpoints) {
    if (reg <= 0.0) continue;
    const double x = std::log(static_cast<double>(t));
    const double y = std::log(reg);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  s.loglog_slope = n >= 2 ? (n * sxy - sx * sy) / (n * sxx - sx * sx) : 0.0;
  return s;
}

}  // namespace cursim
