#include "cursim/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cursim {

std::vector<int> uniform_select(const ProblemBank& bank, int batch, Rng& rng) {
  if (batch < 1 || batch > bank.size())
    throw std::invalid_argument("uniform_select: batch must lie in [1, bank size]");
  return rng.sample_without_replacement(bank.size(), batch);
}

SecState SecState::init(int buckets, double td_rate, double temperature) {
  if (buckets < 1) throw std::invalid_argument("SecState: need at least one bucket");
  if (!(td_rate > 0.0 && td_rate <= 1.0)) throw std::invalid_argument("SecState: td_rate must lie in (0, 1]");
  if (!(temperature > 0.0)) throw std::invalid_argument("SecState: temperature must be positive");
  SecState s;
  s.q_values.assign(buckets, 0.0);
  s.td_rate = td_rate;
  s.temperature = temperature;
  return s;
}

SecState sec_update(SecState state, int bucket, double reward) {
  if (bucket < 0 || bucket >= static_cast<int>(state.q_values.size()))
    throw std::out_of_range("sec_update: bucket out of range");
  if (!std::isfinite(reward)) throw std::invalid_argument("sec_update: reward must be finite");
  state.q_values[bucket] = state.td_rate * reward + (1.0 - state.td_rate) * state.q_values[bucket];
  return state;
}

std::vector<int> sec_select(const SecState& state, const ProblemBank& bank, const std::vector<int>& candidates,
                            int batch, Rng& rng) {
  if (batch < 1 || batch > static_cast<int>(candidates.size()))
    throw std::invalid_argument("sec_select: batch must lie in [1, candidate count]");
  if (state.q_values.size() != bank.bucket_members.size())
    throw std::invalid_argument("sec_select: bucket count mismatch");

  std::vector<std::vector<int>> members(state.q_values.size());
  for (int id : candidates) {
    if (id < 0 || id >= bank.size()) throw std::out_of_range("sec_select: candidate id out of range");
    members[bank.bucket_of[id]].push_back(id);
  }
  std::vector<double> bucket_weights(state.q_values.size(), 0.0);
  double qmax = -1e300;
  for (std::size_t b = 0; b < members.size(); ++b)
    if (!members[b].empty()) qmax = std::max(qmax, state.q_values[b]);
  for (std::size_t b = 0; b < members.size(); ++b)
    if (!members[b].empty()) bucket_weights[b] = std::exp((state.q_values[b] - qmax) / state.temperature);

  std::vector<std::uint8_t> taken(bank.size(), 0);
  std::vector<int> out;
  out.reserve(batch);
  while (static_cast<int>(out.size()) < batch) {
    const int b = rng.sample(bucket_weights);
    const int id = members[b][rng.uniform_int(static_cast<int>(members[b].size()))];
    if (taken[id]) continue;
    taken[id] = 1;
    out.push_back(id);
  }
  std::sort(out.begin(), out.end());
  return out;
}

ValueModel ValueModel::zero(int feature_dim) {
  if (feature_dim < 1) throw std::invalid_argument("ValueModel: feature_dim must be >= 1");
  ValueModel m;
  m.theta.assign(feature_dim + 1, 0.0);
  return m;
}

double value_predict(const ValueModel& model, const Problem& problem) {
  if (model.theta.size() != problem.features.size() + 1)
    throw std::invalid_argument("value model width must be feature_dim + 1");
  double v = model.theta.back();
  for (std::size_t d = 0; d < problem.features.size(); ++d) v += model.theta[d] * problem.features[d];
  return v;
}

std::vector<int> pcl_select(const ValueModel& model, const ProblemBank& bank, const std::vector<int>& candidates,
                            int m, double target) {
  if (m < 1 || m > static_cast<int>(candidates.size()))
    throw std::invalid_argument("pcl_select: m must lie in [1, candidate count]");
  if (!(target >= 0.0 && target <= 1.0)) throw std::invalid_argument("pcl_select: target must lie in [0, 1]");
  std::vector<std::pair<double, int>> ranked;
  ranked.reserve(candidates.size());
  for (int id : candidates) {
    if (id < 0 || id >= bank.size()) throw std::out_of_range("pcl_select: candidate id out of range");
    const double pred = std::clamp(value_predict(model, bank.problems[id]), 0.0, 1.0);
    ranked.push_back({std::abs(pred - target), id});
  }
  std::sort(ranked.begin(), ranked.end());  // distance, then lower id
  std::vector<int> out(m);
  for (int i = 0; i < m; ++i) out[i] = ranked[i].second;
  std::sort(out.begin(), out.end());
  return out;
}

ValueModel value_regress(ValueModel model, const ProblemBank& bank, const std::vector<int>& ids,
                         const std::vector<double>& observed) {
  if (ids.size() != observed.size() || ids.empty())
    throw std::invalid_argument("value_regress: ids and observations must align and be nonempty");
  if (!(model.lr > 0.0) || model.epochs < 1) throw std::invalid_argument("value_regress: bad lr or epochs");
  for (int e = 0; e < model.epochs; ++e) {
    std::vector<double> grad(model.theta.size(), 0.0);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const int id = ids[i];
      if (id < 0 || id >= bank.size()) throw std::out_of_range("value_regress: id out of range");
      const Problem& pr = bank.problems[id];
      const double err = value_predict(model, pr) - observed[i];
      for (std::size_t d = 0; d < pr.features.size(); ++d) grad[d] += 2.0 * err * pr.features[d];
      grad.back() += 2.0 * err;
    }
    for (std::size_t d = 0; d < grad.size(); ++d) {
      if (!std::isfinite(grad[d])) throw std::runtime_error("value_regress produced a non-finite gradient");
      model.theta[d] -= model.lr * grad[d];
    }
  }
  return model;
}

double abs_adv_utility(const RolloutGroup& group) {
  const std::vector<double> adv = group_advantage(group, UpdateRule::grpo_std_normalized);
  double s = 0.0;
  for (double a : adv) s += std::abs(a);
  return s / static_cast<double>(adv.size());
}

std::vector<double> regression_conditional(const ValueModel& model, const ProblemBank& bank,
                                           const std::vector<int>& candidates, double temperature) {
  if (candidates.empty()) throw std::invalid_argument("regression_conditional: empty candidate set");
  if (!(temperature > 0.0)) throw std::invalid_argument("regression_conditional: temperature must be positive");
  std::vector<double> w(candidates.size());
  double vmax = -1e300;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const int id = candidates[i];
    if (id < 0 || id >= bank.size()) throw std::out_of_range("regression_conditional: id out of range");
    w[i] = value_predict(model, bank.problems[id]) / temperature;
    vmax = std::max(vmax, w[i]);
  }
  double total = 0.0;
  for (double& v : w) {
    v = std::exp(v - vmax);
    total += v;
  }
  for (double& v : w) v /= total;
  return w;
}

}  // namespace cursim
