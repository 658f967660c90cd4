#include "cursim/approx_curator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace cursim {

std::string to_string(CuratorLoss l) {
  switch (l) {
    case CuratorLoss::surrogate: return "surrogate";
    case CuratorLoss::clipped: return "clipped";
  }
  throw std::logic_error("unreachable curator loss");
}

CuratorLoss curator_loss_from_string(const std::string& s) {
  if (s == "surrogate") return CuratorLoss::surrogate;
  if (s == "clipped") return CuratorLoss::clipped;
  throw std::invalid_argument("unknown curator loss: " + s);
}

CuratorParams CuratorParams::zero(int feature_dim) {
  if (feature_dim < 1) throw std::invalid_argument("feature_dim must be >= 1");
  CuratorParams p;
  p.theta.assign(feature_dim + 1, 0.0);
  return p;
}

void CuratorParams::validate() const {
  if (theta.empty()) throw std::invalid_argument("curator theta is empty");
  for (double t : theta)
    if (!std::isfinite(t)) throw std::invalid_argument("curator theta must be finite");
  if (!(eta > 0.0)) throw std::invalid_argument("curator eta must be positive");
  if (!(clip_low > 0.0 && clip_low < 1.0 && clip_high > 1.0))
    throw std::invalid_argument("clip range must satisfy 0 < low < 1 < high");
  if (!(optimizer_lr > 0.0)) throw std::invalid_argument("optimizer_lr must be positive");
  if (epochs_per_step < 0) throw std::invalid_argument("epochs_per_step must be >= 0");
}

void CuratorBatchFeedback::validate(int bank_size) const {
  const std::size_t k = candidate_ids.size();
  if (k == 0) throw std::invalid_argument("feedback has no candidates");
  if (old_cond_p.size() != k || selected.size() != k || g.size() != k || q.size() != k)
    throw std::invalid_argument("feedback field lengths disagree");
  for (std::size_t i = 0; i < k; ++i) {
    if (candidate_ids[i] < 0 || candidate_ids[i] >= bank_size) throw std::out_of_range("candidate id out of range");
    if (!(old_cond_p[i] > 0.0 && old_cond_p[i] <= 1.0))
      throw std::invalid_argument("old conditional probabilities must lie in (0, 1]");
    if (!(q[i] > 0.0 && q[i] <= 1.0)) throw std::invalid_argument("inclusion probabilities must lie in (0, 1]");
    if (!selected[i] && g[i] != 0.0) throw std::invalid_argument("unselected candidate carries nonzero g");
  }
}

double score(const CuratorParams& params, const Problem& problem) {
  if (params.theta.size() != problem.features.size() + 1)
    throw std::invalid_argument("theta length must be feature_dim + 1");
  double s = params.theta.back();  // bias
  for (std::size_t d = 0; d < problem.features.size(); ++d) s += params.theta[d] * problem.features[d];
  return s;
}

namespace {

// Softmax of scores (plus optional log-prior) over an id set, together with
// the probability-weighted mean of the augmented features, which every
// gradient expression below needs.
struct SoftmaxState {
  std::vector<double> p;
  std::vector<double> mean_feature;  // length theta.size()
};

SoftmaxState conditional_state(const CuratorParams& params, const ProblemBank& bank, const std::vector<int>& ids,
                               const std::vector<double>* q_prior) {
  if (ids.empty()) throw std::invalid_argument("empty candidate set");
  if (q_prior && q_prior->size() != ids.size()) throw std::invalid_argument("prior length must match candidates");
  std::vector<double> logits(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const int id = ids[i];
    if (id < 0 || id >= bank.size()) throw std::out_of_range("candidate id out of range");
    logits[i] = score(params, bank.problems[id]);
    if (q_prior) {
      if (!((*q_prior)[i] > 0.0)) throw std::invalid_argument("prior weights must be positive");
      logits[i] += std::log((*q_prior)[i]);
    }
  }
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double& l : logits) {
    l = std::exp(l - m);
    z += l;
  }
  SoftmaxState st;
  st.p.resize(ids.size());
  st.mean_feature.assign(params.theta.size(), 0.0);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    st.p[i] = logits[i] / z;
    const Problem& pr = bank.problems[ids[i]];
    for (std::size_t d = 0; d < pr.features.size(); ++d) st.mean_feature[d] += st.p[i] * pr.features[d];
    st.mean_feature.back() += st.p[i];  // bias coordinate
  }
  return st;
}

// Accumulates c * (f_i - mean_feature) into grad.
void add_centered_feature(std::vector<double>& grad, const Problem& pr, const std::vector<double>& mean_feature,
                          double c) {
  for (std::size_t d = 0; d < pr.features.size(); ++d) grad[d] += c * (pr.features[d] - mean_feature[d]);
  grad.back() += c * (1.0 - mean_feature.back());
}

std::vector<int> all_ids(const ProblemBank& bank) {
  std::vector<int> ids(bank.size());
  std::iota(ids.begin(), ids.end(), 0);
  return ids;
}

double kl_term(const std::vector<double>& p, const std::vector<double>& p_old) {
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p_old[i] > 0.0)) throw std::invalid_argument("old distribution has a zero entry");
    if (p[i] > 0.0) kl += p[i] * std::log(p[i] / p_old[i]);
  }
  return kl;
}

}  // namespace

std::vector<double> induced_conditional(const CuratorParams& params, const ProblemBank& bank,
                                        const std::vector<int>& candidate_ids, const std::vector<double>* q_prior) {
  params.validate();
  const std::vector<double>* prior = params.sampling_prior ? q_prior : nullptr;
  if (params.sampling_prior && !q_prior)
    throw std::invalid_argument("sampling_prior is set but no prior weights were supplied");
  return conditional_state(params, bank, candidate_ids, prior).p;
}

double surrogate_loss(const CuratorParams& params, const ProblemBank& bank, const CuratorBatchFeedback& fb) {
  params.validate();
  fb.validate(bank.size());
  const std::vector<double>* prior = params.sampling_prior ? &fb.q : nullptr;
  const SoftmaxState st = conditional_state(params, bank, fb.candidate_ids, prior);

  double kl;
  if (params.kl_global) {
    if (fb.old_global_p.size() != static_cast<std::size_t>(bank.size()))
      throw std::invalid_argument("kl_global requires the old full-bank conditional");
    const SoftmaxState global = conditional_state(params, bank, all_ids(bank), nullptr);
    kl = kl_term(global.p, fb.old_global_p);
  } else {
    kl = kl_term(st.p, fb.old_cond_p);
  }

  double linear = 0.0;
  for (std::size_t i = 0; i < fb.candidate_ids.size(); ++i) {
    if (fb.selected[i]) linear += st.p[i] / fb.old_cond_p[i] * fb.g[i];
  }
  return kl - params.eta * linear;
}

double clipped_loss(const CuratorParams& params, const ProblemBank& bank, const CuratorBatchFeedback& fb) {
  params.validate();
  fb.validate(bank.size());
  const std::vector<double>* prior = params.sampling_prior ? &fb.q : nullptr;
  const SoftmaxState st = conditional_state(params, bank, fb.candidate_ids, prior);
  double total = 0.0;
  for (std::size_t i = 0; i < fb.candidate_ids.size(); ++i) {
    const double rho = st.p[i] / fb.old_cond_p[i];
    const double clipped = std::clamp(rho, params.clip_low, params.clip_high);
    total += std::min(rho * fb.g[i], clipped * fb.g[i]);
  }
  return -params.eta * total;
}

std::vector<double> surrogate_gradient(const CuratorParams& params, const ProblemBank& bank,
                                       const CuratorBatchFeedback& fb) {
  params.validate();
  fb.validate(bank.size());
  const std::vector<double>* prior = params.sampling_prior ? &fb.q : nullptr;
  const SoftmaxState st = conditional_state(params, bank, fb.candidate_ids, prior);
  std::vector<double> grad(params.theta.size(), 0.0);

  if (params.kl_global) {
    if (fb.old_global_p.size() != static_cast<std::size_t>(bank.size()))
      throw std::invalid_argument("kl_global requires the old full-bank conditional");
    const SoftmaxState global = conditional_state(params, bank, all_ids(bank), nullptr);
    for (int id = 0; id < bank.size(); ++id) {
      const double li = std::log(global.p[id] / fb.old_global_p[id]);
      add_centered_feature(grad, bank.problems[id], global.mean_feature, global.p[id] * li);
    }
  } else {
    for (std::size_t i = 0; i < fb.candidate_ids.size(); ++i) {
      const double li = std::log(st.p[i] / fb.old_cond_p[i]);
      add_centered_feature(grad, bank.problems[fb.candidate_ids[i]], st.mean_feature, st.p[i] * li);
    }
  }

  for (std::size_t i = 0; i < fb.candidate_ids.size(); ++i) {
    if (!fb.selected[i]) continue;
    const double c = -params.eta * fb.g[i] / fb.old_cond_p[i] * st.p[i];
    add_centered_feature(grad, bank.problems[fb.candidate_ids[i]], st.mean_feature, c);
  }
  return grad;
}

std::vector<double> clipped_gradient(const CuratorParams& params, const ProblemBank& bank,
                                     const CuratorBatchFeedback& fb) {
  params.validate();
  fb.validate(bank.size());
  const std::vector<double>* prior = params.sampling_prior ? &fb.q : nullptr;
  const SoftmaxState st = conditional_state(params, bank, fb.candidate_ids, prior);
  std::vector<double> grad(params.theta.size(), 0.0);
  for (std::size_t i = 0; i < fb.candidate_ids.size(); ++i) {
    const double rho = st.p[i] / fb.old_cond_p[i];
    const double clipped = std::clamp(rho, params.clip_low, params.clip_high);
    // min(rho*g, clip(rho)*g): a strictly smaller clip branch is saturated and
    // contributes no gradient; ties resolve to the unclipped branch.
    if (rho * fb.g[i] <= clipped * fb.g[i]) {
      const double c = -params.eta * fb.g[i] / fb.old_cond_p[i] * st.p[i];
      add_centered_feature(grad, bank.problems[fb.candidate_ids[i]], st.mean_feature, c);
    }
  }
  return grad;
}

CuratorUpdateResult curator_update(const CuratorParams& params, const ProblemBank& bank,
                                   const CuratorBatchFeedback& fb, CuratorLoss loss, double lr_scale) {
  params.validate();
  if (!(lr_scale >= 0.0)) throw std::invalid_argument("lr_scale must be nonnegative");
  CuratorUpdateResult result;
  result.params = params;
  const double lr = params.optimizer_lr * lr_scale;
  auto grad_fn = loss == CuratorLoss::surrogate ? surrogate_gradient : clipped_gradient;
  auto loss_fn = loss == CuratorLoss::surrogate ? surrogate_loss : clipped_loss;

  for (int e = 0; e < params.epochs_per_step; ++e) {
    const std::vector<double> grad = grad_fn(result.params, bank, fb);
    for (std::size_t d = 0; d < grad.size(); ++d) {
      if (!std::isfinite(grad[d])) throw std::runtime_error("curator_update produced a non-finite gradient");
      result.params.theta[d] -= lr * grad[d];
    }
  }
  result.final_loss = loss_fn(result.params, bank, fb);
  const std::vector<double> last = grad_fn(result.params, bank, fb);
  double norm2 = 0.0;
  for (double gv : last) norm2 += gv * gv;
  result.grad_norm = std::sqrt(norm2);
  return result;
}

void save_curator_params(const CuratorParams& params, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  nlohmann::json rec{
      {"record", "approx_curator"},
      {"theta", params.theta},
      {"eta", params.eta},
      {"clip_low", params.clip_low},
      {"clip_high", params.clip_high},
      {"optimizer_lr", params.optimizer_lr},
      {"epochs_per_step", params.epochs_per_step},
      {"sampling_prior", params.sampling_prior},
      {"kl_global", params.kl_global},
  };
  out << rec.dump() << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

CuratorParams load_curator_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty curator file: " + path);
  nlohmann::json rec = nlohmann::json::parse(line);
  if (rec.value("record", "") != "approx_curator") throw std::runtime_error("missing approx_curator record: " + path);
  CuratorParams p;
  p.theta = rec.at("theta").get<std::vector<double>>();
  p.eta = rec.at("eta").get<double>();
  p.clip_low = rec.at("clip_low").get<double>();
  p.clip_high = rec.at("clip_high").get<double>();
  p.optimizer_lr = rec.at("optimizer_lr").get<double>();
  p.epochs_per_step = rec.at("epochs_per_step").get<int>();
  p.sampling_prior = rec.at("sampling_prior").get<bool>();
  p.kl_global = rec.at("kl_global").get<bool>();
  p.validate();
  return p;
}

}  // namespace cursim
