#pragma once

// Function-approximated curator. Problems are scored by a linear model on
// their features (plus a bias term) and the selection distribution over a
// candidate set is the softmax of the scores, optionally multiplied by the
// proposal inclusion probabilities first (sampling prior). Two training
// losses are supported:
//
//   surrogate: KL(p_phi(.|C) || p_old(.|C)) - eta * sum_{selected} rho * g
//   clipped:   -eta * sum_{candidates} min(rho * g, clip(rho) * g)
//
// with rho = p_phi(x|C) / p_old(x|C) and g the per-problem utility payload
// (zero for unselected candidates). Updates are plain gradient descent.

#include <string>
#include <vector>

#include "cursim/problem_bank.hpp"

namespace cursim {

enum class CuratorLoss { surrogate, clipped };

std::string to_string(CuratorLoss l);
CuratorLoss curator_loss_from_string(const std::string& s);

struct CuratorParams {
  std::vector<double> theta;  // feature_dim + 1, last entry is the bias
  double eta = 1.0;
  double clip_low = 0.8;
  double clip_high = 1.2;
  double optimizer_lr = 0.05;
  int epochs_per_step = 20;
  bool sampling_prior = false;
  bool kl_global = false;

  static CuratorParams zero(int feature_dim);
  void validate() const;
};

struct CuratorBatchFeedback {
  std::vector<int> candidate_ids;
  std::vector<double> old_cond_p;   // sampling conditional at selection time
  std::vector<std::uint8_t> selected;
  std::vector<double> g;            // p_X * Ahat / q per candidate, 0 unless selected
  std::vector<double> q;            // proposal inclusion probabilities
  // Old full-bank conditional, only needed when kl_global is set.
  std::vector<double> old_global_p;

  void validate(int bank_size) const;
};

double score(const CuratorParams& params, const Problem& problem);

// Softmax of scores over the candidate set; when params.sampling_prior is set
// the weights are multiplied by q before normalization.
std::vector<double> induced_conditional(const CuratorParams& params, const ProblemBank& bank,
                                        const std::vector<int>& candidate_ids,
                                        const std::vector<double>* q_prior = nullptr);

double surrogate_loss(const CuratorParams& params, const ProblemBank& bank, const CuratorBatchFeedback& fb);
double clipped_loss(const CuratorParams& params, const ProblemBank& bank, const CuratorBatchFeedback& fb);

std::vector<double> surrogate_gradient(const CuratorParams& params, const ProblemBank& bank,
                                       const CuratorBatchFeedback& fb);
std::vector<double> clipped_gradient(const CuratorParams& params, const ProblemBank& bank,
                                     const CuratorBatchFeedback& fb);

struct CuratorUpdateResult {
  CuratorParams params;
  double final_loss = 0.0;
  double grad_norm = 0.0;  // norm of the last evaluated gradient
};

// epochs_per_step gradient-descent steps with learning rate
// optimizer_lr * lr_scale (warm-up passes lr_scale < 1).
CuratorUpdateResult curator_update(const CuratorParams& params, const ProblemBank& bank,
                                   const CuratorBatchFeedback& fb, CuratorLoss loss, double lr_scale = 1.0);

void save_curator_params(const CuratorParams& params, const std::string& path);
CuratorParams load_curator_params(const std::string& path);

}  // namespace cursim
