#pragma once

// Tabular curator: an explicit probability vector over the bank, updated by
// exponentiated-gradient mirror steps and kept inside the floored simplex
// {p : p_i >= alpha, sum p = 1}. The same kernel serves two callers with
// opposite sign conventions: curriculum curation maximizes utility gains
// (weights scale by exp(+eta*u)), the sleeping-bandit loop minimizes losses
// (weights scale by exp(-eta*l)).

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace cursim {

// Exact KL projection onto {p >= alpha, sum p = 1}: coordinates below alpha
// are clamped there and the remaining mass is rescaled proportionally over
// the rest, repeating until no new coordinate falls below the floor.
// Idempotent and order-preserving. alpha = 0 only normalizes.
std::vector<double> floor_project(std::vector<double> p, double alpha);

// Shared mirror-step kernel: w_i ∝ p_i * exp(signed_eta * v_i), followed by
// floor projection. |signed_eta * v_i| is clamped to `cap`; each clamp
// increments *overflow_clips when provided.
std::vector<double> exponentiated_step(const std::vector<double>& p, const std::vector<double>& values,
                                       double signed_eta, double alpha, double cap, long* overflow_clips);

struct CuratorDistribution {
  std::vector<double> weights;  // maintained normalized and floor-projected
  double alpha = 0.0;
  double eta = 1.0;
  double utility_cap = 30.0;
  long overflow_clips = 0;

  static CuratorDistribution uniform(int n, double alpha, double eta);

  int size() const { return static_cast<int>(weights.size()); }
  void validate() const;
};

// Restriction of the curator to a candidate set, renormalized, with an
// additional floor at alpha / |candidates| (vacuous while the global floor
// holds, kept for sensitivity analysis). Order matches candidate_ids.
std::vector<double> conditional_distribution(const CuratorDistribution& curator,
                                             const std::vector<int>& candidate_ids);

// Gain-direction OSMD step: utilities is a sparse (id, value) list, absent
// ids have utility zero.
CuratorDistribution osmd_step(const CuratorDistribution& curator,
                              const std::vector<std::pair<int, double>>& utilities);
// As above with eta scaled by eta_scale (warm-up).
CuratorDistribution osmd_step(const CuratorDistribution& curator,
                              const std::vector<std::pair<int, double>>& utilities, double eta_scale);

void save_curator(const CuratorDistribution& curator, const std::string& path);
CuratorDistribution load_curator(const std::string& path);

}  // namespace cursim
