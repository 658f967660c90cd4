#include "cursim/tabular_curator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace cursim {

std::vector<double> floor_project(std::vector<double> p, double alpha) {
  const int n = static_cast<int>(p.size());
  if (n == 0) throw std::invalid_argument("floor_project: empty vector");
  if (alpha < 0.0) throw std::invalid_argument("floor_project: alpha must be nonnegative");
  if (alpha * n > 1.0 + 1e-12) throw std::invalid_argument("floor_project: alpha * dim exceeds 1 (infeasible floor)");

  double total = 0.0;
  for (double v : p) {
    if (v < 0.0 || !std::isfinite(v)) throw std::invalid_argument("floor_project: entries must be finite and >= 0");
    total += v;
  }
  if (total <= 0.0) throw std::invalid_argument("floor_project: mass is zero");
  for (double& v : p) v /= total;
  if (alpha == 0.0) return p;

  std::vector<std::uint8_t> clamped(n, 0);
  int n_clamped = 0;
  for (;;) {
    double free_mass = 1.0 - alpha * n_clamped;
    double free_sum = 0.0;
    for (int i = 0; i < n; ++i)
      if (!clamped[i]) free_sum += p[i];
    bool changed = false;
    if (n_clamped == n) break;
    const double scale = free_mass / free_sum;
    for (int i = 0; i < n; ++i) {
      if (!clamped[i] && p[i] * scale < alpha) {
        clamped[i] = 1;
        ++n_clamped;
        changed = true;
      }
    }
    if (!changed) {
      for (int i = 0; i < n; ++i) p[i] = clamped[i] ? alpha : p[i] * scale;
      break;
    }
  }
  if (n_clamped == n) std::fill(p.begin(), p.end(), alpha);
  return p;
}

std::vector<double> exponentiated_step(const std::vector<double>& p, const std::vector<double>& values,
                                       double signed_eta, double alpha, double cap, long* overflow_clips) {
  if (p.size() != values.size()) throw std::invalid_argument("exponentiated_step: size mismatch");
  if (!(cap > 0.0)) throw std::invalid_argument("exponentiated_step: cap must be positive");
  std::vector<double> next(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!std::isfinite(values[i])) throw std::invalid_argument("exponentiated_step: non-finite value");
    double e = signed_eta * values[i];
    if (std::abs(e) > cap) {
      e = std::clamp(e, -cap, cap);
      if (overflow_clips) ++*overflow_clips;
    }
    next[i] = p[i] * std::exp(e);
  }
  return floor_project(std::move(next), alpha);
}

CuratorDistribution CuratorDistribution::uniform(int n, double alpha, double eta) {
  if (n < 1) throw std::invalid_argument("curator needs at least one problem");
  CuratorDistribution c;
  c.weights.assign(n, 1.0 / n);
  c.alpha = alpha;
  c.eta = eta;
  c.validate();
  return c;
}

void CuratorDistribution::validate() const {
  const int n = size();
  if (n < 1) throw std::invalid_argument("curator distribution is empty");
  if (!(eta > 0.0)) throw std::invalid_argument("curator eta must be positive");
  if (alpha < 0.0 || alpha * n > 1.0 + 1e-12)
    throw std::invalid_argument("curator alpha must satisfy 0 <= alpha <= 1/size");
  double total = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) throw std::invalid_argument("curator weights must be strictly positive");
    if (alpha > 0.0 && w < alpha - 1e-12) throw std::invalid_argument("curator weight below floor");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("curator weights must sum to 1");
}

std::vector<double> conditional_distribution(const CuratorDistribution& curator,
                                             const std::vector<int>& candidate_ids) {
  if (candidate_ids.empty()) throw std::invalid_argument("conditional_distribution: empty candidate set");
  std::vector<double> cond(candidate_ids.size());
  for (std::size_t i = 0; i < candidate_ids.size(); ++i) {
    const int id = candidate_ids[i];
    if (id < 0 || id >= curator.size()) throw std::out_of_range("candidate id out of range");
    cond[i] = curator.weights[id];
  }
  const double inner_floor = curator.alpha > 0.0 ? curator.alpha / static_cast<double>(candidate_ids.size()) : 0.0;
  return floor_project(std::move(cond), inner_floor);
}

CuratorDistribution osmd_step(const CuratorDistribution& curator,
                              const std::vector<std::pair<int, double>>& utilities, double eta_scale) {
  curator.validate();
  if (!(eta_scale >= 0.0)) throw std::invalid_argument("osmd_step: eta_scale must be nonnegative");
  std::vector<double> values(curator.size(), 0.0);
  for (const auto& [id, u] : utilities) {
    if (id < 0 || id >= curator.size()) throw std::out_of_range("utility id out of range");
    values[id] = u;
  }
  CuratorDistribution next = curator;
  next.weights = exponentiated_step(curator.weights, values, curator.eta * eta_scale, curator.alpha,
                                    curator.utility_cap, &next.overflow_clips);
  return next;
}

CuratorDistribution osmd_step(const CuratorDistribution& curator,
                              const std::vector<std::pair<int, double>>& utilities) {
  return osmd_step(curator, utilities, 1.0);
}

void save_curator(const CuratorDistribution& curator, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  nlohmann::json rec{
      {"record", "tabular_curator"}, {"alpha", curator.alpha},           {"eta", curator.eta},
      {"utility_cap", curator.utility_cap}, {"overflow_clips", curator.overflow_clips}, {"weights", curator.weights},
  };
  out << rec.dump() << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

CuratorDistribution load_curator(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty curator file: " + path);
  nlohmann::json rec = nlohmann::json::parse(line);
  if (rec.value("record", "") != "tabular_curator") throw std::runtime_error("missing tabular_curator record: " + path);
  CuratorDistribution c;
  c.alpha = rec.at("alpha").get<double>();
  c.eta = rec.at("eta").get<double>();
  c.utility_cap = rec.at("utility_cap").get<double>();
  c.overflow_clips = rec.at("overflow_clips").get<long>();
  c.weights = rec.at("weights").get<std::vector<double>>();
  c.validate();
  return c;
}

}  // namespace cursim
