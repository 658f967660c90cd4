#pragma once

// Synthetic problem banks. A bank is a fixed set of single-answer problems
// with difficulty labels, feature vectors, and an evaluation distribution.
// Three structures are supported:
//   independent  - no interaction between problems
//   bucketed     - problems grouped into difficulty buckets (metadata only)
//   prerequisite - buckets form a chain; a problem's reward is obtainable only
//                  once the policy's mean success on the preceding bucket
//                  exceeds the gate threshold
// Feature layout: [difficulty | one-hot bucket | 4 noise dims], all drawn
// deterministically from the bank seed.

#include <cstdint>
#include <string>
#include <vector>

namespace cursim {

enum class BankStructure { independent, bucketed, prerequisite };
enum class DifficultyLaw { uniform, bimodal, linear_ramp };

std::string to_string(BankStructure s);
std::string to_string(DifficultyLaw d);
BankStructure bank_structure_from_string(const std::string& s);
DifficultyLaw difficulty_law_from_string(const std::string& s);

struct Problem {
  int id = 0;
  double difficulty = 0.0;
  std::vector<double> features;
  int correct_answer = 0;
  double eval_weight = 0.0;
};

struct BankSpec {
  int size = 1;
  int answer_count = 2;
  BankStructure structure = BankStructure::independent;
  DifficultyLaw difficulty_law = DifficultyLaw::uniform;
  int bucket_count = 5;
  double gate_threshold = 0.6;
  std::uint64_t seed = 0;
  // Raw evaluation weights; empty means uniform. Normalized at generation.
  std::vector<double> eval_weights;

  void validate() const;  // throws std::invalid_argument on bad fields
};

struct ProblemBank {
  BankSpec spec;
  std::vector<Problem> problems;
  std::vector<int> bucket_of;                  // problem id -> bucket
  std::vector<std::vector<int>> bucket_members;  // bucket -> problem ids
  std::vector<std::vector<int>> bucket_prereqs;  // bucket -> prerequisite buckets

  int size() const { return static_cast<int>(problems.size()); }
  int answer_count() const { return spec.answer_count; }
  int feature_dim() const { return problems.empty() ? 0 : static_cast<int>(problems.front().features.size()); }
};

ProblemBank generate_bank(const BankSpec& spec);

// Normalized evaluation distribution p_X. Throws if all weights are zero.
std::vector<double> eval_distribution(const ProblemBank& bank);

// True iff the bucket prerequisite relation admits a topological order.
bool bucket_order_acyclic(const ProblemBank& bank);

void save_bank(const ProblemBank& bank, const std::string& path);
ProblemBank load_bank(const std::string& path);

// Order-insensitive content hash used by determinism tests.
std::uint64_t bank_hash(const ProblemBank& bank);

}  // namespace cursim
