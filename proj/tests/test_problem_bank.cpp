#include <cstdio>
#include <filesystem>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"

#include "cursim/problem_bank.hpp"

using namespace cursim;

namespace {

BankSpec small_spec() {
  BankSpec spec;
  spec.size = 40;
  spec.answer_count = 3;
  spec.structure = BankStructure::prerequisite;
  spec.difficulty_law = DifficultyLaw::linear_ramp;
  spec.bucket_count = 4;
  spec.gate_threshold = 0.6;
  spec.seed = 321;
  return spec;
}

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("bank generation is deterministic in the bank spec") {
  const BankSpec spec = small_spec();
  const ProblemBank a = generate_bank(spec);
  const ProblemBank b = generate_bank(spec);
  CHECK(bank_hash(a) == bank_hash(b));

  BankSpec other = spec;
  other.seed = 322;
  CHECK(bank_hash(generate_bank(other)) != bank_hash(a));
}

TEST_CASE("linear ramp difficulties are evenly spaced by index") {
  const ProblemBank bank = generate_bank(small_spec());
  for (int i = 0; i < bank.size(); ++i)
    CHECK(bank.problems[i].difficulty == doctest::Approx(static_cast<double>(i) / (bank.size() - 1)).epsilon(1e-12));
}

TEST_CASE("bimodal difficulties avoid the middle band") {
  BankSpec spec = small_spec();
  spec.structure = BankStructure::independent;
  spec.difficulty_law = DifficultyLaw::bimodal;
  const ProblemBank bank = generate_bank(spec);
  for (const Problem& p : bank.problems) {
    const bool low = p.difficulty >= 0.05 && p.difficulty <= 0.35;
    const bool high = p.difficulty >= 0.65 && p.difficulty <= 0.95;
    CHECK((low || high));
  }
}

TEST_CASE("buckets partition the bank by equal-width difficulty bands") {
  const ProblemBank bank = generate_bank(small_spec());
  int members = 0;
  for (int b = 0; b < small_spec().bucket_count; ++b) {
    for (int id : bank.bucket_members[b]) {
      CHECK(bank.bucket_of[id] == b);
      int expect = static_cast<int>(bank.problems[id].difficulty * small_spec().bucket_count);
      if (expect >= small_spec().bucket_count) expect = small_spec().bucket_count - 1;
      CHECK(expect == b);
    }
    members += static_cast<int>(bank.bucket_members[b].size());
  }
  CHECK(members == bank.size());
}

TEST_CASE("prerequisite structure chains buckets and stays acyclic") {
  const ProblemBank bank = generate_bank(small_spec());
  CHECK(bank.bucket_prereqs[0].empty());
  for (int b = 1; b < small_spec().bucket_count; ++b) {
    REQUIRE(bank.bucket_prereqs[b].size() == 1);
    CHECK(bank.bucket_prereqs[b][0] == b - 1);
  }
  CHECK(bucket_order_acyclic(bank));

  BankSpec flat = small_spec();
  flat.structure = BankStructure::bucketed;
  const ProblemBank flat_bank = generate_bank(flat);
  for (const auto& pre : flat_bank.bucket_prereqs) CHECK(pre.empty());
}

TEST_CASE("features carry difficulty, a one-hot bucket, and noise dims") {
  const ProblemBank bank = generate_bank(small_spec());
  const int buckets = small_spec().bucket_count;
  CHECK(bank.feature_dim() == 1 + buckets + 4);
  for (const Problem& p : bank.problems) {
    REQUIRE(static_cast<int>(p.features.size()) == bank.feature_dim());
    CHECK(p.features[0] == doctest::Approx(p.difficulty).epsilon(1e-12));
    for (int b = 0; b < buckets; ++b)
      CHECK(p.features[1 + b] == (b == bank.bucket_of[p.id] ? 1.0 : 0.0));
  }
}

TEST_CASE("answers lie in range and ids are sequential") {
  const ProblemBank bank = generate_bank(small_spec());
  for (int i = 0; i < bank.size(); ++i) {
    CHECK(bank.problems[i].id == i);
    CHECK(bank.problems[i].correct_answer >= 0);
    CHECK(bank.problems[i].correct_answer < bank.answer_count());
  }
}

TEST_CASE("eval distribution defaults to uniform and normalizes custom weights") {
  const ProblemBank bank = generate_bank(small_spec());
  const std::vector<double> p = eval_distribution(bank);
  REQUIRE(static_cast<int>(p.size()) == bank.size());
  for (double v : p) CHECK(v == doctest::Approx(1.0 / bank.size()).epsilon(1e-12));

  BankSpec weighted = small_spec();
  weighted.eval_weights.assign(weighted.size, 1.0);
  weighted.eval_weights[3] = 5.0;
  const ProblemBank wbank = generate_bank(weighted);
  const std::vector<double> wp = eval_distribution(wbank);
  double total = 0.0;
  for (double v : wp) total += v;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(wp[3] == doctest::Approx(5.0 / (weighted.size - 1 + 5.0)).epsilon(1e-12));
}

TEST_CASE("bank spec validation rejects malformed inputs") {
  BankSpec spec = small_spec();
  spec.size = 0;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);

  spec = small_spec();
  spec.answer_count = 1;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);

  spec = small_spec();
  spec.gate_threshold = 1.0;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);

  spec = small_spec();
  spec.eval_weights.assign(spec.size - 1, 1.0);
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);

  spec = small_spec();
  spec.eval_weights.assign(spec.size, 1.0);
  spec.eval_weights[0] = -0.5;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
}

TEST_CASE("bank save/load round-trips every field") {
  const ProblemBank bank = generate_bank(small_spec());
  const std::string path = temp_path("unit_bank_roundtrip.json");
  save_bank(bank, path);
  const ProblemBank loaded = load_bank(path);
  std::remove(path.c_str());

  CHECK(bank_hash(loaded) == bank_hash(bank));
  REQUIRE(loaded.size() == bank.size());
  CHECK(loaded.bucket_of == bank.bucket_of);
  CHECK(loaded.bucket_prereqs == bank.bucket_prereqs);
  for (int i = 0; i < bank.size(); ++i) {
    CHECK(loaded.problems[i].correct_answer == bank.problems[i].correct_answer);
    CHECK(loaded.problems[i].difficulty == bank.problems[i].difficulty);
    CHECK(loaded.problems[i].eval_weight == bank.problems[i].eval_weight);
    CHECK(loaded.problems[i].features == bank.problems[i].features);
  }
}
