#include "cursim/problem_bank.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "cursim/rng.hpp"

namespace cursim {

namespace {
constexpr int kNoiseDims = 4;
constexpr double kNoiseScale = 0.25;
}  // namespace

std::string to_string(BankStructure s) {
  switch (s) {
    case BankStructure::independent: return "independent";
    case BankStructure::bucketed: return "bucketed";
    case BankStructure::prerequisite: return "prerequisite";
  }
  throw std::logic_error("unreachable bank structure");
}

std::string to_string(DifficultyLaw d) {
  switch (d) {
    case DifficultyLaw::uniform: return "uniform";
    case DifficultyLaw::bimodal: return "bimodal";
    case DifficultyLaw::linear_ramp: return "linear_ramp";
  }
  throw std::logic_error("unreachable difficulty law");
}

BankStructure bank_structure_from_string(const std::string& s) {
  if (s == "independent") return BankStructure::independent;
  if (s == "bucketed") return BankStructure::bucketed;
  if (s == "prerequisite") return BankStructure::prerequisite;
  throw std::invalid_argument("unknown bank structure: " + s);
}

DifficultyLaw difficulty_law_from_string(const std::string& s) {
  if (s == "uniform") return DifficultyLaw::uniform;
  if (s == "bimodal") return DifficultyLaw::bimodal;
  if (s == "linear_ramp") return DifficultyLaw::linear_ramp;
  throw std::invalid_argument("unknown difficulty law: " + s);
}

void BankSpec::validate() const {
  if (size < 1) throw std::invalid_argument("bank size must be >= 1");
  if (answer_count < 2) throw std::invalid_argument("answer_count must be >= 2");
  if (bucket_count < 1) throw std::invalid_argument("bucket_count must be >= 1");
  if (!(gate_threshold > 0.0 && gate_threshold < 1.0))
    throw std::invalid_argument("gate_threshold must lie in (0, 1)");
  if (!eval_weights.empty() && static_cast<int>(eval_weights.size()) != size)
    throw std::invalid_argument("eval_weights length must match bank size");
  for (double w : eval_weights) {
    if (w < 0.0 || !std::isfinite(w)) throw std::invalid_argument("eval_weights must be finite and nonnegative");
  }
}

ProblemBank generate_bank(const BankSpec& spec) {
  spec.validate();
  Rng rng = Rng::substream(spec.seed, 0xba1cULL);

  ProblemBank bank;
  bank.spec = spec;
  bank.problems.resize(spec.size);
  bank.bucket_of.resize(spec.size);

  // Difficulties first, in id order, so each law is a fixed draw sequence.
  std::vector<double> difficulty(spec.size);
  for (int i = 0; i < spec.size; ++i) {
    switch (spec.difficulty_law) {
      case DifficultyLaw::uniform:
        difficulty[i] = rng.uniform01();
        break;
      case DifficultyLaw::bimodal: {
        const bool high = rng.uniform01() < 0.5;
        const double u = rng.uniform01();
        difficulty[i] = high ? 0.65 + 0.30 * u : 0.05 + 0.30 * u;
        break;
      }
      case DifficultyLaw::linear_ramp:
        difficulty[i] = spec.size > 1 ? static_cast<double>(i) / (spec.size - 1) : 0.5;
        break;
    }
  }

  // Equal-width difficulty buckets over [0, 1].
  for (int i = 0; i < spec.size; ++i) {
    int b = static_cast<int>(difficulty[i] * spec.bucket_count);
    if (b >= spec.bucket_count) b = spec.bucket_count - 1;
    bank.bucket_of[i] = b;
  }
  bank.bucket_members.assign(spec.bucket_count, {});
  for (int i = 0; i < spec.size; ++i) bank.bucket_members[bank.bucket_of[i]].push_back(i);

  bank.bucket_prereqs.assign(spec.bucket_count, {});
  if (spec.structure == BankStructure::prerequisite) {
    for (int b = 1; b < spec.bucket_count; ++b) bank.bucket_prereqs[b] = {b - 1};
  }

  // Raw eval weights, normalized below.
  std::vector<double> weights = spec.eval_weights;
  if (weights.empty()) weights.assign(spec.size, 1.0);
  double total = 0.0;
  for (double w : weights) total += w;
  if (total <= 0.0) throw std::invalid_argument("eval_weights sum to zero");

  for (int i = 0; i < spec.size; ++i) {
    Problem& p = bank.problems[i];
    p.id = i;
    p.difficulty = difficulty[i];
    p.correct_answer = rng.uniform_int(spec.answer_count);
    p.eval_weight = weights[i] / total;
    p.features.reserve(1 + spec.bucket_count + kNoiseDims);
    p.features.push_back(p.difficulty);
    for (int b = 0; b < spec.bucket_count; ++b) p.features.push_back(b == bank.bucket_of[i] ? 1.0 : 0.0);
    for (int d = 0; d < kNoiseDims; ++d) p.features.push_back(kNoiseScale * rng.normal());
  }
  return bank;
}

std::vector<double> eval_distribution(const ProblemBank& bank) {
  std::vector<double> p(bank.size());
  double total = 0.0;
  for (int i = 0; i < bank.size(); ++i) {
    p[i] = bank.problems[i].eval_weight;
    total += p[i];
  }
  if (total <= 0.0) throw std::invalid_argument("eval distribution is degenerate (all weights zero)");
  for (double& v : p) v /= total;
  return p;
}

bool bucket_order_acyclic(const ProblemBank& bank) {
  const int n = static_cast<int>(bank.bucket_prereqs.size());
  std::vector<int> state(n, 0);  // 0 unvisited, 1 on stack, 2 done
  // Iterative DFS over prerequisite edges.
  for (int start = 0; start < n; ++start) {
    if (state[start] != 0) continue;
    std::vector<std::pair<int, std::size_t>> stack{{start, 0}};
    state[start] = 1;
    while (!stack.empty()) {
      auto& [node, edge] = stack.back();
      if (edge < bank.bucket_prereqs[node].size()) {
        const int next = bank.bucket_prereqs[node][edge++];
        if (next < 0 || next >= n) throw std::out_of_range("prerequisite bucket out of range");
        if (state[next] == 1) return false;
        if (state[next] == 0) {
          state[next] = 1;
          stack.push_back({next, 0});
        }
      } else {
        state[node] = 2;
        stack.pop_back();
      }
    }
  }
  return true;
}

void save_bank(const ProblemBank& bank, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  nlohmann::json header{
      {"record", "bank_header"},
      {"size", bank.spec.size},
      {"answer_count", bank.spec.answer_count},
      {"structure", to_string(bank.spec.structure)},
      {"difficulty_law", to_string(bank.spec.difficulty_law)},
      {"bucket_count", bank.spec.bucket_count},
      {"gate_threshold", bank.spec.gate_threshold},
      {"seed", bank.spec.seed},
  };
  out << header.dump() << '\n';
  for (const Problem& p : bank.problems) {
    nlohmann::json rec{
        {"id", p.id},
        {"difficulty", p.difficulty},
        {"features", p.features},
        {"correct_answer", p.correct_answer},
        {"eval_weight", p.eval_weight},
        {"bucket", bank.bucket_of[p.id]},
    };
    out << rec.dump() << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

ProblemBank load_bank(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty bank file: " + path);
  nlohmann::json header = nlohmann::json::parse(line);
  if (header.value("record", "") != "bank_header") throw std::runtime_error("missing bank_header record: " + path);

  BankSpec spec;
  spec.size = header.at("size").get<int>();
  spec.answer_count = header.at("answer_count").get<int>();
  spec.structure = bank_structure_from_string(header.at("structure").get<std::string>());
  spec.difficulty_law = difficulty_law_from_string(header.at("difficulty_law").get<std::string>());
  spec.bucket_count = header.at("bucket_count").get<int>();
  spec.gate_threshold = header.at("gate_threshold").get<double>();
  spec.seed = header.at("seed").get<std::uint64_t>();

  ProblemBank bank;
  bank.spec = spec;
  bank.problems.resize(spec.size);
  bank.bucket_of.assign(spec.size, 0);
  bank.bucket_members.assign(spec.bucket_count, {});
  bank.bucket_prereqs.assign(spec.bucket_count, {});
  if (spec.structure == BankStructure::prerequisite) {
    for (int b = 1; b < spec.bucket_count; ++b) bank.bucket_prereqs[b] = {b - 1};
  }

  int seen = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json rec = nlohmann::json::parse(line);
    const int id = rec.at("id").get<int>();
    if (id < 0 || id >= spec.size) throw std::runtime_error("problem id out of range in " + path);
    Problem& p = bank.problems[id];
    p.id = id;
    p.difficulty = rec.at("difficulty").get<double>();
    p.features = rec.at("features").get<std::vector<double>>();
    p.correct_answer = rec.at("correct_answer").get<int>();
    p.eval_weight = rec.at("eval_weight").get<double>();
    bank.bucket_of[id] = rec.at("bucket").get<int>();
    if (bank.bucket_of[id] < 0 || bank.bucket_of[id] >= spec.bucket_count)
      throw std::runtime_error("bucket out of range in " + path);
    ++seen;
  }
  if (seen != spec.size) {
    std::ostringstream msg;
    msg << "bank file " << path << " holds " << seen << " records, header says " << spec.size;
    throw std::runtime_error(msg.str());
  }
  for (int i = 0; i < spec.size; ++i) bank.bucket_members[bank.bucket_of[i]].push_back(i);
  return bank;
}

std::uint64_t bank_hash(const ProblemBank& bank) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v) {
    h ^= v;
    h *= 1099511628211ULL;
  };
  auto mix_double = [&](double d) {
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(d));
    std::memcpy(&bits, &d, sizeof(bits));
    mix(bits);
  };
  mix(static_cast<std::uint64_t>(bank.spec.size));
  mix(static_cast<std::uint64_t>(bank.spec.answer_count));
  for (const Problem& p : bank.problems) {
    mix(static_cast<std::uint64_t>(p.id));
    mix_double(p.difficulty);
    mix(static_cast<std::uint64_t>(p.correct_answer));
    mix_double(p.eval_weight);
    for (double f : p.features) mix_double(f);
    mix(static_cast<std::uint64_t>(bank.bucket_of[p.id]));
  }
  return h;
}

}  // namespace cursim
