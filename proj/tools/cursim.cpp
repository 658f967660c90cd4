// Command-line driver. Subcommands:
//   curriculum  run the actor-curator loop for every configured seed
//   bandit      run the sleeping-bandit harness and emit a regret summary
//   verify      run a verification suite and report pass/fail per check
//   sweep       cross a parameter grid with the seed list, emit a CSV table
// Exit codes: 0 success, 1 verification failure, 2 configuration error.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cursim/config.hpp"
#include "cursim/harness.hpp"
#include "cursim/io.hpp"
#include "cursim/verification.hpp"

namespace {

using nlohmann::json;

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw cursim::ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw cursim::ConfigError("cannot parse config file " + path + ": " + e.what());
  }
  return j;
}

std::string default_out_dir() {
  const char* env = std::getenv("CURSIM_OUT");
  return env != nullptr && *env != '\0' ? env : ".";
}

struct CommonArgs {
  std::string config_path;
  std::string out_path;
  std::int64_t seed = -1;
  bool seed_given = false;
  std::vector<std::string> overrides;
  int jobs = 0;
};

void add_common(CLI::App* sub, CommonArgs* args, bool needs_config) {
  auto* cfg = sub->add_option("--config", args->config_path, "Path to a JSON config file");
  if (needs_config) cfg->required();
  sub->add_option("--out", args->out_path, "Output location (see subcommand help)");
  sub->add_option("--seed", args->seed, "Replace the config seed(s) with this one")
      ->each([args](const std::string&) { args->seed_given = true; });
  sub->add_option("--override", args->overrides,
                  "key=value applied to the config (dot path, repeatable)");
  sub->add_option("--jobs", args->jobs, "Parallel workers (default: hardware threads)");
}

int resolve_jobs(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

json load_with_overrides(const CommonArgs& args) {
  json raw = load_json_file(args.config_path);
  for (const std::string& ov : args.overrides) cursim::apply_override(raw, ov);
  return raw;
}

int run_curriculum_cmd(const CommonArgs& args) {
  json raw = load_with_overrides(args);
  cursim::RunConfig config = cursim::run_config_from_json(raw);
  if (args.seed_given) config.seeds = {static_cast<std::uint64_t>(args.seed)};
  if (!args.out_path.empty()) config.output = args.out_path;
  config.validate();

  const std::string dir = config.output.empty() ? default_out_dir() : config.output;
  std::filesystem::create_directories(dir);

  const int n = static_cast<int>(config.seeds.size());
  std::vector<cursim::RunResult> results(n);
  const int jobs = std::min(resolve_jobs(args.jobs), n);
  std::atomic<int> cursor{0};
  std::vector<std::string> errors(n);
  auto worker = [&]() {
    for (;;) {
      const int i = cursor.fetch_add(1);
      if (i >= n) return;
      const std::uint64_t seed = config.seeds[i];
      const std::string path = dir + "/run_seed" + std::to_string(seed) + ".jsonl";
      try {
        results[i] = cursim::run_curriculum(config, seed, path);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (int i = 0; i < n; ++i) {
    if (!errors[i].empty())
      throw std::runtime_error("seed " + std::to_string(config.seeds[i]) + ": " + errors[i]);
  }

  std::vector<std::string> header = {"seed",         "initial_j",  "final_j",  "peak_j",
                                     "metrics_hash", "bank_hash",  "overflow_clips"};
  std::vector<std::vector<std::string>> rows;
  for (int i = 0; i < n; ++i) {
    const cursim::RunResult& r = results[i];
    rows.push_back({std::to_string(config.seeds[i]), cursim::format_double(r.initial_j),
                    cursim::format_double(r.final_j), cursim::format_double(r.peak_j),
                    std::to_string(r.metrics_hash), std::to_string(r.bank_hash),
                    std::to_string(r.curator_overflow_clips)});
  }
  const std::string csv_path = dir + "/summary.csv";
  cursim::write_csv(csv_path, header, rows);

  for (int i = 0; i < n; ++i) {
    const cursim::RunResult& r = results[i];
    std::printf("seed %llu: J %.4f -> %.4f (peak %.4f), metrics hash %llu\n",
                static_cast<unsigned long long>(config.seeds[i]), r.initial_j, r.final_j, r.peak_j,
                static_cast<unsigned long long>(r.metrics_hash));
  }
  std::printf("wrote %d run stream(s) and %s\n", n, csv_path.c_str());
  return 0;
}

int run_bandit_cmd(const CommonArgs& args) {
  json raw = load_with_overrides(args);
  cursim::BanditConfig config = cursim::bandit_config_from_json(raw);
  if (args.seed_given) config.seed = static_cast<std::uint64_t>(args.seed);
  config.validate();

  const json summary = cursim::run_bandit(config);
  std::printf("drift %.4f, best-arm regret %.4f, best-available regret %.4f, log-log slope %.4f\n",
              summary.at("drift_total").get<double>(), summary.at("best_arm_regret").get<double>(),
              summary.at("best_available_regret").get<double>(), summary.at("loglog_slope").get<double>());
  if (!args.out_path.empty()) {
    std::ofstream out(args.out_path);
    if (!out) throw cursim::ConfigError("cannot open output file: " + args.out_path);
    out << summary.dump(2) << "\n";
    std::printf("wrote %s\n", args.out_path.c_str());
  } else {
    std::printf("%s\n", summary.dump(2).c_str());
  }
  return 0;
}

int run_verify_cmd(const std::string& suite) {
  const std::vector<cursim::CheckResult> results = cursim::verify_suite(suite);
  bool all = true;
  for (const cursim::CheckResult& r : results) {
    std::printf("%s %s: %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
    all = all && r.passed;
  }
  std::printf("%zu/%zu checks passed\n",
              static_cast<std::size_t>(std::count_if(results.begin(), results.end(),
                                                     [](const cursim::CheckResult& r) { return r.passed; })),
              results.size());
  return all ? 0 : 1;
}

int run_sweep_cmd(const CommonArgs& args, const std::vector<std::string>& grid_specs) {
  json raw = load_with_overrides(args);
  if (args.seed_given) raw["seeds"] = json::array({static_cast<std::uint64_t>(args.seed)});

  cursim::SweepGrid grid;
  for (const std::string& spec : grid_specs) {
    const std::size_t eq = spec.find('=');
    if (eq == std::string::npos || eq == 0)
      throw cursim::ConfigError("grid axis must look like key=v1,v2,...: " + spec);
    const std::string key = spec.substr(0, eq);
    std::vector<json> values;
    std::size_t start = eq + 1;
    while (start <= spec.size()) {
      std::size_t comma = spec.find(',', start);
      if (comma == std::string::npos) comma = spec.size();
      const std::string token = spec.substr(start, comma - start);
      if (token.empty()) throw cursim::ConfigError("empty grid value in: " + spec);
      json v;
      try {
        v = json::parse(token);
      } catch (const std::exception&) {
        v = token;
      }
      values.push_back(std::move(v));
      start = comma + 1;
    }
    grid.axes.emplace_back(key, std::move(values));
  }

  const cursim::SweepTable table = cursim::run_sweep(raw, grid, resolve_jobs(args.jobs));
  std::string csv_path = args.out_path;
  if (csv_path.empty()) csv_path = default_out_dir() + "/sweep.csv";
  if (!csv_path.empty()) {
    const std::filesystem::path parent = std::filesystem::path(csv_path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
  }
  cursim::write_csv(csv_path, table.header, table.rows);
  std::printf("wrote %zu row(s) to %s\n", table.rows.size(), csv_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Actor-curator curriculum simulator"};
  app.require_subcommand(1);

  CommonArgs curriculum_args;
  CLI::App* curriculum = app.add_subcommand(
      "curriculum", "Run the curation loop for every configured seed; --out is the output directory");
  add_common(curriculum, &curriculum_args, true);

  CommonArgs bandit_args;
  CLI::App* bandit =
      app.add_subcommand("bandit", "Run the sleeping-bandit harness; --out is a JSON summary file");
  add_common(bandit, &bandit_args, true);

  std::string suite = "all";
  CLI::App* verify = app.add_subcommand("verify", "Run a verification suite");
  verify->add_option("suite", suite,
                     "unbiasedness, second_moment, gradients, projections, additivity, or all");

  CommonArgs sweep_args;
  std::vector<std::string> grid_specs;
  CLI::App* sweep =
      app.add_subcommand("sweep", "Cross a parameter grid with the seed list; --out is a CSV file");
  add_common(sweep, &sweep_args, true);
  sweep->add_option("--grid", grid_specs, "Axis spec key=v1,v2,... (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (curriculum->parsed()) return run_curriculum_cmd(curriculum_args);
    if (bandit->parsed()) return run_bandit_cmd(bandit_args);
    if (verify->parsed()) return run_verify_cmd(suite);
    if (sweep->parsed()) return run_sweep_cmd(sweep_args, grid_specs);
  } catch (const cursim::ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
