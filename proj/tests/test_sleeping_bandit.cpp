#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "doctest.h"

#include "cursim/sleeping_bandit.hpp"

using namespace cursim;

TEST_CASE("bandit configuration validation rejects out-of-range fields") {
  BanditConfig c;
  c.validate();
  BanditConfig bad = c;
  bad.total_arms = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = c;
  bad.available_arms = 3;  // exceeds total_arms = 2
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = c;
  bad.pulls_per_round = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = c;
  bad.horizon = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = c;
  bad.eta = -0.1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = c;
  bad.available_arms = 2;
  bad.alpha = 0.5;  // alpha * k = 1 is infeasible
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = c;
  bad.restart_block_length = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = c;
  bad.num_switches = -1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = c;
  bad.walk_step = -0.01;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("loss models produce their advertised shapes") {
  SUBCASE("abrupt switches alternate a single good arm") {
    BanditConfig c;
    c.total_arms = 2;
    c.horizon = 1000;
    c.num_switches = 4;
    c.loss_model = LossModel::abrupt_switch;
    c.seed = 11;
    const auto table = generate_loss_table(c);
    REQUIRE(table.size() == 1000);
    // Five phases of length 200; the good arm flips parity each phase.
    CHECK(table[0][0] == doctest::Approx(0.1));
    CHECK(table[0][1] == doctest::Approx(0.9));
    CHECK(table[200][0] == doctest::Approx(0.9));
    CHECK(table[200][1] == doctest::Approx(0.1));
    CHECK(table[399][1] == doctest::Approx(0.1));
    CHECK(table[400][0] == doctest::Approx(0.1));
    const auto [total, steps] = drift(table);
    CHECK(total == doctest::Approx(3.2).epsilon(1e-12));
    CHECK(steps.size() == 999);
  }
  SUBCASE("piecewise-constant losses only move at segment boundaries") {
    BanditConfig c;
    c.total_arms = 4;
    c.horizon = 120;
    c.num_switches = 3;
    c.loss_model = LossModel::piecewise_constant;
    c.seed = 12;
    const auto table = generate_loss_table(c);
    for (long t = 1; t < 120; ++t) {
      if (t % 30 != 0) {
        for (int i = 0; i < 4; ++i) CHECK(table[t][i] == table[t - 1][i]);
      }
    }
    // Segment boundaries redraw, so some step must actually move.
    CHECK(drift(table).first > 0.0);
  }
  SUBCASE("the random walk stays inside the unit interval with bounded steps") {
    BanditConfig c;
    c.total_arms = 3;
    c.horizon = 500;
    c.walk_step = 0.05;
    c.loss_model = LossModel::bounded_random_walk;
    c.seed = 13;
    const auto table = generate_loss_table(c);
    for (long t = 0; t < 500; ++t) {
      for (int i = 0; i < 3; ++i) {
        CHECK(table[t][i] >= 0.0);
        CHECK(table[t][i] <= 1.0);
        if (t > 0) CHECK(std::abs(table[t][i] - table[t - 1][i]) <= 0.05 + 1e-12);
      }
    }
  }
  SUBCASE("identical seeds reproduce the table and different seeds do not") {
    BanditConfig c;
    c.total_arms = 5;
    c.horizon = 50;
    c.loss_model = LossModel::piecewise_constant;
    c.seed = 14;
    const auto a = generate_loss_table(c);
    const auto b = generate_loss_table(c);
    CHECK(a == b);
    c.seed = 15;
    CHECK(generate_loss_table(c) != a);
  }
}

TEST_CASE("the importance-weighted loss estimate divides by the pull probability") {
  const std::vector<double> lhat = loss_estimator({0.25, 0.75}, {0}, {0.5, 0.3}, 1);
  CHECK(lhat[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(lhat[1] == 0.0);

  // A repeated pull accumulates before the 1/s normalization.
  const std::vector<double> twice = loss_estimator({0.5, 0.5}, {1, 1}, {0.2, 0.6}, 2);
  CHECK(twice[0] == 0.0);
  CHECK(twice[1] == doctest::Approx(1.2).epsilon(1e-12));

  CHECK_THROWS_AS(loss_estimator({0.5, 0.5}, {0}, {0.1, 0.2, 0.3}, 1), std::invalid_argument);
  CHECK_THROWS_AS(loss_estimator({0.5, 0.5}, {0, 1}, {0.1, 0.2}, 1), std::invalid_argument);
  CHECK_THROWS_AS(loss_estimator({0.5, 0.5}, {2}, {0.1, 0.2}, 1), std::out_of_range);
  CHECK_THROWS_AS(loss_estimator({1.0, 0.0}, {1}, {0.1, 0.2}, 1), std::logic_error);
}

TEST_CASE("enumerating every pull pair shows the loss estimate is unbiased") {
  const std::vector<double> cond = {0.2, 0.3, 0.5};
  const std::vector<double> losses = {0.9, 0.4, 0.7};
  std::vector<double> mean(3, 0.0);
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      const double prob = cond[a] * cond[b];
      const std::vector<double> lhat = loss_estimator(cond, {a, b}, losses, 2);
      for (int i = 0; i < 3; ++i) mean[i] += prob * lhat[i];
    }
  }
  for (int i = 0; i < 3; ++i) CHECK(mean[i] == doctest::Approx(losses[i]).epsilon(1e-12));
}

TEST_CASE("the second-moment statistic reports the running mean and standard error") {
  const std::vector<double> cond = {0.4, 0.6};
  // v = 0.4*lhat0^2 + 0.6*lhat1^2 per sample: v1 = 0.4*4 = 1.6, v2 = 0.6*1 = 0.6.
  const std::vector<std::vector<double>> samples = {{2.0, 0.0}, {0.0, 1.0}};
  const auto [mean, se] = second_moment(cond, samples);
  CHECK(mean == doctest::Approx(1.1).epsilon(1e-12));
  CHECK(se == doctest::Approx(0.5).epsilon(1e-12));  // |v1 - v2| / 2 for two samples
  CHECK(second_moment(cond, {{1.0, 1.0}}).second == 0.0);
  CHECK_THROWS_AS(second_moment(cond, {}), std::invalid_argument);
  CHECK_THROWS_AS(second_moment(cond, {{1.0}}), std::invalid_argument);
}

TEST_CASE("drift sums the worst per-arm move of each step") {
  const std::vector<std::vector<double>> table = {{0.0, 1.0}, {0.5, 0.2}, {0.5, 0.2}};
  const auto [total, steps] = drift(table);
  CHECK(total == doctest::Approx(0.8).epsilon(1e-12));
  REQUIRE(steps.size() == 2);
  CHECK(steps[0] == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(steps[1] == 0.0);
  CHECK(drift({{0.3, 0.4}}).first == 0.0);
  CHECK(drift({}).first == 0.0);
  CHECK_THROWS_AS(drift({{0.1}, {0.1, 0.2}}), std::invalid_argument);
}

TEST_CASE("the tuned restart length and step size match their closed forms") {
  CHECK(tuned_block_length(1000, 2.0, 1, 4, 0.01) == doctest::Approx(132.05004784536848).epsilon(1e-13));
  CHECK(tuned_eta(1000, 2.0, 1, 4, 0.01) == doctest::Approx(0.13205004784536853).epsilon(1e-13));
  CHECK(tuned_block_length(32000, 3.2, 1, 5, 0.001) == doctest::Approx(1199.754306121442).epsilon(1e-13));
  CHECK(tuned_eta(32000, 3.2, 1, 5, 0.001) == doctest::Approx(0.04799017224485769).epsilon(1e-13));
  // The pair obeys eta = 2 * block_length * V / (T * s * k) by construction.
  const double L = tuned_block_length(7000, 1.7, 2, 6, 0.02);
  const double eta = tuned_eta(7000, 1.7, 2, 6, 0.02);
  CHECK(eta == doctest::Approx(2.0 * L * 1.7 / (7000.0 * 2 * 6)).epsilon(1e-10));
  CHECK_THROWS_AS(tuned_block_length(1000, 0.0, 1, 4, 0.01), std::invalid_argument);
  CHECK_THROWS_AS(tuned_eta(1000, 2.0, 1, 4, 1.5), std::invalid_argument);
}

TEST_CASE("bandit runs are deterministic and keep exact per-round accounts") {
  BanditConfig c;
  c.total_arms = 8;
  c.available_arms = 3;
  c.pulls_per_round = 2;
  c.horizon = 400;
  c.eta = 0.2;
  c.alpha = 0.01;
  c.loss_model = LossModel::abrupt_switch;
  c.num_switches = 3;
  c.seed = 21;

  const RegretLedger a = run_sleeping_osmd(c);
  const RegretLedger b = run_sleeping_osmd(c);
  CHECK(a.step_alg_loss == b.step_alg_loss);
  CHECK(a.pulls == b.pulls);
  CHECK(a.second_moment_steps == b.second_moment_steps);
  REQUIRE(a.step_alg_loss.size() == 400);
  REQUIRE(a.pulls.size() == 400);
  for (long t = 0; t < 400; ++t) {
    CHECK(a.step_alg_loss[t] >= a.step_best_arm_loss[t] - 1e-12);  // best arm lower-bounds any mixture
    CHECK(a.step_best_avail_loss[t] >= a.step_best_arm_loss[t] - 1e-12);
    CHECK(static_cast<int>(a.pulls[t].size()) == 2);
  }
  CHECK(a.drift_total == doctest::Approx(0.8 * 3).epsilon(1e-12));
}

TEST_CASE("with every arm awake the per-round accounts have closed forms") {
  BanditConfig c;
  c.total_arms = 3;
  c.available_arms = 3;
  c.pulls_per_round = 2;
  c.horizon = 30;
  c.eta = 0.3;
  c.alpha = 0.05;
  c.seed = 22;
  const std::vector<std::vector<double>> table(30, std::vector<double>{0.2, 0.5, 0.8});
  const RegretLedger ledger = run_sleeping_osmd(c, table);
  // Round zero plays the uniform distribution exactly.
  CHECK(ledger.step_alg_loss[0] == doctest::Approx(2.0 * 0.5).epsilon(1e-12));
  for (long t = 0; t < 30; ++t) {
    CHECK(ledger.step_best_arm_loss[t] == doctest::Approx(2.0 * 0.2).epsilon(1e-12));
    const double floored = (1.0 - 3 * 0.05) * 0.2 + 0.05 * (0.2 + 0.5 + 0.8);
    CHECK(ledger.step_best_avail_loss[t] == doctest::Approx(2.0 * floored).epsilon(1e-12));
  }
  // Learning shifts mass toward the cheap arm, so the expected loss drops.
  CHECK(ledger.step_alg_loss[29] < ledger.step_alg_loss[0]);

  CHECK_THROWS_AS(run_sleeping_osmd(c, {{0.1, 0.2, 0.3}}), std::invalid_argument);
  CHECK_THROWS_AS(run_sleeping_osmd(c, std::vector<std::vector<double>>(30, std::vector<double>{0.1})),
                  std::invalid_argument);
}

TEST_CASE("restarting every round is equivalent to never learning") {
  BanditConfig learn_then_reset;
  learn_then_reset.total_arms = 6;
  learn_then_reset.available_arms = 2;
  learn_then_reset.pulls_per_round = 1;
  learn_then_reset.horizon = 300;
  learn_then_reset.eta = 0.5;
  learn_then_reset.alpha = 0.02;
  learn_then_reset.restart_block_length = 1;
  learn_then_reset.loss_model = LossModel::bounded_random_walk;
  learn_then_reset.seed = 23;

  BanditConfig inert = learn_then_reset;
  inert.restart_block_length.reset();
  inert.eta = 0.0;

  const RegretLedger a = run_sleeping_osmd(learn_then_reset);
  const RegretLedger b = run_sleeping_osmd(inert);
  CHECK(a.step_alg_loss == b.step_alg_loss);
  CHECK(a.pulls == b.pulls);
  CHECK(a.second_moment_steps == b.second_moment_steps);
  CHECK(a.restart_steps.size() == 299);
  CHECK(b.restart_steps.empty());
}

TEST_CASE("on a stationary problem the algorithm loss falls over time") {
  BanditConfig c;
  c.total_arms = 6;
  c.available_arms = 6;
  c.pulls_per_round = 1;
  c.horizon = 400;
  c.eta = 0.5;
  c.alpha = 0.005;
  c.loss_model = LossModel::piecewise_constant;
  c.num_switches = 0;
  c.seed = 24;
  const RegretLedger ledger = run_sleeping_osmd(c);
  double early = 0.0, late = 0.0;
  for (int t = 0; t < 50; ++t) {
    early += ledger.step_alg_loss[t] - ledger.step_best_arm_loss[t];
    late += ledger.step_alg_loss[350 + t] - ledger.step_best_arm_loss[350 + t];
  }
  CHECK(late < early);
}

TEST_CASE("checkpoints accumulate the floored-comparator regret at doubling times") {
  BanditConfig c;
  c.total_arms = 4;
  c.available_arms = 2;
  c.horizon = 256;
  c.eta = 0.3;
  c.alpha = 0.01;
  c.loss_model = LossModel::abrupt_switch;
  c.seed = 25;
  const RegretLedger ledger = run_sleeping_osmd(c);
  const auto marks = ledger.checkpoints(8);
  REQUIRE(marks.size() == 8);
  for (int i = 0; i < 8; ++i) CHECK(marks[i].first == (256L >> (7 - i)));
  CHECK(marks.back().second == doctest::Approx(ledger.best_available_regret()).epsilon(1e-9));
  double cum = 0.0;
  for (int t = 0; t < 4; ++t) cum += ledger.step_alg_loss[t] - ledger.step_best_avail_loss[t];
  CHECK(marks[1].second == doctest::Approx(cum).epsilon(1e-9));

  const RegretSummary report = regret_report(ledger);
  CHECK(report.drift_total == doctest::Approx(ledger.drift_total));
  CHECK(report.best_arm_regret == doctest::Approx(ledger.best_arm_regret()));
  CHECK(report.best_available_regret == doctest::Approx(ledger.best_available_regret()));
  CHECK(report.checkpoints.size() == marks.size());
}
