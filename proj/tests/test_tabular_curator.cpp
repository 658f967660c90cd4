#include <cmath>
#include <cstdio>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "doctest.h"

#include "cursim/rng.hpp"
#include "cursim/tabular_curator.hpp"

using namespace cursim;

namespace {

double kl(const std::vector<double>& q, const std::vector<double>& p) {
  double d = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (q[i] > 0.0) d += q[i] * std::log(q[i] / p[i]);
  }
  return d;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("floor projection clamps low coordinates and rescales the rest") {
  const std::vector<double> out = floor_project({0.95, 0.05}, 0.1);
  CHECK(out[0] == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(out[1] == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("floor projection is idempotent, order preserving, and normalizing") {
  Rng rng = Rng::substream(4400, 0);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + rng.uniform_int(7);
    const double alpha = 0.8 * rng.uniform01() / n;
    std::vector<double> p(n);
    for (double& v : p) v = 0.001 + 3.0 * rng.uniform01();
    const std::vector<double> once = floor_project(p, alpha);
    const std::vector<double> twice = floor_project(once, alpha);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      CHECK(once[i] >= alpha - 1e-12);
      CHECK(once[i] == doctest::Approx(twice[i]).epsilon(1e-12));
      total += once[i];
      for (int j = 0; j < n; ++j) {
        if (p[i] < p[j]) CHECK(once[i] <= once[j] + 1e-12);
      }
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
  // alpha = 0 only normalizes.
  const std::vector<double> plain = floor_project({2.0, 6.0}, 0.0);
  CHECK(plain[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(plain[1] == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("floor projection minimizes information divergence over a dense grid") {
  const std::vector<double> p = {0.04, 0.26, 0.7};
  const double alpha = 0.1;
  const std::vector<double> proj = floor_project(p, alpha);
  const double kl_proj = kl(proj, p);
  // Every grid point of the floored simplex must do no better.
  const int steps = 200;
  for (int i = 0; i <= steps; ++i) {
    for (int j = 0; j <= steps - i; ++j) {
      std::vector<double> q = {static_cast<double>(i) / steps, static_cast<double>(j) / steps, 0.0};
      q[2] = 1.0 - q[0] - q[1];
      if (q[0] < alpha || q[1] < alpha || q[2] < alpha) continue;
      CHECK(kl(q, p) >= kl_proj - 1e-9);
    }
  }
}

TEST_CASE("floor projection rejects infeasible or degenerate inputs") {
  CHECK_THROWS_AS(floor_project({}, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(floor_project({0.5, 0.5}, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(floor_project({0.5, 0.5}, 0.6), std::invalid_argument);
  CHECK_THROWS_AS(floor_project({-0.5, 1.5}, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(floor_project({0.0, 0.0}, 0.0), std::invalid_argument);
}

TEST_CASE("mirror steps reweight exponentially and respect the value cap") {
  // eta = 0 leaves any floored distribution unchanged.
  const std::vector<double> p = {0.3, 0.5, 0.2};
  const std::vector<double> frozen = exponentiated_step(p, {5.0, -2.0, 0.4}, 0.0, 0.0, 30.0, nullptr);
  for (int i = 0; i < 3; ++i) CHECK(frozen[i] == doctest::Approx(p[i]).epsilon(1e-12));

  // Exact two-point value: w ∝ (0.5 * e^{ln 2}, 0.5) = (2/3, 1/3).
  const std::vector<double> stepped = exponentiated_step({0.5, 0.5}, {std::log(2.0), 0.0}, 1.0, 0.0, 30.0, nullptr);
  CHECK(stepped[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(stepped[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  // Oversized |eta * v| clips to the cap and counts each clip.
  long clips = 0;
  const std::vector<double> capped = exponentiated_step({0.5, 0.5}, {100.0, -100.0}, 1.0, 0.0, 30.0, &clips);
  CHECK(clips == 2);
  const double expect_hi = std::exp(30.0) / (std::exp(30.0) + std::exp(-30.0));
  CHECK(capped[0] == doctest::Approx(expect_hi).epsilon(1e-12));

  // Larger value never ends with smaller weight when starting uniform.
  const std::vector<double> mono = exponentiated_step({0.25, 0.25, 0.25, 0.25}, {0.1, 0.7, 0.3, -0.2}, 2.0, 0.02, 30.0,
                                                      nullptr);
  CHECK(mono[1] > mono[2]);
  CHECK(mono[2] > mono[0]);
  CHECK(mono[0] > mono[3]);
}

TEST_CASE("conditional distributions restrict, renormalize, and floor") {
  CuratorDistribution curator = CuratorDistribution::uniform(4, 0.0, 1.0);
  curator.weights = {0.1, 0.3, 0.2, 0.4};
  const std::vector<double> cond = conditional_distribution(curator, {0, 1});
  CHECK(cond[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(cond[1] == doctest::Approx(0.75).epsilon(1e-12));

  // The conditional floor alpha / |C| binds when the restriction is extreme.
  CuratorDistribution skewed = CuratorDistribution::uniform(2, 0.0, 1.0);
  skewed.weights = {0.001, 0.999};
  skewed.alpha = 0.3;
  const std::vector<double> floored = conditional_distribution(skewed, {0, 1});
  CHECK(floored[0] == doctest::Approx(0.15).epsilon(1e-12));
  CHECK(floored[1] == doctest::Approx(0.85).epsilon(1e-12));

  const std::vector<double> single = conditional_distribution(curator, {2});
  CHECK(single.size() == 1);
  CHECK(single[0] == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(conditional_distribution(curator, {}), std::invalid_argument);
  CHECK_THROWS_AS(conditional_distribution(curator, {7}), std::out_of_range);
}

TEST_CASE("curation steps climb utility and ignore absent problems") {
  CuratorDistribution curator = CuratorDistribution::uniform(2, 0.0, 1.0);
  const CuratorDistribution stepped = osmd_step(curator, {{0, std::log(2.0)}});
  CHECK(stepped.weights[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(stepped.weights[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  // Equal utilities on every problem leave the distribution unchanged.
  CuratorDistribution wide = CuratorDistribution::uniform(3, 0.05, 2.0);
  wide.weights = {0.2, 0.3, 0.5};
  const CuratorDistribution same = osmd_step(wide, {{0, 0.7}, {1, 0.7}, {2, 0.7}});
  for (int i = 0; i < 3; ++i) CHECK(same.weights[i] == doctest::Approx(wide.weights[i]).epsilon(1e-12));

  // A sparse list treats absent ids as zero utility.
  const CuratorDistribution sparse = osmd_step(wide, {{1, 0.4}});
  const CuratorDistribution dense = osmd_step(wide, {{0, 0.0}, {1, 0.4}, {2, 0.0}});
  for (int i = 0; i < 3; ++i) CHECK(sparse.weights[i] == doctest::Approx(dense.weights[i]).epsilon(1e-12));

  // The warm-up overload matches a curator whose eta is pre-scaled.
  CuratorDistribution half = wide;
  half.eta = wide.eta * 0.25;
  const CuratorDistribution scaled = osmd_step(wide, {{1, 0.4}}, 0.25);
  const CuratorDistribution direct = osmd_step(half, {{1, 0.4}});
  for (int i = 0; i < 3; ++i) CHECK(scaled.weights[i] == doctest::Approx(direct.weights[i]).epsilon(1e-12));
  CHECK(scaled.eta == wide.eta);  // the stored step size is untouched

  CHECK_THROWS_AS(osmd_step(wide, {{9, 0.1}}), std::out_of_range);
  CHECK_THROWS_AS(osmd_step(wide, {{1, 0.1}}, -1.0), std::invalid_argument);
}

TEST_CASE("curator construction and validation enforce the floored simplex") {
  const CuratorDistribution u = CuratorDistribution::uniform(5, 0.01, 3.0);
  CHECK(u.size() == 5);
  CHECK(u.alpha == 0.01);
  CHECK(u.eta == 3.0);
  for (double w : u.weights) CHECK(w == doctest::Approx(0.2).epsilon(1e-12));
  u.validate();

  CuratorDistribution bad = u;
  bad.eta = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = u;
  bad.alpha = 0.5;  // alpha * size > 1
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = u;
  bad.weights[0] = 0.1;  // breaks normalization
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = u;
  bad.weights = {0.2, 0.2, 0.2, 0.2, 0.0};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  CHECK_THROWS_AS(CuratorDistribution::uniform(0, 0.0, 1.0), std::invalid_argument);
}

TEST_CASE("curator state round-trips through disk") {
  CuratorDistribution curator = CuratorDistribution::uniform(4, 0.02, 7.5);
  curator = osmd_step(curator, {{2, 1.3}, {0, -0.4}});
  curator.overflow_clips = 3;
  const std::string path = temp_path("cursim_test_curator.json");
  save_curator(curator, path);
  const CuratorDistribution back = load_curator(path);
  std::remove(path.c_str());
  REQUIRE(back.size() == curator.size());
  for (int i = 0; i < curator.size(); ++i) CHECK(back.weights[i] == doctest::Approx(curator.weights[i]).epsilon(1e-15));
  CHECK(back.alpha == curator.alpha);
  CHECK(back.eta == curator.eta);
  CHECK(back.utility_cap == curator.utility_cap);
  CHECK(back.overflow_clips == 3);
}
