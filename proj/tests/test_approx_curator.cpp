#include <cmath>
#include <cstdio>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"

#include "cursim/approx_curator.hpp"
#include "cursim/problem_bank.hpp"
#include "cursim/rng.hpp"

using namespace cursim;

namespace {

ProblemBank test_bank() {
  BankSpec spec;
  spec.size = 10;
  spec.answer_count = 3;
  spec.structure = BankStructure::independent;
  spec.difficulty_law = DifficultyLaw::linear_ramp;
  spec.bucket_count = 2;
  spec.seed = 4242;
  return generate_bank(spec);
}

CuratorBatchFeedback test_feedback() {
  CuratorBatchFeedback fb;
  fb.candidate_ids = {1, 3, 4, 7};
  fb.old_cond_p = {0.25, 0.25, 0.25, 0.25};
  fb.selected = {1, 0, 1, 0};
  fb.g = {0.6, 0.0, -0.3, 0.0};
  fb.q = {0.4, 0.4, 0.4, 0.4};
  return fb;
}

CuratorParams random_params(const ProblemBank& bank, std::uint64_t seed) {
  CuratorParams p = CuratorParams::zero(bank.feature_dim());
  Rng rng = Rng::substream(5100, seed);
  for (double& t : p.theta) t = 0.5 * rng.normal();
  p.eta = 2.0;
  return p;
}

std::vector<double> normalized_global(const ProblemBank& bank) {
  std::vector<double> p(bank.size());
  double total = 0.0;
  for (int i = 0; i < bank.size(); ++i) {
    p[i] = 1.0 + i;
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

using LossFn = double (*)(const CuratorParams&, const ProblemBank&, const CuratorBatchFeedback&);
using GradFn = std::vector<double> (*)(const CuratorParams&, const ProblemBank&, const CuratorBatchFeedback&);

void check_gradient(const CuratorParams& params, const ProblemBank& bank, const CuratorBatchFeedback& fb,
                    LossFn loss, GradFn grad) {
  const std::vector<double> g = grad(params, bank, fb);
  const double h = 1e-6;
  for (std::size_t d = 0; d < params.theta.size(); ++d) {
    CuratorParams hi = params;
    CuratorParams lo = params;
    hi.theta[d] += h;
    lo.theta[d] -= h;
    const double fd = (loss(hi, bank, fb) - loss(lo, bank, fb)) / (2.0 * h);
    CHECK(g[d] == doctest::Approx(fd).epsilon(1e-5).scale(1.0));
  }
}

}  // namespace

TEST_CASE("scores are linear in the features with a trailing bias") {
  const ProblemBank bank = test_bank();
  CuratorParams params = CuratorParams::zero(bank.feature_dim());
  REQUIRE(static_cast<int>(params.theta.size()) == bank.feature_dim() + 1);
  for (std::size_t d = 0; d < params.theta.size(); ++d) params.theta[d] = 0.1 * (1.0 + d);
  const Problem& pr = bank.problems[6];
  double expect = params.theta.back();
  for (std::size_t d = 0; d < pr.features.size(); ++d) expect += params.theta[d] * pr.features[d];
  CHECK(score(params, pr) == doctest::Approx(expect).epsilon(1e-12));
  CuratorParams narrow = CuratorParams::zero(2);
  CHECK_THROWS_AS(score(narrow, pr), std::invalid_argument);
}

TEST_CASE("zero parameters induce the uniform conditional and bias shifts cancel") {
  const ProblemBank bank = test_bank();
  const std::vector<int> ids = {0, 2, 5, 8, 9};
  const CuratorParams zero = CuratorParams::zero(bank.feature_dim());
  const std::vector<double> uniform = induced_conditional(zero, bank, ids);
  for (double p : uniform) CHECK(p == doctest::Approx(0.2).epsilon(1e-12));

  CuratorParams params = random_params(bank, 0);
  const std::vector<double> base = induced_conditional(params, bank, ids);
  params.theta.back() += 5.0;
  const std::vector<double> shifted = induced_conditional(params, bank, ids);
  for (std::size_t i = 0; i < ids.size(); ++i) CHECK(shifted[i] == doctest::Approx(base[i]).epsilon(1e-10));
}

TEST_CASE("the sampling prior multiplies the softmax weights before normalizing") {
  const ProblemBank bank = test_bank();
  const std::vector<int> ids = {1, 3, 4, 7};
  const std::vector<double> q = {0.1, 0.2, 0.3, 0.4};
  CuratorParams params = CuratorParams::zero(bank.feature_dim());
  params.sampling_prior = true;
  const std::vector<double> cond = induced_conditional(params, bank, ids, &q);
  for (std::size_t i = 0; i < ids.size(); ++i) CHECK(cond[i] == doctest::Approx(q[i]).epsilon(1e-12));
  CHECK_THROWS_AS(induced_conditional(params, bank, ids), std::invalid_argument);
}

TEST_CASE("at ratio one both losses reduce to the negative weighted payload sum") {
  const ProblemBank bank = test_bank();
  const CuratorBatchFeedback fb = test_feedback();
  CuratorParams params = CuratorParams::zero(bank.feature_dim());
  params.eta = 2.0;
  const double expect = -params.eta * (fb.g[0] + fb.g[2]);
  CHECK(surrogate_loss(params, bank, fb) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(clipped_loss(params, bank, fb) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("analytic gradients match central finite differences") {
  const ProblemBank bank = test_bank();
  CuratorBatchFeedback fb = test_feedback();

  SUBCASE("candidate-restricted divergence") {
    check_gradient(random_params(bank, 1), bank, fb, &surrogate_loss, &surrogate_gradient);
  }
  SUBCASE("full-bank divergence") {
    CuratorParams params = random_params(bank, 2);
    params.kl_global = true;
    fb.old_global_p = normalized_global(bank);
    check_gradient(params, bank, fb, &surrogate_loss, &surrogate_gradient);
  }
  SUBCASE("clipped objective") {
    check_gradient(random_params(bank, 3), bank, fb, &clipped_loss, &clipped_gradient);
  }
  SUBCASE("sampling prior in the conditional") {
    CuratorParams params = random_params(bank, 4);
    params.sampling_prior = true;
    check_gradient(params, bank, fb, &surrogate_loss, &surrogate_gradient);
  }
}

TEST_CASE("gradient descent lowers the training loss and a zero rate freezes it") {
  const ProblemBank bank = test_bank();
  const CuratorBatchFeedback fb = test_feedback();
  CuratorParams params = random_params(bank, 5);
  params.optimizer_lr = 0.05;
  params.epochs_per_step = 20;

  const double before = surrogate_loss(params, bank, fb);
  const CuratorUpdateResult res = curator_update(params, bank, fb, CuratorLoss::surrogate);
  CHECK(res.final_loss < before);
  CHECK(res.final_loss == doctest::Approx(surrogate_loss(res.params, bank, fb)).epsilon(1e-12));
  CHECK(res.grad_norm >= 0.0);

  const CuratorUpdateResult frozen = curator_update(params, bank, fb, CuratorLoss::clipped, 0.0);
  for (std::size_t d = 0; d < params.theta.size(); ++d) CHECK(frozen.params.theta[d] == params.theta[d]);
  CHECK_THROWS_AS(curator_update(params, bank, fb, CuratorLoss::clipped, -0.5), std::invalid_argument);
}

TEST_CASE("parameter and feedback validation reject malformed shapes") {
  const ProblemBank bank = test_bank();
  CHECK_THROWS_AS(CuratorParams::zero(0), std::invalid_argument);
  CuratorParams params = CuratorParams::zero(bank.feature_dim());
  params.validate();
  CuratorParams bad = params;
  bad.eta = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = params;
  bad.clip_low = 1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = params;
  bad.clip_high = 0.9;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = params;
  bad.optimizer_lr = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = params;
  bad.epochs_per_step = -1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  CuratorBatchFeedback fb = test_feedback();
  fb.validate(bank.size());
  CuratorBatchFeedback broken = fb;
  broken.candidate_ids.clear();
  broken.old_cond_p.clear();
  broken.selected.clear();
  broken.g.clear();
  broken.q.clear();
  CHECK_THROWS_AS(broken.validate(bank.size()), std::invalid_argument);
  broken = fb;
  broken.q.pop_back();
  CHECK_THROWS_AS(broken.validate(bank.size()), std::invalid_argument);
  broken = fb;
  broken.candidate_ids[0] = bank.size();
  CHECK_THROWS_AS(broken.validate(bank.size()), std::out_of_range);
  broken = fb;
  broken.old_cond_p[1] = 0.0;
  CHECK_THROWS_AS(broken.validate(bank.size()), std::invalid_argument);
  broken = fb;
  broken.q[2] = 1.5;
  CHECK_THROWS_AS(broken.validate(bank.size()), std::invalid_argument);
  broken = fb;
  broken.g[1] = 0.2;  // unselected candidate
  CHECK_THROWS_AS(broken.validate(bank.size()), std::invalid_argument);
}

TEST_CASE("curator parameters round-trip through disk") {
  const ProblemBank bank = test_bank();
  CuratorParams params = random_params(bank, 6);
  params.clip_low = 0.7;
  params.clip_high = 1.4;
  params.optimizer_lr = 0.02;
  params.epochs_per_step = 7;
  params.sampling_prior = true;
  params.kl_global = true;
  const std::string path = (std::filesystem::temp_directory_path() / "cursim_test_approx.json").string();
  save_curator_params(params, path);
  const CuratorParams back = load_curator_params(path);
  std::remove(path.c_str());
  REQUIRE(back.theta.size() == params.theta.size());
  for (std::size_t d = 0; d < params.theta.size(); ++d) CHECK(back.theta[d] == params.theta[d]);
  CHECK(back.eta == params.eta);
  CHECK(back.clip_low == params.clip_low);
  CHECK(back.clip_high == params.clip_high);
  CHECK(back.optimizer_lr == params.optimizer_lr);
  CHECK(back.epochs_per_step == params.epochs_per_step);
  CHECK(back.sampling_prior == params.sampling_prior);
  CHECK(back.kl_global == params.kl_global);
}
