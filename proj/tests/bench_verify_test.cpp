#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include <bmf/bmf.hpp>

#include "support/bench_verify.hpp"

namespace {

using namespace bmf;
using namespace bmf::verify;

FactorModel random_small_model(std::mt19937_64& gen, int k) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  FactorModel m(2, 2, k);
  for (auto xs : {m.user_factors(), m.item_factors(), m.user_biases(), m.item_biases()})
    for (double& x : xs) x = d(gen);
  return m;
}

bool close(double a, double b, double rel) {
  return std::abs(a - b) <= rel * std::max({std::abs(a), std::abs(b), 1e-3});
}

TEST(FdGradient, MatchesKernelOnRandomModels) {
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> rating(-3.0, 3.0);
  for (int t = 0; t < 100; ++t) {
    const int k = 1 + t % 3;
    const FactorModel m = random_small_model(gen, k);
    const Rating r{static_cast<index_t>(t % 2), static_cast<index_t>((t / 2) % 2), rating(gen)};
    const auto fd = fd_gradient(r, m, 1e-6);
    const auto g = gradient_single(r, m);
    for (int f = 0; f < k; ++f) {
      EXPECT_TRUE(close(fd.d_p[f], g.d_p[f], 1e-5)) << fd.d_p[f] << " vs " << g.d_p[f];
      EXPECT_TRUE(close(fd.d_q[f], g.d_q[f], 1e-5)) << fd.d_q[f] << " vs " << g.d_q[f];
    }
    EXPECT_TRUE(close(fd.d_bu, g.d_bu, 1e-5));
    EXPECT_TRUE(close(fd.d_bi, g.d_bi, 1e-5));
  }
}

TEST(FdGradient, CoarseAndFineStepsAgree) {
  std::mt19937_64 gen(7);
  for (int t = 0; t < 20; ++t) {
    const FactorModel m = random_small_model(gen, 2);
    const Rating r{0, 1, 2.5};
    const auto coarse = fd_gradient(r, m, 1e-2);
    const auto fine = fd_gradient(r, m, 1e-6);
    for (int f = 0; f < 2; ++f) {
      EXPECT_TRUE(close(coarse.d_p[f], fine.d_p[f], 1e-4));
      EXPECT_TRUE(close(coarse.d_q[f], fine.d_q[f], 1e-4));
    }
    EXPECT_TRUE(close(coarse.d_bu, fine.d_bu, 1e-4));
  }
}

TEST(FdGradient, ZeroErrorGivesZeroDifferences) {
  FactorModel m(1, 1, 2);
  m.p(0)[0] = 0.3;
  m.p(0)[1] = -0.2;
  m.q(0)[0] = 0.5;
  m.q(0)[1] = 0.25;
  m.bu(0) = 0.1;
  m.bi(0) = -0.4;
  const Rating r{0, 0, oracle_predict(m, 0, 0, true)};
  const auto fd = fd_gradient(r, m, 1e-6);
  for (int f = 0; f < 2; ++f) {
    EXPECT_NEAR(fd.d_p[f], 0.0, 1e-10);
    EXPECT_NEAR(fd.d_q[f], 0.0, 1e-10);
  }
  EXPECT_NEAR(fd.d_bu, 0.0, 1e-10);
  EXPECT_NEAR(fd.d_bi, 0.0, 1e-10);
}

TEST(ScheduleCheck, WavefrontPassesEveryGridUpToTwelve) {
  for (std::size_t i = 1; i <= 12; ++i) {
    for (std::size_t j = 1; j <= 12; ++j) {
      const auto c = exhaustive_schedule_check(wavefront(i, j), i, j);
      EXPECT_TRUE(c.ok) << i << "x" << j << ": " << c.message;
    }
  }
  const auto one = wavefront(1, 1);
  EXPECT_TRUE(exhaustive_schedule_check(one, 1, 1).ok);
  EXPECT_EQ(one.steps.size(), 1u);
}

TEST(ScheduleCheck, CorruptedSchedulesFail) {
  auto dup = wavefront(4, 4);
  dup.steps[2].push_back(dup.steps[0][1]);  // repeated block, also a shared row
  auto c = exhaustive_schedule_check(dup, 4, 4);
  EXPECT_FALSE(c.ok);
  ASSERT_TRUE(c.violating_step.has_value());
  EXPECT_EQ(*c.violating_step, 2u);

  auto missing = wavefront(3, 3);
  missing.steps[1].pop_back();
  c = exhaustive_schedule_check(missing, 3, 3);
  EXPECT_FALSE(c.ok);
  EXPECT_FALSE(c.violating_step.has_value());

  Schedule same_row{{{{0, 0}, {0, 1}}, {{1, 0}, {1, 1}}}};
  c = exhaustive_schedule_check(same_row, 2, 2);
  EXPECT_FALSE(c.ok);
  EXPECT_EQ(*c.violating_step, 0u);
}

TEST(Synthetic, RatingsAreTruthExactlyWithoutNoise) {
  const auto p = make_synthetic(15, 12, 2, 0.4, 0.0, 3);
  for (const auto& r : p.ratings.entries()) {
    EXPECT_EQ(r.value, oracle_predict(p.truth, r.user, r.item, true));
  }
  std::vector<int> rows(15), cols(12);
  for (const auto& r : p.ratings.entries()) ++rows[r.user], ++cols[r.item];
  for (int c : rows) EXPECT_GT(c, 0);
  for (int c : cols) EXPECT_GT(c, 0);
}

TEST(Synthetic, ZeroRankRejected) {
  EXPECT_THROW(make_synthetic(5, 5, 0, 0.5, 0.0, 1), config_error);
  Hyperparams hp;
  hp.k = 0;
  EXPECT_THROW(hp.validate(), config_error);
}

TrainConfig recovery_config() {
  TrainConfig cfg;
  cfg.hp.alpha = RoleValues::uniform(0.01);
  cfg.hp.beta = RoleValues::uniform(0.0);
  cfg.hp.k = 2;
  cfg.hp.max_steps = 5000;
  cfg.hp.delta = 0.0;
  cfg.hp.seed = 1;
  return cfg;
}

TEST(Synthetic, RecoveredSerialOneByOne) {
  const auto p = make_synthetic(20, 20, 2, 0.5, 0.0, 21);
  EXPECT_LT(recover_synthetic(p, recovery_config()), 0.05);
}

TEST(Synthetic, RecoveredParallelTwoByTwo) {
  const auto p = make_synthetic(20, 20, 2, 0.5, 0.0, 21);
  TrainConfig cfg = recovery_config();
  cfg.row_blocks = cfg.col_blocks = 2;
  cfg.mode = ExecutionMode::parallel;
  cfg.workers = 2;
  EXPECT_LT(recover_synthetic(p, cfg), 0.05);
}

TEST(ReferenceSgd, OneByOneGridIsBitIdentical) {
  const auto p = make_synthetic(50, 50, 2, 0.3, 0.1, 31);
  TrainConfig cfg;
  cfg.hp = Hyperparams::svd_defaults();
  cfg.hp.k = 3;
  cfg.hp.max_steps = 10;
  cfg.hp.delta = 0.0;
  const auto res = train(p.ratings, cfg);
  ASSERT_EQ(res.report.epochs.size(), 10u);
  FactorModel ref = init_model(50, 50, cfg.hp);
  reference_sgd(p.ratings, ref, cfg.hp, 10);
  EXPECT_EQ(res.model, ref);
}

}  // namespace
