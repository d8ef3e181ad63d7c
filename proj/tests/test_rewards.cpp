#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "dirgrpo/kernels.hpp"
#include "dirgrpo/rewards.hpp"

namespace {

using namespace dirgrpo;
using Vec = std::vector<double>;

// Textbook two-pass population CCC, coded independently of the library.
double naive_ccc(const Vec& q, const Vec& y) {
  const double n = static_cast<double>(q.size());
  double mq = 0, my = 0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    mq += q[i];
    my += y[i];
  }
  mq /= n;
  my /= n;
  double vq = 0, vy = 0, c = 0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    vq += (q[i] - mq) * (q[i] - mq);
    vy += (y[i] - my) * (y[i] - my);
    c += (q[i] - mq) * (y[i] - my);
  }
  return 2 * (c / n) / (vq / n + vy / n + (mq - my) * (mq - my));
}

Vec random_vec(std::mt19937_64& rng, std::size_t n, double scale = 10.0) {
  std::normal_distribution<double> g(0.0, scale);
  Vec v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

GenerationGroup group(std::int64_t id, std::vector<std::optional<double>> vals) { return {id, std::move(vals)}; }

RewardConfig cfg_of(RewardKind k) {
  RewardConfig c;
  c.kind = k;
  return c;
}

// ---------------------------------------------------------------------------

TEST(Ccc, KnownValues) {
  EXPECT_EQ(ccc(Vec{1, 5, 9}, Vec{1, 5, 9}), 1.0);
  EXPECT_EQ(ccc(Vec{3, 3, 3}, Vec{1, 2, 3}), 0.0);
  EXPECT_NEAR(ccc(Vec{1, 2, 3}, Vec{2, 4, 6}), 8.0 / 22.0, 1e-12);
  // 60/61 from exact rational arithmetic
  EXPECT_NEAR(ccc(Vec{11, 22, 29}, Vec{10, 20, 30}), 60.0 / 61.0, 1e-12);
}

TEST(Ccc, DegenerateDenominator) {
  EXPECT_EQ(ccc(Vec{4, 4}, Vec{4, 4}), 1.0);
  EXPECT_EQ(ccc(Vec{4, 4}, Vec{5, 5}), 0.0);
  EXPECT_THROW(ccc(Vec{1}, Vec{1}), std::invalid_argument);
  EXPECT_THROW(ccc(Vec{1, 2}, Vec{1, 2, 3}), std::invalid_argument);
}

TEST(Ccc, MatchesNaiveOracle) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 2 + t % 15;
    const auto q = random_vec(rng, n), y = random_vec(rng, n);
    EXPECT_NEAR(ccc(q, y), naive_ccc(q, y), 1e-12);
  }
}

TEST(CccProperty, BoundsSymmetryAffineAndPearson) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> ua(0.1, 5.0), ub(-20, 20);
  for (int t = 0; t < 2000; ++t) {
    const std::size_t n = 2 + t % 17;
    const auto q = random_vec(rng, n), y = random_vec(rng, n);
    const double c = ccc(q, y);
    EXPECT_GE(c, -1.0);
    EXPECT_LE(c, 1.0);
    EXPECT_EQ(c, ccc(y, q));
    const double a = ua(rng), b = ub(rng);
    Vec qa(q), ya(y);
    for (auto& x : qa) x = a * x + b;
    for (auto& x : ya) x = a * x + b;
    EXPECT_NEAR(ccc(qa, ya), c, 1e-9);
    if (const auto r = pearson(q, y)) {
      EXPECT_LE(std::abs(c), std::abs(*r) + 1e-12);
    }
  }
}

TEST(CccProperty, ConstantPredictorScoresZero) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-50, 50);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 2 + t % 16;
    auto y = random_vec(rng, n);
    y[0] += 1.0;  // guarantees positive variance
    const Vec q(n, u(rng));
    EXPECT_EQ(ccc(q, y), 0.0);
  }
}

TEST(Spearman, KnownValues) {
  EXPECT_NEAR(spearman(Vec{1, 2, 3}, Vec{3, 1, 2}), -0.5, 1e-12);
  EXPECT_EQ(spearman(Vec{5, 5, 5}, Vec{1, 2, 3}), 0.0);
  EXPECT_NEAR(spearman(Vec{1, 2, 3, 4}, Vec{10, 20, 30, 40}), 1.0, 1e-12);
  EXPECT_EQ(fractional_ranks(Vec{5, 1, 5, 3}), (Vec{3.5, 1, 3.5, 2}));
}

TEST(SpearmanProperty, BoundsAndMonotoneTransform) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 2 + t % 12;
    auto q = random_vec(rng, n), y = random_vec(rng, n);
    if (t % 3 == 0) {
      for (auto& x : q) x = std::round(x / 5.0);  // ties
    }
    const double s = spearman(q, y);
    EXPECT_GE(s, -1.0 - 1e-12);
    EXPECT_LE(s, 1.0 + 1e-12);
    EXPECT_EQ(s, spearman(y, q));
    Vec ty(y);
    for (auto& x : ty) x = std::exp(x / 10.0) + 3.0;
    EXPECT_NEAR(spearman(y, ty), 1.0, 1e-12);
  }
}

// ---------------------------------------------------------------------------

TEST(ComparisonPair, ThreeSampleBatch) {
  const std::vector<GenerationGroup> batch{group(0, {10.0, 12.0}), group(1, {22.0, 18.0}), group(2, {28.0, 30.0})};
  const Vec targets{10, 20, 30};
  const auto p = build_comparison_pair(batch, targets, 1, 0);
  EXPECT_EQ(p.q, (Vec{11, 22, 29}));
  EXPECT_EQ(p.y, (Vec{10, 20, 30}));
  EXPECT_EQ(p.focus, 1u);
  const auto r = ccc_reward(batch, targets, 1, 0, cfg_of(RewardKind::CCC));
  EXPECT_NEAR(r, 60.0 / 61.0 + 0.5, 1e-12);
}

TEST(ComparisonPair, TwoSampleBatch) {
  const std::vector<GenerationGroup> batch{group(0, {5.0}), group(1, {6.0, 8.0})};
  const auto p = build_comparison_pair(batch, Vec{4, 8}, 0, 0);
  EXPECT_EQ(p.q, (Vec{5, 7}));
  EXPECT_EQ(p.y, (Vec{4, 8}));
  EXPECT_EQ(p.focus, 0u);
}

TEST(ComparisonPair, PeerMeanIgnoresInvalid) {
  const std::vector<GenerationGroup> batch{group(0, {5.0}), group(1, {std::nullopt, 9.0, std::nullopt, 3.0})};
  EXPECT_EQ(batch[1].valid_count, 2);
  EXPECT_EQ(build_comparison_pair(batch, Vec{4, 8}, 0, 0).q, (Vec{5, 6}));
}

TEST(ComparisonPair, Preconditions) {
  const std::vector<GenerationGroup> one{group(0, {5.0})};
  EXPECT_THROW(build_comparison_pair(one, Vec{4}, 0, 0), std::invalid_argument);
  const std::vector<GenerationGroup> bad_peer{group(0, {5.0}), group(1, {std::nullopt, std::nullopt})};
  try {
    build_comparison_pair(bad_peer, Vec{4, 8}, 0, 0);
    FAIL() << "expected PeerAllInvalid";
  } catch (const PeerAllInvalid& e) {
    EXPECT_EQ(e.peer(), 1u);
  }
  const std::vector<GenerationGroup> invalid_focus{group(0, {std::nullopt}), group(1, {1.0})};
  EXPECT_THROW(build_comparison_pair(invalid_focus, Vec{4, 8}, 0, 0), std::invalid_argument);
  EXPECT_THROW(build_comparison_pair(invalid_focus, Vec{4, 8}, 2, 0), std::out_of_range);
  EXPECT_THROW(build_comparison_pair(invalid_focus, Vec{4, 8}, 1, 3), std::out_of_range);
  EXPECT_THROW(GenerationGroup(0, {}), std::invalid_argument);
}

// ---------------------------------------------------------------------------

TEST(BatchRewards, PerfectPredictionsEarnOnePointFive) {
  const std::vector<GenerationGroup> batch{group(0, {10.0, 10.0}), group(1, {20.0, 20.0}), group(2, {30.0, 30.0})};
  const RewardModel model{cfg_of(RewardKind::CCC), {}};
  const std::vector<int> bins{0, 0, 0};
  const auto out = compute_batch_rewards(model, batch, Vec{10, 20, 30}, bins);
  for (const auto& row : out.rewards) {
    for (double r : row) EXPECT_EQ(r, 1.5);
  }
  EXPECT_EQ(out.degraded, 0);
}

TEST(BatchRewards, InvalidTrajectoryEarnsZero) {
  const std::vector<GenerationGroup> batch{group(0, {std::nullopt, 10.0}), group(1, {20.0})};
  for (auto k : {RewardKind::CCC, RewardKind::Spearman, RewardKind::PairRank, RewardKind::MAE, RewardKind::DiscoMAE}) {
    const RewardModel model{cfg_of(k), {5, 5}};
    const std::vector<int> bins{0, 1};
    EXPECT_EQ(model(batch, Vec{10, 20}, bins, 0, 0).value, 0.0) << reward_kind_name(k);
  }
}

TEST(BatchRewards, PairRank) {
  const auto cfg = cfg_of(RewardKind::PairRank);
  const Vec targets{10, 20, 30};
  const std::vector<GenerationGroup> ordered{group(0, {1.0}), group(1, {2.0}), group(2, {3.0})};
  EXPECT_EQ(pair_rank_reward(ordered, targets, 1, 0, cfg), 1.5);
  const std::vector<GenerationGroup> inverted{group(0, {3.0}), group(1, {2.0}), group(2, {1.0})};
  EXPECT_EQ(pair_rank_reward(inverted, targets, 1, 0, cfg), 0.5);
  // focus above the first peer (agrees) and above the second (disagrees)
  const std::vector<GenerationGroup> half{group(0, {1.0}), group(1, {5.0}), group(2, {3.0})};
  EXPECT_EQ(pair_rank_reward(half, targets, 1, 0, cfg), 1.0);
}

TEST(BatchRewards, SpearmanReward) {
  const std::vector<GenerationGroup> batch{group(0, {3.0}), group(1, {1.0}), group(2, {2.0})};
  EXPECT_NEAR(spearman_reward(batch, Vec{1, 2, 3}, 0, 0, cfg_of(RewardKind::Spearman)), 0.0, 1e-12);
}

TEST(BatchRewards, DegradedFallbackToMae) {
  const std::vector<GenerationGroup> batch{group(0, {30.0}), group(1, {std::nullopt})};
  const auto out = ccc_reward_outcome(batch, Vec{50, 20}, 0, 0, cfg_of(RewardKind::CCC));
  EXPECT_TRUE(out.degraded);
  EXPECT_NEAR(out.value, 0.8 + 0.5, 1e-12);

  // one dropped peer, two entries remain: not degraded
  const std::vector<GenerationGroup> three{group(0, {30.0}), group(1, {std::nullopt}), group(2, {10.0})};
  const auto kept = ccc_reward_outcome(three, Vec{50, 20, 10}, 0, 0, cfg_of(RewardKind::CCC));
  EXPECT_FALSE(kept.degraded);
  EXPECT_NEAR(kept.value, naive_ccc({30, 10}, {50, 10}) + 0.5, 1e-12);

  const RewardModel model{cfg_of(RewardKind::CCC), {}};
  const std::vector<int> bins{0, 0};
  EXPECT_EQ(compute_batch_rewards(model, batch, Vec{50, 20}, bins).degraded, 1);
}

TEST(BatchRewardProperty, PermutationInvariance) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 100);
  std::bernoulli_distribution invalid(0.15);
  std::vector<std::size_t> perm{0, 1, 2, 3};
  for (int t = 0; t < 60; ++t) {
    std::vector<GenerationGroup> batch;
    Vec targets;
    for (int j = 0; j < 4; ++j) {
      std::vector<std::optional<double>> vals;
      for (int k = 0; k < 3; ++k) vals.push_back(invalid(rng) ? std::nullopt : std::optional<double>(u(rng)));
      batch.push_back(group(j, vals));
      targets.push_back(u(rng));
    }
    std::sort(perm.begin(), perm.end());
    do {  // exhaustive over 4! orders
      std::vector<GenerationGroup> pb;
      Vec pt;
      for (auto j : perm) {
        pb.push_back(batch[j]);
        pt.push_back(targets[j]);
      }
      for (auto kind : {RewardKind::CCC, RewardKind::Spearman, RewardKind::PairRank}) {
        const RewardModel m{cfg_of(kind), {}};
        const std::vector<int> bins(4, 0);
        for (std::size_t pos = 0; pos < 4; ++pos) {
          for (std::size_t k = 0; k < 3; ++k) {
            const auto a = m(batch, targets, bins, perm[pos], k);
            const auto b = m(pb, pt, bins, pos, k);
            ASSERT_NEAR(a.value, b.value, 1e-12) << reward_kind_name(kind);
            ASSERT_EQ(a.degraded, b.degraded);
          }
        }
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
}

TEST(BatchRewardProperty, PureAndBitIdentical) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0, 100);
  for (int t = 0; t < 1000; ++t) {
    std::vector<GenerationGroup> batch;
    Vec targets;
    for (int j = 0; j < 5; ++j) {
      batch.push_back(group(j, {u(rng), u(rng)}));
      targets.push_back(u(rng));
    }
    const auto cfg = cfg_of(RewardKind::CCC);
    const double a = ccc_reward(batch, targets, t % 5, t % 2, cfg);
    const double b = ccc_reward(batch, targets, t % 5, t % 2, cfg);
    ASSERT_EQ(std::memcmp(&a, &b, sizeof a), 0);
  }
}

// ---------------------------------------------------------------------------

TEST(MaeReward, Examples) {
  const auto cfg = cfg_of(RewardKind::MAE);
  EXPECT_EQ(mae_reward(50.0, 50.0, cfg), 1.5);
  EXPECT_EQ(mae_reward(100.0, 0.0, cfg), 0.5);
  EXPECT_NEAR(mae_reward(30.0, 50.0, cfg), 1.3, 1e-12);
  EXPECT_EQ(mae_reward(std::nullopt, 50.0, cfg), 0.0);
  EXPECT_EQ(mae_reward_core(250.0, 0.0, 100.0), 0.0);
}

TEST(MaeReward, NonIncreasingInError) {
  const auto cfg = cfg_of(RewardKind::MAE);
  double prev = std::numeric_limits<double>::infinity();
  for (double e = 0; e <= 150; e += 0.5) {
    const double r = mae_reward(40.0 + e, 40.0, cfg);
    EXPECT_LE(r, prev);
    prev = r;
  }
}

TEST(DiscoReward, Weights) {
  EXPECT_EQ(disco_weight(353, 353, 0.5, 10), 1.0);
  EXPECT_EQ(disco_weight(1, 353, 0.5, 10), 10.0);
  EXPECT_EQ(disco_weight(25, 100, 0.5, 10), 2.0);
  EXPECT_EQ(disco_weight(0, 100, 0.5, 100), 10.0);
  double prev = std::numeric_limits<double>::infinity();
  for (int n = 0; n <= 353; ++n) {
    const double w = disco_weight(n, 353, 0.5, 10);
    EXPECT_LE(w, prev);
    prev = w;
  }
}

TEST(DiscoReward, HeadBinReducesToMae) {
  auto cfg = cfg_of(RewardKind::DiscoMAE);
  const std::vector<int> counts{100, 25, 1};
  EXPECT_EQ(disco_mae_reward(30.0, 50.0, 0, counts, cfg), mae_reward(30.0, 50.0, cfg));
  EXPECT_NEAR(disco_mae_reward(30.0, 50.0, 1, counts, cfg), 2.0 * 0.8 + 0.5, 1e-12);
  cfg.disco_weight_format = true;
  EXPECT_NEAR(disco_mae_reward(30.0, 50.0, 1, counts, cfg), 2.0 * 1.3, 1e-12);
  EXPECT_EQ(disco_mae_reward(std::nullopt, 50.0, 1, counts, cfg), 0.0);
  EXPECT_THROW(disco_mae_reward(30.0, 50.0, 3, counts, cfg), std::out_of_range);
}

TEST(RewardConfig, ParseAndValidate) {
  EXPECT_EQ(parse_reward_kind("ccc"), RewardKind::CCC);
  EXPECT_EQ(parse_reward_kind("disco_mae"), RewardKind::DiscoMAE);
  EXPECT_THROW(parse_reward_kind("huber"), ConfigError);
  RewardConfig c;
  c.format_c = 0;
  EXPECT_THROW(validate(c), ConfigError);
  c = RewardConfig{};
  c.range = -1;
  EXPECT_THROW(validate(c), ConfigError);
}

// ---------------------------------------------------------------------------

TEST(FlatKernels, MatchGroupedPath) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0, 100);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 2 + t % 6;
    Vec means(n), targets(n);
    std::vector<GenerationGroup> batch;
    const std::size_t focus = t % n;
    const double fv = u(rng);
    for (std::size_t j = 0; j < n; ++j) {
      means[j] = u(rng);
      targets[j] = u(rng);
      batch.push_back(group(static_cast<std::int64_t>(j), {j == focus ? fv : means[j]}));
    }
    RewardConfig cfg;
    EXPECT_EQ(kernels::batch_ccc_reward(means, targets, fv, focus, cfg), ccc_reward(batch, targets, focus, 0, cfg));
    EXPECT_EQ(kernels::spearman_reward(means, targets, fv, focus, cfg),
              spearman_reward(batch, targets, focus, 0, cfg));
    EXPECT_EQ(kernels::pair_rank_reward(means, targets, fv, focus, cfg),
              pair_rank_reward(batch, targets, focus, 0, cfg));
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  RewardConfig cfg;
  const auto out = kernels::reward_from_means(Vec{0, nan}, Vec{50, 20}, 30.0, 0, cfg);
  EXPECT_TRUE(out.degraded);
  EXPECT_EQ(kernels::batch_ccc_reward(Vec{0, 7}, Vec{4, 8}, std::nullopt, 0, cfg), 0.0);
  cfg.kind = RewardKind::MAE;
  EXPECT_THROW(kernels::reward_from_means(Vec{0, 7}, Vec{4, 8}, 5.0, 0, cfg), std::invalid_argument);
}

}  // namespace
