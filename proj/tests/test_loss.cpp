#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "fragvqa/loss.hpp"
#include "oracles.hpp"

using namespace fragvqa;

TEST(Mae, HandExample) {
  const std::vector<double> p{1, 2}, t{0, 2};
  EXPECT_DOUBLE_EQ(mae_loss(p, t), 0.5);
}

TEST(Mae, SubgradientAtZeroIsZero) {
  const std::vector<double> p{1, 2, 3}, t{1, 1, 4};
  const auto g = mae_grad(p, t);
  EXPECT_EQ(g[0], 0.0);
  EXPECT_DOUBLE_EQ(g[1], 1.0 / 3);
  EXPECT_DOUBLE_EQ(g[2], -1.0 / 3);
}

TEST(RankLoss, HandExample) {
  const std::vector<double> p{0.5, 0.0}, t{1.0, 0.0};
  EXPECT_DOUBLE_EQ(rank_loss(p, t), 0.25);
}

TEST(RankLoss, CorrectOrderWithEnoughGapIsZero) {
  const std::vector<double> t{1, 2, 3, 4};
  const std::vector<double> p{10, 20, 30, 40};
  EXPECT_EQ(rank_loss(p, t), 0.0);
}

TEST(RankLoss, ConstantInputsAreZero) {
  const std::vector<double> c(5, 3.25);
  EXPECT_EQ(rank_loss(c, c), 0.0);
}

TEST(RankLoss, MarginDropsSmallGaps) {
  const std::vector<double> p{0.0, 0.0, 0.0}, t{0.0, 0.1, 2.0};
  const double full = rank_loss(p, t);
  const double with_margin = rank_loss(p, t, 0.5);
  EXPECT_GT(full, with_margin);
  // Only the pairs touching t = 2.0 survive: 4 ordered pairs with gaps 2.0, 2.0, 1.9, 1.9.
  EXPECT_DOUBLE_EQ(with_margin, (2.0 + 2.0 + 1.9 + 1.9) / 9.0);
}

TEST(RankLoss, TranslationInvariantForRepresentableValues) {
  // Values on a dyadic grid keep every difference exact, so the shift changes nothing.
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> d(-64, 64);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> p(12), t(12);
    for (auto& v : p) v = d(rng) / 8.0;
    for (auto& v : t) v = d(rng) / 16.0;
    const double c = d(rng) / 4.0;
    auto q = p;
    for (auto& v : q) v += c;
    EXPECT_EQ(rank_loss(p, t), rank_loss(q, t));
  }
}

TEST(RankLoss, MatchesOracle) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng() % 40;
    std::vector<double> p(n), t(n);
    for (auto& v : p) v = u(rng);
    for (auto& v : t) v = std::round(u(rng) * 2) / 2;  // ties in the targets
    EXPECT_NEAR(rank_loss(p, t), oracle::rank(p, t), 1e-12);
    EXPECT_NEAR(mae_loss(p, t), oracle::mae(p, t), 1e-12);
    EXPECT_NEAR(rank_loss(p, t, 0.75), oracle::rank(p, t, 0.75), 1e-12);
  }
}

TEST(Composite, DefaultWeights) {
  const std::vector<double> p{1, 2}, t{0, 2};
  // MAE 0.5; rank: pair (0,1): max(0, 2 - (-1)(1 - 2)) = 1, pair (1,0): max(0, 2 - (2 - 1)) = 1 -> 2/4.
  EXPECT_DOUBLE_EQ(rank_loss(p, t), 0.5);
  EXPECT_DOUBLE_EQ(composite_loss(p, t, LossWeights{}), 0.6 * 0.5 + 1.0 * 0.5);
  const std::vector<double> p2{0.5, 0.0}, t2{1.0, 0.0};
  // MAE (0.5 + 0) / 2 = 0.25 -> 0.6 * 0.25 + 0.25
  EXPECT_DOUBLE_EQ(composite_loss(p2, t2, LossWeights{}), 0.4);
  // MAE 0.5 and rank 0.25 together.
  const std::vector<double> p3{0.25, -0.25};
  EXPECT_DOUBLE_EQ(mae_loss(p3, t2), 0.5);
  EXPECT_DOUBLE_EQ(rank_loss(p3, t2), 0.25);
  EXPECT_DOUBLE_EQ(composite_loss(p3, t2, LossWeights{}), 0.55);
}

TEST(Composite, GradientIsLinearInWeights) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 5);
  std::vector<double> p(20), t(20);
  for (auto& v : p) v = u(rng);
  for (auto& v : t) v = u(rng);
  const auto gm = composite_loss_grad(p, t, {1.0, 0.0, 0.0}).grad;
  const auto gr = composite_loss_grad(p, t, {0.0, 1.0, 0.0}).grad;
  const auto gc = composite_loss_grad(p, t, {0.6, 2.5, 0.0}).grad;
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(gc[i], 0.6 * gm[i] + 2.5 * gr[i], 1e-15);
}

TEST(Composite, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0, 5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> p(16), t(16);
    for (auto& v : p) v = u(rng);
    for (auto& v : t) v = u(rng);
    const auto g = composite_loss_grad(p, t, {0.6, 1.0, 0.0}).grad;
    const double eps = 1e-7;
    for (std::size_t i = 0; i < p.size(); ++i) {
      auto hi = p, lo = p;
      hi[i] += eps;
      lo[i] -= eps;
      const double fd = (oracle::composite(hi, t, 0.6, 1.0) - oracle::composite(lo, t, 0.6, 1.0)) / (2 * eps);
      EXPECT_NEAR(g[i], fd, 1e-6) << "trial " << trial << " index " << i;
    }
  }
}

TEST(Loss, RejectsMismatchedOrEmpty) {
  const std::vector<double> a{1, 2}, b{1};
  EXPECT_THROW(mae_loss(a, b), ShapeError);
  EXPECT_THROW(rank_loss(a, b), ShapeError);
  EXPECT_THROW(mae_loss(std::vector<double>{}, std::vector<double>{}), ContractError);
}
