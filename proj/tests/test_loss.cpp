#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "embkit/loss.hpp"

using namespace embkit;

namespace {

LossConfig cfg_of(double tau, LossVariant v = LossVariant::HardNegatives, std::size_t k = 7) {
  LossConfig c;
  c.temperature = tau;
  c.variant = v;
  c.num_negatives = k;
  return c;
}

SimilarityBlock hard_block(std::vector<double> pos, std::vector<std::vector<double>> neg) {
  SimilarityBlock b;
  b.pos = std::move(pos);
  b.neg = Matrix(neg.size(), neg.empty() ? 0 : neg[0].size());
  for (std::size_t i = 0; i < neg.size(); ++i)
    for (std::size_t j = 0; j < neg[i].size(); ++j) b.neg(i, j) = neg[i][j];
  return b;
}

Matrix square(const std::vector<std::vector<double>>& rows) {
  Matrix m(rows.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows.size(); ++j) m(i, j) = rows[i][j];
  return m;
}

SimilarityBlock random_block(std::size_t n, std::size_t k, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  SimilarityBlock b;
  b.neg = Matrix(n, k);
  Matrix ib(n, n);
  for (auto& v : b.neg.data()) v = u(rng);
  for (auto& v : ib.data()) v = u(rng);
  for (std::size_t i = 0; i < n; ++i) b.pos.push_back(ib(i, i));
  b.inbatch = ib;
  return b;
}

// Direct summation without max-shift (only valid for moderate logits).
double oracle_combined(const SimilarityBlock& b, double tau, bool mined, bool inbatch) {
  const std::size_t n = b.pos.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double pos = inbatch ? (*b.inbatch)(i, i) : b.pos[i];
    double denom = std::exp(pos / tau);
    if (mined)
      for (std::size_t j = 0; j < b.neg.cols(); ++j) denom += std::exp(b.neg(i, j) / tau);
    if (inbatch)
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) denom += std::exp((*b.inbatch)(i, j) / tau);
    total += -std::log(std::exp(pos / tau) / denom);
  }
  return total / static_cast<double>(n);
}

}  // namespace

TEST(HardNegativeLoss, EqualSimilaritiesGiveLogKPlusOne) {
  for (std::size_t k = 1; k <= 7; ++k) {
    const auto b = hard_block({0.3}, {std::vector<double>(k, 0.3)});
    EXPECT_NEAR(hard_negative_loss(b, cfg_of(0.02, LossVariant::HardNegatives, k)).loss,
                std::log(static_cast<double>(k + 1)), 1e-9);
  }
  const auto b = hard_block({0.3}, {std::vector<double>(7, 0.3)});
  EXPECT_NEAR(hard_negative_loss(b, cfg_of(0.02)).loss, 2.07944, 5e-6);
}

TEST(HardNegativeLoss, HandSoftmax) {
  const auto b = hard_block({1.0}, {{0.0}});
  const double l = hard_negative_loss(b, cfg_of(1.0, LossVariant::HardNegatives, 1)).loss;
  EXPECT_NEAR(l, std::log1p(std::exp(-1.0)), 1e-15);
  EXPECT_NEAR(l, 0.31326, 5e-6);
}

TEST(HardNegativeLoss, ShiftInvariance) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 100; ++t) {
    auto b = random_block(3, 4, rng);
    for (const auto v : {LossVariant::HardNegatives, LossVariant::InBatch, LossVariant::Combined}) {
      auto shifted = b;
      for (auto& x : shifted.pos) x += 10.0;
      for (auto& x : shifted.neg.data()) x += 10.0;
      for (auto& x : shifted.inbatch->data()) x += 10.0;
      const auto c = cfg_of(1.0, v, 4);
      EXPECT_NEAR(contrastive_loss(b, c).loss, contrastive_loss(shifted, c).loss, 1e-9);
    }
  }
}

TEST(HardNegativeLoss, OverflowFreeAtLowTemperature) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 0.9);
  for (int t = 0; t < 1000; ++t) {
    const double neg = u(rng);
    const auto b = hard_block({neg + 0.1}, {std::vector<double>(7, neg)});
    const auto r = hard_negative_loss(b, cfg_of(0.02));
    ASSERT_TRUE(std::isfinite(r.loss));
    ASSERT_GE(r.loss, 0.0);
  }
  // extreme ends of [-1, 1]
  EXPECT_TRUE(std::isfinite(hard_negative_loss(hard_block({1.0}, {{-1.0}}), cfg_of(0.02, LossVariant::HardNegatives, 1)).loss));
  EXPECT_TRUE(std::isfinite(hard_negative_loss(hard_block({-1.0}, {{1.0}}), cfg_of(0.02, LossVariant::HardNegatives, 1)).loss));
  EXPECT_NEAR(hard_negative_loss(hard_block({-1.0}, {{1.0}}), cfg_of(0.02, LossVariant::HardNegatives, 1)).loss, 100.0, 1e-9);
}

TEST(HardNegativeLoss, Monotonicity) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 200; ++t) {
    auto b = random_block(2, 3, rng);
    const auto c = cfg_of(0.5, LossVariant::HardNegatives, 3);
    const double base = hard_negative_loss(b, c).loss;
    auto up_neg = b;
    up_neg.neg(1, 2) += 0.05;
    EXPECT_GT(hard_negative_loss(up_neg, c).loss, base);
    auto up_pos = b;
    up_pos.pos[0] += 0.05;
    EXPECT_LT(hard_negative_loss(up_pos, c).loss, base);
  }
}

TEST(HardNegativeLoss, GradientIdentitiesAndFiniteDifferences) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 50; ++t) {
    auto b = random_block(3, 4, rng);
    const auto c = cfg_of(0.7, LossVariant::HardNegatives, 4);
    const auto r = hard_negative_loss(b, c);
    const double n = 3.0, tau = 0.7;
    for (std::size_t i = 0; i < 3; ++i) {
      // softmax oracle for row i
      double denom = std::exp(b.pos[i] / tau);
      for (std::size_t j = 0; j < 4; ++j) denom += std::exp(b.neg(i, j) / tau);
      EXPECT_NEAR(r.d_pos[i], (std::exp(b.pos[i] / tau) / denom - 1.0) / (n * tau), 1e-12);
      for (std::size_t j = 0; j < 4; ++j)
        EXPECT_NEAR(r.d_neg(i, j), std::exp(b.neg(i, j) / tau) / denom / (n * tau), 1e-12);
    }
    const double h = 1e-6;
    auto fd = [&](double& slot) {
      const double s = slot;
      slot = s + h;
      const double lp = hard_negative_loss(b, c).loss;
      slot = s - h;
      const double lm = hard_negative_loss(b, c).loss;
      slot = s;
      return (lp - lm) / (2 * h);
    };
    for (std::size_t i = 0; i < 3; ++i) {
      const double f = fd(b.pos[i]);
      EXPECT_LE(std::abs(f - r.d_pos[i]), 1e-6 * std::max(std::abs(f), 1e-3));
      for (std::size_t j = 0; j < 4; ++j) {
        const double g = fd(b.neg(i, j));
        EXPECT_LE(std::abs(g - r.d_neg(i, j)), 1e-6 * std::max(std::abs(g), 1e-3));
      }
    }
  }
}

TEST(HardNegativeLoss, Errors) {
  EXPECT_THROW(hard_negative_loss(hard_block({0.1}, {{0.0}}), cfg_of(0.0)), Error);
  EXPECT_THROW(hard_negative_loss(hard_block({0.1}, {{0.0}}), cfg_of(-1.0)), Error);
  EXPECT_THROW(hard_negative_loss(hard_block({0.1, 0.2}, {{0.0}}), cfg_of(1.0)), Error);
  try {
    LossConfig c = cfg_of(0.0);
    c.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TemperatureNonPositive);
  }
}

TEST(InBatchLoss, HandSoftmax) {
  SimilarityBlock b;
  b.inbatch = square({{1, -1}, {-1, 1}});
  EXPECT_NEAR(in_batch_loss(b, cfg_of(1.0)).loss, std::log1p(std::exp(-2.0)), 1e-15);
  EXPECT_NEAR(in_batch_loss(b, cfg_of(1.0)).loss, 0.12693, 5e-6);
}

TEST(InBatchLoss, SingleRowIsZeroAndEqualRowsGiveLogN) {
  SimilarityBlock one;
  one.inbatch = square({{0.7}});
  EXPECT_EQ(in_batch_loss(one, cfg_of(0.02)).loss, 0.0);
  SimilarityBlock four;
  four.inbatch = square(std::vector<std::vector<double>>(4, std::vector<double>(4, 0.2)));
  EXPECT_NEAR(in_batch_loss(four, cfg_of(0.02)).loss, std::log(4.0), 1e-12);
}

TEST(InBatchLoss, NotSquare) {
  SimilarityBlock b;
  b.inbatch = Matrix(2, 3);
  try {
    in_batch_loss(b, cfg_of(1.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotSquare);
  }
}

TEST(CombinedLoss, DegenerateReductionsAreExact) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 200; ++t) {
    for (const double tau : {0.02, 1.0}) {
      auto no_mined = random_block(4, 0, rng);
      EXPECT_EQ(combined_loss(no_mined, cfg_of(tau, LossVariant::Combined, 0)).loss,
                in_batch_loss(no_mined, cfg_of(tau, LossVariant::InBatch)).loss);
      const auto single = random_block(1, 7, rng);
      EXPECT_EQ(combined_loss(single, cfg_of(tau, LossVariant::Combined)).loss,
                hard_negative_loss(single, cfg_of(tau)).loss);
    }
  }
}

TEST(CombinedLoss, MatchesDirectSummationOracle) {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 500; ++t) {
    const auto b = random_block(2, 1, rng);
    EXPECT_NEAR(combined_loss(b, cfg_of(1.0, LossVariant::Combined, 1)).loss, oracle_combined(b, 1.0, true, true), 1e-10);
    EXPECT_NEAR(combined_loss(b, cfg_of(0.1, LossVariant::Combined, 1)).loss, oracle_combined(b, 0.1, true, true), 1e-10);
    EXPECT_NEAR(hard_negative_loss(b, cfg_of(0.1, LossVariant::HardNegatives, 1)).loss, oracle_combined(b, 0.1, true, false), 1e-10);
    EXPECT_NEAR(in_batch_loss(b, cfg_of(0.1, LossVariant::InBatch)).loss, oracle_combined(b, 0.1, false, true), 1e-10);
  }
}

TEST(CombinedLoss, NonNegative) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 300; ++t) {
    const auto b = random_block(3, 2, rng);
    for (const auto v : {LossVariant::HardNegatives, LossVariant::InBatch, LossVariant::Combined}) {
      EXPECT_GE(contrastive_loss(b, cfg_of(0.02, v, 2)).loss, 0.0);
    }
  }
  // approaches zero as the margin grows
  EXPECT_LT(hard_negative_loss(hard_block({1.0}, {{-1.0}}), cfg_of(0.02, LossVariant::HardNegatives, 1)).loss, 1e-40);
}

TEST(LossVariant, StringRoundTrip) {
  for (const auto v : {LossVariant::HardNegatives, LossVariant::InBatch, LossVariant::Combined}) {
    EXPECT_EQ(loss_variant_from_string(to_string(v)), v);
  }
  EXPECT_THROW(loss_variant_from_string("triplet"), Error);
}
