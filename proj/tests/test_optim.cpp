#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "test_support.hpp"

using namespace embkit;

TEST(Schedule, HandValues) {
  const Schedule s{0.2, 100, 1100};
  EXPECT_EQ(lr_at(0, s), 0.0);
  EXPECT_EQ(lr_at(100, s), 0.2);
  EXPECT_NEAR(lr_at(50, s), 0.1, 1e-15);
  EXPECT_NEAR(lr_at(600, s), 0.1, 1e-15);
  EXPECT_EQ(lr_at(1100, s), 0.0);
  try {
    lr_at(1101, s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::StepOutOfRange);
  }
}

TEST(Schedule, PiecewiseLinearAndContinuous) {
  for (const Schedule s : {Schedule{1.0, 10, 50}, Schedule{0.5, 0, 20}, Schedule{2.0, 30, 30}, Schedule{1.0, 1, 2}}) {
    EXPECT_EQ(lr_at(s.warmup_steps, s), s.learning_rate);
    EXPECT_EQ(lr_at(s.total_steps, s), s.warmup_steps == s.total_steps ? s.learning_rate : 0.0);
    double max_jump = 0.0;
    for (std::size_t t = 1; t <= s.total_steps; ++t) {
      const double a = lr_at(t - 1, s), b = lr_at(t, s);
      EXPECT_GE(b, 0.0);
      EXPECT_LE(b, s.learning_rate);
      max_jump = std::max(max_jump, std::abs(b - a));
    }
    // per-step change is bounded by the steeper of the two slopes
    const double ramp = s.warmup_steps ? s.learning_rate / s.warmup_steps : 0.0;
    const double decay = s.total_steps > s.warmup_steps ? s.learning_rate / (s.total_steps - s.warmup_steps) : 0.0;
    EXPECT_LE(max_jump, std::max(ramp, decay) * (1 + 1e-12));
  }
}

TEST(Adam, ScalarHandStep) {
  ModelParams p;
  p.tokenizer.hash_buckets = 2;
  p.embed = Matrix(2, 1);
  p.proj = Matrix(1, 2);
  auto state = make_adam_state(p);
  auto g = zero_grads(p);
  g.proj(0, 0) = 1.0;
  adam_step(p, g, state, 0.1);
  // m_hat = 1, v_hat = 1 -> update = -0.1 / (1 + 1e-8)
  EXPECT_NEAR(p.proj(0, 0), -0.1, 1e-8);
  EXPECT_EQ(p.proj(0, 1), 0.0);
}

TEST(Adam, ZeroGradientsLeaveEverythingUnchanged) {
  auto p = embkit::testing::random_params(16, 4, 3, 2, 3);
  const auto before = p;
  auto state = make_adam_state(p);
  auto g = zero_grads(p);
  g.embed.row(5);  // present but all zero
  adam_step(p, g, state, 0.1);
  EXPECT_EQ(p, before);
  for (const Matrix* m : {&state.m_proj, &state.v_proj, &state.m_A, &state.v_B, &state.m_embed}) {
    for (double v : m->data()) EXPECT_EQ(v, 0.0);
  }
}

TEST(Adam, FrozenBaseLeavesEmbedAndProj) {
  auto p = embkit::testing::random_params(16, 4, 3, 2, 3);
  const auto before = p;
  auto state = make_adam_state(p);
  auto g = zero_grads(p, true);
  g.embed.row(1)[0] = 1.0;
  g.proj(0, 0) = 1.0;
  g.lora_A(0, 0) = 1.0;
  g.lora_B(0, 0) = 1.0;
  adam_step(p, g, state, 0.1);
  EXPECT_EQ(p.embed, before.embed);
  EXPECT_EQ(p.proj, before.proj);
  EXPECT_NE(p.lora_A, before.lora_A);
  EXPECT_NE(p.lora_B, before.lora_B);
}

TEST(Adam, SparseRowsMatchDenseUpdate) {
  // A row touched at step 1 keeps moving at step 2 with zero gradient,
  // exactly as a dense Adam would.
  ModelParams p;
  p.tokenizer.hash_buckets = 3;
  p.embed = Matrix(3, 1);
  p.proj = Matrix(1, 2);
  auto state = make_adam_state(p);
  auto g1 = zero_grads(p);
  g1.embed.row(2)[0] = 1.0;
  adam_step(p, g1, state, 0.1);
  const double after1 = p.embed(2, 0);
  adam_step(p, zero_grads(p), state, 0.1);
  // dense reference
  const double b1 = 0.9, b2 = 0.999;
  double m = (1 - b1) * 1.0, v = (1 - b2) * 1.0, x = 0.0;
  x -= 0.1 * (m / (1 - b1)) / (std::sqrt(v / (1 - b2)) + 1e-8);
  EXPECT_DOUBLE_EQ(after1, x);
  m *= b1;
  v *= b2;
  x -= 0.1 * (m / (1 - std::pow(b1, 2.0))) / (std::sqrt(v / (1 - std::pow(b2, 2.0))) + 1e-8);
  EXPECT_DOUBLE_EQ(p.embed(2, 0), x);
  EXPECT_EQ(p.embed(0, 0), 0.0);
}

TEST(Adam, NonFiniteGradientRejectedBeforeAnyUpdate) {
  auto p = embkit::testing::random_params(16, 4, 3, 2, 3);
  const auto before = p;
  auto state = make_adam_state(p);
  auto g = zero_grads(p);
  g.proj(0, 0) = 1.0;
  g.lora_B(0, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    adam_step(p, g, state, 0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFiniteGradient);
  }
  EXPECT_EQ(p, before);
  EXPECT_EQ(state.step, 0u);
}
