#include "pcdistill/optim.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace pcdistill;

namespace {

TEST(AdamWTest, ZeroGradZeroDecayLeavesParamsUnchanged) {
  Parameter w("w", Tensor({3}, {1.0, -2.0, 0.5}));
  AdamW opt({&w}, {});
  opt.zero_grad();
  opt.step(0.1);
  EXPECT_DOUBLE_EQ(w.value.values[0], 1.0);
  EXPECT_DOUBLE_EQ(w.value.values[1], -2.0);
  EXPECT_DOUBLE_EQ(w.value.values[2], 0.5);
}

TEST(AdamWTest, SingleStepHandComputed) {
  // w=1, g=1, lr=0.1: bias-corrected mhat = vhat = 1, so w -> 1 - 0.1/(1+eps).
  Parameter w("w", Tensor::scalar(1.0));
  w.grad.values[0] = 1.0;
  AdamWConfig cfg;
  AdamW opt({&w}, cfg);
  opt.step(0.1);
  const double expected = 1.0 - 0.1 * 1.0 / (1.0 + cfg.epsilon);
  EXPECT_NEAR(w.value.values[0], expected, 1e-15);
  EXPECT_NEAR(w.value.values[0], 0.9, 1e-8);
}

TEST(AdamWTest, DecoupledWeightDecayActsWithoutGradient) {
  Parameter w("w", Tensor::scalar(2.0));
  AdamWConfig cfg;
  cfg.weight_decay = 0.05;
  AdamW opt({&w}, cfg);
  opt.step(0.1);  // grad is zero: only the decay term should act
  EXPECT_NEAR(w.value.values[0], 2.0 * (1.0 - 0.1 * 0.05), 1e-15);
}

TEST(AdamWTest, ConvergesOnQuadratic) {
  // Scripted convergence oracle: minimize (w - 5)^2 from w = 0.
  Parameter w("w", Tensor::scalar(0.0));
  AdamW opt({&w}, {});
  for (int i = 0; i < 200; ++i) {
    opt.zero_grad();
    w.grad.values[0] = 2.0 * (w.value.values[0] - 5.0);
    opt.step(0.05);
  }
  EXPECT_LT(std::abs(w.value.values[0] - 5.0), 1e-2);
}

TEST(OneCycle, PeakIsExactlyMaxLr) {
  OneCycleSchedule s;
  s.total_steps = 100;
  s.max_lr = 0.5;
  const std::size_t peak = static_cast<std::size_t>(std::floor(0.1 * 99));
  EXPECT_DOUBLE_EQ(s.lr_at(peak), 0.5);
}

TEST(OneCycle, FinalStepHitsFinalDiv) {
  OneCycleSchedule s;
  s.total_steps = 237;
  s.max_lr = 1e-3;
  EXPECT_NEAR(s.lr_at(236), 1e-3 / 1e4, 1e-9);
}

TEST(OneCycle, MonotoneUpThenDown) {
  OneCycleSchedule s;
  s.total_steps = 400;
  s.max_lr = 0.01;
  const std::size_t peak = static_cast<std::size_t>(std::floor(0.1 * 399));
  double prev = s.lr_at(0);
  for (std::size_t step = 1; step < s.total_steps; ++step) {
    const double lr = s.lr_at(step);
    if (step <= peak) {
      EXPECT_GE(lr, prev) << "step " << step;
    } else {
      EXPECT_LE(lr, prev) << "step " << step;
    }
    prev = lr;
  }
}

TEST(OneCycle, StepOutOfRangeThrows) {
  OneCycleSchedule s;
  s.total_steps = 10;
  EXPECT_THROW(s.lr_at(10), std::out_of_range);
  EXPECT_NO_THROW(s.lr_at(9));
}

TEST(OneCycle, FreeFunctionMatchesSchedule) {
  OneCycleSchedule s;
  s.total_steps = 50;
  s.max_lr = 2e-3;
  for (std::size_t step = 0; step < 50; ++step)
    EXPECT_DOUBLE_EQ(one_cycle_lr(step, 50, 2e-3), s.lr_at(step));
}

}  // namespace
