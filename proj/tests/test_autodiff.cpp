#include "pcdistill/autodiff.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "fd_check.hpp"
#include "pcdistill/rng.hpp"

using namespace pcdistill;
using pcdistill::testing::FdProblem;
using pcdistill::testing::fd_max_rel_error;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.values) v = rng.uniform(lo, hi);
  return t;
}

TEST(ForwardOps, MatmulMatchesTripleLoopOracle) {
  Rng rng(42);
  const Tensor a = random_tensor({4, 3}, rng);
  const Tensor b = random_tensor({3, 2}, rng);
  Tape tape;
  const auto c = tape.value(tape.matmul(tape.constant(a), tape.constant(b)));
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      double expect = 0.0;
      for (std::size_t k = 0; k < 3; ++k) expect += a.at(i, k) * b.at(k, j);
      EXPECT_NEAR(c.at(i, j), expect, 1e-12);
    }
}

TEST(ForwardOps, MatmulShapeMismatchThrows) {
  Tape tape;
  const auto a = tape.constant(Tensor::zeros({2, 3}));
  const auto b = tape.constant(Tensor::zeros({2, 3}));
  EXPECT_THROW(tape.matmul(a, b), std::invalid_argument);
}

TEST(ForwardOps, L2NormalizeRowsBasic) {
  Tape tape;
  const auto out = tape.value(tape.l2_normalize_rows(tape.constant(Tensor({1, 2}, {3, 4}))));
  EXPECT_NEAR(out.values[0], 0.6, 1e-9);
  EXPECT_NEAR(out.values[1], 0.8, 1e-9);
}

TEST(ForwardOps, L2NormalizeZeroRowStaysFinite) {
  Tape tape;
  const auto out = tape.value(tape.l2_normalize_rows(tape.constant(Tensor::zeros({1, 4}))));
  for (double v : out.values) EXPECT_EQ(v, 0.0);
}

TEST(ForwardOps, BceWithLogitsAnalyticPoint) {
  Tape tape;
  const auto loss = tape.bce_with_logits(tape.constant(Tensor::scalar(0.0)),
                                         tape.constant(Tensor::scalar(1.0)));
  EXPECT_NEAR(tape.value(loss).scalar_value(), std::log(2.0), 1e-12);
}

TEST(ForwardOps, BceWithLogitsStableAtLargeMagnitude) {
  Tape tape;
  const auto loss = tape.bce_with_logits(tape.constant(Tensor({2}, {500.0, -500.0})),
                                         tape.constant(Tensor({2}, {1.0, 0.0})));
  EXPECT_NEAR(tape.value(loss).scalar_value(), 0.0, 1e-12);
}

TEST(ForwardOps, NonFiniteFailsFastWithOpName) {
  Tape tape;
  const auto a = tape.constant(Tensor({2}, {1e308, 1e308}));
  try {
    tape.add(a, a);
    FAIL() << "expected non-finite failure";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("add"), std::string::npos);
  }
}

TEST(Backward, SumGradIsAllOnes) {
  Tape tape;
  const auto w = tape.leaf(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}), true);
  tape.backward(tape.sum(w));
  for (double g : tape.grad(w).values) EXPECT_DOUBLE_EQ(g, 1.0);
}

TEST(Backward, MseMeanConvention) {
  Tape tape;
  const auto w = tape.leaf(Tensor::scalar(3.0), true);
  tape.backward(tape.mse(w, tape.constant(Tensor::scalar(0.0))));
  EXPECT_DOUBLE_EQ(tape.grad(w).values[0], 6.0);  // 2 * 3 / 1
}

TEST(Backward, NonScalarLossRejected) {
  Tape tape;
  const auto w = tape.leaf(Tensor({2}, {1, 2}), true);
  const auto y = tape.multiply_scalar(w, 2.0);
  EXPECT_THROW(tape.backward(y), std::invalid_argument);
}

TEST(Backward, GraphConsumedAfterBackward) {
  Tape tape;
  const auto w = tape.leaf(Tensor::scalar(1.0), true);
  const auto loss = tape.sum(w);
  tape.backward(loss);
  EXPECT_THROW(tape.backward(loss), std::logic_error);
}

TEST(Backward, AccumulationThroughSharedInput) {
  // y = w * w, d/dw = 2w: the leaf is used twice and must receive both paths.
  Tape tape;
  const auto w = tape.leaf(Tensor({3}, {1.0, -2.0, 0.5}), true);
  tape.backward(tape.sum(tape.multiply(w, w)));
  const auto& g = tape.grad(w).values;
  EXPECT_DOUBLE_EQ(g[0], 2.0);
  EXPECT_DOUBLE_EQ(g[1], -4.0);
  EXPECT_DOUBLE_EQ(g[2], 1.0);
}

TEST(Backward, CompositeMatchesFiniteDifferences) {
  // normalize -> mse -> scale, the core of the distillation objective.
  Rng seed_rng(100);
  for (int seed = 0; seed < 5; ++seed) {
    Rng rng(static_cast<std::uint64_t>(seed) + 1);
    FdProblem prob;
    prob.inputs = {random_tensor({5, 8}, rng), random_tensor({5, 8}, rng)};
    prob.build = [](Tape& t, const std::vector<Tape::Id>& in) {
      return t.multiply_scalar(t.mse(t.l2_normalize_rows(in[0]), t.l2_normalize_rows(in[1])), 8.0);
    };
    EXPECT_LT(fd_max_rel_error(prob, 20, seed_rng), 1e-5);
  }
}

// Randomized finite-difference sweep over every differentiable op, 20 seeds
// each. Output tensors are contracted with a random weighting so every output
// element carries a distinct gradient.
TEST(Backward, PerOpFiniteDifferenceSweep) {
  struct Case {
    const char* name;
    std::function<FdProblem(Rng&)> make;
  };
  auto weighted_sum = [](Tape& t, Tape::Id out, const Tensor& w) {
    return t.sum(t.multiply(out, t.constant(w)));
  };
  std::vector<Case> cases;
  cases.push_back({"matmul", [&](Rng& rng) {
    FdProblem p;
    p.inputs = {random_tensor({4, 3}, rng), random_tensor({3, 5}, rng)};
    Tensor w = random_tensor({4, 5}, rng);
    p.build = [w, weighted_sum](Tape& t, const std::vector<Tape::Id>& in) {
      return weighted_sum(t, t.matmul(in[0], in[1]), w);
    };
    return p;
  }});
  cases.push_back({"add", [&](Rng& rng) {
    FdProblem p;
    p.inputs = {random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)};
    Tensor w = random_tensor({3, 4}, rng);
    p.build = [w, weighted_sum](Tape& t, const std::vector<Tape::Id>& in) {
      return weighted_sum(t, t.add(in[0], in[1]), w);
    };
    return p;
  }});
  cases.push_back({"subtract", [&](Rng& rng) {
    FdProblem p;
    p.inputs = {random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)};
    Tensor w = random_tensor({3, 4}, rng);
    p.build = [w, weighted_sum](Tape& t, const std::vector<Tape::Id>& in) {
      return weighted_sum(t, t.subtract(in[0], in[1]), w);
    };
    return p;
  }});
  cases.push_back({"multiply", [&](Rng& rng) {
    FdProblem p;
    p.inputs = {random_tensor({2, 6}, rng), random_tensor({2, 6}, rng)};
    Tensor w = random_tensor({2, 6}, rng);
    p.build = [w, weighted_sum](Tape& t, const std::vector<Tape::Id>& in) {
      return weighted_sum(t, t.multiply(in[0], in[1]), w);
    };
    return p;
  }});
  cases.push_back({"multiply_scalar", [&](Rng& rng) {
    FdProblem p;
    p.inputs = {random_tensor({3, 3}, rng)};
    Tensor w = random_tensor({3, 3}, rng);
    p.build = [w, weighted_sum](Tape& t, const std::vector<Tape::Id>& in) {
      return weighted_sum(t, t.multiply_scalar(in[0], -1.7), w);
    };
    return p;
  }});
  cases.push_back({"add_row_bias", [&](Rng& rng) {
    FdProblem p;
    p.inputs = {random_tensor({4, 5}, rng), random_tensor({5}, rng)};
    Tensor w = random_tensor({4, 5}, rng);
    p.build = [w, weighted_sum](Tape& t, const std::vector<Tape::Id>& in) {
      return weighted_sum(t, t.add_row_bias(in[0], in[1]), w);
    };
    return p;
  }});
  cases.push_back({"concat_lastdim", [&](Rng& rng) {
    FdProblem p;
    p.inputs = {random_tensor({3, 2}, rng), random_tensor({3, 4}, rng)};
    Tensor w = random_tensor({3, 6}, rng);
    p.build = [w, weighted_sum](Tape& t, const std::vector<Tape::Id>& in) {
      return weighted_sum(t, t.concat_lastdim(in[0], in[1]), w);
    };
    return p;
  }});
  cases.push_back({"gather_rows", [&](Rng& rng) {
    FdProblem p;
    p.inputs = {random_tensor({5, 3}, rng)};
    Tensor w = random_tensor({4, 3}, rng);
    std::vector<std::size_t> idx{0, 2, 2, 4};  // repeats exercise scatter-add
    p.build = [w, idx, weighted_sum](Tape& t, const std::vector<Tape::Id>& in) {
      return weighted_sum(t, t.gather_rows(in[0], idx), w);
    };
    return p;
  }});
  cases.push_back({"neighbor_mean", [&](Rng& rng) {
    FdProblem p;
    p.inputs = {random_tensor({5, 3}, rng)};
    Tensor w = random_tensor({3, 3}, rng);
    std::vector<std::size_t> idx{0, 1, 2, 1, 1, 4, 3, 0, 2};
    p.build = [w, idx, weighted_sum](Tape& t, const std::vector<Tape::Id>& in) {
      return weighted_sum(t, t.neighbor_mean(in[0], idx, 3), w);
    };
    return p;
  }});
  cases.push_back({"slice_cols", [&](Rng& rng) {
    FdProblem p;
    p.inputs = {random_tensor({4, 6}, rng)};
    Tensor w = random_tensor({4, 2}, rng);
    p.build = [w, weighted_sum](Tape& t, const std::vector<Tape::Id>& in) {
      return weighted_sum(t, t.slice_cols(in[0], 1, 3), w);
    };
    return p;
  }});
  cases.push_back({"relu", [&](Rng& rng) {
    FdProblem p;
    p.inputs = {random_tensor({4, 4}, rng)};
    // Keep preactivations away from the kink so central differences are valid.
    for (double& v : p.inputs[0].values)
      if (std::abs(v) < 1e-3) v = 0.1;
    Tensor w = random_tensor({4, 4}, rng);
    p.build = [w, weighted_sum](Tape& t, const std::vector<Tape::Id>& in) {
      return weighted_sum(t, t.relu(in[0]), w);
    };
    return p;
  }});
  cases.push_back({"l2_normalize_rows", [&](Rng& rng) {
    FdProblem p;
    p.inputs = {random_tensor({4, 6}, rng)};
    Tensor w = random_tensor({4, 6}, rng);
    p.build = [w, weighted_sum](Tape& t, const std::vector<Tape::Id>& in) {
      return weighted_sum(t, t.l2_normalize_rows(in[0]), w);
    };
    return p;
  }});
  cases.push_back({"sum", [&](Rng& rng) {
    FdProblem p;
    p.inputs = {random_tensor({3, 5}, rng)};
    p.build = [](Tape& t, const std::vector<Tape::Id>& in) { return t.sum(in[0]); };
    return p;
  }});
  cases.push_back({"mean", [&](Rng& rng) {
    FdProblem p;
    p.inputs = {random_tensor({3, 5}, rng)};
    p.build = [](Tape& t, const std::vector<Tape::Id>& in) { return t.mean(in[0]); };
    return p;
  }});
  cases.push_back({"mse", [&](Rng& rng) {
    FdProblem p;
    p.inputs = {random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)};
    p.build = [](Tape& t, const std::vector<Tape::Id>& in) { return t.mse(in[0], in[1]); };
    return p;
  }});
  cases.push_back({"bce_with_logits", [&](Rng& rng) {
    FdProblem p;
    p.inputs = {random_tensor({8}, rng, -3.0, 3.0)};
    Tensor targets = random_tensor({8}, rng, 0.05, 0.95);
    p.build = [targets](Tape& t, const std::vector<Tape::Id>& in) {
      return t.bce_with_logits(in[0], t.constant(targets));
    };
    return p;
  }});
  cases.push_back({"softmax_cross_entropy", [&](Rng& rng) {
    FdProblem p;
    p.inputs = {random_tensor({6, 4}, rng, -2.0, 2.0)};
    std::vector<int> labels;
    for (int i = 0; i < 6; ++i) labels.push_back(static_cast<int>(rng.uniform_index(4)));
    p.build = [labels](Tape& t, const std::vector<Tape::Id>& in) {
      return t.softmax_cross_entropy(in[0], labels);
    };
    return p;
  }});
  cases.push_back({"mean_row_l2", [&](Rng& rng) {
    FdProblem p;
    p.inputs = {random_tensor({4, 5}, rng)};
    p.build = [](Tape& t, const std::vector<Tape::Id>& in) { return t.mean_row_l2(in[0]); };
    return p;
  }});

  Rng probe_rng(2024);
  for (const auto& c : cases) {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng = Rng::derive(seed, {0xfd});
      const FdProblem prob = c.make(rng);
      worst = std::max(worst, fd_max_rel_error(prob, 10, probe_rng));
    }
    EXPECT_LT(worst, 1e-4) << "op: " << c.name;
  }
}

TEST(Backward, DeterministicAcrossRuns) {
  auto run = [] {
    Rng rng(77);
    Tape tape;
    const auto w = tape.leaf(random_tensor({6, 6}, rng), true);
    const auto x = tape.constant(random_tensor({6, 6}, rng));
    const auto loss = tape.mse(tape.relu(tape.matmul(w, x)), tape.constant(random_tensor({6, 6}, rng)));
    tape.backward(loss);
    return std::make_pair(tape.value(loss).scalar_value(), tape.grad(w).values);
  };
  const auto a = run();
  const auto b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}

TEST(ParamBinderTest, BindsEachParameterOnceAndHarvests) {
  Rng rng(5);
  Parameter p("w", random_tensor({2, 2}, rng));
  Tape tape;
  ParamBinder binder(tape, true);
  const auto a = binder.bind(p);
  const auto b = binder.bind(p);
  EXPECT_EQ(a, b);
  tape.backward(tape.sum(tape.add(a, b)));  // w appears twice: grad = 2
  binder.harvest();
  for (double g : p.grad.values) EXPECT_DOUBLE_EQ(g, 2.0);
}

}  // namespace
