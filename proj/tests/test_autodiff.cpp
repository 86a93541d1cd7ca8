#include <gtest/gtest.h>

#include <cmath>

#include "gradcases.hpp"
#include "oracles.hpp"
#include "vrpc/autodiff.hpp"
#include "vrpc/error.hpp"
#include "vrpc/random.hpp"

namespace vrpc::ad {
namespace {

using vrpc::testing::check_gradients;

Tensor random_tensor(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(-1.0, 1.0);
  return t;
}

TEST(Ops, ReluExample) {
  Tape tape;
  const auto y = relu(tape.constant(Tensor::row({-1, 0, 2})));
  EXPECT_EQ(y.value().vector(), (std::vector<double>{0, 0, 2}));
}

TEST(Ops, MaxPoolRowsExample) {
  Tape tape;
  const auto y = max_pool_rows(tape.constant(Tensor({2, 2}, {1, 5, 3, 2})));
  EXPECT_EQ(y.value().vector(), (std::vector<double>{3, 5}));
}

TEST(Ops, MatmulMatchesHandProduct) {
  Rng rng(1);
  const auto a = random_tensor({2, 3}, rng);
  const auto b = random_tensor({3, 2}, rng);
  Tape tape;
  const auto c = matmul(tape.constant(a), tape.constant(b)).value();
  ASSERT_EQ(c.shape(), (Shape{2, 2}));
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 3; ++k) s += a.at(i, k) * b.at(k, j);
      EXPECT_NEAR(c.at(i, j), s, 1e-15);
    }
  }
}

TEST(Ops, ShapeMismatchNamesOpAndShapes) {
  Tape tape;
  try {
    matmul(tape.constant(Tensor({2, 3})), tape.constant(Tensor({2, 3})));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShape);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("matmul"), std::string::npos) << msg;
    EXPECT_NE(msg.find("2x3"), std::string::npos) << msg;
  }
  EXPECT_THROW(add(tape.constant(Tensor({2, 3})), tape.constant(Tensor({3, 2}))), Error);
}

TEST(Gradients, EveryOpAgainstFiniteDifferences) {
  for (const auto& c : vrpc::testing::op_gradient_cases()) {
    const auto r = c.run();
    EXPECT_GT(r.checked, 0u) << c.name;
    EXPECT_LT(r.max_rel_error, 1e-4) << c.name;
  }
}

TEST(Gradients, RandomShapesTenTrials) {
  Rng rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t r = 1 + rng.below(16), k = 1 + rng.below(16), c = 1 + rng.below(16);
    ParamStore store;
    store.add("a", random_tensor({r, k}, rng));
    store.add("w", random_tensor({k, c}, rng));
    store.add("b", random_tensor({1, c}, rng));
    // Generic inputs: exact zeros before relu are measure-zero.
    const auto res = check_gradients(store, [&](Tape& tape) {
      auto h = add_bias(matmul(tape.parameter(store, "a"), tape.parameter(store, "w")), tape.parameter(store, "b"));
      auto s = add(softplus(h), square(sigmoid(h)));
      return reduce_mean(concat_cols(max_pool_rows(s), reduce_sum(exp(scale(h, 0.3)))));
    });
    EXPECT_LT(res.max_rel_error, 1e-4) << r << "x" << k << "x" << c;
  }
}

TEST(Gradients, LinearLossGivesBroadcastInput) {
  ParamStore store;
  store.add("w", Tensor({2, 3}, {0.1, -0.2, 0.3, 0.4, 0.5, -0.6}));
  const Tensor x({3, 1}, {1.5, -2.0, 0.25});
  Tape tape;
  const auto g = tape.backward(reduce_sum(matmul(tape.parameter(store, "w"), tape.constant(x))));
  EXPECT_EQ(g.grads[0].vector(), (std::vector<double>{1.5, -2.0, 0.25, 1.5, -2.0, 0.25}));
}

TEST(Gradients, UnusedParameterIsExactlyZero) {
  ParamStore store;
  store.add("used", Tensor::row({1, 2}));
  store.add("unused", Tensor::row({3, 4}));
  Tape tape;
  tape.backward(reduce_sum(square(tape.parameter(store, "used"))), store);
  EXPECT_EQ(store[1].grad.vector(), (std::vector<double>{0, 0}));
  EXPECT_EQ(store[0].grad.vector(), (std::vector<double>{2, 4}));
}

TEST(Gradients, MaxPoolRoutesToArgmaxOnly) {
  ParamStore store;
  store.add("x", Tensor({3, 3}, {0.1, 0.9, 0.3, 0.7, 0.2, 0.8, 0.4, 0.5, 0.6}));
  Tape tape;
  const auto g = tape.backward(reduce_sum(mul(max_pool_rows(tape.parameter(store, "x")),
                                              tape.constant(Tensor::row({1, 2, 3})))));
  EXPECT_EQ(g.grads[0].vector(), (std::vector<double>{0, 2, 0, 1, 0, 3, 0, 0, 0}));
  const auto fd = check_gradients(store, [&](Tape& t) {
    return reduce_sum(mul(max_pool_rows(t.parameter(store, "x")), t.constant(Tensor::row({1, 2, 3}))));
  });
  EXPECT_LT(fd.max_rel_error, 1e-6);
}

TEST(Gradients, MaxPoolTieGoesToLowestRow) {
  ParamStore store;
  store.add("x", Tensor({2, 1}, {1.0, 1.0}));
  Tape tape;
  const auto g = tape.backward(reduce_sum(max_pool_rows(tape.parameter(store, "x"))));
  EXPECT_EQ(g.grads[0].vector(), (std::vector<double>{1, 0}));
}

TEST(Tape, SecondBackwardIsStateError) {
  ParamStore store;
  store.add("x", Tensor::row({1}));
  Tape tape;
  const auto loss = reduce_sum(tape.parameter(store, "x"));
  tape.backward(loss);
  try {
    tape.backward(loss);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kState);
  }
}

TEST(Tape, NonScalarLossIsShapeError) {
  ParamStore store;
  store.add("x", Tensor::row({1, 2}));
  Tape tape;
  EXPECT_THROW(tape.backward(tape.parameter(store, "x")), Error);
}

TEST(Tape, ForwardIsBitReproducible) {
  Rng rng(5);
  ParamStore store;
  store.add("w", random_tensor({8, 8}, rng));
  const auto x = random_tensor({16, 8}, rng);
  auto run = [&] {
    Tape tape(Tape::Mode::kInference);
    return max_pool_rows(relu(matmul(tape.constant(x), tape.parameter(store, "w")))).value();
  };
  EXPECT_EQ(run(), run());
}

TEST(Adam, SingleScalarFirstStep) {
  ParamStore store;
  store.add("p", Tensor::scalar(0.0));
  store[0].grad = Tensor::scalar(1.0);
  store.adam_step({0.1, 0.9, 0.999, 1e-8});
  EXPECT_NEAR(store[0].value.item(), -0.1, 1e-8);
  EXPECT_EQ(store[0].grad.item(), 0.0);
  EXPECT_EQ(store.step(), 1u);
}

TEST(Adam, ZeroGradientLeavesParameter) {
  ParamStore store;
  store.add("p", Tensor::row({0.5, -0.25}));
  store.adam_step({0.1, 0.9, 0.999, 1e-8});
  EXPECT_EQ(store[0].value.vector(), (std::vector<double>{0.5, -0.25}));
}

TEST(Adam, MatchesReferenceOverManySteps) {
  Rng rng(4);
  ParamStore store;
  store.add("a", random_tensor({1, 2}, rng));
  std::vector<double> ref = store[0].value.vector();
  vrpc::testing::ReferenceAdam adam{0.01, 0.9, 0.999, 1e-8, {}, {}, 0};
  for (int s = 0; s < 25; ++s) {
    std::vector<double> g{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    store[0].grad = Tensor::row(g);
    store.adam_step({0.01, 0.9, 0.999, 1e-8});
    adam.step(ref, g);
    EXPECT_EQ(store[0].value.vector(), ref) << "step " << s;
  }
}

TEST(ParamStore, SerializeRoundTripIsBitExact) {
  Rng rng(6);
  ParamStore store;
  store.add("enc.w", random_tensor({3, 4}, rng));
  store.add("dec.b", random_tensor({1, 7}, rng));
  store.add("one", Tensor::scalar(-0.0));
  const auto bytes = store.serialize();
  const auto back = ParamStore::deserialize(bytes);
  EXPECT_TRUE(back.same_values(store));
  EXPECT_EQ(back.serialize(), bytes);
  auto cut = bytes;
  cut.pop_back();
  EXPECT_THROW(ParamStore::deserialize(cut), Error);
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(ParamStore::deserialize(bad), Error);
}

TEST(ParamStore, ClipRescalesToMaxNorm) {
  ParamStore store;
  store.add("a", Tensor::row({0, 0}));
  store[0].grad = Tensor::row({3, 4});
  store.clip_grad_norm(1.0);
  EXPECT_NEAR(store.grad_norm(), 1.0, 1e-15);
  store.clip_grad_norm(10.0);
  EXPECT_NEAR(store[0].grad[0], 0.6, 1e-15);
}

TEST(Init, GlorotRangeAndSeeding) {
  const auto w = glorot_uniform(10, 20, 3);
  const double bound = std::sqrt(6.0 / 30.0);
  for (const double v : w.values()) EXPECT_LE(std::abs(v), bound);
  EXPECT_EQ(w, glorot_uniform(10, 20, 3));
  EXPECT_NE(w, glorot_uniform(10, 20, 4));
}

}  // namespace
}  // namespace vrpc::ad
