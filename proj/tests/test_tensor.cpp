#include <gtest/gtest.h>

#include "kasr/errors.hpp"
#include "kasr/ops.hpp"
#include "kasr/verify.hpp"
#include "test_util.hpp"

using namespace kasr;
using kasr::testing::max_diff;
using kasr::testing::random_tensor;
using kasr::testing::to_image;

namespace {

std::vector<double> grad_of(const Tensor& t) { return {t.grad().begin(), t.grad().end()}; }

Tensor leaf(Shape s, std::vector<float> v) {
  Tensor t(std::move(s), std::move(v));
  t.set_requires_grad(true);
  return t;
}

}  // namespace

TEST(Tensor, ShapeMustMatchData) {
  EXPECT_THROW(Tensor({2, 2}, std::vector<float>(3)), DimensionError);
  EXPECT_THROW(Tensor({2, 0}, std::vector<float>{}), DimensionError);
  EXPECT_EQ(Tensor::zeros({2, 3}).numel(), 6u);
}

TEST(Tensor, ItemNeedsSingleElement) {
  EXPECT_FLOAT_EQ(Tensor::scalar(2.5f).item(), 2.5f);
  EXPECT_THROW(Tensor::zeros({2}).item(), ContractError);
}

TEST(Conv2d, OnesGiveNine) {
  const Tensor y = conv2d(Tensor::ones({1, 1, 3, 3}), Tensor::ones({1, 1, 3, 3}), Tensor::zeros({1}), 1, 0);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_FLOAT_EQ(y.item(), 9.0f);
}

TEST(Conv2d, OneByOneIdentity) {
  const Tensor x = random_tensor({2, 1, 5, 4}, 3);
  const Tensor y = conv2d(x, Tensor::ones({1, 1, 1, 1}), Tensor::zeros({1}), 1, 0);
  EXPECT_TRUE(kasr::testing::bitwise_equal(x, y));
}

TEST(Conv2d, OutputExtentFormula) {
  const Tensor x = random_tensor({1, 2, 9, 7}, 1);
  const Tensor w = random_tensor({3, 2, 3, 3}, 2);
  const Tensor y = conv2d(x, w, Tensor::zeros({3}), 2, 1);
  EXPECT_EQ(y.shape(), (Shape{1, 3, (9 + 2 - 3) / 2 + 1, (7 + 2 - 3) / 2 + 1}));
}

TEST(Conv2d, MatchesBruteForce) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const Tensor x = random_tensor({2, 3, 8, 8}, seed, -1, 1);
    const Tensor w = random_tensor({4, 3, 3, 3}, seed + 10, -1, 1);
    const Tensor b = random_tensor({4}, seed + 20, -1, 1);
    for (std::size_t stride : {1u, 2u}) {
      for (std::size_t pad : {0u, 1u}) {
        const auto ref = oracle::conv2d(to_image(x), {w.data().begin(), w.data().end()},
                                        {b.data().begin(), b.data().end()}, 4, 3, 3, stride, pad);
        EXPECT_LT(max_diff(conv2d(x, w, b, stride, pad), ref), 1e-5);
      }
    }
  }
}

TEST(Conv2d, ChannelMismatchNamesAxis) {
  try {
    conv2d(Tensor::zeros({1, 2, 4, 4}), Tensor::zeros({1, 3, 3, 3}), Tensor::zeros({1}), 1, 0);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_EQ(e.axis(), "channels");
    EXPECT_EQ(e.op(), "conv2d");
  }
  EXPECT_THROW(conv2d(Tensor::zeros({1, 1, 2, 2}), Tensor::zeros({1, 1, 3, 3}), Tensor::zeros({1}), 1, 0),
               DimensionError);
}

TEST(MaxPool, SmallExample) {
  const Tensor y = maxpool2d(Tensor({1, 1, 2, 2}, {1, 2, 3, 4}), 2, 2);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_FLOAT_EQ(y.item(), 4.0f);
}

TEST(MaxPool, ConstantInput) {
  const Tensor y = maxpool2d(Tensor::full({1, 2, 4, 4}, 0.3f), 2, 2);
  for (float v : y.data()) EXPECT_FLOAT_EQ(v, 0.3f);
}

TEST(MaxPool, MatchesBruteForce) {
  const Tensor x = random_tensor({1, 2, 6, 6}, 5);
  EXPECT_EQ(max_diff(maxpool2d(x, 2, 2), oracle::maxpool(to_image(x), 2, 2)), 0.0);
}

TEST(MaxPool, TieRoutesGradientToFirstIndex) {
  Tensor x = leaf({1, 1, 2, 2}, {1, 1, 1, 1});
  sum(maxpool2d(x, 2, 2)).backward();
  EXPECT_EQ(grad_of(x), (std::vector<double>{1, 0, 0, 0}));
}

TEST(MaxPool, WindowTooLarge) { EXPECT_THROW(maxpool2d(Tensor::zeros({1, 1, 2, 2}), 3, 1), DimensionError); }

TEST(LeakyRelu, Values) {
  const Tensor y = leaky_relu(Tensor({2}, {1.0f, -1.0f}), 0.2f);
  EXPECT_FLOAT_EQ(y.data()[0], 1.0f);
  EXPECT_FLOAT_EQ(y.data()[1], -0.2f);
}

TEST(LeakyRelu, GradientAtMinusTwo) {
  Tensor64 x({1}, {-2.0});
  x.set_requires_grad(true);
  sum(leaky_relu(x, 0.2)).backward();
  EXPECT_NEAR(x.grad()[0], 0.2, 1e-12);
  const double h = 1e-5;
  auto f = [](double v) { return v > 0 ? v : 0.2 * v; };
  EXPECT_NEAR((f(-2.0 + h) - f(-2.0 - h)) / (2 * h), x.grad()[0], 1e-6);
}

TEST(DepthToSpace, DefiningPermutation) {
  const Tensor y = depth_to_space(Tensor({1, 4, 1, 1}, {1, 2, 3, 4}), 2);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 2, 2}));
  EXPECT_EQ(std::vector<float>(y.data().begin(), y.data().end()), (std::vector<float>{1, 2, 3, 4}));
}

TEST(DepthToSpace, BlockOneIsIdentity) {
  const Tensor x = random_tensor({2, 3, 4, 5}, 7);
  EXPECT_TRUE(kasr::testing::bitwise_equal(depth_to_space(x, 1), x));
}

TEST(DepthToSpace, RoundTripWithInverse) {
  const Tensor x = random_tensor({2, 18, 3, 2}, 8);
  EXPECT_TRUE(kasr::testing::bitwise_equal(space_to_depth(depth_to_space(x, 3), 3), x));
  const Tensor z = random_tensor({1, 2, 4, 6}, 9);
  EXPECT_TRUE(kasr::testing::bitwise_equal(depth_to_space(space_to_depth(z, 2), 2), z));
}

TEST(DepthToSpace, NonDivisibleChannels) {
  EXPECT_THROW(depth_to_space(Tensor::zeros({1, 3, 2, 2}), 2), DimensionError);
}

TEST(Elementwise, MulValues) {
  const Tensor y = mul(Tensor({2}, {2, 3}), Tensor({2}, {4, 5}));
  EXPECT_EQ(std::vector<float>(y.data().begin(), y.data().end()), (std::vector<float>{8, 15}));
}

TEST(Elementwise, MinAllRoutesToFirstMinimum) {
  Tensor x = leaf({3}, {3, 1, 2});
  const Tensor m = min_all(x);
  EXPECT_FLOAT_EQ(m.item(), 1.0f);
  m.backward();
  EXPECT_EQ(grad_of(x), (std::vector<double>{0, 1, 0}));

  Tensor t = leaf({4}, {2, 5, 5, 1});
  max_all(t).backward();
  EXPECT_EQ(grad_of(t), (std::vector<double>{0, 1, 0, 0}));
}

TEST(Elementwise, SumGradientIsOnes) {
  Tensor x = random_tensor({3, 4}, 11, -1, 1);
  x.set_requires_grad(true);
  sum(x).backward();
  for (float g : x.grad()) EXPECT_EQ(g, 1.0f);

  // And the finite-difference view of the same fact.
  std::mt19937_64 rng(1);
  std::vector<Tensor64> in{random_tensor<double>({3, 4}, 12, -1, 1)};
  verify::TensorFn<double> f = [](const std::vector<Tensor64>& v) { return sum(v[0]); };
  EXPECT_LT(verify::gradient_error(f, in, {0}, rng, 1e-5), 1e-6);
}

TEST(Elementwise, ShapeMismatch) {
  EXPECT_THROW(add(Tensor::zeros({2, 3}), Tensor::zeros({3, 2})), DimensionError);
  EXPECT_THROW(mul(Tensor::zeros({2}), Tensor::zeros({3})), DimensionError);
}

TEST(Elementwise, SqrtIsGuarded) {
  Tensor x = leaf({1}, {0.0f});
  const Tensor y = sqrt(x);
  EXPECT_NEAR(y.item(), 1e-6, 1e-9);
  y.backward();
  EXPECT_TRUE(std::isfinite(x.grad()[0]));
}

TEST(Elementwise, ClampAndFlips) {
  const Tensor c = clamp(Tensor({3}, {-1, 0.5, 2}), 0.0f, 1.0f);
  EXPECT_EQ(std::vector<float>(c.data().begin(), c.data().end()), (std::vector<float>{0, 0.5, 1}));
  const Tensor x({1, 1, 2, 3}, {1, 2, 3, 4, 5, 6});
  const Tensor h = flip_h(x), v = flip_v(x), r = rot90(x, 1);
  EXPECT_EQ(std::vector<float>(h.data().begin(), h.data().end()), (std::vector<float>{3, 2, 1, 6, 5, 4}));
  EXPECT_EQ(std::vector<float>(v.data().begin(), v.data().end()), (std::vector<float>{4, 5, 6, 1, 2, 3}));
  EXPECT_EQ(r.shape(), (Shape{1, 1, 3, 2}));
  EXPECT_TRUE(kasr::testing::bitwise_equal(rot90(rot90(rot90(rot90(x, 1), 1), 1), 1), x));
}

TEST(Elementwise, ConcatChannels) {
  const Tensor a = Tensor::full({1, 1, 2, 2}, 1.0f), b = Tensor::full({1, 2, 2, 2}, 2.0f);
  const Tensor c = concat_channels(std::vector<Tensor>{a, b});
  ASSERT_EQ(c.shape(), (Shape{1, 3, 2, 2}));
  EXPECT_EQ(c.data()[0], 1.0f);
  EXPECT_EQ(c.data()[4], 2.0f);
}

TEST(Backward, SumOfOnes) {
  Tensor x = leaf({2, 2}, {1, 2, 3, 4});
  sum(x).backward();
  EXPECT_EQ(grad_of(x), (std::vector<double>{1, 1, 1, 1}));
}

TEST(Backward, SquareSum) {
  Tensor x = leaf({2}, {1, 2});
  sum(mul(x, x)).backward();
  EXPECT_EQ(grad_of(x), (std::vector<double>{2, 4}));
}

TEST(Backward, AccumulatesAcrossConsumers) {
  Tensor x = leaf({2, 2}, {1, 2, 3, 4});
  add(sum(x), sum(x)).backward();
  EXPECT_EQ(grad_of(x), (std::vector<double>{2, 2, 2, 2}));
}

TEST(Backward, DiamondVisitsEachNodeOnce) {
  Tensor x = leaf({2}, {1, 3});
  const Tensor y = scalar_mul(x, 2.0f);
  const Tensor z = add(mul(y, y), y);  // d/dx = (2y + 1) * 2
  sum(z).backward();
  EXPECT_EQ(grad_of(x), (std::vector<double>{10, 26}));
}

TEST(Backward, NonScalarRejected) {
  Tensor x = leaf({2}, {1, 2});
  EXPECT_THROW(scalar_mul(x, 2.0f).backward(), ContractError);
}

TEST(Backward, NoGradGuardRecordsNothing) {
  Tensor x = leaf({2}, {1, 2});
  Tensor y;
  {
    NoGradGuard g;
    y = sum(mul(x, x));
  }
  EXPECT_TRUE(y.is_leaf());
  EXPECT_FALSE(y.requires_grad());
}

TEST(Backward, CompositeConvLeakyMeanMatchesFiniteDifferences) {
  std::mt19937_64 rng(42);
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 40 && checked < 20; ++seed) {
    std::vector<Tensor> in{random_tensor({1, 2, 5, 5}, seed, -1, 1), random_tensor({3, 2, 3, 3}, seed + 100, -1, 1),
                           random_tensor({3}, seed + 200, -0.5, 0.5)};
    {
      NoGradGuard g;
      const Tensor pre = conv2d(in[0], in[1], in[2], 1, 1);
      double margin = 1e9;
      for (float v : pre.data()) margin = std::min(margin, std::abs(static_cast<double>(v)));
      if (margin < 0.01) continue;  // too close to the LeakyReLU kink for a 1e-3 step
    }
    verify::TensorFn<float> f = [](const std::vector<Tensor>& v) {
      return mean(leaky_relu(conv2d(v[0], v[1], v[2], 1, 1), 0.2f));
    };
    EXPECT_LT(verify::gradient_error(f, in, {0, 1, 2}, rng, 1e-3), 1e-3) << "seed " << seed;
    ++checked;
  }
  EXPECT_EQ(checked, 20);
}

TEST(Determinism, RepeatedForwardIsBitwiseEqual) {
  const Tensor x = random_tensor({2, 3, 9, 9}, 1);
  const Tensor w = random_tensor({5, 3, 3, 3}, 2, -1, 1);
  const Tensor b = random_tensor({5}, 3);
  EXPECT_TRUE(kasr::testing::bitwise_equal(conv2d(x, w, b, 1, 1), conv2d(x, w, b, 1, 1)));
}
