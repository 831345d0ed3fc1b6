#include <gtest/gtest.h>

#include <cmath>

#include "plls/rng.hpp"
#include "plls/tensor/kernels.hpp"
#include "plls/tensor/ops.hpp"

using namespace plls;

namespace {

void expect_values(const Tensor& t, std::initializer_list<Real> expected, Real tol = 1e-6f) {
  ASSERT_EQ(t.numel(), expected.size());
  std::size_t i = 0;
  for (Real e : expected) EXPECT_NEAR(t[i++], e, tol) << "index " << i - 1;
}

Tensor random(Shape shape, Rng& rng, bool rg = false) {
  Tensor t(std::move(shape), Real{0}, rg);
  for (Real& v : t.data()) v = rng.uniform(-2, 2);
  return t;
}

}  // namespace

TEST(Tensor, NumelMatchesShape) {
  Tensor t(Shape{2, 3, 4});
  EXPECT_EQ(t.numel(), 24u);
  EXPECT_EQ(t.data().size(), 24u);
  EXPECT_THROW(Tensor(Shape{2, 0}), DimensionError);
  EXPECT_THROW(Tensor(Shape{2, 2}, std::vector<Real>{1, 2, 3}), DimensionError);
}

TEST(Matmul, IdentityLeft) {
  const Tensor eye = Tensor::matrix({{1, 0}, {0, 1}});
  const Tensor a = Tensor::matrix({{1, 2}, {3, 4}});
  expect_values(matmul(eye, a), {1, 2, 3, 4});
  expect_values(matmul(a, eye), {1, 2, 3, 4});
}

TEST(Matmul, RowTimesColumn) {
  const Tensor c = matmul(Tensor::matrix({{1, 2}}), Tensor::matrix({{3}, {4}}));
  EXPECT_EQ(c.shape(), (Shape{1, 1}));
  EXPECT_FLOAT_EQ(c.item(), 11);
}

TEST(Matmul, GradientOfSum) {
  const Tensor a = Tensor::matrix({{1, 1}}, true);
  const Tensor b = Tensor::matrix({{2}, {5}});
  sum(matmul(a, b)).backward();
  ASSERT_TRUE(a.has_grad());
  EXPECT_FLOAT_EQ(a.grad()[0], 2);
  EXPECT_FLOAT_EQ(a.grad()[1], 5);
  EXPECT_FALSE(b.has_grad());
}

TEST(Matmul, ShapeMismatchReportsBothShapes) {
  try {
    matmul(Tensor(Shape{2, 3}), Tensor(Shape{2, 3}));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3] x [2x3]"), std::string::npos) << msg;
  }
}

TEST(Conv2d, UnitKernelScales) {
  const Tensor out = conv2d(Tensor(Shape{1, 3, 3}, 1), Tensor(Shape{1, 1, 1, 1}, 2), Tensor(), 1);
  EXPECT_EQ(out.shape(), (Shape{1, 3, 3}));
  for (Real v : out.data()) EXPECT_FLOAT_EQ(v, 2);
}

TEST(Conv2d, StrideTwoWindowSums) {
  const Tensor out = conv2d(Tensor(Shape{1, 4, 4}, 1), Tensor(Shape{1, 1, 2, 2}, 1), Tensor(Shape{1}), 2);
  EXPECT_EQ(out.shape(), (Shape{1, 2, 2}));
  for (Real v : out.data()) EXPECT_FLOAT_EQ(v, 4);
}

TEST(Conv2d, IdentityKernelIsIdentity) {
  Rng rng(3);
  const Tensor x = random({4, 5, 6}, rng);
  Tensor k(Shape{4, 4, 1, 1});
  for (std::size_t c = 0; c < 4; ++c) k.data()[c * 4 + c] = 1;
  const Tensor y = conv2d(x, k, Tensor(), 1);
  ASSERT_EQ(y.shape(), x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y[i], x[i]);
}

TEST(Conv2d, KernelLargerThanInputThrows) {
  EXPECT_THROW(conv2d(Tensor(Shape{1, 2, 2}), Tensor(Shape{1, 1, 3, 3}), Tensor(), 1), DimensionError);
  EXPECT_THROW(deconv2d(Tensor(Shape{1, 2, 2}), Tensor(Shape{2, 1, 3, 3}), Tensor(), 1), DimensionError);
}

TEST(Deconv2d, SingleWindowAdjoint) {
  const Tensor out = deconv2d(Tensor(Shape{1, 1, 1}, 1), Tensor(Shape{1, 1, 2, 2}, 1), Tensor(), 1);
  EXPECT_EQ(out.shape(), (Shape{1, 2, 2}));
  for (Real v : out.data()) EXPECT_FLOAT_EQ(v, 1);
}

TEST(Deconv2d, OutputSize) {
  const Tensor out = deconv2d(Tensor(Shape{2, 3, 3, 3}), Tensor(Shape{3, 5, 4, 4}), Tensor(), 2);
  EXPECT_EQ(out.shape(), (Shape{2, 5, 8, 8}));
}

// Builds the explicit matrix of conv2d on a 3x3 single-channel image with a
// 2x2 kernel and checks deconv2d against its transpose, and the composition
// conv2d(deconv2d(y)) against M * M^T * y.
TEST(Deconv2d, MatchesDenseAdjointOracle) {
  Rng rng(11);
  const Tensor k = random({1, 1, 2, 2}, rng);
  const std::size_t in = 9, out = 4;
  std::vector<double> m(out * in, 0.0);
  for (std::size_t oy = 0; oy < 2; ++oy)
    for (std::size_t ox = 0; ox < 2; ++ox)
      for (std::size_t ky = 0; ky < 2; ++ky)
        for (std::size_t kx = 0; kx < 2; ++kx) m[(oy * 2 + ox) * in + (oy + ky) * 3 + (ox + kx)] = k[ky * 2 + kx];

  const Tensor y = random({1, 2, 2}, rng);
  const Tensor x = deconv2d(y, k, Tensor(), 1);
  ASSERT_EQ(x.shape(), (Shape{1, 3, 3}));
  std::vector<double> mt_y(in, 0.0);
  for (std::size_t j = 0; j < in; ++j)
    for (std::size_t i = 0; i < out; ++i) mt_y[j] += m[i * in + j] * y[i];
  for (std::size_t j = 0; j < in; ++j) EXPECT_NEAR(x[j], mt_y[j], 1e-5);

  const Tensor round = conv2d(x, k, Tensor(), 1);
  for (std::size_t i = 0; i < out; ++i) {
    double expected = 0;
    for (std::size_t j = 0; j < in; ++j) expected += m[i * in + j] * mt_y[j];
    EXPECT_NEAR(round[i], expected, 1e-5);
  }
}

TEST(Elementwise, ReluSigmoidTanh) {
  expect_values(relu(Tensor::vector({-1, 0, 2})), {0, 0, 2});
  EXPECT_FLOAT_EQ(sigmoid(Tensor::scalar(0)).item(), 0.5f);
  const Tensor x = Tensor::scalar(0, true);
  tanh(x).backward();
  EXPECT_FLOAT_EQ(x.grad()[0], 1);
}

TEST(Elementwise, LogOfNonPositiveIsDomainError) {
  EXPECT_THROW(log(Tensor::vector({1, 0})), DomainError);
  EXPECT_THROW(log(Tensor::vector({-3})), DomainError);
  EXPECT_NO_THROW(log(Tensor::vector({1e-30f})));
}

TEST(Backward, PowerRule) {
  const Tensor x = Tensor::scalar(3, true);
  square(x).backward();
  EXPECT_FLOAT_EQ(x.grad()[0], 6);
}

TEST(Backward, RepeatedCallsAccumulate) {
  Tensor x = Tensor::scalar(3, true);
  const Tensor y = square(x);
  y.backward();
  y.backward();
  EXPECT_FLOAT_EQ(x.grad()[0], 12);
  x.zero_grad();
  y.backward();
  EXPECT_FLOAT_EQ(x.grad()[0], 6);
}

TEST(Backward, NonScalarLossIsContractError) {
  const Tensor x = Tensor::vector({1, 2}, true);
  EXPECT_THROW(square(x).backward(), ContractError);
}

TEST(Backward, OnlyRequiresGradTensorsReceiveGradients) {
  const Tensor a = Tensor::vector({1, 2}, true);
  const Tensor b = Tensor::vector({3, 4});
  sum(mul(a, b)).backward();
  EXPECT_TRUE(a.has_grad());
  EXPECT_FALSE(b.has_grad());
}

// y = x * x used twice through a diamond: f = sum(u + v), u = 2y, v = y^2.
// df/dx = (2 + 2y) * 2x.
TEST(Backward, DiamondSumsBothPaths) {
  const Tensor x = Tensor::vector({0.5f, -1.5f}, true);
  const Tensor y = mul(x, x);
  sum(add(scale(y, 2), square(y))).backward();
  for (std::size_t i = 0; i < 2; ++i) {
    const double xi = x[i], yi = xi * xi;
    EXPECT_NEAR(x.grad()[i], (2 + 2 * yi) * 2 * xi, 1e-5);
  }
}

TEST(NoGradGuard, SuppressesRecording) {
  const Tensor x = Tensor::scalar(2, true);
  Tensor y;
  {
    autograd::NoGradGuard guard;
    y = square(x);
  }
  EXPECT_FALSE(y.requires_grad());
  EXPECT_TRUE(autograd::grad_enabled());
}

TEST(Kernels, ParallelGemmMatchesSerial) {
  Rng rng(5);
  for (auto [m, n, k] : {std::tuple{1, 1, 1}, {7, 5, 3}, {33, 65, 17}, {128, 96, 200}}) {
    const Tensor a = random({std::size_t(m), std::size_t(k)}, rng);
    const Tensor b = random({std::size_t(k), std::size_t(n)}, rng);
    const Tensor bt = random({std::size_t(n), std::size_t(k)}, rng);
    const Tensor at = random({std::size_t(k), std::size_t(m)}, rng);
    std::vector<Real> c1(m * n, 1), c2(m * n, 1);
    kernels::gemm_nn(m, n, k, a.data().data(), b.data().data(), c1.data(), true);
    kernels::serial::gemm_nn(m, n, k, a.data().data(), b.data().data(), c2.data(), true);
    for (int i = 0; i < m * n; ++i) EXPECT_NEAR(c1[i], c2[i], 1e-4 * k);
    kernels::gemm_nt(m, n, k, a.data().data(), bt.data().data(), c1.data(), false);
    kernels::serial::gemm_nt(m, n, k, a.data().data(), bt.data().data(), c2.data(), false);
    for (int i = 0; i < m * n; ++i) EXPECT_NEAR(c1[i], c2[i], 1e-4 * k);
    kernels::gemm_tn(m, n, k, at.data().data(), b.data().data(), c1.data(), false);
    kernels::serial::gemm_tn(m, n, k, at.data().data(), b.data().data(), c2.data(), false);
    for (int i = 0; i < m * n; ++i) EXPECT_NEAR(c1[i], c2[i], 1e-4 * k);
  }
}

TEST(Kernels, ParallelConvMatchesSerial) {
  Rng rng(9);
  kernels::ConvGeometry g{3, 4, 13, 13, 4, 2};
  const Tensor x = random({3, 4, 13, 13}, rng);
  const Tensor k = random({6, 4, 4, 4}, rng);
  const Tensor bias = random({6}, rng);
  const std::size_t out = 3 * 6 * g.out_positions();
  std::vector<Real> y1(out), y2(out);
  kernels::conv2d_forward(g, 6, x.data().data(), k.data().data(), bias.data().data(), y1.data());
  kernels::serial::conv2d_forward(g, 6, x.data().data(), k.data().data(), bias.data().data(), y2.data());
  for (std::size_t i = 0; i < out; ++i) EXPECT_NEAR(y1[i], y2[i], 1e-4);

  // Deconvolution back to [3 x 4 x 13 x 13] from the conv output.
  const Tensor kd = random({6, 4, 4, 4}, rng);
  std::vector<Real> z1(x.numel()), z2(x.numel());
  kernels::deconv2d_forward(g, 6, y2.data(), kd.data().data(), nullptr, z1.data());
  kernels::serial::deconv2d_forward(g, 6, y2.data(), kd.data().data(), nullptr, z2.data());
  for (std::size_t i = 0; i < z1.size(); ++i) EXPECT_NEAR(z1[i], z2[i], 1e-3);
}

TEST(Ops, BatchedConvEqualsPerImage) {
  Rng rng(21);
  const Tensor x = random({2, 3, 9, 9}, rng);
  const Tensor k = random({5, 3, 3, 3}, rng);
  const Tensor b = random({5}, rng);
  const Tensor y = conv2d(x, k, b, 2);
  ASSERT_EQ(y.shape(), (Shape{2, 5, 4, 4}));
  for (std::size_t n = 0; n < 2; ++n) {
    Tensor xi(Shape{3, 9, 9});
    std::copy_n(x.data().begin() + n * 243, 243, xi.data().begin());
    const Tensor yi = conv2d(xi, k, b, 2);
    for (std::size_t i = 0; i < yi.numel(); ++i) EXPECT_NEAR(y[n * 80 + i], yi[i], 1e-5);
  }
}
