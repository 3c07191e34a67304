#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "skipformer/errors.hpp"
#include "skipformer/numerics/grad_check.hpp"
#include "skipformer/numerics/ops.hpp"

using namespace skf;
using namespace skf::num;

namespace {

Array random_array(Shape shape, std::mt19937_64& rng, double stddev = 1.0) {
  std::normal_distribution<double> n(0.0, stddev);
  Array a(std::move(shape));
  for (double& v : a.values()) v = n(rng);
  return a;
}

void expect_near(const Array& a, const Array& b, double tol) {
  ASSERT_EQ(a.shape(), b.shape());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], tol) << "at " << i;
}

}  // namespace

TEST(Array, ConstructionValidatesLength) {
  EXPECT_THROW(Array(Shape{2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
  const Array a(Shape{2, 3}, 1.5);
  EXPECT_EQ(a.size(), 6u);
  EXPECT_EQ(a.rows(), 2u);
  EXPECT_EQ(a.cols(), 3u);
  EXPECT_THROW(Array(Shape{2, 2, 2}).rows(), DimensionError);
}

TEST(Array, ReshapeKeepsData) {
  const Array a = Array::matrix({{1, 2, 3}, {4, 5, 6}});
  const Array b = a.reshaped({3, 2});
  EXPECT_EQ(b.storage(), a.storage());
  EXPECT_THROW(a.reshaped({4, 2}), DimensionError);
}

TEST(Matmul, IdentityAndZero) {
  const Var a(Array::matrix({{1, 2}, {3, 4}}));
  EXPECT_EQ(matmul(a, Var(Array::identity(2))).value(), Array::matrix({{1, 2}, {3, 4}}));
  EXPECT_EQ(matmul(a, Var(Array(Shape{2, 2}))).value(), Array::matrix({{0, 0}, {0, 0}}));
}

TEST(Matmul, HandArithmetic) {
  const Var r = matmul(Var(Array::matrix({{1, 2}})), Var(Array::matrix({{3}, {4}})));
  EXPECT_EQ(r.value(), Array::matrix({{11}}));
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  try {
    matmul(Var(Array(Shape{2, 3})), Var(Array(Shape{4, 5})));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("(2, 3)"), std::string::npos) << msg;
    EXPECT_NE(msg.find("(4, 5)"), std::string::npos) << msg;
  }
}

TEST(Softmax, Examples) {
  expect_near(softmax_rows(Var(Array::matrix({{0, 0}}))).value(), Array::matrix({{0.5, 0.5}}),
              1e-15);
  expect_near(softmax_rows(Var(Array::matrix({{1000, 1000}}))).value(),
              Array::matrix({{0.5, 0.5}}), 1e-15);
  expect_near(softmax_rows(Var(Array::matrix({{0.0, std::log(3.0)}}))).value(),
              Array::matrix({{0.25, 0.75}}), 1e-15);
}

TEST(Softmax, EmptyRowRejected) {
  EXPECT_THROW(softmax_rows(Var(Array(Shape{2, 0}))), DimensionError);
}

TEST(Softmax, RowsSumToOneForLargeInputs) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const Array a = random_array({4, 7}, rng, 1e4 / 3.0);
    const Array s = softmax_rows(Var(a)).value();
    for (std::size_t r = 0; r < 4; ++r) {
      double total = 0.0;
      for (double v : s.row(r)) {
        EXPECT_GE(v, 0.0);
        total += v;
      }
      EXPECT_NEAR(total, 1.0, 1e-9);
    }
  }
}

TEST(Softmax, MaskedKeysGetExactlyZero) {
  std::mt19937_64 rng(4);
  const Var a(random_array({3, 5}, rng));
  const Array s = softmax_rows_masked(a, AttentionMask{3, false}).value();
  for (std::size_t r = 0; r < 3; ++r) {
    EXPECT_EQ(s(r, 3), 0.0);
    EXPECT_EQ(s(r, 4), 0.0);
    EXPECT_NEAR(s(r, 0) + s(r, 1) + s(r, 2), 1.0, 1e-12);
  }
  const Array c = softmax_rows_masked(a, AttentionMask{SIZE_MAX, true}).value();
  EXPECT_EQ(c(0, 0), 1.0);
  EXPECT_EQ(c(1, 2), 0.0);
}

TEST(LayerNorm, Examples) {
  auto ln = [](Array row, Array gain, Array bias) {
    return layer_norm(Var(std::move(row)), Var(std::move(gain)), Var(std::move(bias)), 1e-12)
        .value();
  };
  expect_near(ln(Array::matrix({{5, 5, 5}}), Array::vector({1, 1, 1}), Array::vector({0, 0, 0})),
              Array::matrix({{0, 0, 0}}), 1e-9);
  expect_near(ln(Array::matrix({{1, -1}}), Array::vector({1, 1}), Array::vector({0, 0})),
              Array::matrix({{1, -1}}), 1e-9);
  expect_near(ln(Array::matrix({{0, 2}}), Array::vector({2, 2}), Array::vector({1, 1})),
              Array::matrix({{-1, 3}}), 1e-9);
}

TEST(LayerNorm, NormalizesRows) {
  std::mt19937_64 rng(5);
  const Array a = random_array({6, 9}, rng, 3.0);
  const Array n = layer_norm(Var(a), Var(Array(Shape{9}, 1.0)), Var(Array(Shape{9})), 1e-5).value();
  for (std::size_t r = 0; r < 6; ++r) {
    double m = 0.0, v = 0.0;
    for (double x : n.row(r)) m += x;
    m /= 9.0;
    for (double x : n.row(r)) v += (x - m) * (x - m);
    EXPECT_NEAR(m, 0.0, 1e-6);
    EXPECT_NEAR(v / 9.0, 1.0, 1e-5);
  }
}

TEST(LayerNorm, RejectsNonPositiveEps) {
  const Var a(Array::matrix({{1, 2}}));
  const Var g(Array::vector({1, 1}));
  const Var b(Array::vector({0, 0}));
  EXPECT_THROW(layer_norm(a, g, b, 0.0), ParameterError);
  EXPECT_THROW(layer_norm(a, g, b, -1.0), ParameterError);
}

TEST(Activations, Values) {
  const Var x(Array::vector({-2.0, 0.0, 3.0}));
  const Array s = swish(x).value();
  EXPECT_NEAR(s[0], -2.0 / (1.0 + std::exp(2.0)), 1e-15);
  EXPECT_EQ(s[1], 0.0);
  const Array g = glu(Var(Array::matrix({{1.0, 2.0, 0.0, 1.0}}))).value();
  EXPECT_NEAR(g(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(g(0, 1), 2.0 / (1.0 + std::exp(-1.0)), 1e-15);
}

TEST(Conv2d, MatchesDirectLoops) {
  std::mt19937_64 rng(6);
  const std::size_t H = 7, W = 6, Cin = 2, Cout = 3, K = 3, S = 2;
  const Array x = random_array({H, W * Cin}, rng).reshaped({H, W, Cin});
  const Array w = random_array({K * K * Cin, Cout}, rng);
  const Array b = random_array({Cout}, rng);
  const Array y = conv2d(Var(x), Var(w), Var(b), K, S).value();
  const std::size_t Ho = (H - K) / S + 1, Wo = (W - K) / S + 1;
  ASSERT_EQ(y.shape(), (Shape{Ho, Wo, Cout}));
  for (std::size_t i = 0; i < Ho; ++i) {
    for (std::size_t j = 0; j < Wo; ++j) {
      for (std::size_t o = 0; o < Cout; ++o) {
        double acc = b[o];
        for (std::size_t ky = 0; ky < K; ++ky)
          for (std::size_t kx = 0; kx < K; ++kx)
            for (std::size_t c = 0; c < Cin; ++c)
              acc += x[((i * S + ky) * W + (j * S + kx)) * Cin + c] * w(((ky * K) + kx) * Cin + c, o);
        EXPECT_NEAR(y[(i * Wo + j) * Cout + o], acc, 1e-12);
      }
    }
  }
}

TEST(DepthwiseConv, SamePaddingMatchesDirectLoops) {
  std::mt19937_64 rng(7);
  const std::size_t L = 6, D = 3, K = 5;
  const Array x = random_array({L, D}, rng);
  const Array w = random_array({K, D}, rng);
  const Array b = random_array({D}, rng);
  const Array y = depthwise_conv1d(Var(x), Var(w), Var(b)).value();
  for (std::size_t t = 0; t < L; ++t) {
    for (std::size_t d = 0; d < D; ++d) {
      double acc = b[d];
      for (std::size_t k = 0; k < K; ++k) {
        const long src = static_cast<long>(t + k) - static_cast<long>(K / 2);
        if (src >= 0 && src < static_cast<long>(L)) acc += x(src, d) * w(k, d);
      }
      EXPECT_NEAR(y(t, d), acc, 1e-12);
    }
  }
}

TEST(DepthwiseConv, PaddedRowsDoNotLeak) {
  std::mt19937_64 rng(8);
  Array x = random_array({5, 2}, rng);
  const Array w = random_array({3, 2}, rng);
  const Array b(Shape{2});
  const Array short_y = depthwise_conv1d(Var(x), Var(w), Var(b), 3).value();
  for (std::size_t d = 0; d < 2; ++d) x(3, d) = x(4, d) = 1e3;
  const Array changed = depthwise_conv1d(Var(x), Var(w), Var(b), 3).value();
  for (std::size_t t = 0; t < 3; ++t) {
    for (std::size_t d = 0; d < 2; ++d) EXPECT_EQ(short_y(t, d), changed(t, d));
  }
}

TEST(Structural, GatherAndConcat) {
  const Var a(Array::matrix({{1, 2}, {3, 4}, {5, 6}}));
  const std::vector<std::size_t> idx{2, 0};
  EXPECT_EQ(gather_rows(a, idx).value(), Array::matrix({{5, 6}, {1, 2}}));
  const std::vector<std::size_t> bad{3};
  EXPECT_THROW(gather_rows(a, bad), ContractError);
  EXPECT_EQ(concat_rows({a, a}).rows(), 6u);
  EXPECT_EQ(concat_cols({a, a}).value()(2, 3), 6.0);
  EXPECT_EQ(slice_cols(a, 1, 1).value(), Array::matrix({{2}, {4}, {6}}));
  const std::vector<std::size_t> flat{5, 0};
  EXPECT_EQ(gather_elems(a, flat).value(), Array::vector({6, 1}));
}

TEST(Structural, LogSumExpGroups) {
  const Var a(Array::vector({std::log(1.0), std::log(2.0), std::log(3.0)}));
  const Array r = logsumexp_groups(a, {{0, 1, 2}, {1}, {}}).value();
  EXPECT_NEAR(r[0], std::log(6.0), 1e-14);
  EXPECT_NEAR(r[1], std::log(2.0), 1e-14);
  EXPECT_EQ(r[2], kLogZero);
}

TEST(CrossEntropy, UniformLogitsGiveLogV) {
  const Var logits(Array(Shape{3, 5}));
  const std::vector<std::size_t> t{0, 4, 2};
  EXPECT_NEAR(cross_entropy(logits, t).item(), std::log(5.0), 1e-14);
}

TEST(NonFinite, IsAnError) {
  EXPECT_THROW(scale(Var(Array::vector({1e308})), 10.0), NumericError);
}

// Every differentiable op against central differences on random inputs.
class OpGradient : public ::testing::TestWithParam<int> {};

TEST_P(OpGradient, WithinTolerance) {
  std::mt19937_64 rng(100 + GetParam());
  const Array A = random_array({3, 4}, rng);
  const Array B = random_array({4, 2}, rng);
  const Array C = random_array({3, 4}, rng);
  const Array vec4 = random_array({4}, rng);
  const Array weights = random_array({3, 4}, rng);
  // Projects a matrix output to a scalar with fixed random weights so no
  // coordinate's gradient degenerates.
  auto project = [](const Var& v, const Array& w) {
    Array wr = w;
    if (wr.shape() != v.shape()) {
      std::mt19937_64 r(99);
      std::normal_distribution<double> n;
      wr = Array(v.shape());
      for (double& x : wr.values()) x = n(r);
    }
    return sum(mul(v, Var(wr)));
  };
  const double tol = 1e-5;
  using F = std::function<Var(const std::vector<Var>&)>;
  std::vector<std::pair<std::string, std::pair<F, std::vector<Array>>>> cases = {
      {"matmul", {[&](auto& v) { return project(matmul(v[0], v[1]), {}); }, {A, B}}},
      {"transpose", {[&](auto& v) { return project(transpose(v[0]), {}); }, {A}}},
      {"add", {[&](auto& v) { return project(v[0] + v[1], weights); }, {A, C}}},
      {"sub", {[&](auto& v) { return project(v[0] - v[1], weights); }, {A, C}}},
      {"mul", {[&](auto& v) { return project(mul(v[0], v[1]), weights); }, {A, C}}},
      {"add_bias", {[&](auto& v) { return project(add_bias(v[0], v[1]), weights); }, {A, vec4}}},
      {"sigmoid", {[&](auto& v) { return project(sigmoid(v[0]), weights); }, {A}}},
      {"swish", {[&](auto& v) { return project(swish(v[0]), weights); }, {A}}},
      {"glu", {[&](auto& v) { return project(glu(v[0]), {}); }, {A}}},
      {"mean", {[&](auto& v) { return mean(mul(v[0], v[0])); }, {A}}},
      {"softmax", {[&](auto& v) { return project(softmax_rows(v[0]), weights); }, {A}}},
      {"softmax_masked",
       {[&](auto& v) { return project(softmax_rows_masked(v[0], {3, true}), weights); }, {A}}},
      {"log_softmax", {[&](auto& v) { return project(log_softmax_rows(v[0]), weights); }, {A}}},
      {"layer_norm",
       {[&](auto& v) { return project(layer_norm(v[0], v[1], v[2], 1e-5), weights); },
        {A, vec4, random_array({4}, rng)}}},
      {"depthwise_conv1d",
       {[&](auto& v) { return project(depthwise_conv1d(v[0], v[1], v[2]), weights); },
        {A, random_array({3, 4}, rng), vec4}}},
      {"conv2d",
       {[&](auto& v) { return project(conv2d(v[0], v[1], v[2], 3, 2), {}); },
        {random_array({5, 10}, rng).reshaped({5, 5, 2}), random_array({18, 3}, rng),
         random_array({3}, rng)}}},
      {"reshape", {[&](auto& v) { return project(reshape(v[0], {4, 3}), {}); }, {A}}},
      {"slice_cols", {[&](auto& v) { return project(slice_cols(v[0], 1, 2), {}); }, {A}}},
      {"concat_cols", {[&](auto& v) { return project(concat_cols({v[0], v[1]}), {}); }, {A, C}}},
      {"concat_rows", {[&](auto& v) { return project(concat_rows({v[0], v[1]}), {}); }, {A, C}}},
      {"gather_rows",
       {[&](auto& v) {
          const std::vector<std::size_t> idx{2, 0, 2};
          return project(gather_rows(v[0], idx), {});
        },
        {A}}},
      {"gather_elems",
       {[&](auto& v) {
          const std::vector<std::size_t> idx{1, 7, 7, 11};
          return project(gather_elems(v[0], idx), {});
        },
        {A}}},
      {"logsumexp_groups",
       {[&](auto& v) {
          return project(logsumexp_groups(reshape(v[0], {12}), {{0, 1, 5}, {2}, {3, 4, 6, 11}}),
                         {});
        },
        {A}}},
      {"cross_entropy",
       {[&](auto& v) {
          const std::vector<std::size_t> t{1, 3, 0};
          return cross_entropy(v[0], t);
        },
        {A}}},
  };
  const auto& [name, c] = cases[static_cast<std::size_t>(GetParam()) % cases.size()];
  const double err = grad_check(c.first, c.second);
  EXPECT_LE(err, tol) << name;
}

INSTANTIATE_TEST_SUITE_P(AllOps, OpGradient, ::testing::Range(0, 24));
