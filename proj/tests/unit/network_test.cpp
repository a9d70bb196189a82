#include "mim/nn/network.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

namespace mim::nn {
namespace {

TEST(Activation, Definitions) {
  EXPECT_EQ(activation_eval(Activation::ReQu, 2.0), 4.0);
  EXPECT_EQ(activation_eval(Activation::ReCu, -1.0), 0.0);
  EXPECT_EQ(activation_eval(Activation::Swish, 0.0), 0.0);
  EXPECT_EQ(activation_eval(Activation::ReCu, 2.0), 8.0);
}

TEST(CountParameters, ClosedForms) {
  EXPECT_EQ(count_parameters(Method::DGM, 2, 10, 2), 371u);
  EXPECT_EQ(count_parameters(Method::MIM, 2, 10, 2), 753u);
  EXPECT_EQ(count_parameters(Method::DGM, 1, 1, 1), 6u);
}

TEST(CountParameters, MatchesPackedLayout) {
  for (int m : {1, 2, 3, 4})
    for (int n : {4, 10, 20})
      for (int d = 1; d <= n; d += 3) {
        const auto u = make_spec(d, n, m, 1, Activation::ReQu);
        const auto p = make_spec(d, n, m, d, Activation::ReQu);
        EXPECT_EQ(count_parameters(u), count_parameters(Method::DGM, m, n, d));
        EXPECT_EQ(Bundle({u, p}).parameter_count(), count_parameters(Method::MIM, m, n, d));
      }
}

TEST(Spec, Validation) {
  EXPECT_THROW(make_spec(1, 0, 1, 1, Activation::ReQu).validate(), std::invalid_argument);
  NetworkSpec s{5, 3, 1, 1, Activation::ReQu, Lift::ZeroPad};
  EXPECT_THROW(s.validate(), std::invalid_argument);
  EXPECT_EQ(make_spec(5, 3, 1, 1, Activation::ReQu).lift, Lift::Linear);
}

TEST(Forward, ZeroNetworkIsZero) {
  const auto spec = make_spec(3, 6, 2, 2, Activation::ReQu);
  const std::vector<double> theta(count_parameters(spec), 0.0);
  const Matrix x = Matrix::Random(3, 5);
  EXPECT_EQ(evaluate(spec, theta, x), Matrix::Zero(2, 5));
}

TEST(Forward, ZeroBlocksGiveShortcut) {
  for (Activation a : {Activation::ReQu, Activation::ReCu, Activation::Swish}) {
    const auto spec = make_spec(3, 3, 2, 3, a);
    const auto blocks = layout(spec);
    std::vector<double> theta(count_parameters(spec), 0.0);
    const auto& wo = blocks[blocks.size() - 2];
    for (Index i = 0; i < 3; ++i) theta[wo.offset + static_cast<std::size_t>(i * 3 + i)] = 1.0;
    const Matrix x = Matrix::Random(3, 4);
    EXPECT_TRUE(evaluate(spec, theta, x).isApprox(x, 0.0)) << to_string(a);
  }
}

// Straight-line forward pass on plain doubles, independent of the tape.
Matrix reference_forward(const NetworkSpec& s, const std::vector<double>& th, const Matrix& x) {
  std::size_t off = 0;
  auto take = [&](Index r, Index c) {
    Matrix w = Eigen::Map<const Matrix>(th.data() + off, r, c);
    off += static_cast<std::size_t>(r * c);
    return w;
  };
  auto sigma = [&](Matrix z) {
    return z.unaryExpr([&](double v) { return activation_eval(s.activation, v); }).eval();
  };
  Matrix out(s.d_out, x.cols());
  std::vector<Matrix> W1, B1, W2, B2;
  Matrix A, C;
  if (s.lift == Lift::Linear) {
    A = take(s.n, s.d_in);
    C = take(s.n, 1);
  }
  for (int k = 0; k < s.m; ++k) {
    W1.push_back(take(s.n, (k == 0 && s.lift == Lift::ZeroPad) ? s.d_in : s.n));
    B1.push_back(take(s.n, 1));
    W2.push_back(take(s.n, s.n));
    B2.push_back(take(s.n, 1));
  }
  Matrix Wo = take(s.d_out, s.n), Bo = take(s.d_out, 1);
  for (Index j = 0; j < x.cols(); ++j) {
    Eigen::VectorXd sk = Eigen::VectorXd::Zero(s.n);
    Eigen::VectorXd in;
    if (s.lift == Lift::Linear) {
      sk = A * x.col(j) + C;
    } else {
      sk.head(s.d_in) = x.col(j);
    }
    for (int k = 0; k < s.m; ++k) {
      in = (k == 0 && s.lift == Lift::ZeroPad) ? Eigen::VectorXd(x.col(j)) : sk;
      Eigen::VectorXd h = sigma(W1[k] * in + B1[k]);
      sk = sigma(W2[k] * h + B2[k]) + sk;
    }
    out.col(j) = Wo * sk + Bo;
  }
  return out;
}

TEST(Forward, MatchesStraightLineReference) {
  std::mt19937_64 rng(1);
  for (Activation a : {Activation::ReQu, Activation::ReCu, Activation::Swish}) {
    for (auto [d, n] : {std::pair{2, 10}, std::pair{7, 4}}) {
      const auto spec = make_spec(d, n, 3, 2, a);
      const auto theta = mim::testing::random_vector(count_parameters(spec), rng, 0.5);
      const Matrix x = Matrix::Random(d, 9);
      const Matrix got = evaluate(spec, theta, x);
      const Matrix want = reference_forward(spec, theta, x);
      EXPECT_LE((got - want).cwiseAbs().maxCoeff(), 1e-14 * std::max(1.0, want.cwiseAbs().maxCoeff()));
    }
  }
}

TEST(Forward, JetValuesEqualPlainValues) {
  const auto spec = make_spec(3, 8, 2, 1, Activation::Swish);
  const auto theta = init_parameters(spec, 4);
  const Matrix x = Matrix::Random(3, 6);
  ad::Tape tape(theta, layout(spec));
  const Matrix v = forward(spec, tape, 0, ad::lift_inputs(tape, x, ad::Order::Second)).value_matrix();
  // Packed jets take a different GEMM column split, so FMA rounding may differ.
  const Matrix plain = evaluate(spec, theta, x);
  EXPECT_LE((v - plain).cwiseAbs().maxCoeff(), 1e-15 * std::max(1.0, plain.cwiseAbs().maxCoeff()));
}

TEST(Forward, DimensionMismatchRejected) {
  const auto spec = make_spec(3, 8, 1, 1, Activation::ReQu);
  const auto theta = init_parameters(spec, 4);
  EXPECT_THROW(evaluate(spec, theta, Matrix::Zero(2, 1)), std::invalid_argument);
}

TEST(Init, DeterministicXavier) {
  const auto spec = make_spec(2, 10, 2, 1, Activation::ReQu);
  EXPECT_EQ(init_parameters(spec, 9), init_parameters(spec, 9));
  EXPECT_NE(init_parameters(spec, 9), init_parameters(spec, 10));
  const auto theta = init_parameters(spec, 9);
  for (const auto& b : layout(spec)) {
    const double bound = std::sqrt(6.0 / double(b.rows + b.cols));
    for (std::size_t j = 0; j < b.size(); ++j) {
      if (b.cols == 1) {
        EXPECT_EQ(theta[b.offset + j], 0.0);
      } else {
        EXPECT_LE(std::abs(theta[b.offset + j]), bound);
      }
    }
  }
}

TEST(Init, WeightMeanWithinThreeStandardErrors) {
  const auto spec = make_spec(1, 100, 5, 1, Activation::ReQu);
  std::vector<double> w;
  for (std::uint64_t seed = 0; w.size() < 100000; ++seed) {
    const auto theta = init_parameters(spec, seed);
    for (const auto& b : layout(spec)) {
      if (b.rows == 100 && b.cols == 100) w.insert(w.end(), theta.begin() + long(b.offset),
                                                  theta.begin() + long(b.offset + b.size()));
    }
  }
  const double a = std::sqrt(6.0 / 200.0);
  const double mean = std::accumulate(w.begin(), w.end(), 0.0) / double(w.size());
  const double se = a / std::sqrt(3.0) / std::sqrt(double(w.size()));
  EXPECT_LE(std::abs(mean), 3 * se);
}

TEST(Bundle, RoundTripAndOffsets) {
  const Bundle b({make_spec(2, 5, 2, 1, Activation::ReQu), make_spec(2, 5, 2, 2, Activation::ReQu)});
  EXPECT_EQ(b.offset(1), b.count(0));
  EXPECT_EQ(b.parameter_count(), b.count(0) + b.count(1));
  const auto theta = b.init(3);
  EXPECT_EQ(theta.size(), b.parameter_count());
  // The second network read from the bundle equals the same network standalone.
  const Matrix x = Matrix::Random(2, 3);
  std::vector<double> part(theta.begin() + long(b.offset(1)), theta.end());
  ad::Tape tape(theta, b.blocks());
  const Matrix v = b.forward(1, tape, ad::lift_inputs(tape, x, ad::Order::Value)).value_matrix();
  EXPECT_EQ(v, evaluate(b.spec(1), part, x));
}

// grad N . x, evaluated with first-order jets; used as a plain-value oracle.
double euler_derivative(const NetworkSpec& spec, const std::vector<double>& theta,
                        const Eigen::VectorXd& x) {
  ad::Tape t(theta, layout(spec));
  ad::Jet in = ad::lift_inputs(t, x, ad::Order::First);
  ad::Jet n = forward(spec, t, 0, in);
  double s = 0.0;
  for (int i = 0; i < spec.d_in; ++i) s += x(i) * n.tangent_matrix(i)(0, 0);
  return s;
}

TEST(ForwardDirectional, MatchesTangentsAndSecondDifferences) {
  std::mt19937_64 rng(17);
  for (Activation a : {Activation::ReQu, Activation::ReCu, Activation::Swish}) {
    const auto spec = make_spec(2, 6, 2, 1, a);
    const auto theta = mim::testing::random_vector(count_parameters(spec), rng, 0.6);
    Eigen::VectorXd x(2);
    x << 0.35, -0.6;
    ad::Tape tape(theta, layout(spec));
    ad::Jet in = ad::lift_inputs(tape, x, ad::Order::Second);
    auto [n, dn] = forward_directional(spec, tape, 0, in, in);
    EXPECT_EQ(n.value_matrix(), forward(spec, tape, 0, in).value_matrix());
    EXPECT_NEAR(dn.value_matrix()(0, 0), euler_derivative(spec, theta, x), 1e-13);

    const mim::testing::ScalarField g = [&](const Eigen::VectorXd& p) {
      return euler_derivative(spec, theta, p);
    };
    for (int i = 0; i < 2; ++i) {
      EXPECT_NEAR(dn.tangent_matrix(i)(0, 0), mim::testing::fourth_order_diff(g, x, i, 1e-3), 1e-7)
          << to_string(a);
      EXPECT_NEAR(dn.curvature_matrix(i)(0, 0),
                  mim::testing::fourth_order_second_diff(g, x, i, 1e-3), 1e-5)
          << to_string(a);
    }
  }
}

TEST(ForwardDirectional, ParameterGradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(23);
  const auto spec = make_spec(2, 5, 2, 1, Activation::Swish);
  const auto theta = mim::testing::random_vector(count_parameters(spec), rng, 0.6);
  Matrix x(2, 3);
  x << 0.1, 0.5, -0.4, 0.3, -0.2, 0.7;
  auto loss = [&](ad::Tape& t) {
    ad::Jet in = ad::lift_inputs(t, x, ad::Order::Second);
    auto [n, dn] = forward_directional(spec, t, 0, in, in);
    return ad::sum_squares(dn.laplacian() + n.value());
  };
  ad::Tape tape(theta, layout(spec));
  const auto g = ad::param_gradients(loss(tape));
  const auto fd = mim::testing::fd_gradient(
      [&](const std::vector<double>& th) {
        ad::Tape t(th, layout(spec));
        return loss(t).scalar();
      },
      theta, 1e-6);
  EXPECT_LE(mim::testing::relative_max_error(g, fd), 1e-6);
}

}  // namespace
}  // namespace mim::nn
