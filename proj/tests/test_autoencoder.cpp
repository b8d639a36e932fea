#include <cmath>

#include "support.hpp"

using namespace semfilt;

namespace {

// Model over an abstract d-dimensional input (no patch geometry).
AutoencoderModel tiny(Eigen::Index d, Eigen::Index h) {
  AutoencoderModel m;
  m.patch_side = 0;
  m.w1 = Eigen::MatrixXd::Zero(d, h);
  m.b1 = Eigen::VectorXd::Zero(h);
  m.w2 = Eigen::MatrixXd::Zero(h, d);
  m.b2 = Eigen::VectorXd::Zero(d);
  m.zca.mean = Eigen::VectorXd::Zero(d);
  m.zca.whitener = Eigen::MatrixXd::Identity(d, d);
  return m;
}

// Weights {1, -1, 2} placed in w1 and w2, everything else zero.
AutoencoderModel three_weights() {
  AutoencoderModel m = tiny(3, 2);
  m.w1(0, 0) = 1.0;
  m.w1(2, 1) = -1.0;
  m.w2(1, 2) = 2.0;
  m.b1.setConstant(7.0);
  m.b2.setConstant(-9.0);
  return m;
}

}  // namespace

TEST(Encode, ZeroModelRespondsOneHalf) {
  const AutoencoderModel m = tiny(5, 3);
  const ResponseMatrix s = encode(m, Eigen::MatrixXd::Random(5, 4));
  EXPECT_TRUE((s.array() == 0.5).all());
}

TEST(Encode, LargeBiasSaturatesBelowOne) {
  AutoencoderModel m = tiny(2, 1);
  m.b1(0) = 30.0;
  const ResponseMatrix s = encode(m, Eigen::MatrixXd::Random(2, 3));
  EXPECT_TRUE(((1.0 - s.array()).abs() < 1e-12).all());
  EXPECT_TRUE((s.array() < 1.0).all());
}

TEST(Encode, ScalarSigmoid) {
  AutoencoderModel m = tiny(1, 1);
  m.w1(0, 0) = 2.0;
  m.b1(0) = -1.0;
  const ResponseMatrix s = encode(m, Eigen::MatrixXd::Constant(1, 1, 1.0));
  EXPECT_NEAR(s(0, 0), 0.7310585786300049, 1e-15);
}

TEST(Encode, ExtremeInputsStayInsideOpenInterval) {
  AutoencoderModel m = tiny(1, 2);
  m.w1 << 1.0, -1.0;
  const ResponseMatrix s = encode(m, Eigen::MatrixXd::Constant(1, 1, 1e6));
  EXPECT_GT(s.minCoeff(), 0.0);
  EXPECT_LT(s.maxCoeff(), 1.0);
  EXPECT_THROW(encode(m, Eigen::MatrixXd::Zero(2, 1)), Error);
}

TEST(Decode, BiasOnly) {
  AutoencoderModel m = tiny(3, 2);
  m.b2 << 1.0, -2.0, 0.25;
  const Eigen::MatrixXd out = decode(m, Eigen::MatrixXd::Random(2, 4));
  for (Eigen::Index j = 0; j < 4; ++j) EXPECT_TRUE(out.col(j) == m.b2);
  m.w2.setRandom();
  const Eigen::MatrixXd zero_s = decode(m, Eigen::MatrixXd::Zero(2, 3));
  for (Eigen::Index j = 0; j < 3; ++j) EXPECT_TRUE(zero_s.col(j) == m.b2);
}

TEST(Decode, ScalarAffine) {
  AutoencoderModel m = tiny(1, 1);
  m.w2(0, 0) = 3.0;
  m.b2(0) = 1.0;
  EXPECT_DOUBLE_EQ(decode(m, Eigen::MatrixXd::Constant(1, 1, 0.5))(0, 0), 2.5);
  EXPECT_THROW(decode(m, Eigen::MatrixXd::Zero(2, 1)), Error);
}

TEST(Penalty, Examples) {
  const AutoencoderModel m = three_weights();
  EXPECT_DOUBLE_EQ(penalty(Regularizer::l1(2.0), m), 8.0);
  EXPECT_DOUBLE_EQ(penalty(Regularizer::l2(0.5), m), 3.0);
  EXPECT_NEAR(penalty(Regularizer::elastic_net(5.0, 3e-3), m), 20.018, 1e-12);
  EXPECT_EQ(penalty(Regularizer::none(), m), 0.0);
}

TEST(Penalty, IgnoresBiasesAndUnusedCoefficients) {
  AutoencoderModel m = three_weights();
  m.b1.setConstant(1e6);
  EXPECT_DOUBLE_EQ(penalty(Regularizer::l1(2.0), m), 8.0);
  EXPECT_EQ(Regularizer::make(RegularizerKind::L1, 2.0, 9.0).lambda, 0.0);
  EXPECT_EQ(Regularizer::make(RegularizerKind::L2, 2.0, 9.0).beta, 0.0);
  EXPECT_THROW(Regularizer::l1(-1.0), Error);
}

TEST(Cost, AllZeroIsFixedPoint) {
  const AutoencoderModel m = tiny(4, 3);
  const Eigen::MatrixXd p = Eigen::MatrixXd::Zero(4, 5);
  // responses are 0.5 but w2 = 0, so the reconstruction is exact
  EXPECT_EQ(cost(m, p, Regularizer::elastic_net()), 0.0);
}

TEST(Cost, UnitNormColumnsGiveUnitError) {
  const AutoencoderModel m = tiny(4, 3);
  Eigen::MatrixXd p = Eigen::MatrixXd::Random(4, 7);
  p.colwise().normalize();
  EXPECT_NEAR(cost(m, p, Regularizer::none()), 1.0, 1e-14);
}

TEST(Cost, IsErrorPlusPenalty) {
  AutoencoderModel m = tiny(3, 2);
  m.w1.setRandom();
  m.w2.setRandom();
  const Eigen::MatrixXd p = Eigen::MatrixXd::Random(3, 6);
  const Regularizer reg = Regularizer::elastic_net(0.7, 0.2);
  EXPECT_DOUBLE_EQ(cost(m, p, reg), reconstruction_error(m, p) + penalty(reg, m));
}

TEST(Gradient, ZeroAtAllZeroPoint) {
  const AutoencoderModel m = tiny(4, 3);
  const Gradients g = gradient(m, Eigen::MatrixXd::Zero(4, 5), Regularizer::elastic_net());
  EXPECT_EQ(g.w1.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(g.w2.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(g.b1.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(g.b2.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Gradient, MatchesFiniteDifferencesForEveryRegularizer) {
  for (const Regularizer& reg : {Regularizer::none(), Regularizer::l1(5.0), Regularizer::l2(3e-3),
                                 Regularizer::elastic_net(5.0, 3e-3)}) {
    EXPECT_LT(gradcheck(6, 4, 10, reg, 17), 1e-6) << to_string(reg.kind);
  }
}

TEST(Gradient, L1SubgradientUsesZeroAtZero) {
  AutoencoderModel m = tiny(2, 2);
  m.w1(0, 0) = 0.3;
  m.w1(1, 1) = -0.2;
  const Eigen::MatrixXd p = Eigen::MatrixXd::Random(2, 3);
  const Gradients with = gradient(m, p, Regularizer::l1(1.5));
  const Gradients without = gradient(m, p, Regularizer::none());
  const Eigen::MatrixXd diff = with.w1 - without.w1;
  EXPECT_DOUBLE_EQ(diff(0, 0), 1.5);
  EXPECT_DOUBLE_EQ(diff(1, 1), -1.5);
  EXPECT_EQ(diff(0, 1), 0.0);
  EXPECT_EQ((with.w2 - without.w2).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_TRUE(with.b1 == without.b1);
}

TEST(Gradient, DescentStepLowersCost) {
  std::mt19937_64 gen(4);
  std::normal_distribution<double> g(0.0, 0.3);
  AutoencoderModel m = tiny(5, 3);
  m.w1 = Eigen::MatrixXd::NullaryExpr(5, 3, [&] { return g(gen); });
  m.w2 = Eigen::MatrixXd::NullaryExpr(3, 5, [&] { return g(gen); });
  const Eigen::MatrixXd p = Eigen::MatrixXd::NullaryExpr(5, 20, [&] { return g(gen); });
  const Regularizer reg = Regularizer::l2(0.01);
  const double before = cost(m, p, reg);
  const Gradients gr = gradient(m, p, reg);
  m.w1 -= 1e-3 * gr.w1;
  m.w2 -= 1e-3 * gr.w2;
  m.b1 -= 1e-3 * gr.b1;
  m.b2 -= 1e-3 * gr.b2;
  EXPECT_LT(cost(m, p, reg), before);
}

TEST(Regularizer, NamesRoundTrip) {
  for (RegularizerKind k : {RegularizerKind::None, RegularizerKind::L1, RegularizerKind::L2,
                            RegularizerKind::ElasticNet}) {
    EXPECT_EQ(parse_regularizer_kind(to_string(k)), k);
  }
  EXPECT_THROW(parse_regularizer_kind("lasso-ish"), Error);
}

TEST(Model, ValidateCatchesShapeErrors) {
  AutoencoderModel m = AutoencoderModel::zeros(2, 3);
  EXPECT_NO_THROW(m.validate());
  m.b1 = Eigen::VectorXd::Zero(2);
  EXPECT_THROW(m.validate(), Error);
  m = AutoencoderModel::zeros(2, 3);
  m.w1(0, 0) = std::nan("");
  EXPECT_THROW(m.validate(), Error);
}
