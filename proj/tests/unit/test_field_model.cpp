#include "ctflow/field_model.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace ctflow;
using ctflow::testing::random_vector;

namespace {

double silu(double z) { return z / (1.0 + std::exp(-z)); }

}  // namespace

TEST(FieldModel, ZeroModelIsZeroMap) {
  const VectorFieldModel zero({6, 16, 3, 8});
  std::mt19937_64 gen(1);
  for (int trial = 0; trial < 20; ++trial) {
    const double t = std::uniform_real_distribution<double>(0.0, 1.0)(gen);
    EXPECT_EQ(zero(random_vector(6, gen), random_vector(6, gen), t), StateVector::Zero(6));
  }
}

TEST(FieldModel, FreshInitialisationIsZeroMap) {
  const auto m = VectorFieldModel::initialized({6, 16, 3, 8}, 4);
  EXPECT_GT(m.parameters().cwiseAbs().sum(), 0.0);
  std::mt19937_64 gen(2);
  EXPECT_EQ(m(random_vector(6, gen), random_vector(6, gen), 0.4), StateVector::Zero(6));
}

TEST(FieldModel, SeededInitialisationIsBitIdentical) {
  auto a = VectorFieldModel::initialized({5, 12, 2, 4}, 9);
  auto b = VectorFieldModel::initialized({5, 12, 2, 4}, 9);
  EXPECT_EQ(a.parameters(), b.parameters());
  std::mt19937_64 gen(3);
  Eigen::VectorXd p = a.parameters() + 0.1 * random_vector(a.parameter_count(), gen);
  a.set_parameters(p);
  b.set_parameters(p);
  const StateVector x = random_vector(5, gen), c = random_vector(5, gen);
  EXPECT_EQ(a(x, c, 0.3), b(x, c, 0.3));
  EXPECT_NE(VectorFieldModel::initialized({5, 12, 2, 4}, 10).parameters(), a.parameters());
}

// Skip gains constant in time: A = 1, B = -1 on the bias column of the gate.
TEST(FieldModel, HandSetSkipGivesStateMinusCondition) {
  const Eigen::Index d = 4, e = 4;
  VectorFieldModel m({d, 8, 2, e});
  Eigen::VectorXd p = Eigen::VectorXd::Zero(m.parameter_count());
  const Eigen::Index skip = m.parameter_count() - 2 * d * (e + 1);
  p.segment(skip, d).setConstant(1.0);
  p.segment(skip + d * (e + 1), d).setConstant(-1.0);
  m.set_parameters(p);
  std::mt19937_64 gen(4);
  for (int trial = 0; trial < 10; ++trial) {
    const StateVector x = random_vector(d, gen), c = random_vector(d, gen);
    EXPECT_LE((m(x, c, 1.0) - (x - c)).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LE((m(x, c, 0.5) - 2.0 * (x - c)).cwiseAbs().maxCoeff(), 1e-14);
  }
}

// d = 1, width 1, depth 1, e = 2: every weight set by hand and the output
// recomputed from the documented layout.
TEST(FieldModel, HandComputedTinyNetwork) {
  VectorFieldModel m({1, 1, 1, 2});
  ASSERT_EQ(m.parameter_count(), (4 + 1) + (1 + 1) + 2 * 3);
  Eigen::VectorXd p(m.parameter_count());
  // W0 (1x4) over [x, c, sin, cos], b0, W_out, b_out, A (1x3), B (1x3)
  p << 0.5, -0.25, 0.75, 0.1, 0.2, 1.5, -0.3, 0.4, 0.6, -0.2, 0.3, -0.5, 0.7;
  m.set_parameters(p);
  const double x = 0.8, c = -0.4, t = 0.2;
  const double s = std::sin(2 * std::numbers::pi * t), co = std::cos(2 * std::numbers::pi * t);
  const double h = silu(0.5 * x - 0.25 * c + 0.75 * s + 0.1 * co + 0.2);
  const double net = 1.5 * h - 0.3;
  const double a = 0.4 + 0.6 * s - 0.2 * co;
  const double b = 0.3 - 0.5 * s + 0.7 * co;
  const double expected = (net + a * x + b * c) / t;
  StateVector xv(1), cv(1);
  xv << x;
  cv << c;
  EXPECT_NEAR(m(xv, cv, t)[0], expected, 1e-14);
}

TEST(FieldModel, OutputScaleFloorsAtTDelta) {
  EXPECT_DOUBLE_EQ(VectorFieldModel::output_scale(1.0), 1.0);
  EXPECT_DOUBLE_EQ(VectorFieldModel::output_scale(0.5), 2.0);
  EXPECT_DOUBLE_EQ(VectorFieldModel::output_scale(0.0), 1.0 / kDefaultTDelta);
  EXPECT_DOUBLE_EQ(VectorFieldModel::output_scale(0.01), 1.0 / kDefaultTDelta);
}

TEST(FieldModel, BatchMatchesColumnwiseAndCounts) {
  auto m = VectorFieldModel::initialized({5, 12, 2, 6}, 2);
  std::mt19937_64 gen(5);
  m.set_parameters(m.parameters() + 0.2 * random_vector(m.parameter_count(), gen));
  Eigen::MatrixXd x(5, 3), c(5, 3);
  for (int j = 0; j < 3; ++j) {
    x.col(j) = random_vector(5, gen);
    c.col(j) = random_vector(5, gen);
  }
  const std::vector<double> t = {0.1, 0.6, 1.0};
  m.reset_evaluation_count();
  const Eigen::MatrixXd out = m.forward_batch(x, c, t);
  EXPECT_EQ(m.evaluation_count(), 3u);
  for (int j = 0; j < 3; ++j) {
    EXPECT_LE((out.col(j) - m(x.col(j), c.col(j), t[static_cast<std::size_t>(j)])).cwiseAbs().maxCoeff(), 1e-13);
  }
  EXPECT_EQ(m.evaluation_count(), 6u);
}

TEST(FieldModel, DimensionErrors) {
  const VectorFieldModel m({4, 8, 2, 4});
  EXPECT_THROW(m(StateVector::Zero(3), StateVector::Zero(4), 0.5), DimensionError);
  EXPECT_THROW(m(StateVector::Zero(4), StateVector::Zero(5), 0.5), DimensionError);
  VectorFieldModel n({4, 8, 2, 4});
  EXPECT_THROW(n.set_parameters(Eigen::VectorXd::Zero(3)), DimensionError);
  EXPECT_THROW(VectorFieldModel({0, 8, 2, 4}), ArgumentError);
  EXPECT_THROW(VectorFieldModel({4, 8, 2, 3}), ArgumentError);
}

TEST(TimeEmbed, AtZero) {
  const Eigen::VectorXd e = time_embed(0.0, 16);
  EXPECT_EQ(e.head(8), Eigen::VectorXd::Zero(8));
  EXPECT_EQ(e.tail(8), Eigen::VectorXd::Ones(8));
}

TEST(TimeEmbed, QuarterPeriod) {
  const Eigen::VectorXd e = time_embed(0.25, 2);
  EXPECT_NEAR(e[0], 1.0, 1e-12);
  EXPECT_NEAR(e[1], 0.0, 1e-12);
}

TEST(TimeEmbed, InjectiveOnGrid) {
  const int n = 1000;
  std::vector<Eigen::VectorXd> pts;
  for (int i = 0; i < n; ++i) pts.push_back(time_embed(i / double(n - 1), 32));
  double closest = 1e300;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) closest = std::min(closest, (pts[i] - pts[j]).squaredNorm());
  }
  EXPECT_GT(closest, 1e-9);
}

TEST(TimeEmbed, BoundedAndLogSpaced) {
  const auto w = time_embed_frequencies(8);
  ASSERT_EQ(w.size(), 4u);
  EXPECT_DOUBLE_EQ(w.front(), 2 * std::numbers::pi);
  EXPECT_NEAR(w.back(), 32 * std::numbers::pi, 1e-12);
  for (std::size_t k = 1; k + 1 < w.size(); ++k) EXPECT_NEAR(w[k] * w[k], w[k - 1] * w[k + 1], 1e-9);
  for (int i = 0; i <= 50; ++i) EXPECT_LE(time_embed(i / 50.0, 8).cwiseAbs().maxCoeff(), 1.0);
}

TEST(TimeEmbed, OddSizeRejected) {
  EXPECT_THROW(time_embed(0.5, 3), ArgumentError);
  EXPECT_THROW(time_embed(0.5, 0), ArgumentError);
}

TEST(CrudeEstimate, ZeroModelReturnsPrior) {
  const VectorFieldModel zero({5, 8, 2, 4});
  std::mt19937_64 gen(6);
  const StateVector x1 = random_vector(5, gen), y = random_vector(5, gen);
  EXPECT_EQ(crude_estimate(zero, x1, y), x1);
}

TEST(CrudeEstimate, CollapsesToConditionAndCostsOneCall) {
  FunctionField mock([](const StateVector& x, const StateVector& c, double t) -> StateVector {
    EXPECT_EQ(t, 1.0);
    return x - c;
  });
  std::mt19937_64 gen(7);
  const StateVector x1 = random_vector(5, gen), y = random_vector(5, gen);
  const StateVector d = crude_estimate(mock, x1, y);
  EXPECT_LE((d - y).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(mock.evaluation_count(), 1u);
}

TEST(PredictiveModel, ZeroParametersAreIdentity) {
  const PredictiveModel p(6, 8, 2);
  std::mt19937_64 gen(8);
  const StateVector y = random_vector(6, gen);
  EXPECT_EQ(p(y), y);
  EXPECT_EQ(p.evaluation_count(), 1u);
  EXPECT_EQ(PredictiveModel::initialized(6, 8, 2, 3)(y), y);
}

TEST(Mlp, InitialisedOutputLayerIsZero) {
  Rng rng(1);
  const Mlp net = Mlp::initialized({3, 2, 5, 3}, rng);
  EXPECT_EQ(net.forward(Eigen::MatrixXd::Random(3, 4)), Eigen::MatrixXd::Zero(2, 4));
  EXPECT_EQ(net.parameters().size(), net.shape().parameter_count());
  EXPECT_EQ(net.shape().parameter_count(), (3 * 5 + 5) + 2 * (5 * 5 + 5) + (5 * 2 + 2));
}
