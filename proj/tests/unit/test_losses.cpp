#include "ctflow/losses.hpp"
#include "ctflow/path.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace ctflow;
using ctflow::testing::random_pairs;
using ctflow::testing::random_vector;
using ctflow::testing::rel_err;

namespace {

FunctionField zero_field() {
  return FunctionField([](const StateVector& x, const StateVector&, double) { return StateVector::Zero(x.size()); });
}

// Elementwise, hence equivariant under coordinate permutations.
FunctionField elementwise_field() {
  return FunctionField([](const StateVector& x, const StateVector& c, double t) -> StateVector {
    return 0.3 * x - 0.7 * c + StateVector::Constant(x.size(), t * t);
  });
}

StateVector permute(const StateVector& v, const std::vector<int>& p) {
  StateVector out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = v[p[static_cast<std::size_t>(i)]];
  return out;
}

StateVector duplicate(const StateVector& v) {
  StateVector out(2 * v.size());
  out << v, v;
  return out;
}

}  // namespace

TEST(LossFirst, PerfectModelIsZero) {
  std::mt19937_64 gen(1);
  const StateVector x0 = random_vector(6, gen), y = random_vector(6, gen);
  FunctionField perfect([&](const StateVector& x, const StateVector&, double t) {
    return target_vector_field(x, t, x0, y, 0.5);
  });
  Rng rng(3);
  for (double t : {0.03, 0.2, 0.7, 1.0}) {
    const StateVector x_t = sample_path(t, x0, y, 0.5, rng);
    EXPECT_EQ(loss_first(perfect, x0, y, t, x_t), 0.0);
  }
}

TEST(LossFirst, ZeroModelOnMeanGivesUnitLoss) {
  StateVector x0(2), y(2);
  x0 << 0.0, 1.0;
  y << 1.0, 2.0;
  const double t = 0.4;
  const StateVector mu = path_params(t, x0, y, 0.5).mu_t;
  EXPECT_DOUBLE_EQ(loss_first(zero_field(), x0, y, t, mu), 1.0);
}

TEST(LossFirst, InvariantToJointPermutation) {
  std::mt19937_64 gen(2);
  const auto field = elementwise_field();
  std::vector<int> p = {3, 0, 4, 1, 2};
  for (int trial = 0; trial < 20; ++trial) {
    std::shuffle(p.begin(), p.end(), gen);
    const StateVector x0 = random_vector(5, gen), y = random_vector(5, gen), x_t = random_vector(5, gen);
    const double t = std::uniform_real_distribution<double>(0.03, 1.0)(gen);
    const double a = loss_first(field, x0, y, t, x_t);
    const double b = loss_first(field, permute(x0, p), permute(y, p), t, permute(x_t, p));
    EXPECT_LE(rel_err(a, b), 1e-14);
  }
}

TEST(LossFirst, DimensionMismatch) {
  EXPECT_THROW(loss_first(zero_field(), StateVector::Zero(3), StateVector::Zero(2), 0.5, StateVector::Zero(3)),
               DimensionError);
}

TEST(LossSecond, PerfectModelIsZero) {
  std::mt19937_64 gen(4);
  const StateVector x0 = random_vector(4, gen), y = random_vector(4, gen), x1 = random_vector(4, gen);
  // Zero at t = 1, so D = x1; elsewhere the exact field towards x1.
  FunctionField perfect([&](const StateVector& x, const StateVector&, double t) -> StateVector {
    if (t == 1.0) return StateVector::Zero(x.size());
    return target_vector_field(x, t, x0, x1, 0.5);
  });
  Rng rng(5);
  const double t = 0.35;
  const StateVector xt = sample_path(t, x0, x1, 0.5, rng);
  EXPECT_EQ(loss_second(perfect, x0, y, x1, t, xt), 0.0);
}

TEST(LossSecond, ZeroModelHandChain) {
  std::mt19937_64 gen(6);
  const StateVector x0 = random_vector(5, gen), y = random_vector(5, gen), x1 = random_vector(5, gen);
  const StateVector eps = random_vector(5, gen);
  const double t = 0.6, sigma = 0.5;
  // D = x1, so the path runs from x0 to x1.
  const StateVector mu = (1 - t) * x0 + t * x1;
  const StateVector xt = mu + t * sigma * eps;
  const StateVector target = (xt - mu) / t + (x1 - x0);
  const double expected = target.squaredNorm() / 5.0;
  EXPECT_LE(rel_err(loss_second(zero_field(), x0, y, x1, t, xt), expected), 1e-14);
}

TEST(LossSecond, ExactCrudeEstimateOnMeanLeavesFieldNorm) {
  std::mt19937_64 gen(7);
  const StateVector x0 = random_vector(4, gen), y = random_vector(4, gen), x1 = random_vector(4, gen);
  StateVector seen_condition;
  FunctionField mock([&](const StateVector& x, const StateVector& c, double t) -> StateVector {
    if (t == 1.0) return x - x0;  // D = x0
    seen_condition = c;
    return 0.5 * x + StateVector::Constant(x.size(), t);
  });
  const double t = 0.25;
  const StateVector xt = x0;  // mu_t when the path target is x0
  const StateVector v = 0.5 * x0 + StateVector::Constant(4, t);
  EXPECT_LE(rel_err(loss_second(mock, x0, y, x1, t, xt), v.squaredNorm() / 4.0), 1e-14);
  EXPECT_LE((seen_condition - 0.5 * (x0 + y)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(LossThird, PerfectModelIsZero) {
  std::mt19937_64 gen(8);
  const StateVector x0 = random_vector(4, gen), y = random_vector(4, gen), x1 = random_vector(4, gen);
  FunctionField mock([&](const StateVector& x, const StateVector&, double) -> StateVector { return x - x0; });
  EXPECT_EQ(loss_third(mock, x0, y, x1), 0.0);
}

TEST(LossThird, EqualsCrudeEstimateMseForRandomModels) {
  std::mt19937_64 gen(9);
  for (int trial = 0; trial < 100; ++trial) {
    const auto model = VectorFieldModel::initialized({16, 24, 2, 8}, 1000 + trial);
    Eigen::VectorXd p = model.parameters();
    for (Eigen::Index i = 0; i < p.size(); ++i) p[i] += 0.05 * std::normal_distribution<double>()(gen);
    VectorFieldModel m = model;
    m.set_parameters(p);
    const StateVector x0 = random_vector(16, gen), y = random_vector(16, gen), x1 = random_vector(16, gen);
    const StateVector d = x1 - m(x1, y, 1.0);
    const double mse = (d - x0).squaredNorm() / 16.0;
    EXPECT_LE(std::abs(loss_third(m, x0, y, x1) - mse) / (1.0 + mse), 1e-12);
  }
}

TEST(LossThird, ZeroModelIsDisplacementMse) {
  std::mt19937_64 gen(10);
  const StateVector x0 = random_vector(4, gen), y = random_vector(4, gen), x1 = random_vector(4, gen);
  EXPECT_LE(rel_err(loss_third(zero_field(), x0, y, x1), (x1 - x0).squaredNorm() / 4.0), 1e-15);
}

TEST(LossPredictive, Examples) {
  std::mt19937_64 gen(11);
  const StateVector x0 = random_vector(7, gen);
  EXPECT_EQ(loss_predictive(x0, x0), 0.0);
  EXPECT_DOUBLE_EQ(loss_predictive(x0 + StateVector::Ones(7), x0), 1.0);
  EXPECT_THROW(loss_predictive(StateVector::Zero(3), StateVector::Zero(4)), DimensionError);
}

class LossTotalTest : public ::testing::Test {
 protected:
  void SetUp() override {
    std::mt19937_64 gen(12);
    batch = random_pairs(3, 8, gen);
    model = VectorFieldModel::initialized({8, 16, 2, 4}, 5);
    Eigen::VectorXd p = model.parameters();
    for (Eigen::Index i = 0; i < p.size(); ++i) p[i] += 0.1 * std::normal_distribution<double>()(gen);
    model.set_parameters(p);
    Rng rng(13);
    noise = draw_noise(batch.size(), 8, kDefaultTDelta, rng);
  }

  std::vector<TrainingPair> batch;
  VectorFieldModel model;
  std::vector<ItemNoise> noise;
};

TEST_F(LossTotalTest, UnitWeightsSumComponents) {
  const auto one = std::span(batch).first(1);
  const LossBreakdown b = loss_total(model, one, {1, 1, 1, 0}, {}, std::span(noise).first(1));
  EXPECT_LE(std::abs(b.total - (b.l1 + b.l2 + b.l3)), 1e-12);
}

TEST_F(LossTotalTest, ThirdTermOnlyIsCrudeEstimateMse) {
  const LossBreakdown b = loss_total(model, batch, {0, 0, 1, 0}, {}, noise);
  double expected = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const StateVector x1 = batch[i].noisy + 0.5 * noise[i].eps_x1;
    const StateVector d = x1 - model(x1, batch[i].noisy, 1.0);
    expected += (d - batch[i].clean).squaredNorm() / 8.0;
  }
  expected /= static_cast<double>(batch.size());
  EXPECT_LE(rel_err(b.total, expected), 1e-12);
}

// Plain CFM objective: x_t = (1-t) x0 + t y + t sigma eps, target (x_t - x0) / t.
TEST_F(LossTotalTest, FirstTermOnlyIsPlainCfm) {
  const LossBreakdown b = loss_total(model, batch, {1, 0, 0, 0}, {}, noise);
  double expected = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double t = noise[i].t_first;
    const auto& [x0, y] = batch[i];
    const StateVector xt = (1 - t) * x0 + t * y + t * 0.5 * noise[i].eps_first;
    const StateVector u = (xt - x0) / t;
    expected += (model(xt, y, t) - u).squaredNorm() / 8.0;
  }
  expected /= static_cast<double>(batch.size());
  EXPECT_LE(rel_err(b.total, expected), 1e-12);
}

TEST_F(LossTotalTest, LinearInWeights) {
  const LossWeights w1{0.3, 1.2, 0.7, 0}, w2{2.0, 0.1, 0.4, 0};
  const LossBreakdown a = loss_total(model, batch, w1, {}, noise);
  const LossBreakdown b = loss_total(model, batch, w2, {}, noise);
  const LossBreakdown sum = loss_total(model, batch, {2.3, 1.3, 1.1, 0}, {}, noise);
  const LossBreakdown scaled = loss_total(model, batch, {0.9, 3.6, 2.1, 0}, {}, noise);
  EXPECT_LE(rel_err(sum.total, a.total + b.total), 1e-12);
  EXPECT_LE(rel_err(scaled.total, 3.0 * a.total), 1e-12);
  EXPECT_EQ(a.l1, b.l1);
  EXPECT_EQ(a.l2, b.l2);
  EXPECT_EQ(a.l3, b.l3);
}

TEST_F(LossTotalTest, ComponentsNonnegativeAndPerItemConsistent) {
  const LossBreakdown b = loss_total(model, batch, {1, 1, 1, 0}, {}, noise);
  EXPECT_GE(b.l1, 0.0);
  EXPECT_GE(b.l2, 0.0);
  EXPECT_GE(b.l3, 0.0);
  ASSERT_EQ(b.per_item.size(), batch.size());
  double mean = 0.0;
  for (double v : b.per_item) {
    EXPECT_GE(v, 0.0);
    mean += v;
  }
  EXPECT_LE(rel_err(mean / 3.0, b.total), 1e-12);
}

TEST_F(LossTotalTest, SeedDeterminism) {
  Rng a(77), b(77);
  const LossBreakdown x = loss_total(model, batch, {}, {}, a);
  const LossBreakdown y = loss_total(model, batch, {}, {}, b);
  EXPECT_EQ(x.total, y.total);
  EXPECT_EQ(x.l1, y.l1);
  EXPECT_EQ(x.l2, y.l2);
  EXPECT_EQ(x.l3, y.l3);
  EXPECT_EQ(x.per_item, y.per_item);
}

TEST_F(LossTotalTest, EmptyBatchRejected) {
  Rng rng(1);
  std::vector<TrainingPair> empty;
  EXPECT_THROW(loss_total(model, empty, {}, {}, rng), ArgumentError);
}

TEST_F(LossTotalTest, NegativeWeightRejected) {
  EXPECT_THROW(loss_total(model, batch, {1, -1, 1, 0}, {}, noise), ArgumentError);
}

TEST(LossTotal, DuplicatingCoordinatesKeepsValues) {
  std::mt19937_64 gen(14);
  const auto field = elementwise_field();
  std::vector<TrainingPair> batch = random_pairs(2, 3, gen), doubled;
  Rng rng(15);
  auto noise = draw_noise(2, 3, kDefaultTDelta, rng);
  auto noise2 = noise;
  for (std::size_t i = 0; i < 2; ++i) {
    doubled.push_back({duplicate(batch[i].clean), duplicate(batch[i].noisy)});
    noise2[i].eps_first = duplicate(noise[i].eps_first);
    noise2[i].eps_x1 = duplicate(noise[i].eps_x1);
    noise2[i].eps_second = duplicate(noise[i].eps_second);
  }
  const LossBreakdown a = loss_total(field, batch, {}, {}, noise);
  const LossBreakdown b = loss_total(field, doubled, {}, {}, noise2);
  EXPECT_LE(rel_err(a.l1, b.l1), 1e-13);
  EXPECT_LE(rel_err(a.l2, b.l2), 1e-13);
  EXPECT_LE(rel_err(a.l3, b.l3), 1e-13);
}

TEST(CascadeBaseline, PredictiveMsePlusSecondStageCfm) {
  std::mt19937_64 gen(16);
  std::vector<TrainingPair> batch = random_pairs(3, 4, gen);
  FunctionPredictor pred([](const StateVector& y) -> StateVector { return 0.8 * y; });
  const auto field = elementwise_field();
  Rng rng(17);
  const auto noise = draw_noise(3, 4, kDefaultTDelta, rng);
  const LossWeights w{0, 0.6, 0, 1.7};
  const LossBreakdown b = loss_cascade_baseline(pred, field, batch, w, {}, noise);

  double lp = 0.0, lc = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& [x0, y] = batch[i];
    const StateVector d = 0.8 * y;
    lp += (d - x0).squaredNorm() / 4.0;
    const double t = noise[i].t_second;
    const StateVector xt = (1 - t) * x0 + t * d + t * 0.5 * noise[i].eps_second;
    const StateVector u = (xt - x0) / t;
    lc += (field(xt, 0.5 * (d + y), t) - u).squaredNorm() / 4.0;
  }
  lp /= 3.0;
  lc /= 3.0;
  EXPECT_LE(rel_err(b.l1, lp), 1e-12);
  EXPECT_LE(rel_err(b.l2, lc), 1e-12);
  EXPECT_LE(rel_err(b.total, 1.7 * lp + 0.6 * lc), 1e-12);
}

TEST(DrawNoise, TimesInRange) {
  Rng rng(18);
  const auto noise = draw_noise(500, 2, 0.03, rng);
  for (const auto& n : noise) {
    EXPECT_GE(n.t_first, 0.03);
    EXPECT_LE(n.t_first, 1.0);
    EXPECT_GE(n.t_second, 0.03);
    EXPECT_LE(n.t_second, 1.0);
    EXPECT_NE(n.t_first, n.t_second);
  }
}
