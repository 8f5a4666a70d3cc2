#include "ctflow/path.hpp"
#include "ctflow/sampler.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace ctflow;
using ctflow::testing::random_vector;

namespace {

FunctionField zero_field() {
  return FunctionField([](const StateVector& x, const StateVector&, double) { return StateVector::Zero(x.size()); });
}

SamplerConfig config(Scheme s, int steps, double sigma = kDefaultSigma) {
  SamplerConfig c;
  c.scheme = s;
  c.steps = steps;
  c.sigma = sigma;
  return c;
}

}  // namespace

TEST(TimeGrid, SingleStep) {
  EXPECT_EQ(time_grid(1, 0.03).points, (std::vector<double>{0.0, 1.0}));
}

TEST(TimeGrid, TwoSteps) {
  EXPECT_EQ(time_grid(2, 0.03).points, (std::vector<double>{0.0, 0.03, 1.0}));
}

TEST(TimeGrid, FiveSteps) {
  const auto g = time_grid(5, 0.03);
  const std::vector<double> expected = {0.0, 0.03, 0.2725, 0.515, 0.7575, 1.0};
  ASSERT_EQ(g.points.size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(g.points[i], expected[i], 1e-15);
}

TEST(TimeGrid, EqualInteriorSpacing) {
  for (int n = 2; n <= 64; ++n) {
    const auto g = time_grid(n, 0.03);
    ASSERT_EQ(g.points.size(), static_cast<std::size_t>(n) + 1);
    EXPECT_EQ(g.points.front(), 0.0);
    EXPECT_EQ(g.points.back(), 1.0);
    EXPECT_EQ(g.points[1], 0.03);
    double lo = 1e300, hi = 0.0;
    for (int i = 2; i <= n; ++i) {
      const double h = g.points[static_cast<std::size_t>(i)] - g.points[static_cast<std::size_t>(i) - 1];
      EXPECT_GT(h, 0.0);
      lo = std::min(lo, h);
      hi = std::max(hi, h);
    }
    if (n > 2) EXPECT_LE(hi / lo - 1.0, 1e-12) << "N=" << n;
  }
}

TEST(TimeGrid, Errors) {
  EXPECT_THROW(time_grid(0, 0.03), ArgumentError);
  EXPECT_THROW(time_grid(3, 0.0), ArgumentError);
  EXPECT_THROW(time_grid(3, 1.0), ArgumentError);
}

TEST(Euler, ZeroFieldKeepsState) {
  std::mt19937_64 gen(1);
  const StateVector x = random_vector(4, gen);
  for (int n = 1; n <= 8; ++n) {
    const auto r = euler_integrate([](const StateVector& v, double) { return StateVector::Zero(v.size()); }, x,
                                   time_grid(n));
    EXPECT_EQ(r.estimate, x);
    EXPECT_EQ(r.nfe, n);
  }
}

TEST(Euler, ConstantFieldIsExact) {
  std::mt19937_64 gen(2);
  const StateVector x = random_vector(4, gen), c = random_vector(4, gen);
  for (int n = 1; n <= 12; ++n) {
    const auto r = euler_integrate([&](const StateVector&, double) { return c; }, x, time_grid(n));
    EXPECT_LE((r.estimate - (x - c)).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Euler, TrajectoryRecordedOnRequest) {
  const StateVector x = StateVector::Ones(2);
  const auto r = euler_integrate([](const StateVector& v, double) { return v; }, x, time_grid(6), true);
  ASSERT_EQ(r.trajectory.size(), 7u);
  EXPECT_EQ(r.trajectory.front(), x);
  EXPECT_EQ(r.trajectory.back(), r.estimate);
  EXPECT_TRUE(euler_integrate([](const StateVector& v, double) { return v; }, x, time_grid(6)).trajectory.empty());
}

TEST(Euler, NonFiniteStateNamesStep) {
  const StateVector x = StateVector::Ones(2);
  try {
    euler_integrate(
        [](const StateVector& v, double t) -> StateVector {
          if (t < 0.5) return StateVector::Constant(v.size(), std::numeric_limits<double>::infinity());
          return v;
        },
        x, time_grid(4));
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("i=2"), std::string::npos) << e.what();
  }
}

// dx/dt = a(t) (x - mbar_t) + (y - m) has the exact solution
// x(0) = m + (s / sbar_1) (x1 - y).
TEST(Euler, FirstOrderConvergenceOnGaussianField) {
  StateVector m(1), y(1), x1(1);
  m << 0.3;
  y << 1.5;
  x1 << 2.0;
  const GaussianTask task{m, 1.0, y};
  const double sbar1 = gaussian_marginal(1.0, task, kDefaultSigma).stddev;
  const double exact = m[0] + (1.0 / sbar1) * (x1[0] - y[0]);
  std::vector<double> errs, logn;
  for (int n : {2, 4, 8, 16, 32}) {
    const auto r = euler_integrate(
        [&](const StateVector& x, double t) { return gaussian_marginal_field(x, t, task, kDefaultSigma); }, x1,
        time_grid(n));
    errs.push_back(std::abs(r.estimate[0] - exact));
    logn.push_back(std::log(n));
  }
  for (std::size_t i = 1; i < errs.size(); ++i) EXPECT_LT(errs[i], errs[i - 1]);
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < errs.size(); ++i) {
    mx += logn[i];
    my += std::log(errs[i]);
  }
  mx /= errs.size();
  my /= errs.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < errs.size(); ++i) {
    sxy += (logn[i] - mx) * (std::log(errs[i]) - my);
    sxx += (logn[i] - mx) * (logn[i] - mx);
  }
  EXPECT_GE(-sxy / sxx, 0.9);
}

TEST(FlowSE, DeterministicCollapse) {
  std::mt19937_64 gen(3);
  const StateVector y = random_vector(5, gen);
  Rng rng(0);
  EXPECT_EQ(sample_flowse(zero_field(), y, config(Scheme::FlowSE, 4, 0.0), rng).estimate, y);
}

TEST(FlowSE, NfeAccounting) {
  const auto field = zero_field();
  const StateVector y = StateVector::Ones(3);
  for (int n = 1; n <= 12; ++n) {
    field.reset_evaluation_count();
    Rng rng(n);
    const auto r = sample_flowse(field, y, config(Scheme::FlowSE, n), rng);
    EXPECT_EQ(r.nfe, n);
    EXPECT_EQ(field.evaluation_count(), static_cast<std::uint64_t>(n));
    EXPECT_EQ(nfe_for(Scheme::FlowSE, n), n);
  }
}

TEST(FlowSE, OracleFieldTransportsMean) {
  StateVector m(1), y(1);
  m << -0.7;
  y << 0.4;
  const GaussianTask task{m, 1.0, y};
  FunctionField oracle([&](const StateVector& x, const StateVector&, double t) {
    return gaussian_marginal_field(x, t, task, kDefaultSigma);
  });
  const int runs = 10000;
  Rng rng(31);
  double sum = 0.0;
  for (int i = 0; i < runs; ++i) sum += sample_flowse(oracle, y, config(Scheme::FlowSE, 32), rng).estimate[0];
  EXPECT_LE(std::abs(sum / runs - m[0]), 3.0 * task.scale / std::sqrt(runs));
}

TEST(CTFSE, DeterministicCollapse) {
  std::mt19937_64 gen(4);
  const StateVector y = random_vector(5, gen);
  Rng rng(0);
  EXPECT_EQ(sample_ctfse(zero_field(), y, config(Scheme::CTFSE, 5, 0.0), rng).estimate, y);
}

TEST(CTFSE, NfeAccounting) {
  const auto field = zero_field();
  const StateVector y = StateVector::Ones(3);
  for (int n = 1; n <= 12; ++n) {
    field.reset_evaluation_count();
    Rng rng(n);
    const auto r = sample_ctfse(field, y, config(Scheme::CTFSE, n), rng);
    EXPECT_EQ(r.nfe, n + 1);
    EXPECT_EQ(field.evaluation_count(), static_cast<std::uint64_t>(n + 1));
  }
  EXPECT_EQ(nfe_for(Scheme::CTFSE, 5), 6);
  EXPECT_EQ(steps_for_budget(Scheme::CTFSE, 6), 5);
  EXPECT_EQ(steps_for_budget(Scheme::FlowSE, 6), 6);
  EXPECT_THROW(steps_for_budget(Scheme::CTFSE, 1), ArgumentError);
  EXPECT_THROW(steps_for_budget(Scheme::FlowSE, 0), ArgumentError);
}

// Mock: D is forced to x0 and the second flow uses the exact conditional field.
TEST(CTFSE, PerfectMockRecoversClean) {
  std::mt19937_64 gen(5);
  const StateVector x0 = random_vector(6, gen), y = random_vector(6, gen);
  FunctionField perfect([&](const StateVector& x, const StateVector& c, double t) -> StateVector {
    if (t == 1.0 && c == y) return x - x0;
    return (x - x0) / t;
  });
  for (double sigma : {0.0, 0.5}) {
    for (int n : {1, 2, 5, 9}) {
      Rng rng(n);
      const auto r = sample_ctfse(perfect, y, config(Scheme::CTFSE, n, sigma), rng);
      EXPECT_LE((r.estimate - x0).cwiseAbs().maxCoeff(), 1e-12) << "sigma " << sigma << " N " << n;
    }
  }
}

TEST(CTFSE, SecondFlowSeesAveragedCondition) {
  std::mt19937_64 gen(6);
  const StateVector y = random_vector(3, gen), shift = random_vector(3, gen);
  std::vector<StateVector> conditions;
  FunctionField mock([&](const StateVector& x, const StateVector& c, double t) -> StateVector {
    conditions.push_back(c);
    if (t == 1.0 && conditions.size() == 1) return x - (y + shift);  // D = y + shift
    return StateVector::Zero(x.size());
  });
  Rng rng(1);
  sample_ctfse(mock, y, config(Scheme::CTFSE, 3, 0.0), rng);
  ASSERT_EQ(conditions.size(), 4u);
  EXPECT_EQ(conditions[0], y);
  for (std::size_t i = 1; i < conditions.size(); ++i) {
    EXPECT_LE((conditions[i] - (y + 0.5 * shift)).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(PredictiveCascade, IdentityPredictorPassthrough) {
  std::mt19937_64 gen(7);
  const StateVector y = random_vector(4, gen);
  FunctionPredictor identity([](const StateVector& v) { return v; });
  Rng rng(0);
  EXPECT_EQ(sample_predictive_cascade(identity, zero_field(), y, config(Scheme::PredictiveCascade, 5, 0.0), rng).estimate,
            y);
}

TEST(PredictiveCascade, PerfectPredictorPassthrough) {
  std::mt19937_64 gen(8);
  const StateVector x0 = random_vector(4, gen), y = random_vector(4, gen);
  FunctionPredictor perfect([&](const StateVector&) { return x0; });
  Rng rng(0);
  EXPECT_EQ(sample_predictive_cascade(perfect, zero_field(), y, config(Scheme::PredictiveCascade, 3, 0.0), rng).estimate,
            x0);
}

TEST(PredictiveCascade, NfeCountsPredictorCall) {
  const auto field = zero_field();
  FunctionPredictor identity([](const StateVector& v) { return v; });
  const StateVector y = StateVector::Ones(3);
  for (int n = 1; n <= 12; ++n) {
    field.reset_evaluation_count();
    identity.reset_evaluation_count();
    Rng rng(n);
    const auto r = sample_predictive_cascade(identity, field, y, config(Scheme::PredictiveCascade, n), rng);
    EXPECT_EQ(r.nfe, n + 1);
    EXPECT_EQ(field.evaluation_count() + identity.evaluation_count(), static_cast<std::uint64_t>(n + 1));
    EXPECT_EQ(identity.evaluation_count(), 1u);
  }
  // Equal budgets: FlowSE with N = 6 and the cascade with N = 5 both spend 6.
  EXPECT_EQ(nfe_for(Scheme::FlowSE, 6), nfe_for(Scheme::PredictiveCascade, 5));
}

TEST(Sampler, SeedDeterminism) {
  auto m = VectorFieldModel::initialized({4, 8, 2, 4}, 3);
  std::mt19937_64 gen(9);
  m.set_parameters(m.parameters() + 0.1 * random_vector(m.parameter_count(), gen));
  const StateVector y = random_vector(4, gen);
  for (Scheme s : {Scheme::FlowSE, Scheme::CTFSE}) {
    Rng a(5), b(5), c(6);
    const auto ra = sample(m, nullptr, y, config(s, 4), a);
    const auto rb = sample(m, nullptr, y, config(s, 4), b);
    const auto rc = sample(m, nullptr, y, config(s, 4), c);
    EXPECT_EQ(ra.estimate, rb.estimate);
    EXPECT_NE(ra.estimate, rc.estimate);
  }
}

TEST(Sampler, ZeroSigmaIndependentOfSeed) {
  auto m = VectorFieldModel::initialized({4, 8, 2, 4}, 3);
  std::mt19937_64 gen(10);
  m.set_parameters(m.parameters() + 0.1 * random_vector(m.parameter_count(), gen));
  const StateVector y = random_vector(4, gen);
  Rng a(1), b(2);
  EXPECT_EQ(sample_ctfse(m, y, config(Scheme::CTFSE, 4, 0.0), a).estimate,
            sample_ctfse(m, y, config(Scheme::CTFSE, 4, 0.0), b).estimate);
}

TEST(Sampler, DispatchErrors) {
  Rng rng(0);
  const StateVector y = StateVector::Ones(2);
  EXPECT_THROW(sample(zero_field(), nullptr, y, config(Scheme::PredictiveCascade, 2), rng), ArgumentError);
  EXPECT_THROW(sample(zero_field(), nullptr, y, config(Scheme::FlowSE, 0), rng), ArgumentError);
  EXPECT_THROW(sample(zero_field(), nullptr, y, config(Scheme::FlowSE, 2, -1.0), rng), ArgumentError);
}

TEST(Scheme, NamesRoundTrip) {
  for (Scheme s : {Scheme::FlowSE, Scheme::CTFSE, Scheme::PredictiveCascade}) {
    EXPECT_EQ(parse_scheme(scheme_name(s)), s);
  }
  EXPECT_THROW(parse_scheme("storm"), ArgumentError);
}
