#pragma once

#include "ctflow/common.hpp"
#include "ctflow/field_model.hpp"

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ctflow {

enum class Scheme { FlowSE, CTFSE, PredictiveCascade };

std::string_view scheme_name(Scheme s);  // "flowse" | "ctfse" | "pred-cascade"
Scheme parse_scheme(std::string_view name);

/// Model evaluations spent by one enhancement with N Euler steps.
int nfe_for(Scheme s, int steps);
/// Inverse of nfe_for; throws if the budget is too small for the scheme.
int steps_for_budget(Scheme s, int nfe_budget);

/// 0 = t_0 < t_1 = t_delta < ... < t_N = 1 with equal spacing after t_1;
/// N = 1 gives [0, 1].
struct TimeGrid {
  std::vector<double> points;
  int steps = 0;
  double t_delta = kDefaultTDelta;
};

TimeGrid time_grid(int steps, double t_delta = kDefaultTDelta);

struct SamplerConfig {
  Scheme scheme = Scheme::CTFSE;
  int steps = 5;
  double t_delta = kDefaultTDelta;
  double sigma = kDefaultSigma;
  std::uint64_t seed = 0;
  bool record_trajectory = false;
};

struct SampleResult {
  StateVector estimate;
  int nfe = 0;
  std::vector<StateVector> trajectory;  // x_{t_N} .. x_{t_0} when recorded
};

using TimeField = std::function<StateVector(const StateVector&, double)>;

/// x_{t_{i-1}} = x_{t_i} + (t_{i-1} - t_i) field(x_{t_i}, t_i), for i = N .. 1.
SampleResult euler_integrate(const TimeField& field, const StateVector& x_init, const TimeGrid& grid,
                             bool record_trajectory = false);

SampleResult sample_flowse(const VectorField& model, const StateVector& y, const SamplerConfig& cfg,
                           Rng& rng);

/// x1 ~ N(y, sigma^2 I); D = x1 - v(x1, y, 1); x~_{t_N} ~ N(D, sigma^2 I);
/// Euler with condition (D + y)/2.
SampleResult sample_ctfse(const VectorField& model, const StateVector& y, const SamplerConfig& cfg,
                          Rng& rng);

/// D = predictor(y), then the CTFSE second stage.
SampleResult sample_predictive_cascade(const Predictor& predictor, const VectorField& model,
                                       const StateVector& y, const SamplerConfig& cfg, Rng& rng);

/// Dispatches on cfg.scheme; predictor is required for PredictiveCascade.
SampleResult sample(const VectorField& model, const Predictor* predictor, const StateVector& y,
                    const SamplerConfig& cfg, Rng& rng);

}  // namespace ctflow
