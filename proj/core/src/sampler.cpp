#include "ctflow/sampler.hpp"

#include <cmath>

namespace ctflow {

std::string_view scheme_name(Scheme s) {
  switch (s) {
    case Scheme::FlowSE: return "flowse";
    case Scheme::CTFSE: return "ctfse";
    case Scheme::PredictiveCascade: return "pred-cascade";
  }
  return "unknown";
}

Scheme parse_scheme(std::string_view name) {
  if (name == "flowse") return Scheme::FlowSE;
  if (name == "ctfse") return Scheme::CTFSE;
  if (name == "pred-cascade") return Scheme::PredictiveCascade;
  throw ArgumentError("unknown scheme '" + std::string(name) + "' (expected flowse|ctfse|pred-cascade)");
}

int nfe_for(Scheme s, int steps) { return s == Scheme::FlowSE ? steps : steps + 1; }

int steps_for_budget(Scheme s, int nfe_budget) {
  const int steps = s == Scheme::FlowSE ? nfe_budget : nfe_budget - 1;
  if (steps < 1) {
    throw ArgumentError("NFE budget " + std::to_string(nfe_budget) + " too small for scheme " +
                        std::string(scheme_name(s)));
  }
  return steps;
}

TimeGrid time_grid(int steps, double t_delta) {
  if (steps < 1) throw ArgumentError("time_grid: N must be >= 1");
  if (!(t_delta > 0.0 && t_delta < 1.0)) throw ArgumentError("time_grid: t_delta must lie in (0, 1)");
  TimeGrid g;
  g.steps = steps;
  g.t_delta = t_delta;
  g.points.resize(static_cast<std::size_t>(steps) + 1);
  g.points[0] = 0.0;
  if (steps == 1) {
    g.points[1] = 1.0;
    return g;
  }
  const double h = (1.0 - t_delta) / static_cast<double>(steps - 1);
  for (int i = 1; i < steps; ++i) g.points[static_cast<std::size_t>(i)] = t_delta + (i - 1) * h;
  g.points.back() = 1.0;
  return g;
}

SampleResult euler_integrate(const TimeField& field, const StateVector& x_init, const TimeGrid& grid,
                             bool record_trajectory) {
  require_finite(x_init, "euler_integrate: initial state");
  SampleResult r;
  StateVector x = x_init;
  if (record_trajectory) r.trajectory.push_back(x);
  for (int i = grid.steps; i >= 1; --i) {
    const double t = grid.points[static_cast<std::size_t>(i)];
    const double dt = grid.points[static_cast<std::size_t>(i) - 1] - t;
    const StateVector v = field(x, t);
    ++r.nfe;
    require_same_length(x, v, "euler_integrate");
    x += dt * v;
    if (!x.allFinite()) {
      throw NumericalError("euler_integrate: non-finite state at step i=" + std::to_string(i) +
                           " (t=" + std::to_string(t) + ")");
    }
    if (record_trajectory) r.trajectory.push_back(x);
  }
  r.estimate = std::move(x);
  return r;
}

namespace {

void check_config(const SamplerConfig& cfg) {
  if (cfg.steps < 1) throw ArgumentError("sampler: steps must be >= 1");
  if (!(cfg.sigma >= 0.0) || !std::isfinite(cfg.sigma)) throw ArgumentError("sampler: sigma must be >= 0");
}

StateVector gaussian_around(const StateVector& mean, double sigma, Rng& rng) {
  if (sigma == 0.0) return mean;
  return mean + sigma * rng.normal_vector(mean.size());
}

SampleResult second_stage(const VectorField& model, const StateVector& y, const StateVector& d,
                          const SamplerConfig& cfg, Rng& rng) {
  require_finite(d, "sampler: first-stage estimate");
  const StateVector condition = 0.5 * (d + y);
  const StateVector start = gaussian_around(d, cfg.sigma, rng);
  return euler_integrate([&](const StateVector& x, double t) { return model(x, condition, t); }, start,
                         time_grid(cfg.steps, cfg.t_delta), cfg.record_trajectory);
}

}  // namespace

SampleResult sample_flowse(const VectorField& model, const StateVector& y, const SamplerConfig& cfg,
                           Rng& rng) {
  check_config(cfg);
  const StateVector start = gaussian_around(y, cfg.sigma, rng);
  return euler_integrate([&](const StateVector& x, double t) { return model(x, y, t); }, start,
                         time_grid(cfg.steps, cfg.t_delta), cfg.record_trajectory);
}

SampleResult sample_ctfse(const VectorField& model, const StateVector& y, const SamplerConfig& cfg,
                          Rng& rng) {
  check_config(cfg);
  const StateVector x1 = gaussian_around(y, cfg.sigma, rng);
  const StateVector d = crude_estimate(model, x1, y);
  SampleResult r = second_stage(model, y, d, cfg, rng);
  r.nfe += 1;
  return r;
}

SampleResult sample_predictive_cascade(const Predictor& predictor, const VectorField& model,
                                       const StateVector& y, const SamplerConfig& cfg, Rng& rng) {
  check_config(cfg);
  const StateVector d = predictor(y);
  require_same_length(d, y, "sample_predictive_cascade");
  SampleResult r = second_stage(model, y, d, cfg, rng);
  r.nfe += 1;
  return r;
}

SampleResult sample(const VectorField& model, const Predictor* predictor, const StateVector& y,
                    const SamplerConfig& cfg, Rng& rng) {
  switch (cfg.scheme) {
    case Scheme::FlowSE: return sample_flowse(model, y, cfg, rng);
    case Scheme::CTFSE: return sample_ctfse(model, y, cfg, rng);
    case Scheme::PredictiveCascade:
      if (!predictor) throw ArgumentError("sampler: predictive cascade needs a predictor");
      return sample_predictive_cascade(*predictor, model, y, cfg, rng);
  }
  throw ArgumentError("sampler: unknown scheme");
}

}  // namespace ctflow
