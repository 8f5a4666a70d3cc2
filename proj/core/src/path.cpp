#include "ctflow/path.hpp"

#include <cmath>

namespace ctflow {
namespace {

void check_time(double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("path: t must lie in [0, 1], got " + std::to_string(t));
}

void check_sigma(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ArgumentError("path: sigma must be positive");
}

void check_field_time(double t, double t_delta) {
  check_time(t);
  if (t < t_delta) {
    throw DomainError("target field: t = " + std::to_string(t) + " below t_delta = " +
                      std::to_string(t_delta));
  }
}

}  // namespace

PathParams path_params(double t, const StateVector& x0, const StateVector& target, double sigma) {
  require_same_length(x0, target, "path_params");
  check_time(t);
  check_sigma(sigma);
  PathParams p;
  p.mu_t = (1.0 - t) * x0 + t * target;
  p.sigma_t = t * sigma;
  p.sigma = sigma;
  return p;
}

StateVector sample_path(double t, const StateVector& x0, const StateVector& target, double sigma,
                        Rng& rng) {
  require_same_length(x0, target, "sample_path");
  return sample_path(t, x0, target, sigma, rng.normal_vector(x0.size()));
}

StateVector sample_path(double t, const StateVector& x0, const StateVector& target, double sigma,
                        const StateVector& eps) {
  const PathParams p = path_params(t, x0, target, sigma);
  require_same_length(x0, eps, "sample_path");
  return p.mu_t + p.sigma_t * eps;
}

StateVector target_vector_field(const StateVector& x_t, double t, const StateVector& x0,
                                const StateVector& target, double sigma, double t_delta) {
  require_same_length(x_t, x0, "target_vector_field");
  require_same_length(x0, target, "target_vector_field");
  check_field_time(t, t_delta);
  check_sigma(sigma);
  const StateVector mu = (1.0 - t) * x0 + t * target;
  return (x_t - mu) / t + (target - x0);
}

StateVector target_vector_field_ratio_form(const StateVector& x_t, double t, const StateVector& x0,
                                           const StateVector& target, double sigma,
                                           double t_delta) {
  require_same_length(x_t, x0, "target_vector_field_ratio_form");
  check_field_time(t, t_delta);
  const PathParams p = path_params(t, x0, target, sigma);
  const double dsigma_dt = sigma;
  const StateVector dmu_dt = target - x0;
  return (dsigma_dt / p.sigma_t) * (x_t - p.mu_t) + dmu_dt;
}

GaussianMarginal gaussian_marginal(double t, const GaussianTask& task, double sigma) {
  require_same_length(task.mean, task.condition, "gaussian_marginal");
  check_time(t);
  const double s = task.scale;
  GaussianMarginal g;
  g.mean = (1.0 - t) * task.mean + t * task.condition;
  g.stddev = std::sqrt((1.0 - t) * (1.0 - t) * s * s + t * t * sigma * sigma);
  return g;
}

StateVector gaussian_marginal_field(const StateVector& x_t, double t, const GaussianTask& task,
                                    double sigma, double t_delta) {
  require_same_length(x_t, task.mean, "gaussian_marginal_field");
  check_field_time(t, t_delta);
  check_sigma(sigma);
  if (task.scale < 0.0) throw ArgumentError("gaussian task scale must be nonnegative");
  // Point-mass clean distribution: the marginal field is the conditional one.
  if (task.scale == 0.0) return target_vector_field(x_t, t, task.mean, task.condition, sigma, t_delta);
  const double s2 = task.scale * task.scale;
  const GaussianMarginal g = gaussian_marginal(t, task, sigma);
  // sbar'/sbar = (-(1-t) s^2 + t sigma^2) / sbar^2
  const double rate = (-(1.0 - t) * s2 + t * sigma * sigma) / (g.stddev * g.stddev);
  return rate * (x_t - g.mean) + (task.condition - task.mean);
}

}  // namespace ctflow
