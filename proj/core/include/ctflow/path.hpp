#pragma once

// Conditional probability paths N(mu_t, sigma_t^2 I) with
//   mu_t = (1 - t) x0 + t target,   sigma_t = t sigma,
// and the conditional vector fields that generate them. The same path serves
// the first flow (target = noisy y) and the second flow (target = crude
// estimate D).

#include "ctflow/common.hpp"

namespace ctflow {

struct PathParams {
  StateVector mu_t;
  double sigma_t = 0.0;
  double sigma = 0.0;
};

/// Isotropic Gaussian clean-data distribution q(x0 | y) = N(mean, scale^2 I).
struct GaussianTask {
  StateVector mean;
  double scale = 1.0;
  StateVector condition;
};

PathParams path_params(double t, const StateVector& x0, const StateVector& target, double sigma);

/// Draws x_t = mu_t + sigma_t * eps with a fresh standard-normal eps.
StateVector sample_path(double t, const StateVector& x0, const StateVector& target, double sigma,
                        Rng& rng);

/// Same affine map with a caller-supplied eps (reparameterised draw).
StateVector sample_path(double t, const StateVector& x0, const StateVector& target, double sigma,
                        const StateVector& eps);

/// (x_t - mu_t) / t + (target - x0).
StateVector target_vector_field(const StateVector& x_t, double t, const StateVector& x0,
                                const StateVector& target, double sigma,
                                double t_delta = kDefaultTDelta);

/// (d sigma_t/dt / sigma_t) (x_t - mu_t) + d mu_t/dt, evaluated term by term.
/// Must agree with target_vector_field; kept as an independent route.
StateVector target_vector_field_ratio_form(const StateVector& x_t, double t, const StateVector& x0,
                                           const StateVector& target, double sigma,
                                           double t_delta = kDefaultTDelta);

/// Exact marginal field of the path when x0 ~ task. The marginal stays Gaussian,
/// N(mbar_t, sbar_t^2 I) with mbar_t = (1-t) m + t y and
/// sbar_t^2 = (1-t)^2 s^2 + t^2 sigma^2.
StateVector gaussian_marginal_field(const StateVector& x_t, double t, const GaussianTask& task,
                                    double sigma, double t_delta = kDefaultTDelta);

/// Marginal mean and standard deviation used by gaussian_marginal_field.
struct GaussianMarginal {
  StateVector mean;
  double stddev = 0.0;
};
GaussianMarginal gaussian_marginal(double t, const GaussianTask& task, double sigma);

}  // namespace ctflow
