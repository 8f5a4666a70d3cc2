#pragma once

// Training objectives. All squared norms are reduced as a mean over vector
// elements; batch losses are additionally averaged over items.
//
//   L1  first-flow CFM loss, condition y, path target y
//   L2  second-flow CFM loss, condition (D + y)/2, path target D
//   L3  CFM loss at t = 1, which equals MSE(D, x0)
//   total = lambda1 L1 + lambda2 L2 + lambda3 L3
//
// The cascade baseline pairs a separate predictor D_phi with the second-flow
// CFM loss: total = alpha MSE(D_phi(y), x0) + lambda2 L2.

#include "ctflow/common.hpp"
#include "ctflow/field_model.hpp"

#include <span>
#include <vector>

namespace ctflow {

struct LossWeights {
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double lambda3 = 1.0;
  double alpha = 1.0;

  void validate() const;
  static LossWeights flowse() { return {1.0, 0.0, 0.0, 0.0}; }
};

struct ObjectiveConfig {
  double sigma = kDefaultSigma;
  double t_delta = kDefaultTDelta;
  /// Treat D as a constant inside L2 (no gradient through the first flow).
  bool detach_crude_estimate = false;
};

/// One (clean x0, noisy y) training pair in feature space.
struct TrainingPair {
  StateVector clean;
  StateVector noisy;
};

struct LossBreakdown {
  double l1 = 0.0;
  double l2 = 0.0;
  double l3 = 0.0;
  double total = 0.0;
  std::vector<double> per_item;
};

/// Random draws consumed by one batch item: separate times for L1 and L2, the
/// path noise for each, and the x1 draw shared by L2 and L3.
struct ItemNoise {
  double t_first = 1.0;
  StateVector eps_first;
  StateVector eps_x1;
  double t_second = 1.0;
  StateVector eps_second;
};

std::vector<ItemNoise> draw_noise(std::size_t items, Eigen::Index dim, double t_delta, Rng& rng);

double mean_squared_error(const StateVector& a, const StateVector& b);

double loss_first(const VectorField& field, const StateVector& x0, const StateVector& y, double t,
                  const StateVector& x_t, const ObjectiveConfig& cfg = {});

double loss_second(const VectorField& field, const StateVector& x0, const StateVector& y,
                   const StateVector& x1, double t, const StateVector& x_tilde_t,
                   const ObjectiveConfig& cfg = {});

double loss_third(const VectorField& field, const StateVector& x0, const StateVector& y,
                  const StateVector& x1);

double loss_predictive(const StateVector& prediction, const StateVector& x0);

LossBreakdown loss_total(const VectorField& field, std::span<const TrainingPair> batch,
                         const LossWeights& weights, const ObjectiveConfig& cfg, Rng& rng);
LossBreakdown loss_total(const VectorField& field, std::span<const TrainingPair> batch,
                         const LossWeights& weights, const ObjectiveConfig& cfg,
                         std::span<const ItemNoise> noise);

/// Baseline objective. In the breakdown, l1 holds the predictive MSE and l2
/// the second-stage CFM loss; l3 is unused.
LossBreakdown loss_cascade_baseline(const Predictor& predictor, const VectorField& field,
                                    std::span<const TrainingPair> batch, const LossWeights& weights,
                                    const ObjectiveConfig& cfg, Rng& rng);
LossBreakdown loss_cascade_baseline(const Predictor& predictor, const VectorField& field,
                                    std::span<const TrainingPair> batch, const LossWeights& weights,
                                    const ObjectiveConfig& cfg, std::span<const ItemNoise> noise);

}  // namespace ctflow
