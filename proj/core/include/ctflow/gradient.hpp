#pragma once

#include "ctflow/field_model.hpp"
#include "ctflow/losses.hpp"

namespace ctflow {

/// Gradient aligned with the model's flat parameter order, plus the loss it
/// was computed at.
struct GradientRecord {
  Eigen::VectorXd gradient;
  LossBreakdown loss;
};

/// d(loss_total)/d(theta), backpropagating through the crude estimate D
/// inside L2 (its use as condition, path endpoint, and field target) unless
/// cfg.detach_crude_estimate is set. Consumes the same draws as loss_total.
GradientRecord loss_gradient(const VectorFieldModel& model, std::span<const TrainingPair> batch,
                             const LossWeights& weights, const ObjectiveConfig& cfg, Rng& rng);
GradientRecord loss_gradient(const VectorFieldModel& model, std::span<const TrainingPair> batch,
                             const LossWeights& weights, const ObjectiveConfig& cfg,
                             std::span<const ItemNoise> noise);

/// Gradient of loss_cascade_baseline with respect to [field params, predictor params].
GradientRecord cascade_baseline_gradient(const PredictiveModel& predictor,
                                         const VectorFieldModel& model,
                                         std::span<const TrainingPair> batch,
                                         const LossWeights& weights, const ObjectiveConfig& cfg,
                                         std::span<const ItemNoise> noise);

}  // namespace ctflow
