#pragma once

#include "ctflow/checkpoint.hpp"
#include "ctflow/losses.hpp"

#include <functional>
#include <span>
#include <vector>

namespace ctflow {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update. Increments state.step before use.
void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, AdamState& state, double lr,
               const AdamHyper& hyper = {});

/// shadow <- decay * shadow + (1 - decay) * params
void ema_update(Eigen::VectorXd& shadow, const Eigen::VectorXd& params, double decay);

/// Rescales grads in place so their L2 norm is at most max_norm; returns the
/// norm before clipping.
double clip_global_norm(Eigen::VectorXd& grads, double max_norm);

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t batch_size = 4;
  int max_epochs = 1000;
  int patience = 50;
  double ema_decay = 0.999;
  double clip_norm = 1000.0;
  LossWeights weights;
  ObjectiveConfig objective;
  std::uint64_t seed = 0;

  void validate() const;

  /// Training protocol used for the published models.
  static TrainConfig paper() { return {}; }
  /// Desk-scale preset for the synthetic corpus (d <= 512, CPU only).
  static TrainConfig toy();
};

struct EpochRecord {
  std::uint64_t epoch = 0;
  double l1 = 0.0;
  double l2 = 0.0;
  double l3 = 0.0;
  double total = 0.0;
  double valid_total = 0.0;
  double best_valid = 0.0;
};

struct TrainHooks {
  /// Replaces the validation loss (evaluated on the EMA models).
  std::function<double(const ModelBundle& ema_models, std::uint64_t epoch)> validation;
  /// Called after every epoch with the resumable state and current best.
  std::function<void(const EpochRecord&, const Checkpoint& last, const Checkpoint& best)> on_epoch;
  /// Returning true after an epoch interrupts training (resumable).
  std::function<bool(std::uint64_t epoch)> interrupt;
};

struct TrainResult {
  Checkpoint best;
  Checkpoint last;
  std::vector<EpochRecord> history;
  int validations = 0;
  bool early_stopped = false;
  bool interrupted = false;
};

/// Validation divergence. Carries the best checkpoint seen before it.
class TrainingError : public NumericalError {
 public:
  TrainingError(const std::string& what, Checkpoint last_good)
      : NumericalError(what), last_good_(std::move(last_good)) {}
  const Checkpoint& last_good() const { return last_good_; }

 private:
  Checkpoint last_good_;
};

/// Loss the trainer optimises for the bundle's scheme (value only).
LossBreakdown scheme_loss(const ModelBundle& models, std::span<const TrainingPair> batch,
                          const LossWeights& weights, const ObjectiveConfig& cfg,
                          std::span<const ItemNoise> noise);

/// Minibatch Adam on the scheme's objective with EMA shadow weights and
/// early stopping on the EMA validation loss. Returns the best-validation
/// checkpoint and the final resumable state.
TrainResult train(const TrainConfig& cfg, const ModelBundle& initial,
                  std::span<const TrainingPair> train_set, std::span<const TrainingPair> valid_set,
                  const TrainHooks& hooks = {});

/// Continues a run from its last and best checkpoints.
TrainResult resume(const TrainConfig& cfg, const Checkpoint& last, const Checkpoint& best,
                   std::span<const TrainingPair> train_set, std::span<const TrainingPair> valid_set,
                   const TrainHooks& hooks = {});

}  // namespace ctflow
