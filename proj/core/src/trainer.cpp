#include "ctflow/trainer.hpp"

#include "ctflow/gradient.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ctflow {

void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, AdamState& state, double lr,
               const AdamHyper& h) {
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw DimensionError("adam_step: parameter, gradient and moment lengths differ");
  }
  if (!grads.allFinite()) throw NumericalError("adam_step: non-finite gradient");
  ++state.step;
  const double t = static_cast<double>(state.step);
  state.m = h.beta1 * state.m + (1.0 - h.beta1) * grads;
  state.v = h.beta2 * state.v + (1.0 - h.beta2) * grads.cwiseAbs2();
  const double bc1 = 1.0 - std::pow(h.beta1, t);
  const double bc2 = 1.0 - std::pow(h.beta2, t);
  params.array() -= lr * (state.m.array() / bc1) / ((state.v.array() / bc2).sqrt() + h.eps);
}

void ema_update(Eigen::VectorXd& shadow, const Eigen::VectorXd& params, double decay) {
  if (shadow.size() != params.size()) throw DimensionError("ema_update: length mismatch");
  shadow = decay * shadow + (1.0 - decay) * params;
}

double clip_global_norm(Eigen::VectorXd& grads, double max_norm) {
  const double norm = grads.norm();
  if (norm > max_norm && norm > 0.0) grads *= max_norm / norm;
  return norm;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ArgumentError("train: learning_rate must be positive");
  if (batch_size < 1) throw ArgumentError("train: batch_size must be >= 1");
  if (max_epochs < 1) throw ArgumentError("train: max_epochs must be >= 1");
  if (patience < 1) throw ArgumentError("train: patience must be >= 1");
  if (!(ema_decay > 0.0 && ema_decay < 1.0)) throw ArgumentError("train: ema_decay must lie in (0, 1)");
  if (!(clip_norm > 0.0)) throw ArgumentError("train: clip_norm must be positive");
  if (!(objective.sigma > 0.0)) throw ArgumentError("train: sigma must be positive");
  if (!(objective.t_delta > 0.0 && objective.t_delta < 1.0)) throw ArgumentError("train: t_delta must lie in (0, 1)");
  weights.validate();
}

TrainConfig TrainConfig::toy() {
  TrainConfig c;
  c.learning_rate = 1e-3;
  c.batch_size = 8;
  c.max_epochs = 400;
  c.patience = 50;
  c.ema_decay = 0.999;
  return c;
}

LossBreakdown scheme_loss(const ModelBundle& models, std::span<const TrainingPair> batch,
                          const LossWeights& weights, const ObjectiveConfig& cfg,
                          std::span<const ItemNoise> noise) {
  if (models.predictor) {
    return loss_cascade_baseline(*models.predictor, models.field, batch, weights, cfg, noise);
  }
  return loss_total(models.field, batch, weights, cfg, noise);
}

namespace {

// Stream id reserved for the validation draws; epochs use their own index.
constexpr std::uint64_t kValidationStream = ~std::uint64_t{0};

GradientRecord scheme_gradient(const ModelBundle& models, std::span<const TrainingPair> batch,
                               const LossWeights& weights, const ObjectiveConfig& cfg,
                               std::span<const ItemNoise> noise) {
  if (models.predictor) {
    return cascade_baseline_gradient(*models.predictor, models.field, batch, weights, cfg, noise);
  }
  return loss_gradient(models.field, batch, weights, cfg, noise);
}

void check_scheme_weights(Scheme scheme, const LossWeights& w) {
  if (scheme == Scheme::FlowSE && (w.lambda2 != 0.0 || w.lambda3 != 0.0)) {
    throw ArgumentError("train: flowse models are trained with weights (lambda1, 0, 0)");
  }
}

TrainResult run(const TrainConfig& cfg, Checkpoint last, Checkpoint best,
                std::span<const TrainingPair> train_set, std::span<const TrainingPair> valid_set,
                const TrainHooks& hooks) {
  cfg.validate();
  check_scheme_weights(last.scheme, cfg.weights);
  if (train_set.empty() || valid_set.empty()) throw ArgumentError("train: datasets must be nonempty");
  const Eigen::Index dim = last.model.state_dim;
  for (auto set : {train_set, valid_set}) {
    for (const auto& p : set) {
      if (p.clean.size() != dim || p.noisy.size() != dim) throw DimensionError("train: item length differs from model");
    }
  }

  ModelBundle working = last.bundle(false);
  ModelBundle shadow = last.bundle(true);
  Eigen::VectorXd params = last.params;

  Rng valid_rng = Rng::derive(cfg.seed, kValidationStream);
  const auto valid_noise = draw_noise(valid_set.size(), dim, cfg.objective.t_delta, valid_rng);

  TrainResult result;
  std::vector<std::size_t> order(train_set.size());
  std::vector<TrainingPair> minibatch;

  while (last.epoch < static_cast<std::uint64_t>(cfg.max_epochs)) {
    const std::uint64_t epoch = last.epoch + 1;
    Rng rng = Rng::derive(cfg.seed, epoch);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng.engine());

    EpochRecord rec;
    rec.epoch = epoch;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      minibatch.clear();
      for (std::size_t k = start; k < stop; ++k) minibatch.push_back(train_set[order[k]]);
      const auto noise = draw_noise(minibatch.size(), dim, cfg.objective.t_delta, rng);

      GradientRecord g;
      try {
        g = scheme_gradient(working, minibatch, cfg.weights, cfg.objective, noise);
      } catch (const NumericalError& e) {
        throw TrainingError(std::string("training diverged in epoch ") + std::to_string(epoch) + ": " + e.what(), best);
      }
      clip_global_norm(g.gradient, cfg.clip_norm);
      adam_step(params, g.gradient, last.adam, cfg.learning_rate);
      ema_update(last.ema, params, cfg.ema_decay);
      working.set_flat_parameters(params);

      const double w = static_cast<double>(minibatch.size());
      rec.l1 += w * g.loss.l1;
      rec.l2 += w * g.loss.l2;
      rec.l3 += w * g.loss.l3;
      rec.total += w * g.loss.total;
    }
    const double n = static_cast<double>(train_set.size());
    rec.l1 /= n;
    rec.l2 /= n;
    rec.l3 /= n;
    rec.total /= n;

    shadow.set_flat_parameters(last.ema);
    double valid = 0.0;
    try {
      valid = hooks.validation
                  ? hooks.validation(shadow, epoch)
                  : scheme_loss(shadow, valid_set, cfg.weights, cfg.objective, valid_noise).total;
    } catch (const NumericalError& e) {
      throw TrainingError(std::string("validation failed in epoch ") + std::to_string(epoch) + ": " + e.what(), best);
    }
    ++result.validations;
    if (!std::isfinite(valid)) {
      throw TrainingError("validation loss is not finite in epoch " + std::to_string(epoch), best);
    }

    last.params = params;
    last.epoch = epoch;
    if (valid < last.best_valid) {
      last.best_valid = valid;
      last.epochs_since_improvement = 0;
      best = last;
    } else {
      ++last.epochs_since_improvement;
    }
    rec.valid_total = valid;
    rec.best_valid = last.best_valid;
    result.history.push_back(rec);
    if (hooks.on_epoch) hooks.on_epoch(rec, last, best);

    if (last.epochs_since_improvement >= static_cast<std::uint64_t>(cfg.patience)) {
      result.early_stopped = true;
      break;
    }
    if (hooks.interrupt && hooks.interrupt(epoch)) {
      result.interrupted = true;
      break;
    }
  }
  result.best = std::move(best);
  result.last = std::move(last);
  return result;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const ModelBundle& initial,
                  std::span<const TrainingPair> train_set, std::span<const TrainingPair> valid_set,
                  const TrainHooks& hooks) {
  Checkpoint start;
  start.scheme = initial.scheme;
  start.model = initial.field.config();
  start.has_predictor = initial.predictor.has_value();
  start.params = initial.flat_parameters();
  start.ema = start.params;
  start.adam = AdamState::zeros(start.params.size());
  return run(cfg, start, start, train_set, valid_set, hooks);
}

TrainResult resume(const TrainConfig& cfg, const Checkpoint& last, const Checkpoint& best,
                   std::span<const TrainingPair> train_set, std::span<const TrainingPair> valid_set,
                   const TrainHooks& hooks) {
  if (last.adam.m.size() != last.params.size() || last.ema.size() != last.params.size()) {
    throw DataError("resume: checkpoint lacks optimizer or EMA state");
  }
  if (last.scheme != best.scheme || !(last.model == best.model)) {
    throw DataError("resume: last and best checkpoints describe different models");
  }
  if (last.epochs_since_improvement >= static_cast<std::uint64_t>(cfg.patience)) {
    TrainResult done;
    done.best = best;
    done.last = last;
    done.early_stopped = true;
    return done;
  }
  return run(cfg, last, best, train_set, valid_set, hooks);
}

}  // namespace ctflow
