#include "ctflow/losses.hpp"

#include "ctflow/path.hpp"

#include <cmath>

namespace ctflow {

void LossWeights::validate() const {
  for (double w : {lambda1, lambda2, lambda3, alpha}) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ArgumentError("loss weights must be finite and >= 0");
  }
}

std::vector<ItemNoise> draw_noise(std::size_t items, Eigen::Index dim, double t_delta, Rng& rng) {
  if (!(t_delta > 0.0 && t_delta < 1.0)) throw ArgumentError("t_delta must lie in (0, 1)");
  std::vector<ItemNoise> out(items);
  for (auto& n : out) {
    n.t_first = rng.uniform(t_delta, 1.0);
    n.eps_first = rng.normal_vector(dim);
    n.eps_x1 = rng.normal_vector(dim);
    n.t_second = rng.uniform(t_delta, 1.0);
    n.eps_second = rng.normal_vector(dim);
  }
  return out;
}

double mean_squared_error(const StateVector& a, const StateVector& b) {
  require_same_length(a, b, "mean_squared_error");
  if (a.size() == 0) return 0.0;
  return (a - b).squaredNorm() / static_cast<double>(a.size());
}

double loss_first(const VectorField& field, const StateVector& x0, const StateVector& y, double t,
                  const StateVector& x_t, const ObjectiveConfig& cfg) {
  require_same_length(x0, y, "loss_first");
  const StateVector target = target_vector_field(x_t, t, x0, y, cfg.sigma, cfg.t_delta);
  return mean_squared_error(field(x_t, y, t), target);
}

double loss_second(const VectorField& field, const StateVector& x0, const StateVector& y,
                   const StateVector& x1, double t, const StateVector& x_tilde_t,
                   const ObjectiveConfig& cfg) {
  require_same_length(x0, y, "loss_second");
  const StateVector d = crude_estimate(field, x1, y);
  const StateVector condition = 0.5 * (d + y);
  const StateVector target = target_vector_field(x_tilde_t, t, x0, d, cfg.sigma, cfg.t_delta);
  return mean_squared_error(field(x_tilde_t, condition, t), target);
}

double loss_third(const VectorField& field, const StateVector& x0, const StateVector& y,
                  const StateVector& x1) {
  require_same_length(x0, y, "loss_third");
  require_same_length(x0, x1, "loss_third");
  // v_1(x1 | x0, y) = (x1 - y) + (y - x0) = x1 - x0
  return mean_squared_error(field(x1, y, 1.0), x1 - x0);
}

double loss_predictive(const StateVector& prediction, const StateVector& x0) {
  return mean_squared_error(prediction, x0);
}

namespace {

void check_batch(std::span<const TrainingPair> batch, std::size_t noise_items) {
  if (batch.empty()) throw ArgumentError("loss: empty batch");
  if (noise_items != batch.size()) throw ArgumentError("loss: noise draws do not match batch size");
}

void finish(LossBreakdown& b, const LossWeights& w, std::size_t n) {
  const double inv = 1.0 / static_cast<double>(n);
  b.l1 *= inv;
  b.l2 *= inv;
  b.l3 *= inv;
  b.total = w.lambda1 * b.l1 + w.lambda2 * b.l2 + w.lambda3 * b.l3;
}

}  // namespace

LossBreakdown loss_total(const VectorField& field, std::span<const TrainingPair> batch,
                         const LossWeights& weights, const ObjectiveConfig& cfg, Rng& rng) {
  if (batch.empty()) throw ArgumentError("loss: empty batch");
  const auto noise = draw_noise(batch.size(), batch.front().clean.size(), cfg.t_delta, rng);
  return loss_total(field, batch, weights, cfg, noise);
}

LossBreakdown loss_total(const VectorField& field, std::span<const TrainingPair> batch,
                         const LossWeights& weights, const ObjectiveConfig& cfg,
                         std::span<const ItemNoise> noise) {
  check_batch(batch, noise.size());
  weights.validate();
  LossBreakdown b;
  b.per_item.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& [x0, y] = batch[i];
    const ItemNoise& n = noise[i];

    const StateVector x_t = sample_path(n.t_first, x0, y, cfg.sigma, n.eps_first);
    const double l1 = loss_first(field, x0, y, n.t_first, x_t, cfg);

    const StateVector x1 = sample_path(1.0, x0, y, cfg.sigma, n.eps_x1);
    const StateVector d = crude_estimate(field, x1, y);
    const StateVector x_tilde = sample_path(n.t_second, x0, d, cfg.sigma, n.eps_second);
    const double l2 = loss_second(field, x0, y, x1, n.t_second, x_tilde, cfg);
    const double l3 = loss_third(field, x0, y, x1);

    b.l1 += l1;
    b.l2 += l2;
    b.l3 += l3;
    b.per_item.push_back(weights.lambda1 * l1 + weights.lambda2 * l2 + weights.lambda3 * l3);
  }
  finish(b, weights, batch.size());
  return b;
}

LossBreakdown loss_cascade_baseline(const Predictor& predictor, const VectorField& field,
                                    std::span<const TrainingPair> batch, const LossWeights& weights,
                                    const ObjectiveConfig& cfg, Rng& rng) {
  if (batch.empty()) throw ArgumentError("loss: empty batch");
  const auto noise = draw_noise(batch.size(), batch.front().clean.size(), cfg.t_delta, rng);
  return loss_cascade_baseline(predictor, field, batch, weights, cfg, noise);
}

LossBreakdown loss_cascade_baseline(const Predictor& predictor, const VectorField& field,
                                    std::span<const TrainingPair> batch, const LossWeights& weights,
                                    const ObjectiveConfig& cfg, std::span<const ItemNoise> noise) {
  check_batch(batch, noise.size());
  weights.validate();
  LossBreakdown b;
  b.per_item.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& [x0, y] = batch[i];
    const ItemNoise& n = noise[i];
    const StateVector d = predictor(y);
    const double lp = loss_predictive(d, x0);

    const StateVector x_tilde = sample_path(n.t_second, x0, d, cfg.sigma, n.eps_second);
    const StateVector condition = 0.5 * (d + y);
    const StateVector target = target_vector_field(x_tilde, n.t_second, x0, d, cfg.sigma, cfg.t_delta);
    const double lc = mean_squared_error(field(x_tilde, condition, n.t_second), target);

    b.l1 += lp;
    b.l2 += lc;
    b.per_item.push_back(weights.alpha * lp + weights.lambda2 * lc);
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  b.l1 *= inv;
  b.l2 *= inv;
  b.total = weights.alpha * b.l1 + weights.lambda2 * b.l2;
  return b;
}

}  // namespace ctflow
