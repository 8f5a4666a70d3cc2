#include "ctflow/gradient.hpp"

#include <cmath>

namespace ctflow {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct BatchMatrices {
  MatrixXd x0, y, eps_first, eps_x1, eps_second;
  std::vector<double> t_first, t_second, ones;
};

BatchMatrices stack(std::span<const TrainingPair> batch, std::span<const ItemNoise> noise, Index d) {
  if (batch.empty()) throw ArgumentError("loss_gradient: empty batch");
  if (noise.size() != batch.size()) throw ArgumentError("loss_gradient: noise/batch size mismatch");
  const Index n = static_cast<Index>(batch.size());
  BatchMatrices m;
  m.x0.resize(d, n);
  m.y.resize(d, n);
  m.eps_first.resize(d, n);
  m.eps_x1.resize(d, n);
  m.eps_second.resize(d, n);
  for (Index j = 0; j < n; ++j) {
    const auto& p = batch[static_cast<std::size_t>(j)];
    const auto& z = noise[static_cast<std::size_t>(j)];
    if (p.clean.size() != d || p.noisy.size() != d || z.eps_first.size() != d ||
        z.eps_x1.size() != d || z.eps_second.size() != d) {
      throw DimensionError("loss_gradient: item " + std::to_string(j) + " has wrong length");
    }
    m.x0.col(j) = p.clean;
    m.y.col(j) = p.noisy;
    m.eps_first.col(j) = z.eps_first;
    m.eps_x1.col(j) = z.eps_x1;
    m.eps_second.col(j) = z.eps_second;
    m.t_first.push_back(z.t_first);
    m.t_second.push_back(z.t_second);
    m.ones.push_back(1.0);
  }
  return m;
}

Eigen::RowVectorXd as_row(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::RowVectorXd>(v.data(), static_cast<Index>(v.size()));
}

void check_finite(const MatrixXd& m, const char* stage) {
  if (!m.allFinite()) throw NumericalError(std::string("loss_gradient: non-finite values in ") + stage);
}

/// Column-wise mean squared residual.
std::vector<double> column_mse(const MatrixXd& r) {
  std::vector<double> out(static_cast<std::size_t>(r.cols()));
  for (Index j = 0; j < r.cols(); ++j) {
    out[static_cast<std::size_t>(j)] = r.col(j).squaredNorm() / static_cast<double>(r.rows());
  }
  return out;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

/// Second-flow pieces given D: path sample, condition, CFM residual.
struct SecondFlow {
  MatrixXd x_tilde, condition, residual;
  VectorFieldModel::Tape tape;
};

SecondFlow second_flow(const VectorFieldModel& model, const BatchMatrices& m, const MatrixXd& d,
                       double sigma) {
  SecondFlow s;
  const Eigen::RowVectorXd t = as_row(m.t_second);
  // x~ = (1 - t) x0 + t D + t sigma eps
  s.x_tilde = m.x0.array().rowwise() * (1.0 - t.array()) +
              (d + sigma * m.eps_second).array().rowwise() * t.array();
  s.condition = 0.5 * (d + m.y);
  const MatrixXd out = model.forward_batch(s.x_tilde, s.condition, m.t_second, &s.tape);
  check_finite(out, "second-flow forward");
  // target = (x~ - mu_t) / t + (D - x0) = sigma eps + D - x0
  s.residual = out - (sigma * m.eps_second + d - m.x0);
  return s;
}

}  // namespace

GradientRecord loss_gradient(const VectorFieldModel& model, std::span<const TrainingPair> batch,
                             const LossWeights& weights, const ObjectiveConfig& cfg, Rng& rng) {
  if (batch.empty()) throw ArgumentError("loss_gradient: empty batch");
  const auto noise = draw_noise(batch.size(), model.config().state_dim, cfg.t_delta, rng);
  return loss_gradient(model, batch, weights, cfg, noise);
}

GradientRecord loss_gradient(const VectorFieldModel& model, std::span<const TrainingPair> batch,
                             const LossWeights& weights, const ObjectiveConfig& cfg,
                             std::span<const ItemNoise> noise) {
  weights.validate();
  const Index d = model.config().state_dim;
  const BatchMatrices m = stack(batch, noise, d);
  const Index n = static_cast<Index>(batch.size());
  const double scale = 2.0 / static_cast<double>(d * n);
  const double sigma = cfg.sigma;

  GradientRecord rec;
  rec.gradient = VectorXd::Zero(model.parameter_count());

  // L1: x_t on the first-flow path, condition y.
  const Eigen::RowVectorXd t1 = as_row(m.t_first);
  const MatrixXd x_t = m.x0.array().rowwise() * (1.0 - t1.array()) +
                       (m.y + sigma * m.eps_first).array().rowwise() * t1.array();
  VectorFieldModel::Tape tape1;
  const MatrixXd out1 = model.forward_batch(x_t, m.y, m.t_first, &tape1);
  check_finite(out1, "first-flow forward");
  const MatrixXd r1 = out1 - (sigma * m.eps_first + m.y - m.x0);

  // Crude estimate D = x1 - v(x1, y, 1); shared by L2 and L3.
  const MatrixXd x1 = m.y + sigma * m.eps_x1;
  VectorFieldModel::Tape tape_crude;
  const MatrixXd out_crude = model.forward_batch(x1, m.y, m.ones, &tape_crude);
  check_finite(out_crude, "crude-estimate forward");
  const MatrixXd d_est = x1 - out_crude;
  const MatrixXd r3 = out_crude - (x1 - m.x0);

  SecondFlow s2 = second_flow(model, m, d_est, sigma);

  const auto l1 = column_mse(r1);
  const auto l2 = column_mse(s2.residual);
  const auto l3 = column_mse(r3);
  rec.loss.l1 = mean(l1);
  rec.loss.l2 = mean(l2);
  rec.loss.l3 = mean(l3);
  rec.loss.total = weights.lambda1 * rec.loss.l1 + weights.lambda2 * rec.loss.l2 +
                   weights.lambda3 * rec.loss.l3;
  for (std::size_t j = 0; j < l1.size(); ++j) {
    rec.loss.per_item.push_back(weights.lambda1 * l1[j] + weights.lambda2 * l2[j] +
                                weights.lambda3 * l3[j]);
  }

  if (weights.lambda1 > 0.0) {
    model.backward_batch(tape1, (weights.lambda1 * scale) * r1, rec.gradient, false);
  }

  MatrixXd grad_crude_out = (weights.lambda3 * scale) * r3;
  if (weights.lambda2 > 0.0) {
    const MatrixXd g2 = (weights.lambda2 * scale) * s2.residual;
    const bool through_d = !cfg.detach_crude_estimate;
    const auto gin = model.backward_batch(s2.tape, g2, rec.gradient, through_d);
    if (through_d) {
      // D enters as path endpoint (x~ = ... + t D), condition (D + y)/2, and target (+D).
      const Eigen::RowVectorXd t2 = as_row(m.t_second);
      const MatrixXd grad_d = (gin.x.array().rowwise() * t2.array()).matrix() + 0.5 * gin.c - g2;
      grad_crude_out -= grad_d;  // D = x1 - out_crude
    }
  }
  if (weights.lambda3 > 0.0 || (weights.lambda2 > 0.0 && !cfg.detach_crude_estimate)) {
    model.backward_batch(tape_crude, grad_crude_out, rec.gradient, false);
  }

  if (!rec.gradient.allFinite()) throw NumericalError("loss_gradient: non-finite gradient");
  return rec;
}

GradientRecord cascade_baseline_gradient(const PredictiveModel& predictor,
                                         const VectorFieldModel& model,
                                         std::span<const TrainingPair> batch,
                                         const LossWeights& weights, const ObjectiveConfig& cfg,
                                         std::span<const ItemNoise> noise) {
  weights.validate();
  const Index d = model.config().state_dim;
  if (predictor.state_dim() != d) throw DimensionError("cascade baseline: predictor/field dims differ");
  const BatchMatrices m = stack(batch, noise, d);
  const Index n = static_cast<Index>(batch.size());
  const double scale = 2.0 / static_cast<double>(d * n);
  const Index field_params = model.parameter_count();

  GradientRecord rec;
  rec.gradient = VectorXd::Zero(field_params + predictor.parameter_count());

  Mlp::Tape tape_pred;
  const MatrixXd d_est = predictor.predict_batch(m.y, &tape_pred);
  check_finite(d_est, "predictor forward");
  const MatrixXd rp = d_est - m.x0;

  SecondFlow s2 = second_flow(model, m, d_est, cfg.sigma);

  const auto lp = column_mse(rp);
  const auto lc = column_mse(s2.residual);
  rec.loss.l1 = mean(lp);
  rec.loss.l2 = mean(lc);
  rec.loss.total = weights.alpha * rec.loss.l1 + weights.lambda2 * rec.loss.l2;
  for (std::size_t j = 0; j < lp.size(); ++j) {
    rec.loss.per_item.push_back(weights.alpha * lp[j] + weights.lambda2 * lc[j]);
  }

  MatrixXd grad_d = (weights.alpha * scale) * rp;
  if (weights.lambda2 > 0.0) {
    const MatrixXd g2 = (weights.lambda2 * scale) * s2.residual;
    const bool through_d = !cfg.detach_crude_estimate;
    const auto gin = model.backward_batch(s2.tape, g2, rec.gradient.head(field_params), through_d);
    if (through_d) {
      const Eigen::RowVectorXd t2 = as_row(m.t_second);
      grad_d += (gin.x.array().rowwise() * t2.array()).matrix() + 0.5 * gin.c - g2;
    }
  }
  // D_phi(y) = y - g(y)
  predictor.network().backward(tape_pred, -grad_d, rec.gradient.tail(predictor.parameter_count()),
                               false);

  if (!rec.gradient.allFinite()) throw NumericalError("cascade_baseline_gradient: non-finite gradient");
  return rec;
}

}  // namespace ctflow
