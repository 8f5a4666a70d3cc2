#include "ctflow/field_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ctflow {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd silu(const MatrixXd& z) {
  return z.unaryExpr([](double v) { return v / (1.0 + std::exp(-v)); });
}

MatrixXd silu_derivative(const MatrixXd& z) {
  return z.unaryExpr([](double v) {
    const double s = 1.0 / (1.0 + std::exp(-v));
    return s * (1.0 + v * (1.0 - s));
  });
}

}  // namespace

StateVector VectorField::operator()(const StateVector& x, const StateVector& c, double t) const {
  count_evaluations(1);
  return evaluate(x, c, t);
}

StateVector Predictor::operator()(const StateVector& y) const {
  count_evaluations(1);
  return evaluate(y);
}

// ---------------------------------------------------------------------------

Index MlpShape::parameter_count() const {
  if (depth < 1) return 0;
  return width * input + width + (depth - 1) * (width * width + width) + output * width + output;
}

Mlp::Mlp(MlpShape shape) : shape_(shape) {
  if (shape.input <= 0 || shape.output <= 0 || shape.width <= 0 || shape.depth < 1) {
    throw ArgumentError("mlp: input, output, width must be positive and depth >= 1");
  }
  params_ = VectorXd::Zero(shape.parameter_count());
}

std::vector<Mlp::Layer> Mlp::layout() const {
  std::vector<Layer> layers;
  layers.reserve(static_cast<std::size_t>(shape_.depth) + 1);
  Index off = 0;
  auto add = [&](Index rows, Index cols) {
    layers.push_back({off, off + rows * cols, rows, cols});
    off += rows * cols + rows;
  };
  add(shape_.width, shape_.input);
  for (Index k = 1; k < shape_.depth; ++k) add(shape_.width, shape_.width);
  add(shape_.output, shape_.width);
  return layers;
}

Mlp Mlp::initialized(MlpShape shape, Rng& rng) {
  Mlp m(shape);
  const auto layers = m.layout();
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
    const double std = 1.0 / std::sqrt(static_cast<double>(layers[l].cols));
    for (Index i = 0; i < layers[l].rows * layers[l].cols; ++i) {
      m.params_[layers[l].weight_offset + i] = std * rng.normal();
    }
  }
  return m;
}

void Mlp::set_parameters(const VectorXd& p) {
  if (p.size() != params_.size()) {
    throw DimensionError("mlp: expected " + std::to_string(params_.size()) + " parameters, got " +
                         std::to_string(p.size()));
  }
  params_ = p;
}

MatrixXd Mlp::forward(const MatrixXd& input, Tape* tape) const {
  if (input.rows() != shape_.input) {
    throw DimensionError("mlp: input has " + std::to_string(input.rows()) + " rows, expected " +
                         std::to_string(shape_.input));
  }
  const auto layers = layout();
  auto weight = [&](const Layer& l) {
    return Eigen::Map<const MatrixXd>(params_.data() + l.weight_offset, l.rows, l.cols);
  };
  auto bias = [&](const Layer& l) {
    return Eigen::Map<const VectorXd>(params_.data() + l.bias_offset, l.rows);
  };

  if (tape) {
    tape->input = input;
    tape->pre.clear();
    tape->hidden.clear();
  }
  MatrixXd z = (weight(layers[0]) * input).colwise() + bias(layers[0]);
  MatrixXd h = silu(z);
  if (tape) {
    tape->pre.push_back(std::move(z));
    tape->hidden.push_back(h);
  }
  for (Index k = 1; k < shape_.depth; ++k) {
    const Layer& l = layers[static_cast<std::size_t>(k)];
    MatrixXd zk = (weight(l) * h).colwise() + bias(l);
    h += silu(zk);
    if (tape) {
      tape->pre.push_back(std::move(zk));
      tape->hidden.push_back(h);
    }
  }
  const Layer& out = layers.back();
  return (weight(out) * h).colwise() + bias(out);
}

MatrixXd Mlp::backward(const Tape& tape, const MatrixXd& grad_output,
                       Eigen::Ref<VectorXd> grad_params, bool want_input_grad) const {
  if (grad_params.size() != params_.size()) throw DimensionError("mlp: gradient buffer size");
  if (tape.hidden.size() != static_cast<std::size_t>(shape_.depth)) {
    throw ArgumentError("mlp: tape does not match network depth");
  }
  const auto layers = layout();
  auto weight = [&](const Layer& l) {
    return Eigen::Map<const MatrixXd>(params_.data() + l.weight_offset, l.rows, l.cols);
  };
  auto grad_weight = [&](const Layer& l) {
    return Eigen::Map<MatrixXd>(grad_params.data() + l.weight_offset, l.rows, l.cols);
  };
  auto grad_bias = [&](const Layer& l) {
    return Eigen::Map<VectorXd>(grad_params.data() + l.bias_offset, l.rows);
  };

  const Layer& out = layers.back();
  grad_weight(out).noalias() += grad_output * tape.hidden.back().transpose();
  grad_bias(out) += grad_output.rowwise().sum();
  MatrixXd gh = weight(out).transpose() * grad_output;

  for (Index k = shape_.depth - 1; k >= 1; --k) {
    const Layer& l = layers[static_cast<std::size_t>(k)];
    const auto ks = static_cast<std::size_t>(k);
    const MatrixXd gz = gh.cwiseProduct(silu_derivative(tape.pre[ks]));
    grad_weight(l).noalias() += gz * tape.hidden[ks - 1].transpose();
    grad_bias(l) += gz.rowwise().sum();
    gh.noalias() += weight(l).transpose() * gz;
  }

  const Layer& first = layers.front();
  const MatrixXd gz = gh.cwiseProduct(silu_derivative(tape.pre[0]));
  grad_weight(first).noalias() += gz * tape.input.transpose();
  grad_bias(first) += gz.rowwise().sum();
  if (!want_input_grad) return {};
  return weight(first).transpose() * gz;
}

// ---------------------------------------------------------------------------

std::vector<double> time_embed_frequencies(Index e) {
  if (e < 2 || e % 2 != 0) throw ArgumentError("time_embed: size must be even and >= 2");
  const Index half = e / 2;
  std::vector<double> w(static_cast<std::size_t>(half));
  for (Index k = 0; k < half; ++k) {
    const double frac = half == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(half - 1);
    w[static_cast<std::size_t>(k)] = 2.0 * std::numbers::pi * std::pow(16.0, frac);
  }
  return w;
}

VectorXd time_embed(double t, Index e) {
  const auto w = time_embed_frequencies(e);
  const Index half = e / 2;
  VectorXd out(e);
  for (Index k = 0; k < half; ++k) {
    out[k] = std::sin(w[static_cast<std::size_t>(k)] * t);
    out[half + k] = std::cos(w[static_cast<std::size_t>(k)] * t);
  }
  return out;
}

VectorFieldModel::VectorFieldModel(const FieldModelConfig& cfg) : cfg_(cfg), net_(cfg.mlp_shape()) {
  if (cfg.state_dim <= 0) throw ArgumentError("field model: state_dim must be positive");
  time_embed_frequencies(cfg.embed_dim);
  params_ = VectorXd::Zero(net_parameter_count() + 2 * cfg.state_dim * (cfg.embed_dim + 1));
}

VectorFieldModel VectorFieldModel::initialized(const FieldModelConfig& cfg, std::uint64_t seed) {
  VectorFieldModel m(cfg);
  Rng rng(seed);
  m.net_ = Mlp::initialized(cfg.mlp_shape(), rng);
  m.params_.head(m.net_parameter_count()) = m.net_.parameters();
  return m;
}

void VectorFieldModel::set_parameters(const VectorXd& p) {
  if (p.size() != params_.size()) {
    throw DimensionError("field model: expected " + std::to_string(params_.size()) + " parameters, got " +
                         std::to_string(p.size()));
  }
  net_.set_parameters(p.head(net_parameter_count()));
  params_ = p;
}

double VectorFieldModel::output_scale(double t) { return 1.0 / std::max(t, kDefaultTDelta); }

MatrixXd VectorFieldModel::forward_batch(const MatrixXd& x, const MatrixXd& c, std::span<const double> t,
                                         Tape* tape) const {
  count_evaluations(static_cast<std::uint64_t>(x.cols()));
  return compute_batch(x, c, t, tape);
}

MatrixXd VectorFieldModel::compute_batch(const MatrixXd& x, const MatrixXd& c, std::span<const double> t,
                                         Tape* tape) const {
  const Index d = cfg_.state_dim;
  const Index e = cfg_.embed_dim;
  const Index batch = x.cols();
  if (x.rows() != d || c.rows() != d || c.cols() != batch || static_cast<Index>(t.size()) != batch) {
    throw DimensionError("field model: batch shapes disagree with state_dim " + std::to_string(d));
  }
  MatrixXd gate(e + 1, batch);
  VectorXd scale(batch);
  for (Index j = 0; j < batch; ++j) {
    const double tj = t[static_cast<std::size_t>(j)];
    gate(0, j) = 1.0;
    gate.col(j).tail(e) = time_embed(tj, e);
    scale[j] = output_scale(tj);
  }
  MatrixXd input(2 * d + e, batch);
  input.topRows(d) = x;
  input.middleRows(d, d) = c;
  input.bottomRows(e) = gate.bottomRows(e);
  const Index off = net_parameter_count();
  const Eigen::Map<const MatrixXd> a(params_.data() + off, d, e + 1);
  const Eigen::Map<const MatrixXd> b(params_.data() + off + d * (e + 1), d, e + 1);
  MatrixXd out = net_.forward(input, tape ? &tape->net : nullptr);
  out.array() += (a * gate).array() * x.array() + (b * gate).array() * c.array();
  out *= scale.asDiagonal();
  if (tape) {
    tape->x = x;
    tape->c = c;
    tape->gate = std::move(gate);
    tape->scale = std::move(scale);
  }
  return out;
}

VectorFieldModel::InputGradient VectorFieldModel::backward_batch(const Tape& tape, const MatrixXd& grad_output,
                                                                 Eigen::Ref<VectorXd> grad_params,
                                                                 bool want_input_grad) const {
  const Index d = cfg_.state_dim;
  const Index g = cfg_.embed_dim + 1;
  const Index off = net_parameter_count();
  const MatrixXd gs = grad_output * tape.scale.asDiagonal();
  MatrixXd gin = net_.backward(tape.net, gs, grad_params.head(off), want_input_grad);

  Eigen::Map<MatrixXd> ga(grad_params.data() + off, d, g);
  Eigen::Map<MatrixXd> gb(grad_params.data() + off + d * g, d, g);
  ga.noalias() += (gs.array() * tape.x.array()).matrix() * tape.gate.transpose();
  gb.noalias() += (gs.array() * tape.c.array()).matrix() * tape.gate.transpose();

  InputGradient r;
  if (want_input_grad) {
    const Eigen::Map<const MatrixXd> a(params_.data() + off, d, g);
    const Eigen::Map<const MatrixXd> b(params_.data() + off + d * g, d, g);
    r.x = gin.topRows(d).array() + (a * tape.gate).array() * gs.array();
    r.c = gin.middleRows(d, d).array() + (b * tape.gate).array() * gs.array();
  }
  return r;
}

StateVector VectorFieldModel::evaluate(const StateVector& x, const StateVector& c, double t) const {
  const Index d = cfg_.state_dim;
  if (x.size() != d || c.size() != d) {
    throw DimensionError("field model: expected state length " + std::to_string(d));
  }
  const double tt[1] = {t};
  return compute_batch(x, c, tt, nullptr).col(0);
}

StateVector crude_estimate(const VectorField& field, const StateVector& x1, const StateVector& y) {
  require_same_length(x1, y, "crude_estimate");
  return x1 - field(x1, y, 1.0);
}

// ---------------------------------------------------------------------------

PredictiveModel::PredictiveModel(Index state_dim, Index width, Index depth)
    : net_(MlpShape{state_dim, state_dim, width, depth}) {}

PredictiveModel PredictiveModel::initialized(Index state_dim, Index width, Index depth,
                                             std::uint64_t seed) {
  PredictiveModel m(state_dim, width, depth);
  Rng rng(seed);
  m.net_ = Mlp::initialized(MlpShape{state_dim, state_dim, width, depth}, rng);
  return m;
}

MatrixXd PredictiveModel::predict_batch(const MatrixXd& y, Mlp::Tape* tape) const {
  count_evaluations(static_cast<std::uint64_t>(y.cols()));
  return y - net_.forward(y, tape);
}

StateVector PredictiveModel::evaluate(const StateVector& y) const {
  if (y.size() != state_dim()) throw DimensionError("predictive model: state length mismatch");
  return y - net_.forward(y);
}

}  // namespace ctflow
