#pragma once

#include "ctflow/common.hpp"

#include <atomic>
#include <functional>
#include <span>
#include <vector>

namespace ctflow {

/// A conditional vector field v(x, c, t). Every call through operator() is
/// counted, so samplers can be audited for their number of function
/// evaluations (NFE).
class VectorField {
 public:
  VectorField() = default;
  VectorField(const VectorField&) : evaluations_(0) {}
  VectorField& operator=(const VectorField&) { return *this; }
  virtual ~VectorField() = default;

  StateVector operator()(const StateVector& x, const StateVector& c, double t) const;

  std::uint64_t evaluation_count() const { return evaluations_.load(std::memory_order_relaxed); }
  void reset_evaluation_count() const { evaluations_.store(0, std::memory_order_relaxed); }

 protected:
  virtual StateVector evaluate(const StateVector& x, const StateVector& c, double t) const = 0;
  void count_evaluations(std::uint64_t n) const { evaluations_.fetch_add(n, std::memory_order_relaxed); }

 private:
  mutable std::atomic<std::uint64_t> evaluations_{0};
};

/// Wraps an arbitrary callable; used for oracle fields and mocks.
class FunctionField final : public VectorField {
 public:
  using Function = std::function<StateVector(const StateVector&, const StateVector&, double)>;
  explicit FunctionField(Function f) : f_(std::move(f)) {}

 protected:
  StateVector evaluate(const StateVector& x, const StateVector& c, double t) const override {
    return f_(x, c, t);
  }

 private:
  Function f_;
};

/// A predictive estimator D(y) for the two-model cascade baseline.
class Predictor {
 public:
  Predictor() = default;
  Predictor(const Predictor&) : evaluations_(0) {}
  Predictor& operator=(const Predictor&) { return *this; }
  virtual ~Predictor() = default;

  StateVector operator()(const StateVector& y) const;
  std::uint64_t evaluation_count() const { return evaluations_.load(std::memory_order_relaxed); }
  void reset_evaluation_count() const { evaluations_.store(0, std::memory_order_relaxed); }

 protected:
  virtual StateVector evaluate(const StateVector& y) const = 0;
  void count_evaluations(std::uint64_t n) const { evaluations_.fetch_add(n, std::memory_order_relaxed); }

 private:
  mutable std::atomic<std::uint64_t> evaluations_{0};
};

class FunctionPredictor final : public Predictor {
 public:
  using Function = std::function<StateVector(const StateVector&)>;
  explicit FunctionPredictor(Function f) : f_(std::move(f)) {}

 protected:
  StateVector evaluate(const StateVector& y) const override { return f_(y); }

 private:
  Function f_;
};

// ---------------------------------------------------------------------------
// Residual MLP with analytic gradients.
//
//   h_1     = silu(W_0 u + b_0)
//   h_{k+1} = h_k + silu(W_k h_k + b_k)      k = 1 .. depth-1
//   out     = W_out h_depth + b_out
//
// Parameters live in one flat vector, layer by layer, each layer as its
// column-major weight matrix followed by its bias.

struct MlpShape {
  Eigen::Index input = 0;
  Eigen::Index output = 0;
  Eigen::Index width = 128;
  Eigen::Index depth = 4;

  Eigen::Index parameter_count() const;
};

class Mlp {
 public:
  /// Activations recorded by forward() for a later backward() pass.
  struct Tape {
    Eigen::MatrixXd input;
    std::vector<Eigen::MatrixXd> pre;     // pre-activation of each hidden layer
    std::vector<Eigen::MatrixXd> hidden;  // h_1 .. h_depth
  };

  Mlp() = default;
  explicit Mlp(MlpShape shape);  // all parameters zero

  /// Hidden weights ~ N(0, 1/fan_in), biases zero, output layer zero so the
  /// network starts as the zero map.
  static Mlp initialized(MlpShape shape, Rng& rng);

  const MlpShape& shape() const { return shape_; }
  const Eigen::VectorXd& parameters() const { return params_; }
  void set_parameters(const Eigen::VectorXd& p);

  /// Column-batched evaluation: input is (shape.input x B), output (shape.output x B).
  Eigen::MatrixXd forward(const Eigen::MatrixXd& input, Tape* tape = nullptr) const;

  /// Accumulates d(loss)/d(params) into grad_params given d(loss)/d(output).
  /// Returns d(loss)/d(input) when want_input_grad is set, else an empty matrix.
  Eigen::MatrixXd backward(const Tape& tape, const Eigen::MatrixXd& grad_output,
                           Eigen::Ref<Eigen::VectorXd> grad_params, bool want_input_grad) const;

 private:
  struct Layer {
    Eigen::Index weight_offset, bias_offset, rows, cols;
  };
  std::vector<Layer> layout() const;

  MlpShape shape_;
  Eigen::VectorXd params_;
};

// ---------------------------------------------------------------------------

/// Sinusoidal time embedding of even size e: [sin(w_k t)]_k followed by
/// [cos(w_k t)]_k with e/2 frequencies log-spaced from 2*pi to 2*pi*16.
Eigen::VectorXd time_embed(double t, Eigen::Index e);
std::vector<double> time_embed_frequencies(Eigen::Index e);

struct FieldModelConfig {
  Eigen::Index state_dim = 0;
  Eigen::Index width = 128;
  Eigen::Index depth = 4;
  Eigen::Index embed_dim = 32;

  MlpShape mlp_shape() const { return {2 * state_dim + embed_dim, state_dim, width, depth}; }
  friend bool operator==(const FieldModelConfig&, const FieldModelConfig&) = default;
};

/// The learnable field v_theta(x, c, t):
///
///   g = [1; embed(t)]
///   v = (mlp([x; c; embed(t)]) + (A g) .* x + (B g) .* c) / max(t, t_delta)
///
/// The time-gated diagonal skip lets the state reach the output without
/// passing through the narrow hidden layers, and the 1/t output scale matches
/// the (x_t - x0)/t form of the target field. Parameters are the MLP's
/// followed by A and B (each d x (e+1), column-major). Skip gains and the
/// MLP's output layer start at zero, so a freshly initialised field is 0.
class VectorFieldModel final : public VectorField {
 public:
  struct Tape {
    Mlp::Tape net;
    Eigen::MatrixXd x, c, gate;
    Eigen::VectorXd scale;
  };

  VectorFieldModel() = default;
  explicit VectorFieldModel(const FieldModelConfig& cfg);  // zero parameters
  static VectorFieldModel initialized(const FieldModelConfig& cfg, std::uint64_t seed);

  const FieldModelConfig& config() const { return cfg_; }
  Eigen::Index parameter_count() const { return params_.size(); }
  const Eigen::VectorXd& parameters() const { return params_; }
  void set_parameters(const Eigen::VectorXd& p);

  /// 1 / max(t, kDefaultTDelta).
  static double output_scale(double t);

  /// Evaluates every column j at (x_j, c_j, t_j). Counts one evaluation per column.
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& x, const Eigen::MatrixXd& c,
                                std::span<const double> t, Tape* tape = nullptr) const;

  struct InputGradient {
    Eigen::MatrixXd x;
    Eigen::MatrixXd c;
  };
  InputGradient backward_batch(const Tape& tape, const Eigen::MatrixXd& grad_output,
                               Eigen::Ref<Eigen::VectorXd> grad_params, bool want_input_grad) const;

 protected:
  StateVector evaluate(const StateVector& x, const StateVector& c, double t) const override;

 private:
  Eigen::Index net_parameter_count() const { return net_.shape().parameter_count(); }
  Eigen::MatrixXd compute_batch(const Eigen::MatrixXd& x, const Eigen::MatrixXd& c, std::span<const double> t,
                                Tape* tape) const;

  FieldModelConfig cfg_;
  Mlp net_;
  Eigen::VectorXd params_;  // [mlp | A | B]
};

/// One Euler step of the first flow from t = 1 to t = 0:
/// D = x1 - v(x1, y, 1). Exactly one field evaluation.
StateVector crude_estimate(const VectorField& field, const StateVector& x1, const StateVector& y);

/// Separate predictive network D_phi(y) = y - g_phi(y) for the cascade
/// baseline; zero parameters give the identity.
class PredictiveModel final : public Predictor {
 public:
  PredictiveModel() = default;
  PredictiveModel(Eigen::Index state_dim, Eigen::Index width, Eigen::Index depth);
  static PredictiveModel initialized(Eigen::Index state_dim, Eigen::Index width, Eigen::Index depth,
                                     std::uint64_t seed);

  Eigen::Index state_dim() const { return net_.shape().output; }
  Eigen::Index parameter_count() const { return net_.shape().parameter_count(); }
  const Eigen::VectorXd& parameters() const { return net_.parameters(); }
  void set_parameters(const Eigen::VectorXd& p) { net_.set_parameters(p); }
  const Mlp& network() const { return net_; }

  /// Batched D_phi over columns of y; counts one evaluation per column.
  Eigen::MatrixXd predict_batch(const Eigen::MatrixXd& y, Mlp::Tape* tape = nullptr) const;

 protected:
  StateVector evaluate(const StateVector& y) const override;

 private:
  Mlp net_;
};

}  // namespace ctflow
