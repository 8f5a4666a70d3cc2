#pragma once

// Checkpoint files. All integers and reals are little-endian; reals are
// IEEE-754 binary64.
//
//   offset  type      field
//   0       char[8]   magic "CTFLOWCK"
//   8       u32       format version (1)
//   12      u32       scheme: 0 flowse, 1 ctfse, 2 pred-cascade
//   16      u64       state dimension d
//   24      u32       depth
//   28      u32       width
//   32      u32       time-embedding size e
//   36      u32       flags: bit0 EMA block, bit1 predictor present, bit2 optimizer block
//   40      u64       optimizer step count
//   48      u64       epoch
//   56      f64       best validation loss
//   64      u64       epochs since improvement
//   72      u64       P, trainable parameter count (field, then predictor)
//   80      f64[P]    raw parameters
//           f64[P]    EMA parameters            (bit0)
//           f64[P]    Adam first moments         (bit2)
//           f64[P]    Adam second moments        (bit2)

#include "ctflow/field_model.hpp"
#include "ctflow/sampler.hpp"

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <vector>

namespace ctflow {

/// The trainable models behind one scheme: the shared field, plus a separate
/// predictor for the predictive-cascade baseline.
struct ModelBundle {
  Scheme scheme = Scheme::CTFSE;
  VectorFieldModel field;
  std::optional<PredictiveModel> predictor;

  static ModelBundle initialized(Scheme scheme, const FieldModelConfig& cfg, std::uint64_t seed);
  static ModelBundle zeros(Scheme scheme, const FieldModelConfig& cfg);

  Eigen::Index parameter_count() const;
  Eigen::VectorXd flat_parameters() const;
  void set_flat_parameters(const Eigen::VectorXd& p);
};

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  std::uint64_t step = 0;

  static AdamState zeros(Eigen::Index n) { return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), 0}; }
};

struct Checkpoint {
  Scheme scheme = Scheme::CTFSE;
  FieldModelConfig model;
  bool has_predictor = false;
  Eigen::VectorXd params;
  Eigen::VectorXd ema;
  AdamState adam;
  std::uint64_t epoch = 0;
  double best_valid = std::numeric_limits<double>::infinity();
  std::uint64_t epochs_since_improvement = 0;

  /// Models with EMA (default) or raw weights loaded.
  ModelBundle bundle(bool use_ema = true) const;
};

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ck);
Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ctflow
