#pragma once

#include "ctflow/tools/experiment.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ctflow::tools {

namespace fs = std::filesystem;

/// Mean and 95% confidence half-width over utterances. Student-t quantiles
/// for n < 30, the normal 1.96 otherwise; the half-width is NaN for n < 2.
struct Summary {
  std::size_t n = 0;
  double mean = 0.0;
  double ci95 = 0.0;
};
Summary summarize(const std::vector<double>& values);

void cmd_synth(const ExperimentConfig& cfg, const fs::path& out_dir, bool force);

struct TrainOptions {
  fs::path corpus;
  fs::path checkpoint;      // best-validation weights; <checkpoint>.last holds the resumable state
  fs::path curves;          // empty: <checkpoint>.csv
  bool resume = false;
  int epochs_this_run = 0;  // > 0: stop (resumably) after this many epochs
  std::ostream* log = nullptr;
};

struct TrainSummary {
  std::uint64_t epochs = 0;
  double best_valid = 0.0;
  bool early_stopped = false;
  bool interrupted = false;
};

TrainSummary cmd_train(const ExperimentConfig& cfg, const TrainOptions& opt);

fs::path last_checkpoint_path(const fs::path& checkpoint);
fs::path default_curves_path(const fs::path& checkpoint);

/// Throws ConfigError unless the checkpoint was trained for `scheme` on
/// feature vectors of length `dim`.
void require_compatible(const Checkpoint& ck, Scheme scheme, Eigen::Index dim);

struct EnhanceOptions {
  fs::path checkpoint;
  fs::path corpus;            // with split, or
  std::string split = "test";
  fs::path input;             // a single raw float32 file
  double input_sample_rate = 8000.0;
  fs::path out_dir;
  std::optional<Scheme> scheme;  // defaults to the checkpoint's scheme
  std::optional<int> nfe_budget; // overrides cfg.steps
  bool force = false;
};

/// Writes <out_dir>/<id>.f32 per item and <out_dir>/log.jsonl; returns the
/// log rows in id order.
struct EnhanceRow {
  std::string id;
  std::string scheme;
  int steps = 0;
  int nfe = 0;
  std::optional<double> si_sdr;
  std::optional<double> noisy_si_sdr;
};
std::vector<EnhanceRow> cmd_enhance(const ExperimentConfig& cfg, const EnhanceOptions& opt);

struct SweepOptions {
  std::vector<fs::path> checkpoints;
  fs::path corpus;
  std::string split = "test";
  std::vector<int> steps;        // N values, or
  std::vector<int> nfe_budgets;  // NFE values, converted per scheme
  fs::path out_csv;
};

struct SweepRow {
  std::string scheme;
  int steps = 0;
  int nfe = 0;
  Summary si_sdr;
};
std::vector<SweepRow> cmd_sweep_nfe(const ExperimentConfig& cfg, const SweepOptions& opt);

struct EvalOptions {
  fs::path corpus;
  std::string split = "test";
  fs::path enhanced_dir;
};

struct EvalReport {
  Summary noisy;
  Summary enhanced;
  Summary improvement;
};
EvalReport cmd_eval(const EvalOptions& opt);

}  // namespace ctflow::tools
