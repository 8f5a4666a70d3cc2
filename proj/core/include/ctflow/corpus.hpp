#pragma once

// Synthetic paired corpus: band-limited clean signals (sums of amplitude-
// modulated sinusoids) mixed with coloured noise at a random SNR.
//
// On disk, one directory per split:
//   <root>/<split>/manifest.jsonl      one JSON object per line:
//       {"id", "snr_db", "duration", "seed", "num_samples", "sample_rate"}
//   <root>/<split>/<id>.clean.f32      raw little-endian float32 samples
//   <root>/<split>/<id>.noisy.f32

#include "ctflow/signal.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace ctflow {

struct CorpusSpec {
  std::size_t train_count = 200;
  std::size_t valid_count = 20;
  std::size_t test_count = 20;
  std::size_t num_samples = 112;
  double sample_rate = 8000.0;
  double snr_min_db = 0.0;
  double snr_max_db = 20.0;
  // Noise is white noise through 1 / (1 - p z^-1) with p ~ U[pole_min, pole_max].
  double noise_pole_min = -0.9;
  double noise_pole_max = -0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

struct CorpusItem {
  std::string id;
  Waveform clean;
  Waveform noisy;
  double snr_db = 0.0;
  std::uint64_t seed = 0;
};

struct Corpus {
  std::vector<CorpusItem> train;
  std::vector<CorpusItem> valid;
  std::vector<CorpusItem> test;

  const std::vector<CorpusItem>& split(std::string_view name) const;
};

inline constexpr std::string_view kSplits[] = {"train", "valid", "test"};

/// Clean signals keep their energy below this fraction of Nyquist.
inline constexpr double kCleanBandFraction = 0.32;

/// Deterministic function of (spec, item seed).
CorpusItem synth_item(const CorpusSpec& spec, const std::string& id, std::uint64_t item_seed);
Corpus synth_corpus(const CorpusSpec& spec);

void write_f32(const std::filesystem::path& path, const std::vector<double>& samples);
std::vector<double> read_f32(const std::filesystem::path& path);

/// Refuses to overwrite an existing non-empty directory unless force is set.
void write_corpus(const Corpus& corpus, const std::filesystem::path& root, bool force);
std::vector<CorpusItem> read_split(const std::filesystem::path& root, std::string_view split);

}  // namespace ctflow
