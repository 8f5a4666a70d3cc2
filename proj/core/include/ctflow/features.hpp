#pragma once

// Waveform <-> StateVector. A waveform is divided by a per-utterance scale
// (max |noisy|), analysed with the STFT, magnitude-compressed, and packed as
// interleaved (re, im) pairs over a fixed number of frames:
//   v[2 (f K + k)] = Re z(k, f),  v[2 (f K + k) + 1] = Im z(k, f).
// Longer spectrograms are centre-cropped, shorter ones zero-padded.

#include "ctflow/common.hpp"
#include "ctflow/corpus.hpp"
#include "ctflow/losses.hpp"
#include "ctflow/signal.hpp"

#include <span>

namespace ctflow {

struct FeatureConfig {
  StftParams stft = StftParams::toy();
  CompressionParams compression;
  std::size_t frames = 8;

  Eigen::Index dim() const { return static_cast<Eigen::Index>(2 * stft.bins() * frames); }
};

StateVector pack(const Spectrogram& s, std::size_t frames);
/// Writes the packed frames back into a spectrogram shaped like `shape`
/// (cropped frames come back as zeros).
Spectrogram unpack(const StateVector& v, std::size_t frames, const Spectrogram& shape);

class FeatureCodec {
 public:
  explicit FeatureCodec(FeatureConfig cfg);

  const FeatureConfig& config() const { return cfg_; }
  Eigen::Index dim() const { return cfg_.dim(); }

  /// max |x|, or 1 for an all-zero signal.
  static double normalization(const Waveform& noisy);

  StateVector encode(const Waveform& w, double scale) const;
  Waveform decode(const StateVector& v, std::size_t length, double sample_rate, double scale) const;

  TrainingPair encode_pair(const CorpusItem& item) const;
  std::vector<TrainingPair> encode_pairs(std::span<const CorpusItem> items) const;

 private:
  FeatureConfig cfg_;
};

}  // namespace ctflow
