#include "ctflow/features.hpp"

#include <algorithm>
#include <cmath>

namespace ctflow {
namespace {

struct FrameMap {
  std::size_t src_begin, dst_begin, count;
};

// Centre alignment between a spectrogram with `total` frames and a packed
// vector with `frames`.
FrameMap align(std::size_t total, std::size_t frames) {
  if (total >= frames) return {(total - frames) / 2, 0, frames};
  return {0, (frames - total) / 2, total};
}

}  // namespace

StateVector pack(const Spectrogram& s, std::size_t frames) {
  if (frames == 0) throw ArgumentError("pack: frames must be positive");
  StateVector v = StateVector::Zero(static_cast<Eigen::Index>(2 * s.bins * frames));
  const FrameMap m = align(s.frames, frames);
  for (std::size_t j = 0; j < m.count; ++j) {
    for (std::size_t k = 0; k < s.bins; ++k) {
      const auto& z = s.at(k, m.src_begin + j);
      const auto idx = static_cast<Eigen::Index>(2 * ((m.dst_begin + j) * s.bins + k));
      v[idx] = z.real();
      v[idx + 1] = z.imag();
    }
  }
  return v;
}

Spectrogram unpack(const StateVector& v, std::size_t frames, const Spectrogram& shape) {
  if (v.size() != static_cast<Eigen::Index>(2 * shape.bins * frames)) {
    throw DimensionError("unpack: vector length does not match bins x frames");
  }
  Spectrogram s = shape;
  std::fill(s.data.begin(), s.data.end(), std::complex<double>{0.0, 0.0});
  const FrameMap m = align(shape.frames, frames);
  for (std::size_t j = 0; j < m.count; ++j) {
    for (std::size_t k = 0; k < s.bins; ++k) {
      const auto idx = static_cast<Eigen::Index>(2 * ((m.dst_begin + j) * s.bins + k));
      s.at(k, m.src_begin + j) = {v[idx], v[idx + 1]};
    }
  }
  return s;
}

FeatureCodec::FeatureCodec(FeatureConfig cfg) : cfg_(cfg) {
  cfg_.stft.validate();
  cfg_.compression.validate();
  if (cfg_.frames == 0) throw ArgumentError("features: frames must be positive");
}

double FeatureCodec::normalization(const Waveform& noisy) {
  double m = 0.0;
  for (double x : noisy.samples) m = std::max(m, std::abs(x));
  return m > 0.0 ? m : 1.0;
}

StateVector FeatureCodec::encode(const Waveform& w, double scale) const {
  Waveform scaled = w;
  for (double& x : scaled.samples) x /= scale;
  return pack(compress(stft(scaled, cfg_.stft), cfg_.compression), cfg_.frames);
}

Waveform FeatureCodec::decode(const StateVector& v, std::size_t length, double sample_rate, double scale) const {
  Spectrogram shape;
  shape.params = cfg_.stft;
  shape.bins = cfg_.stft.bins();
  shape.frames = cfg_.stft.frames_for(length);
  shape.signal_length = length;
  shape.sample_rate = sample_rate;
  shape.data.assign(shape.bins * shape.frames, {0.0, 0.0});
  Waveform w = istft(decompress(unpack(v, cfg_.frames, shape), cfg_.compression));
  for (double& x : w.samples) x *= scale;
  return w;
}

TrainingPair FeatureCodec::encode_pair(const CorpusItem& item) const {
  const double scale = normalization(item.noisy);
  return {encode(item.clean, scale), encode(item.noisy, scale)};
}

std::vector<TrainingPair> FeatureCodec::encode_pairs(std::span<const CorpusItem> items) const {
  std::vector<TrainingPair> out;
  out.reserve(items.size());
  for (const auto& it : items) out.push_back(encode_pair(it));
  return out;
}

}  // namespace ctflow
