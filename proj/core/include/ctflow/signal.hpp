#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace ctflow {

struct Waveform {
  std::vector<double> samples;
  double sample_rate = 16000.0;
};

/// Centered STFT with a periodic Hann window of length fft_size. Frames are
/// taken every `hop` samples from the signal zero-padded by fft_size/2 on
/// both sides, so a signal of L samples yields 1 + L/hop frames.
struct StftParams {
  std::size_t fft_size = 510;
  std::size_t hop = 128;

  std::size_t bins() const { return fft_size / 2 + 1; }
  std::size_t frames_for(std::size_t length) const { return 1 + length / hop; }
  /// Throws ArgumentError unless overlap-added squared windows cover every
  /// sample (the condition that makes istft an exact inverse).
  void validate() const;

  static StftParams toy() { return {62, 16}; }
};

std::vector<double> periodic_hann(std::size_t n);

/// K x F complex bins, stored frame-major: bin k of frame f is at f*K + k.
struct Spectrogram {
  std::size_t bins = 0;
  std::size_t frames = 0;
  std::vector<std::complex<double>> data;
  StftParams params;
  std::size_t signal_length = 0;
  double sample_rate = 16000.0;

  std::complex<double>& at(std::size_t k, std::size_t f) { return data[f * bins + k]; }
  const std::complex<double>& at(std::size_t k, std::size_t f) const { return data[f * bins + k]; }
};

Spectrogram stft(const Waveform& w, const StftParams& params);
Waveform istft(const Spectrogram& s);

/// z -> scale * |z|^exponent * exp(i angle z)
struct CompressionParams {
  double exponent = 0.5;
  double scale = 0.15;
  void validate() const;
};

Spectrogram compress(const Spectrogram& s, const CompressionParams& p);
Spectrogram decompress(const Spectrogram& s, const CompressionParams& p);

double signal_power(const std::vector<double>& x);

/// clean + g * noise with g chosen so 10 log10(P_clean / P_gnoise) = snr_db.
/// snr_db = +infinity returns clean unchanged.
Waveform mix_at_snr(const Waveform& clean, const Waveform& noise, double snr_db);

/// Scale-invariant SDR in dB. Returns +infinity when est is an exact scaled
/// copy of ref, -infinity for an all-zero estimate.
double si_sdr(const std::vector<double>& est, const std::vector<double>& ref);
inline double si_sdr(const Waveform& est, const Waveform& ref) { return si_sdr(est.samples, ref.samples); }

}  // namespace ctflow
