#include "ctflow/signal.hpp"

#include "ctflow/common.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>

namespace ctflow {
namespace {

struct PlanDeleter {
  void operator()(fftw_plan_s* p) const { fftw_destroy_plan(p); }
};
using Plan = std::unique_ptr<fftw_plan_s, PlanDeleter>;

struct FftwBuffer {
  explicit FftwBuffer(std::size_t n) : ptr(fftw_malloc(n)) {
    if (!ptr) throw std::bad_alloc();
  }
  ~FftwBuffer() { fftw_free(ptr); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  void* ptr;
};

}  // namespace

std::vector<double> periodic_hann(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  }
  return w;
}

void StftParams::validate() const {
  if (fft_size < 4 || fft_size % 2 != 0) throw ArgumentError("stft: fft_size must be even and >= 4");
  // hop <= fft_size/2 also guarantees the zero-padded edges are covered.
  if (hop < 1 || hop > fft_size / 2) throw ArgumentError("stft: hop must lie in [1, fft_size/2]");
  const auto w = periodic_hann(fft_size);
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (std::size_t r = 0; r < hop; ++r) {
    double s = 0.0;
    for (std::size_t n = r; n < fft_size; n += hop) s += w[n] * w[n];
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  if (!(lo > 1e-8 * hi)) {
    throw ArgumentError("stft: window/hop pair (" + std::to_string(fft_size) + ", " + std::to_string(hop) +
                        ") does not satisfy the overlap-add condition");
  }
}

Spectrogram stft(const Waveform& w, const StftParams& params) {
  params.validate();
  const std::size_t n = params.fft_size;
  const std::size_t pad = n / 2;
  const std::size_t len = w.samples.size();
  Spectrogram s;
  s.params = params;
  s.bins = params.bins();
  s.frames = params.frames_for(len);
  s.signal_length = len;
  s.sample_rate = w.sample_rate;
  s.data.assign(s.bins * s.frames, {0.0, 0.0});

  const auto window = periodic_hann(n);
  FftwBuffer in_buf(sizeof(double) * n);
  FftwBuffer out_buf(sizeof(fftw_complex) * s.bins);
  auto* in = static_cast<double*>(in_buf.ptr);
  auto* out = static_cast<fftw_complex*>(out_buf.ptr);
  Plan plan(fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE));

  for (std::size_t f = 0; f < s.frames; ++f) {
    const std::ptrdiff_t origin = static_cast<std::ptrdiff_t>(f * params.hop) - static_cast<std::ptrdiff_t>(pad);
    for (std::size_t i = 0; i < n; ++i) {
      const std::ptrdiff_t idx = origin + static_cast<std::ptrdiff_t>(i);
      const double x = (idx >= 0 && idx < static_cast<std::ptrdiff_t>(len)) ? w.samples[static_cast<std::size_t>(idx)] : 0.0;
      in[i] = x * window[i];
    }
    fftw_execute(plan.get());
    for (std::size_t k = 0; k < s.bins; ++k) s.at(k, f) = {out[k][0], out[k][1]};
  }
  return s;
}

Waveform istft(const Spectrogram& s) {
  s.params.validate();
  const std::size_t n = s.params.fft_size;
  const std::size_t pad = n / 2;
  if (s.bins != s.params.bins() || s.data.size() != s.bins * s.frames) {
    throw ArgumentError("istft: spectrogram shape inconsistent with its analysis parameters");
  }
  const std::size_t len = s.signal_length;
  std::vector<double> acc(len, 0.0), norm(len, 0.0);

  const auto window = periodic_hann(n);
  FftwBuffer in_buf(sizeof(fftw_complex) * s.bins);
  FftwBuffer out_buf(sizeof(double) * n);
  auto* in = static_cast<fftw_complex*>(in_buf.ptr);
  auto* out = static_cast<double*>(out_buf.ptr);
  Plan plan(fftw_plan_dft_c2r_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE));

  for (std::size_t f = 0; f < s.frames; ++f) {
    for (std::size_t k = 0; k < s.bins; ++k) {
      in[k][0] = s.at(k, f).real();
      in[k][1] = s.at(k, f).imag();
    }
    // c2r ignores the imaginary parts of the DC and Nyquist bins; clear them
    // so the plan sees a consistent Hermitian spectrum.
    in[0][1] = 0.0;
    in[s.bins - 1][1] = 0.0;
    fftw_execute(plan.get());
    const std::ptrdiff_t origin = static_cast<std::ptrdiff_t>(f * s.params.hop) - static_cast<std::ptrdiff_t>(pad);
    for (std::size_t i = 0; i < n; ++i) {
      const std::ptrdiff_t idx = origin + static_cast<std::ptrdiff_t>(i);
      if (idx < 0 || idx >= static_cast<std::ptrdiff_t>(len)) continue;
      const auto u = static_cast<std::size_t>(idx);
      acc[u] += window[i] * out[i] / static_cast<double>(n);
      norm[u] += window[i] * window[i];
    }
  }
  Waveform w;
  w.sample_rate = s.sample_rate;
  w.samples.resize(len);
  for (std::size_t i = 0; i < len; ++i) w.samples[i] = norm[i] > 0.0 ? acc[i] / norm[i] : 0.0;
  return w;
}

void CompressionParams::validate() const {
  if (!(exponent > 0.0 && exponent <= 1.0)) throw ArgumentError("compression exponent must lie in (0, 1]");
  if (!(scale > 0.0)) throw ArgumentError("compression scale must be positive");
}

namespace {

Spectrogram map_magnitudes(const Spectrogram& s, double exponent, double scale) {
  Spectrogram out = s;
  for (auto& z : out.data) {
    const double mag = std::abs(z);
    if (mag == 0.0) {
      z = {0.0, 0.0};
      continue;
    }
    z = std::polar(scale * std::pow(mag, exponent), std::arg(z));
  }
  return out;
}

}  // namespace

Spectrogram compress(const Spectrogram& s, const CompressionParams& p) {
  p.validate();
  return map_magnitudes(s, p.exponent, p.scale);
}

Spectrogram decompress(const Spectrogram& s, const CompressionParams& p) {
  p.validate();
  // |z| = (|c| / b)^(1/a)
  const double inv = 1.0 / p.exponent;
  return map_magnitudes(s, inv, std::pow(1.0 / p.scale, inv));
}

double signal_power(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  double s = 0.0;
  for (double v : x) s += v * v;
  return s / static_cast<double>(x.size());
}

Waveform mix_at_snr(const Waveform& clean, const Waveform& noise, double snr_db) {
  if (clean.samples.size() != noise.samples.size()) throw DimensionError("mix_at_snr: length mismatch");
  const double pc = signal_power(clean.samples);
  if (!(pc > 0.0)) throw ArgumentError("mix_at_snr: clean signal has zero energy");
  if (snr_db == std::numeric_limits<double>::infinity()) return clean;
  if (!std::isfinite(snr_db)) throw ArgumentError("mix_at_snr: snr_db must be finite or +infinity");
  const double pn = signal_power(noise.samples);
  if (!(pn > 0.0)) throw ArgumentError("mix_at_snr: noise has zero energy");
  const double gain = std::sqrt(pc / (pn * std::pow(10.0, snr_db / 10.0)));
  Waveform out = clean;
  for (std::size_t i = 0; i < out.samples.size(); ++i) out.samples[i] += gain * noise.samples[i];
  return out;
}

double si_sdr(const std::vector<double>& est, const std::vector<double>& ref) {
  if (est.size() != ref.size()) throw DimensionError("si_sdr: length mismatch");
  double rr = 0.0, er = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    rr += ref[i] * ref[i];
    er += est[i] * ref[i];
  }
  if (!(rr > 0.0)) throw ArgumentError("si_sdr: reference has zero energy");
  const double alpha = er / rr;
  double target = 0.0, residual = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double s = alpha * ref[i];
    const double e = est[i] - s;
    target += s * s;
    residual += e * e;
  }
  if (residual == 0.0) {
    return target > 0.0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
  }
  if (target == 0.0) return -std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(target / residual);
}

}  // namespace ctflow
