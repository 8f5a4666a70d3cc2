#include "ctflow/features.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace ctflow;

namespace {

Waveform noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  Waveform w;
  w.sample_rate = 8000;
  for (std::size_t i = 0; i < n; ++i) w.samples.push_back(nd(gen));
  return w;
}

}  // namespace

TEST(Features, ToyDimension) {
  const FeatureConfig cfg;
  EXPECT_EQ(cfg.stft.bins(), 32u);
  EXPECT_EQ(cfg.dim(), 512);
  EXPECT_EQ(FeatureCodec(cfg).dim(), 512);
}

TEST(Features, InterleavedLayout) {
  Spectrogram s;
  s.bins = 3;
  s.frames = 2;
  for (int i = 0; i < 6; ++i) s.data.emplace_back(i, -i - 0.5);
  const StateVector v = pack(s, 2);
  ASSERT_EQ(v.size(), 12);
  for (std::size_t f = 0; f < 2; ++f) {
    for (std::size_t k = 0; k < 3; ++k) {
      EXPECT_EQ(v[static_cast<Eigen::Index>(2 * (f * 3 + k))], s.at(k, f).real());
      EXPECT_EQ(v[static_cast<Eigen::Index>(2 * (f * 3 + k) + 1)], s.at(k, f).imag());
    }
  }
  const Spectrogram back = unpack(v, 2, s);
  EXPECT_EQ(back.data, s.data);
}

TEST(Features, CentreCropAndPad) {
  Spectrogram s;
  s.bins = 1;
  s.frames = 5;
  for (int i = 0; i < 5; ++i) s.data.emplace_back(i + 1, 0);
  const StateVector cropped = pack(s, 3);
  EXPECT_EQ(cropped[0], 2.0);
  EXPECT_EQ(cropped[2], 3.0);
  EXPECT_EQ(cropped[4], 4.0);
  const StateVector padded = pack(s, 9);
  EXPECT_EQ(padded[0], 0.0);
  EXPECT_EQ(padded[2], 0.0);
  EXPECT_EQ(padded[4], 1.0);
  EXPECT_EQ(padded[12], 5.0);
  EXPECT_EQ(padded[14], 0.0);
  const Spectrogram back = unpack(cropped, 3, s);
  EXPECT_EQ(back.data[0], std::complex<double>(0.0));
  EXPECT_EQ(back.data[2], std::complex<double>(3.0));
  EXPECT_THROW(unpack(cropped, 4, s), DimensionError);
  EXPECT_THROW(pack(s, 0), ArgumentError);
}

TEST(Features, EncodeDecodeRoundTrip) {
  const FeatureCodec codec{FeatureConfig{}};
  const Waveform w = noise(112, 1);
  const double scale = FeatureCodec::normalization(w);
  const StateVector v = codec.encode(w, scale);
  ASSERT_EQ(v.size(), codec.dim());
  const Waveform back = codec.decode(v, w.samples.size(), w.sample_rate, scale);
  ASSERT_EQ(back.samples.size(), w.samples.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < w.samples.size(); ++i) worst = std::max(worst, std::abs(back.samples[i] - w.samples[i]));
  EXPECT_LT(worst, 1e-9);
}

TEST(Features, ScaleIsPerUtterancePeak) {
  Waveform w;
  w.samples = {0.1, -0.8, 0.3};
  EXPECT_EQ(FeatureCodec::normalization(w), 0.8);
  w.samples = {0.0, 0.0};
  EXPECT_EQ(FeatureCodec::normalization(w), 1.0);
  const FeatureCodec codec{FeatureConfig{}};
  const Waveform x = noise(112, 2);
  Waveform y = x;
  for (double& s : y.samples) s *= 3.0;
  const StateVector a = codec.encode(x, FeatureCodec::normalization(x));
  const StateVector b = codec.encode(y, FeatureCodec::normalization(y));
  EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Features, PairsShareTheNoisyScale) {
  const FeatureCodec codec{FeatureConfig{}};
  CorpusItem item;
  item.clean = noise(112, 3);
  item.noisy = noise(112, 4);
  const TrainingPair p = codec.encode_pair(item);
  const double scale = FeatureCodec::normalization(item.noisy);
  EXPECT_EQ(p.clean, codec.encode(item.clean, scale));
  EXPECT_EQ(p.noisy, codec.encode(item.noisy, scale));
}
