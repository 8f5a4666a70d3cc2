#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace ctflow {

/// Flattened real feature vector: clean/noisy spectrograms, path samples,
/// crude estimates. Complex bins are stored as interleaved (re, im) pairs.
using StateVector = Eigen::VectorXd;

inline constexpr double kDefaultTDelta = 0.03;
inline constexpr double kDefaultSigma = 0.5;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand lengths disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of the operation (e.g. t < t_delta).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or argument value.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// A NaN or infinity appeared during evaluation.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Malformed or missing data on disk.
class DataError : public Error {
 public:
  using Error::Error;
};

void require_same_length(const StateVector& a, const StateVector& b, const char* what);
void require_finite(const StateVector& v, const std::string& what);

/// Seedable random stream. Each logical consumer (training epoch, utterance,
/// validation pass) derives its own stream so results do not depend on
/// evaluation order.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  /// Stream for (seed, a, b); distinct tuples give unrelated streams.
  static Rng derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

  double normal();
  double uniform(double lo, double hi);
  StateVector normal_vector(Eigen::Index n);
  std::uint64_t next_u64() { return engine_(); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace ctflow
