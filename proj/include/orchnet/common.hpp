#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace orchnet {

using Index = Eigen::Index;
using Rng = std::mt19937_64;

/// Dense real vector of K dimensions; the unit of retrieval.
using Descriptor = Eigen::VectorXd;

template <typename Scalar>
using FeatureMapT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Channels x support positions.
using FeatureMap = FeatureMapT<double>;

// Error categories map onto the CLI exit codes (1 usage, 2 data, 3 numeric).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mixes a base seed with a stream id so that independent consumers draw
/// from decorrelated generators (splitmix64 finalizer).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace orchnet
