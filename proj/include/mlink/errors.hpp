#pragma once

#include <stdexcept>

namespace mlink {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Minimal sample violates the general-position requirement of its class.
struct DegenerateSample : Error {
  using Error::Error;
};

/// Cluster configuration is rank-deficient for the requested class; the
/// class is unavailable for this cluster.
struct DegenerateCluster : Error {
  using Error::Error;
};

struct InsufficientData : Error {
  using Error::Error;
};

/// Tanimoto similarity is undefined when both vectors are all-zero.
struct BothZero : Error {
  using Error::Error;
};

/// No model class could be fitted on U, V and their union.
struct NoFittableClass : Error {
  using Error::Error;
};

struct EmptyHypothesisPool : Error {
  using Error::Error;
};

struct MissingGroundTruth : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct UnknownModelClass : Error {
  using Error::Error;
};

}  // namespace mlink
