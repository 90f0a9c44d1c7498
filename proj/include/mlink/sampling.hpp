#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mlink/geometry.hpp"

namespace mlink {

struct Hypothesis {
  ModelInstance model;
  std::vector<int> source_sample;  // distinct indices into the point set
};

struct SamplerConfig {
  std::vector<int> per_class_counts;  // m_k, aligned with the class list
  std::uint64_t seed = 0;
  bool localized = false;
  double locality_sigma = 0.1;   // bandwidth of the locality bias
  double validation_k = 3.0;     // band multiplier of the Gestalt test
  double validation_gamma = 1.5; // significance ratio threshold
  int max_redraws = 100;
};

/// Random minimal sampling of sum(m_k) hypotheses, m_k per class, each from
/// a distinct minimal sample. Deterministic given the seed; every hypothesis
/// draws from its own derived substream. With `localized`, points after a
/// uniform first draw are taken with probability proportional to
/// exp(-||x - x_first||^2 / locality_sigma^2).
std::vector<Hypothesis> sample_hypotheses(const PointSet& data,
                                          std::span<const ModelClassSpec> classes,
                                          const SamplerConfig& config);

/// Gestalt significance filter: keep h iff
///   inliers(h, eps) * k >= gamma * inliers(h, k * eps)
/// with a nonempty inlier set at eps. Uniform clutter grows linearly with
/// the band width and is rejected. Output is a subsequence of the input.
std::vector<Hypothesis> validate_hypotheses(const std::vector<Hypothesis>& hyps,
                                            const PointSet& data,
                                            std::span<const ModelClassSpec> classes,
                                            double epsilon,
                                            const SamplerConfig& config);

/// Order-sensitive hash of the pool (class ids + parameter bit patterns);
/// lets shared-pool comparisons assert pool identity.
std::uint64_t pool_hash(std::span<const Hypothesis> hyps);

}  // namespace mlink
