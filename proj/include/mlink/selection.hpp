#pragma once

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mlink/geometry.hpp"

namespace mlink {

struct GricConfig {
  double lambda1 = 1.0;  // dimension-penalty weight
  double lambda2 = 2.0;  // parameter-penalty weight
  double sigma = 1.0;    // residual standard-deviation estimate
};

/// Robust model-selection cost of a cluster under a fitted model:
///   sum_i rho(err_i / sigma)^2 + lambda1 * d * |U| + lambda2 * kappa
/// with rho(x) = min(x, r - d) bounding the loss at outliers.
double gric_score(const PointSet& data, std::span<const int> members,
                  const ModelClassSpec& cls, const ModelInstance& model,
                  const GricConfig& config);

double gric_score(std::span<const Point> pts, const ModelClassSpec& cls,
                  const ModelInstance& model, const GricConfig& config);

/// Outcome of fitting one class on one cluster; `ok` is false when the fit
/// degenerated and the class is unavailable for the cluster.
struct ClassFit {
  bool ok = false;
  ModelInstance model;
  double gric = std::numeric_limits<double>::infinity();
};

ClassFit fit_and_score(const PointSet& data, std::span<const int> members,
                       const ModelClassSpec& cls, const GricConfig& config);

struct ClassScores {
  std::string class_id;
  bool available = false;  // all three fits succeeded
  double g_u = std::numeric_limits<double>::infinity();
  double g_v = std::numeric_limits<double>::infinity();
  double g_union = std::numeric_limits<double>::infinity();
};

struct MergeVerdict {
  bool accept = false;
  std::string winning_class;  // set iff accept
  std::optional<ModelInstance> union_model;
  double union_gric = std::numeric_limits<double>::infinity();
  std::vector<ClassScores> scores;  // per compared class, for audit
};

/// Pure decision from precomputed per-class fits of U, V and their union:
/// accept iff some class makes the union's cost no worse than every class's
/// separate-fit cost. Classes unavailable on any of the three sets are
/// excluded from both sides. Never throws; `accept` stays false when no
/// class is available.
MergeVerdict decide_merge(std::span<const ClassFit> fits_u,
                          std::span<const ClassFit> fits_v,
                          std::span<const ClassFit> fits_union,
                          std::span<const ModelClassSpec> classes);

/// Fits every class on U, V and U union V on the fly and applies the merge
/// test. Throws NoFittableClass when no class fits all three sets.
MergeVerdict evaluate_merge(const PointSet& data, std::span<const int> u,
                            std::span<const int> v,
                            std::span<const ModelClassSpec> classes,
                            const GricConfig& config);

}  // namespace mlink
