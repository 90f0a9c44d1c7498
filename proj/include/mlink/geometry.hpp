#pragma once

#include <Eigen/Core>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mlink/errors.hpp"

namespace mlink {

using Point = Eigen::VectorXd;

/// Input data: N points of equal dimension, with optional ground-truth
/// labels (0 = outlier, >= 1 = structure id).
struct PointSet {
  std::vector<Point> points;
  std::vector<int> gt_labels;  // empty when absent

  int size() const { return static_cast<int>(points.size()); }
  int dim() const { return points.empty() ? 0 : static_cast<int>(points[0].size()); }
  bool has_gt() const { return !gt_labels.empty(); }
};

/// A fitted model. Canonical parameterizations:
///   line:     (n_x, n_y, c) with ||n|| = 1, n_y > 0 or (n_y = 0, n_x > 0),
///             zero set n . x = c
///   circle:   (c_x, c_y, radius), radius > 0
///   parabola: (a, b, c) of y = a x^2 + b x + c, a != 0
struct ModelInstance {
  std::string class_id;
  Eigen::VectorXd params;
};

/// One model class: complexity metadata plus fitting / residual procedures.
/// The clustering engine only sees this interface, so new classes (planes,
/// cylinders, homographies, ...) plug in without engine changes.
struct ModelClassSpec {
  std::string class_id;
  int ambient_dim = 2;     // r
  int manifold_dim = 1;    // d
  int param_count = 0;     // kappa
  int min_sample_size = 0;

  /// Exact model through a minimal sample; throws DegenerateSample.
  std::function<ModelInstance(const PointSet&, std::span<const int>)> fit_minimal;
  /// Least-squares model on >= min_sample_size points; throws DegenerateCluster.
  std::function<ModelInstance(const PointSet&, std::span<const int>)> fit_cluster;
  /// Orthogonal (geometric) distance from a point to the model's zero set.
  std::function<double(const ModelInstance&, const Point&)> residual;
};

// The three shipped 2D classes.
const ModelClassSpec& line_class();
const ModelClassSpec& circle_class();
const ModelClassSpec& parabola_class();

/// Resolve "line", "circle", "parabola" names; throws UnknownModelClass.
std::vector<ModelClassSpec> classes_from_ids(std::span<const std::string> ids);
const ModelClassSpec& find_class(std::span<const ModelClassSpec> classes,
                                 std::string_view class_id);

// Convenience overloads over plain point lists.
ModelInstance fit_minimal(const ModelClassSpec& cls, std::span<const Point> sample);
ModelInstance fit_cluster(const ModelClassSpec& cls, std::span<const Point> pts);

/// Residual dispatch for the shipped classes; custom classes go through
/// their spec's residual member.
double residual(const ModelInstance& model, const Point& p);

/// Real roots of c3 t^3 + c2 t^2 + c1 t + c0 = 0 (c3 != 0), Newton-polished.
/// Exposed for the parabola foot-point tests.
int solve_cubic_real(double c3, double c2, double c1, double c0, double roots[3]);

/// Gauss-Newton refinement on geometric residuals, used by the optional
/// post-clustering refinement pass. Line TLS is already the geometric
/// optimum and is returned unchanged. Falls back to `init` when the
/// iteration fails to improve the residual sum of squares.
ModelInstance refine_geometric(const ModelClassSpec& cls, const ModelInstance& init,
                               const PointSet& data, std::span<const int> members);

}  // namespace mlink
