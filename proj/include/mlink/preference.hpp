#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "mlink/sampling.hpp"

namespace mlink {

/// N x M preference matrix, stored sparse by row (CSR). Entry (i, j) is
/// exp(-e^2 / sigma^2) when e = residual(h_j, x_i) <= eps_j and 0 otherwise,
/// so the stored support of row i is exactly the set of hypotheses whose
/// band contains point i.
struct PreferenceMatrix {
  int rows = 0;
  int cols = 0;
  double epsilon = 0.0;       // uniform threshold (0 when per-class in use)
  double phi_sigma_sq = 0.0;  // Gaussian bandwidth at the uniform threshold
  std::vector<std::int64_t> row_ptr;  // rows + 1
  std::vector<int> col;               // sorted within each row
  std::vector<double> val;
  std::vector<double> row_norm_sq;
  std::vector<double> col_epsilon;  // per-hypothesis threshold (always filled)

  std::span<const int> row_cols(int i) const {
    return {col.data() + row_ptr[i], static_cast<std::size_t>(row_ptr[i + 1] - row_ptr[i])};
  }
  std::span<const double> row_vals(int i) const {
    return {val.data() + row_ptr[i], static_cast<std::size_t>(row_ptr[i + 1] - row_ptr[i])};
  }
  int row_nnz(int i) const { return static_cast<int>(row_ptr[i + 1] - row_ptr[i]); }
};

/// Gaussian bandwidth sigma^2 = -eps^2 / log(0.05): the preference decays
/// to exactly 0.05 at the inlier threshold.
double preference_sigma_sq(double epsilon);

PreferenceMatrix build_preferences(const PointSet& data,
                                   std::span<const Hypothesis> hyps,
                                   std::span<const ModelClassSpec> classes,
                                   double epsilon);

/// Per-class thresholds, aligned with `classes`. The uniform overload is the
/// default used everywhere in the shipped pipeline.
PreferenceMatrix build_preferences(const PointSet& data,
                                   std::span<const Hypothesis> hyps,
                                   std::span<const ModelClassSpec> classes,
                                   std::span<const double> per_class_epsilon);

/// Tanimoto distance 1 - <a,b> / (|a|^2 + |b|^2 - <a,b>) between dense
/// preference vectors; throws BothZero when both are all-zero.
double tanimoto_distance(std::span<const double> a, std::span<const double> b);

/// Row-pair distance with the engine convention: two all-zero rows are
/// maximally dissimilar (distance 1).
double tanimoto_row_distance(const PreferenceMatrix& m, int i, int j);

/// Debug dump: one "row,col,value" triplet per line.
void write_preference_triplets_csv(const PreferenceMatrix& m, std::ostream& os);

}  // namespace mlink
