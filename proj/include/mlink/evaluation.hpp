#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mlink/clustering.hpp"

namespace mlink {

struct StructureScore {
  int pred_index = -1;
  int matched_gt_label = 0;  // 0 when unmatched
  int correct = 0;           // points of the matched gt structure inside
  double precision = 0.0;
  double recall = 0.0;
};

struct EvalReport {
  double me = 0.0;  // misclassified fraction under the optimal matching
  int n_points = 0;
  int misassigned = 0;
  std::vector<StructureScore> per_structure;
  /// (predicted structure index, gt label) pairs of the optimal matching,
  /// restricted to pairs with nonzero overlap.
  std::vector<std::pair<int, int>> assignment;
  double hyp_time_s = 0.0;
  double cluster_time_s = 0.0;
};

/// Minimum-error one-to-one matching between predicted structures and
/// ground-truth structures (optimal assignment on the confusion matrix).
/// Predicted outliers matching gt outliers count correct; every other
/// disagreement is an error.
EvalReport misclassification_error(const Segmentation& pred,
                                   std::span<const int> gt_labels);

/// Hungarian solver used by the matcher; exposed for the oracle tests.
/// Returns, for each row, the matched column (or -1), maximizing the sum of
/// profit[row][col].
std::vector<int> max_profit_assignment(
    const std::vector<std::vector<std::int64_t>>& profit);

// ---------------------------------------------------------------------------
// synthetic scenes
// ---------------------------------------------------------------------------

struct SceneStructure {
  std::string class_id;
  std::vector<double> params;  // canonical model parameters
  double t_lo = 0.0, t_hi = 1.0;  // parameter extent (line: arclength along the
                                  // direction from the anchor point c*n;
                                  // circle: angle; parabola: abscissa)
  int count = 0;
  double noise_sigma = 0.0;  // orthogonal Gaussian perturbation
};

struct SceneSpec {
  std::vector<SceneStructure> structures;
  int outlier_count = 0;
  std::array<double, 4> box{0.0, 0.0, 1.0, 1.0};  // xmin, ymin, xmax, ymax
  std::uint64_t seed = 0;
};

/// Points sampled uniformly in parameter over each structure's extent,
/// perturbed orthogonally, plus uniform outliers in the box. Labels:
/// 0 = outlier, k = k-th structure (1-based). Deterministic given the seed.
PointSet generate_scene(const SceneSpec& spec);

/// Shipped presets: "star5", "circles4", "mixed_conics".
SceneSpec preset_scene(const std::string& name, std::uint64_t seed);
SceneSpec star5_scene(std::uint64_t seed, double noise_sigma = 0.0075,
                      double outlier_rate = 0.5, int points_per_line = 50);
SceneSpec circles4_scene(std::uint64_t seed, double noise_sigma = 0.0075,
                         double outlier_rate = 0.5, int points_per_circle = 50);
SceneSpec mixed_conics_scene(std::uint64_t seed, double noise_sigma = 0.01,
                             double outlier_rate = 0.3,
                             int points_per_structure = 50);

// ---------------------------------------------------------------------------
// pipeline
// ---------------------------------------------------------------------------

struct PipelineConfig {
  std::vector<std::string> class_ids{"line"};
  double epsilon = 0.02;
  /// When set, epsilon is chosen by the silhouette search on this interval.
  std::optional<std::pair<double, double>> epsilon_auto;
  int epsilon_budget = 8;
  int hyps_per_class = 500;
  std::uint64_t seed = 0;
  bool validate = true;
  double validation_k = 3.0;
  double validation_gamma = 1.5;
  bool localized = false;
  double locality_sigma = 0.1;
  double lambda1 = 1.0;
  double lambda2 = 2.0;
  double sigma = 0.0;  // 0 = epsilon / 2
  int min_structure_size = 0;
  std::string algorithm = "multilink";  // or "tlinkage"
  bool refine_final = false;
  bool keep_merge_log = false;
};

struct PipelineResult {
  Segmentation seg;
  double epsilon = 0.0;  // the threshold actually used
  bool epsilon_warning = false;
  int pool_raw = 0;
  int pool_validated = 0;
  std::uint64_t pool_hash = 0;
  double hyp_time_s = 0.0;
  double cluster_time_s = 0.0;
};

PipelineResult run_pipeline(const PointSet& data, const PipelineConfig& config);

// ---------------------------------------------------------------------------
// epsilon estimation
// ---------------------------------------------------------------------------

struct EpsilonGridPoint {
  double epsilon = 0.0;
  double silhouette = 0.0;
  int n_structures = 0;
};

struct EpsilonEstimate {
  double epsilon = 0.0;
  bool no_valid_segmentation = false;  // every grid value gave < 2 structures
  std::vector<EpsilonGridPoint> grid;
};

/// Mean silhouette of the segmentation over Tanimoto distances between
/// preference rows; outliers are excluded. Requires >= 2 structures.
double silhouette_score(const Segmentation& seg, const PreferenceMatrix& prefs);

/// Runs the full pipeline at `budget` log-spaced thresholds in [lo, hi] and
/// returns the silhouette-maximizing one. When every threshold yields fewer
/// than two structures, falls back to the threshold with the most structures
/// and sets the warning flag.
EpsilonEstimate estimate_epsilon(const PointSet& data, const PipelineConfig& config,
                                 double eps_lo, double eps_hi, int budget);

// ---------------------------------------------------------------------------
// sweeps
// ---------------------------------------------------------------------------

enum class SweepVariable { EpsilonFactor, OutlierRate, HypothesisCount };

struct SweepConfig {
  std::string preset = "star5";
  SweepVariable variable = SweepVariable::EpsilonFactor;
  std::vector<double> grid;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> algorithms{"multilink", "tlinkage"};
  PipelineConfig base;
  /// epsilon = epsilon_factor * scene noise sigma for the non-epsilon sweeps
  double epsilon_factor = 4.0;
};

struct SweepRun {
  double setting = 0.0;
  std::uint64_t seed = 0;
  std::string algorithm;
  double me = 0.0;
  double hyp_time_s = 0.0;
  double cluster_time_s = 0.0;
  std::uint64_t pool_hash = 0;
  std::string error;  // empty on success
};

struct SweepCell {
  double setting = 0.0;
  std::string algorithm;
  double median_me = 0.0, iqr_me = 0.0, min_me = 0.0, max_me = 0.0;
  double mean_hyp_time_s = 0.0, mean_cluster_time_s = 0.0;
  int n_ok = 0, n_failed = 0;
};

struct SweepResult {
  std::vector<SweepRun> runs;    // one row per (setting, seed, algorithm)
  std::vector<SweepCell> cells;  // aggregates per (setting, algorithm)
};

/// Runs every (setting, seed) cell; algorithms within a cell share the same
/// validated pool. Per-run failures are recorded, never propagated.
SweepResult sweep(const SweepConfig& config);

double median_of(std::vector<double> v);
double iqr_of(std::vector<double> v);

}  // namespace mlink
