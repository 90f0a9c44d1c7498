#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <queue>
#include <span>
#include <unordered_map>
#include <vector>

#include "mlink/preference.hpp"
#include "mlink/selection.hpp"

namespace mlink {

struct MultilinkOptions {
  /// Minimum structure size; 0 means max over classes of min_sample_size + 2
  /// (a structure must over-determine at least one model).
  int min_structure_size = 0;
  /// Assert the partition invariant and iteration bound after every step.
  bool debug_checks = false;
  bool keep_merge_log = true;
  /// Geometric Gauss-Newton refinement of the final per-structure models.
  bool refine_final = false;
};

struct StructureResult {
  std::vector<int> members;  // sorted point indices
  std::string class_id;
  ModelInstance model;
  double gric = 0.0;
};

struct MergeLogEntry {
  int step = 0;
  int cluster_u = 0, cluster_v = 0;
  int size_u = 0, size_v = 0;
  double distance = 0.0;
  bool used_fallback = false;  // small-cluster shared-hypothesis criterion
  bool accepted = false;
  MergeVerdict verdict;  // empty scores on the fallback path
};

struct Segmentation {
  int n_points = 0;
  std::vector<StructureResult> structures;
  std::vector<int> outlier_indices;  // sorted
  std::vector<MergeLogEntry> merge_log;
};

/// Single-linkage agglomeration state: live clusters, the pairwise distance
/// structure with extract-min, and forbidden pairs (distance forced to
/// +infinity). Cluster ids are creation-ordered: 0..n-1 are the singletons,
/// merged clusters get the next id.
class LinkageState {
 public:
  struct Proposal {
    int a = 0, b = 0;
    double distance = 0.0;
  };

  LinkageState(int n_points, const std::function<double(int, int)>& point_distance);

  /// Lowest-distance live, non-forbidden pair; nullopt when exhausted.
  std::optional<Proposal> extract_min();

  /// Merge a and b into a new cluster (returned id). For every live z the
  /// new distance is min(d(a,z), d(b,z)); the pair (w,z) is forbidden only
  /// when both parent pairs were.
  int merge(int a, int b);

  void forbid(int a, int b);

  bool alive(int id) const { return id < static_cast<int>(alive_.size()) && alive_[id]; }
  std::span<const int> live_ids() const { return live_; }
  /// Stored distance of a live pair; +infinity when forbidden.
  double pair_distance(int a, int b) const;
  bool is_forbidden(int a, int b) const;

 private:
  static std::uint64_t key(int a, int b);
  std::vector<char> alive_;
  std::vector<int> live_;  // sorted ascending
  std::unordered_map<std::uint64_t, double> dist_;
  using Entry = std::tuple<double, int, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> heap_;
  int next_id_ = 0;
};

/// MultiLink: preference-space single-linkage agglomeration where every
/// proposed merge of fittable clusters is decided by on-the-fly fits of all
/// classes and the GRIC comparison; pairs with a cluster below every class's
/// minimal sample size fall back to the shared-hypothesis criterion.
Segmentation multilink(const PointSet& data,
                       std::span<const ModelClassSpec> classes,
                       const PreferenceMatrix& prefs,
                       std::span<const Hypothesis> hyps,
                       const GricConfig& gric,
                       const MultilinkOptions& opts = {});

/// T-linkage baseline: cluster preference vectors aggregated by element-wise
/// minimum, merging the closest pair under Tanimoto distance while it is
/// below 1. Structures are labeled with their best-supporting sampled
/// hypothesis.
Segmentation tlinkage_baseline(const PointSet& data,
                               const PreferenceMatrix& prefs,
                               std::span<const Hypothesis> hyps,
                               const MultilinkOptions& opts = {});

/// Default minimum structure size for a class list.
int default_min_structure_size(std::span<const ModelClassSpec> classes);

}  // namespace mlink
