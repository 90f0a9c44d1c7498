#include "mlink/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mlink {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<int> merge_sorted(std::span<const int> a, std::span<const int> b) {
  std::vector<int> out(a.size() + b.size());
  std::merge(a.begin(), a.end(), b.begin(), b.end(), out.begin());
  return out;
}

std::vector<int> intersect_sorted(std::span<const int> a, std::span<const int> b) {
  std::vector<int> out;
  out.reserve(std::min(a.size(), b.size()));
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                        std::back_inserter(out));
  return out;
}
}  // namespace

// ---------------------------------------------------------------------------
// LinkageState
// ---------------------------------------------------------------------------

std::uint64_t LinkageState::key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

LinkageState::LinkageState(int n_points,
                           const std::function<double(int, int)>& point_distance) {
  alive_.assign(n_points, 1);
  live_.resize(n_points);
  for (int i = 0; i < n_points; ++i) live_[i] = i;
  next_id_ = n_points;
  std::vector<Entry> entries;
  entries.reserve(static_cast<std::size_t>(n_points) * (n_points - 1) / 2);
  dist_.reserve(entries.capacity() * 2);
  for (int i = 0; i < n_points; ++i)
    for (int j = i + 1; j < n_points; ++j) {
      const double d = point_distance(i, j);
      dist_.emplace(key(i, j), d);
      entries.emplace_back(d, i, j);
    }
  heap_ = std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>>(
      std::greater<Entry>(), std::move(entries));
}

std::optional<LinkageState::Proposal> LinkageState::extract_min() {
  while (!heap_.empty()) {
    const auto [d, a, b] = heap_.top();
    heap_.pop();
    if (!alive(a) || !alive(b)) continue;
    const auto it = dist_.find(key(a, b));
    if (it == dist_.end() || it->second != d) continue;  // forbidden since push
    return Proposal{a, b, d};
  }
  return std::nullopt;
}

int LinkageState::merge(int a, int b) {
  const int w = next_id_++;
  alive_[a] = alive_[b] = 0;
  alive_.push_back(1);
  live_.erase(std::lower_bound(live_.begin(), live_.end(), std::max(a, b)));
  live_.erase(std::lower_bound(live_.begin(), live_.end(), std::min(a, b)));
  for (int z : live_) {
    const auto ia = dist_.find(key(a, z));
    const auto ib = dist_.find(key(b, z));
    const double da = ia == dist_.end() ? kInf : ia->second;
    const double db = ib == dist_.end() ? kInf : ib->second;
    if (ia != dist_.end()) dist_.erase(ia);
    if (ib != dist_.end()) dist_.erase(ib);
    const double d = std::min(da, db);
    dist_.emplace(key(w, z), d);
    if (d < kInf) heap_.emplace(d, z, w);
  }
  dist_.erase(key(a, b));
  live_.push_back(w);  // w exceeds every existing id
  return w;
}

void LinkageState::forbid(int a, int b) { dist_[key(a, b)] = kInf; }

double LinkageState::pair_distance(int a, int b) const {
  const auto it = dist_.find(key(a, b));
  return it == dist_.end() ? kInf : it->second;
}

bool LinkageState::is_forbidden(int a, int b) const {
  return pair_distance(a, b) == kInf;
}

// ---------------------------------------------------------------------------
// MultiLink
// ---------------------------------------------------------------------------

int default_min_structure_size(std::span<const ModelClassSpec> classes) {
  int mss = 0;
  for (const auto& c : classes) mss = std::max(mss, c.min_sample_size);
  return mss + 2;
}

namespace {

struct EngineCluster {
  std::vector<int> members;  // sorted point indices
  std::vector<int> support;  // sorted hypothesis ids preferred by all members
  std::vector<std::optional<ClassFit>> fits;
  int winner = -1;  // class index of the last accepted merge verdict
  int creation_step = 0;
};

void check_partition(const std::vector<EngineCluster>& clusters,
                     const LinkageState& state, int n_points) {
  std::vector<char> seen(n_points, 0);
  for (int id : state.live_ids())
    for (int i : clusters[id].members) {
      if (seen[i]) throw Error("partition invariant violated: duplicate point");
      seen[i] = 1;
    }
  for (int i = 0; i < n_points; ++i)
    if (!seen[i]) throw Error("partition invariant violated: missing point");
}

struct FinalPick {
  int class_index = -1;
  ModelInstance model;
  double gric = 0.0;
};

std::optional<FinalPick> pick_structure_model(
    const PointSet& data, EngineCluster& cl,
    std::span<const ModelClassSpec> classes, const GricConfig& gric) {
  if (cl.winner >= 0 && cl.fits[cl.winner] && cl.fits[cl.winner]->ok)
    return FinalPick{cl.winner, cl.fits[cl.winner]->model,
                     cl.fits[cl.winner]->gric};
  // never through an accepted GRIC merge (grown via the fallback only):
  // pick the class minimizing the on-the-fly cost
  int best = -1;
  for (std::size_t k = 0; k < classes.size(); ++k) {
    if (static_cast<int>(cl.members.size()) < classes[k].min_sample_size) continue;
    if (!cl.fits[k]) cl.fits[k] = fit_and_score(data, cl.members, classes[k], gric);
    if (!cl.fits[k]->ok) continue;
    if (best < 0 || cl.fits[k]->gric < cl.fits[best]->gric) best = static_cast<int>(k);
  }
  if (best < 0) return std::nullopt;
  return FinalPick{best, cl.fits[best]->model, cl.fits[best]->gric};
}

}  // namespace

Segmentation multilink(const PointSet& data,
                       std::span<const ModelClassSpec> classes,
                       const PreferenceMatrix& prefs,
                       std::span<const Hypothesis> hyps,
                       const GricConfig& gric,
                       const MultilinkOptions& opts) {
  if (classes.empty()) throw ConfigError("multilink: no model classes");
  if (prefs.cols == 0 || hyps.empty())
    throw EmptyHypothesisPool("multilink: hypothesis pool is empty");
  if (prefs.cols != static_cast<int>(hyps.size()) || prefs.rows != data.size())
    throw ConfigError("multilink: preference matrix does not match data/hypotheses");

  const int n = data.size();
  const int min_struct = opts.min_structure_size > 0
                             ? opts.min_structure_size
                             : default_min_structure_size(classes);
  int min_mss = std::numeric_limits<int>::max();
  for (const auto& c : classes) min_mss = std::min(min_mss, c.min_sample_size);

  std::vector<EngineCluster> clusters(n);
  for (int i = 0; i < n; ++i) {
    clusters[i].members = {i};
    const auto cols = prefs.row_cols(i);
    clusters[i].support.assign(cols.begin(), cols.end());
    clusters[i].fits.resize(classes.size());
  }

  LinkageState state(n, [&prefs](int i, int j) {
    return tanimoto_row_distance(prefs, i, j);
  });

  auto get_fit = [&](EngineCluster& cl, std::size_t k) -> const ClassFit& {
    if (!cl.fits[k])
      cl.fits[k] = fit_and_score(data, cl.members, classes[k], gric);
    return *cl.fits[k];
  };

  Segmentation seg;
  seg.n_points = n;
  const std::int64_t max_steps =
      std::max<std::int64_t>(4, static_cast<std::int64_t>(n) * n);
  std::int64_t step = 0;

  while (auto prop = state.extract_min()) {
    ++step;
    if (opts.debug_checks && step > max_steps)
      throw Error("multilink: iteration bound exceeded");

    EngineCluster& cu = clusters[prop->a];
    EngineCluster& cv = clusters[prop->b];
    const int su = static_cast<int>(cu.members.size());
    const int sv = static_cast<int>(cv.members.size());
    const bool fallback = std::min(su, sv) < min_mss;

    bool accepted = false;
    MergeVerdict verdict;
    std::vector<int> union_members;
    std::vector<std::optional<ClassFit>> union_fits;

    if (fallback) {
      // too small for every class: merge iff one sampled hypothesis explains
      // all the points of both clusters
      accepted = !intersect_sorted(cu.support, cv.support).empty();
    } else {
      union_members = merge_sorted(cu.members, cv.members);
      std::vector<ClassFit> fu(classes.size()), fv(classes.size()),
          fuv(classes.size());
      union_fits.resize(classes.size());
      for (std::size_t k = 0; k < classes.size(); ++k) {
        if (std::min(su, sv) < classes[k].min_sample_size) continue;
        fu[k] = get_fit(cu, k);
        fv[k] = get_fit(cv, k);
        fuv[k] = fit_and_score(data, union_members, classes[k], gric);
        union_fits[k] = fuv[k];
      }
      verdict = decide_merge(fu, fv, fuv, classes);
      accepted = verdict.accept;
    }

    if (opts.keep_merge_log) {
      MergeLogEntry e;
      e.step = static_cast<int>(step);
      e.cluster_u = prop->a;
      e.cluster_v = prop->b;
      e.size_u = su;
      e.size_v = sv;
      e.distance = prop->distance;
      e.used_fallback = fallback;
      e.accepted = accepted;
      e.verdict = verdict;
      seg.merge_log.push_back(std::move(e));
    }

    if (accepted) {
      const int w = state.merge(prop->a, prop->b);
      EngineCluster wc;
      wc.members = fallback ? merge_sorted(cu.members, cv.members)
                            : std::move(union_members);
      wc.support = intersect_sorted(cu.support, cv.support);
      wc.creation_step = static_cast<int>(step);
      if (fallback) {
        wc.fits.resize(classes.size());
      } else {
        wc.fits = std::move(union_fits);
        for (std::size_t k = 0; k < classes.size(); ++k)
          if (classes[k].class_id == verdict.winning_class)
            wc.winner = static_cast<int>(k);
      }
      clusters.push_back(std::move(wc));
      (void)w;  // w == clusters.size() - 1 by construction
    } else {
      state.forbid(prop->a, prop->b);
    }

    if (opts.debug_checks) check_partition(clusters, state, n);
  }

  // live clusters large enough become structures, the rest are outliers
  for (int id : state.live_ids()) {
    EngineCluster& cl = clusters[id];
    if (static_cast<int>(cl.members.size()) < min_struct) {
      seg.outlier_indices.insert(seg.outlier_indices.end(), cl.members.begin(),
                                 cl.members.end());
      continue;
    }
    auto pick = pick_structure_model(data, cl, classes, gric);
    if (!pick) {
      seg.outlier_indices.insert(seg.outlier_indices.end(), cl.members.begin(),
                                 cl.members.end());
      continue;
    }
    StructureResult s;
    s.members = cl.members;
    const auto& cls = classes[pick->class_index];
    s.class_id = cls.class_id;
    s.model = pick->model;
    s.gric = pick->gric;
    if (opts.refine_final) {
      s.model = refine_geometric(cls, s.model, data, s.members);
      s.gric = gric_score(data, s.members, cls, s.model, gric);
    }
    seg.structures.push_back(std::move(s));
  }
  std::sort(seg.outlier_indices.begin(), seg.outlier_indices.end());
  return seg;
}

// ---------------------------------------------------------------------------
// T-linkage baseline
// ---------------------------------------------------------------------------

namespace {

struct TCluster {
  std::vector<int> members;
  std::vector<std::pair<int, double>> rep;  // sparse min-aggregated preferences
  double norm_sq = 0.0;
};

double t_distance(const TCluster& a, const TCluster& b) {
  if (a.norm_sq == 0.0 && b.norm_sq == 0.0) return 1.0;
  double dot = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.rep.size() && j < b.rep.size()) {
    if (a.rep[i].first < b.rep[j].first)
      ++i;
    else if (a.rep[i].first > b.rep[j].first)
      ++j;
    else {
      dot += a.rep[i].second * b.rep[j].second;
      ++i;
      ++j;
    }
  }
  return 1.0 - dot / (a.norm_sq + b.norm_sq - dot);
}

TCluster t_merge(const TCluster& a, const TCluster& b) {
  TCluster w;
  w.members = merge_sorted(a.members, b.members);
  w.rep.reserve(std::min(a.rep.size(), b.rep.size()));
  std::size_t i = 0, j = 0;
  while (i < a.rep.size() && j < b.rep.size()) {
    if (a.rep[i].first < b.rep[j].first)
      ++i;
    else if (a.rep[i].first > b.rep[j].first)
      ++j;
    else {
      const double v = std::min(a.rep[i].second, b.rep[j].second);
      w.rep.emplace_back(a.rep[i].first, v);
      w.norm_sq += v * v;
      ++i;
      ++j;
    }
  }
  return w;
}

}  // namespace

Segmentation tlinkage_baseline(const PointSet& data,
                               const PreferenceMatrix& prefs,
                               std::span<const Hypothesis> hyps,
                               const MultilinkOptions& opts) {
  if (prefs.cols == 0 || hyps.empty())
    throw EmptyHypothesisPool("tlinkage: hypothesis pool is empty");
  if (prefs.cols != static_cast<int>(hyps.size()) || prefs.rows != data.size())
    throw ConfigError("tlinkage: preference matrix does not match data/hypotheses");

  int min_struct = opts.min_structure_size;
  std::vector<std::string> ids;
  for (const auto& h : hyps)
    if (std::find(ids.begin(), ids.end(), h.model.class_id) == ids.end())
      ids.push_back(h.model.class_id);
  std::vector<ModelClassSpec> classes;
  for (const auto& id : ids) {
    try {
      auto got = classes_from_ids({&id, 1});
      classes.insert(classes.end(), got.begin(), got.end());
    } catch (const UnknownModelClass&) {
      // hypotheses of non-shipped classes still cluster; they just lack
      // complexity metadata for the default structure-size rule
    }
  }
  if (min_struct <= 0)
    min_struct = classes.empty() ? 4 : default_min_structure_size(classes);

  const int n = data.size();
  std::vector<TCluster> clusters(n);
  std::vector<char> alive(n, 1);
  for (int i = 0; i < n; ++i) {
    clusters[i].members = {i};
    const auto cols = prefs.row_cols(i);
    const auto vals = prefs.row_vals(i);
    clusters[i].rep.reserve(cols.size());
    for (std::size_t k = 0; k < cols.size(); ++k)
      clusters[i].rep.emplace_back(cols[k], vals[k]);
    clusters[i].norm_sq = prefs.row_norm_sq[i];
  }

  using Entry = std::tuple<double, int, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> heap;
  {
    std::vector<Entry> entries;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        const double d = t_distance(clusters[i], clusters[j]);
        if (d < 1.0) entries.emplace_back(d, i, j);
      }
    heap = std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>>(
        std::greater<Entry>(), std::move(entries));
  }

  Segmentation seg;
  seg.n_points = n;
  int step = 0;
  while (!heap.empty()) {
    const auto [d, a, b] = heap.top();
    heap.pop();
    if (!alive[a] || !alive[b]) continue;
    if (d >= 1.0) break;
    ++step;
    alive[a] = alive[b] = 0;
    clusters.push_back(t_merge(clusters[a], clusters[b]));
    alive.push_back(1);
    const int w = static_cast<int>(clusters.size()) - 1;
    for (int z = 0; z < w; ++z) {
      if (!alive[z]) continue;
      const double dz = t_distance(clusters[w], clusters[z]);
      if (dz < 1.0) heap.emplace(dz, z, w);
    }
    if (opts.keep_merge_log) {
      MergeLogEntry e;
      e.step = step;
      e.cluster_u = a;
      e.cluster_v = b;
      e.size_u = static_cast<int>(clusters[a].members.size());
      e.size_v = static_cast<int>(clusters[b].members.size());
      e.distance = d;
      e.used_fallback = true;
      e.accepted = true;
      seg.merge_log.push_back(std::move(e));
    }
  }

  const GricConfig gric{1.0, 2.0, prefs.epsilon > 0.0 ? prefs.epsilon / 2.0 : 1.0};
  for (std::size_t id = 0; id < clusters.size(); ++id) {
    if (!alive[id]) continue;
    TCluster& cl = clusters[id];
    const bool big = static_cast<int>(cl.members.size()) >= min_struct;
    if (!big || cl.rep.empty()) {
      seg.outlier_indices.insert(seg.outlier_indices.end(), cl.members.begin(),
                                 cl.members.end());
      continue;
    }
    // best-supporting hypothesis: max aggregated preference, lowest id on ties
    std::size_t best = 0;
    for (std::size_t k = 1; k < cl.rep.size(); ++k)
      if (cl.rep[k].second > cl.rep[best].second) best = k;
    const Hypothesis& h = hyps[cl.rep[best].first];
    StructureResult s;
    s.members = cl.members;
    s.class_id = h.model.class_id;
    s.model = h.model;
    try {
      s.gric = gric_score(data, s.members, find_class(classes, s.class_id),
                          s.model, gric);
    } catch (const UnknownModelClass&) {
      s.gric = 0.0;
    }
    seg.structures.push_back(std::move(s));
  }
  std::sort(seg.outlier_indices.begin(), seg.outlier_indices.end());
  return seg;
}

}  // namespace mlink
