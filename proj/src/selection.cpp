#include "mlink/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mlink {

double gric_score(const PointSet& data, std::span<const int> members,
                  const ModelClassSpec& cls, const ModelInstance& model,
                  const GricConfig& config) {
  const double cap = static_cast<double>(cls.ambient_dim - cls.manifold_dim);
  double fidelity = 0.0;
  for (int i : members) {
    const double rho =
        std::min(cls.residual(model, data.points[i]) / config.sigma, cap);
    fidelity += rho * rho;
  }
  return fidelity + config.lambda1 * cls.manifold_dim * static_cast<double>(members.size()) +
         config.lambda2 * cls.param_count;
}

double gric_score(std::span<const Point> pts, const ModelClassSpec& cls,
                  const ModelInstance& model, const GricConfig& config) {
  PointSet ps;
  ps.points.assign(pts.begin(), pts.end());
  std::vector<int> idx(pts.size());
  std::iota(idx.begin(), idx.end(), 0);
  return gric_score(ps, idx, cls, model, config);
}

ClassFit fit_and_score(const PointSet& data, std::span<const int> members,
                       const ModelClassSpec& cls, const GricConfig& config) {
  ClassFit out;
  try {
    out.model = cls.fit_cluster(data, members);
    out.gric = gric_score(data, members, cls, out.model, config);
    out.ok = true;
  } catch (const Error&) {
    out.ok = false;
  }
  return out;
}

MergeVerdict decide_merge(std::span<const ClassFit> fits_u,
                          std::span<const ClassFit> fits_v,
                          std::span<const ClassFit> fits_union,
                          std::span<const ModelClassSpec> classes) {
  MergeVerdict verdict;
  verdict.scores.reserve(classes.size());

  double best_separate = std::numeric_limits<double>::infinity();
  int best_union = -1;
  for (std::size_t k = 0; k < classes.size(); ++k) {
    ClassScores s;
    s.class_id = classes[k].class_id;
    s.available = fits_u[k].ok && fits_v[k].ok && fits_union[k].ok;
    if (s.available) {
      s.g_u = fits_u[k].gric;
      s.g_v = fits_v[k].gric;
      s.g_union = fits_union[k].gric;
      best_separate = std::min(best_separate, s.g_u + s.g_v);
      if (best_union < 0 || s.g_union < fits_union[best_union].gric ||
          (s.g_union == fits_union[best_union].gric &&
           classes[k].param_count < classes[best_union].param_count))
        best_union = static_cast<int>(k);
    }
    verdict.scores.push_back(std::move(s));
  }

  if (best_union < 0) return verdict;  // no class available; caller inhibits

  // Existence of a class whose union cost is <= every separate-fit cost is
  // equivalent to comparing the two minima; ties go to the merge.
  if (fits_union[best_union].gric <= best_separate) {
    verdict.accept = true;
    verdict.winning_class = classes[best_union].class_id;
    verdict.union_model = fits_union[best_union].model;
    verdict.union_gric = fits_union[best_union].gric;
  }
  return verdict;
}

MergeVerdict evaluate_merge(const PointSet& data, std::span<const int> u,
                            std::span<const int> v,
                            std::span<const ModelClassSpec> classes,
                            const GricConfig& config) {
  std::vector<int> both(u.size() + v.size());
  std::merge(u.begin(), u.end(), v.begin(), v.end(), both.begin());

  std::vector<ClassFit> fu, fv, fuv;
  fu.reserve(classes.size());
  fv.reserve(classes.size());
  fuv.reserve(classes.size());
  for (const auto& cls : classes) {
    fu.push_back(fit_and_score(data, u, cls, config));
    fv.push_back(fit_and_score(data, v, cls, config));
    fuv.push_back(fit_and_score(data, both, cls, config));
  }
  MergeVerdict verdict = decide_merge(fu, fv, fuv, classes);
  bool any = false;
  for (const auto& s : verdict.scores) any = any || s.available;
  if (!any)
    throw NoFittableClass("evaluate_merge: no class fits U, V and their union");
  return verdict;
}

}  // namespace mlink
