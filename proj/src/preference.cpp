#include "mlink/preference.hpp"

#include <cmath>
#include <cstdlib>
#include <ostream>
#include <thread>

namespace mlink {

namespace {

int thread_count() {
  if (const char* env = std::getenv("MLINK_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return 1;
}

/// Chunked parallel loop; writes are disjoint per index so the result does
/// not depend on the thread count.
template <typename Fn>
void parallel_for(int n, Fn&& fn) {
  const int threads = std::min(thread_count(), n > 0 ? n : 1);
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([=]() {
      for (int i = t; i < n; i += threads) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

double preference_sigma_sq(double epsilon) {
  return -epsilon * epsilon / std::log(0.05);
}

PreferenceMatrix build_preferences(const PointSet& data,
                                   std::span<const Hypothesis> hyps,
                                   std::span<const ModelClassSpec> classes,
                                   double epsilon) {
  if (epsilon <= 0.0) throw ConfigError("build_preferences: epsilon must be positive");
  std::vector<double> eps(classes.size(), epsilon);
  PreferenceMatrix m = build_preferences(data, hyps, classes, eps);
  m.epsilon = epsilon;
  m.phi_sigma_sq = preference_sigma_sq(epsilon);
  return m;
}

PreferenceMatrix build_preferences(const PointSet& data,
                                   std::span<const Hypothesis> hyps,
                                   std::span<const ModelClassSpec> classes,
                                   std::span<const double> per_class_epsilon) {
  if (hyps.empty()) throw ConfigError("build_preferences: empty hypothesis list");
  if (per_class_epsilon.size() != classes.size())
    throw ConfigError("build_preferences: per-class epsilon size mismatch");
  for (double e : per_class_epsilon)
    if (e <= 0.0) throw ConfigError("build_preferences: epsilon must be positive");

  const int n = data.size();
  const int mcols = static_cast<int>(hyps.size());

  // per-column threshold, bandwidth and residual procedure
  std::vector<double> col_eps(mcols), col_sig_sq(mcols);
  std::vector<const ModelClassSpec*> col_cls(mcols);
  for (int j = 0; j < mcols; ++j) {
    const ModelClassSpec& cls = find_class(classes, hyps[j].model.class_id);
    std::size_t k = 0;
    while (&classes[k] != &cls) ++k;
    col_eps[j] = per_class_epsilon[k];
    col_sig_sq[j] = preference_sigma_sq(col_eps[j]);
    col_cls[j] = &cls;
  }

  std::vector<std::vector<std::pair<int, double>>> rows(n);
  parallel_for(n, [&](int i) {
    const Point& p = data.points[i];
    auto& row = rows[i];
    for (int j = 0; j < mcols; ++j) {
      const double e = col_cls[j]->residual(hyps[j].model, p);
      if (e <= col_eps[j]) row.emplace_back(j, std::exp(-e * e / col_sig_sq[j]));
    }
  });

  PreferenceMatrix m;
  m.rows = n;
  m.cols = mcols;
  m.col_epsilon = std::move(col_eps);
  m.row_ptr.resize(n + 1, 0);
  std::int64_t nnz = 0;
  for (int i = 0; i < n; ++i) {
    m.row_ptr[i] = nnz;
    nnz += static_cast<std::int64_t>(rows[i].size());
  }
  m.row_ptr[n] = nnz;
  m.col.resize(nnz);
  m.val.resize(nnz);
  m.row_norm_sq.resize(n);
  for (int i = 0; i < n; ++i) {
    std::int64_t at = m.row_ptr[i];
    double nsq = 0.0;
    for (const auto& [c, v] : rows[i]) {
      m.col[at] = c;
      m.val[at] = v;
      nsq += v * v;
      ++at;
    }
    m.row_norm_sq[i] = nsq;
  }
  return m;
}

double tanimoto_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw ConfigError("tanimoto_distance: vector length mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 && nb == 0.0)
    throw BothZero("tanimoto_distance: both vectors are all-zero");
  return 1.0 - dot / (na + nb - dot);
}

double tanimoto_row_distance(const PreferenceMatrix& m, int i, int j) {
  const double na = m.row_norm_sq[i];
  const double nb = m.row_norm_sq[j];
  if (na == 0.0 && nb == 0.0) return 1.0;
  const auto ci = m.row_cols(i);
  const auto cj = m.row_cols(j);
  const auto vi = m.row_vals(i);
  const auto vj = m.row_vals(j);
  double dot = 0.0;
  std::size_t a = 0, b = 0;
  while (a < ci.size() && b < cj.size()) {
    if (ci[a] < cj[b])
      ++a;
    else if (ci[a] > cj[b])
      ++b;
    else {
      dot += vi[a] * vj[b];
      ++a;
      ++b;
    }
  }
  return 1.0 - dot / (na + nb - dot);
}

void write_preference_triplets_csv(const PreferenceMatrix& m, std::ostream& os) {
  os << "row,col,value\n";
  char buf[64];
  for (int i = 0; i < m.rows; ++i) {
    const auto cols = m.row_cols(i);
    const auto vals = m.row_vals(i);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%d,%d,%.17g\n", i, cols[k], vals[k]);
      os << buf;
    }
  }
}

}  // namespace mlink
