#include "mlink/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "mlink/rng.hpp"

namespace mlink {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}
}  // namespace

// ---------------------------------------------------------------------------
// misclassification error
// ---------------------------------------------------------------------------

std::vector<int> max_profit_assignment(
    const std::vector<std::vector<std::int64_t>>& profit) {
  const int rows = static_cast<int>(profit.size());
  const int cols = rows == 0 ? 0 : static_cast<int>(profit[0].size());
  const int n = std::max(rows, cols);
  if (n == 0) return {};

  // square min-cost matrix, padded with zeros
  constexpr std::int64_t big = std::numeric_limits<std::int64_t>::max() / 4;
  std::vector<std::vector<std::int64_t>> cost(n, std::vector<std::int64_t>(n, 0));
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) cost[i][j] = -profit[i][j];

  // Hungarian algorithm with potentials, O(n^3)
  std::vector<std::int64_t> u(n + 1, 0), v(n + 1, 0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<std::int64_t> minv(n + 1, big);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      std::int64_t delta = big;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const std::int64_t cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> match(rows, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] >= 1 && p[j] <= rows && j <= cols) match[p[j] - 1] = j - 1;
  return match;
}

EvalReport misclassification_error(const Segmentation& pred,
                                   std::span<const int> gt_labels) {
  if (gt_labels.empty())
    throw MissingGroundTruth("misclassification_error: no ground-truth labels");
  if (static_cast<int>(gt_labels.size()) != pred.n_points)
    throw ConfigError("misclassification_error: label count does not match the segmentation");

  const int n = pred.n_points;
  int n_gt = 0;
  for (int g : gt_labels) {
    if (g < 0) throw ConfigError("misclassification_error: negative gt label");
    n_gt = std::max(n_gt, g);
  }
  std::vector<std::int64_t> gt_sizes(n_gt, 0);
  for (int g : gt_labels)
    if (g > 0) ++gt_sizes[g - 1];

  const int n_pred = static_cast<int>(pred.structures.size());
  std::vector<std::vector<std::int64_t>> conf(
      n_pred, std::vector<std::int64_t>(n_gt, 0));
  for (int p = 0; p < n_pred; ++p)
    for (int i : pred.structures[p].members) {
      const int g = gt_labels[i];
      if (g > 0) ++conf[p][g - 1];
    }

  std::int64_t correct = 0;
  for (int i : pred.outlier_indices)
    if (gt_labels[i] == 0) ++correct;

  EvalReport report;
  report.n_points = n;
  const std::vector<int> match =
      (n_pred > 0 && n_gt > 0) ? max_profit_assignment(conf)
                               : std::vector<int>(n_pred, -1);
  for (int p = 0; p < n_pred; ++p) {
    StructureScore s;
    s.pred_index = p;
    const int g = match[p];
    if (g >= 0 && conf[p][g] > 0) {
      s.matched_gt_label = g + 1;
      s.correct = static_cast<int>(conf[p][g]);
      s.precision = static_cast<double>(conf[p][g]) /
                    static_cast<double>(pred.structures[p].members.size());
      s.recall = static_cast<double>(conf[p][g]) / static_cast<double>(gt_sizes[g]);
      correct += conf[p][g];
      report.assignment.emplace_back(p, g + 1);
    }
    report.per_structure.push_back(s);
  }
  report.misassigned = n - static_cast<int>(correct);
  report.me = static_cast<double>(report.misassigned) / static_cast<double>(n);
  return report;
}

// ---------------------------------------------------------------------------
// scene synthesis
// ---------------------------------------------------------------------------

namespace {

struct CurvePoint {
  double x, y;     // on-model point at parameter t
  double nx, ny;   // unit normal there
};

CurvePoint curve_point(const SceneStructure& s, double t) {
  if (s.class_id == "line") {
    const double nx = s.params[0], ny = s.params[1], c = s.params[2];
    const double ax = c * nx, ay = c * ny;    // anchor: closest point to origin
    const double dx = -ny, dy = nx;           // unit direction
    return {ax + t * dx, ay + t * dy, nx, ny};
  }
  if (s.class_id == "circle") {
    const double ct = std::cos(t), st = std::sin(t);
    return {s.params[0] + s.params[2] * ct, s.params[1] + s.params[2] * st, ct, st};
  }
  if (s.class_id == "parabola") {
    const double a = s.params[0], b = s.params[1], c = s.params[2];
    const double slope = 2.0 * a * t + b;
    const double inv = 1.0 / std::sqrt(1.0 + slope * slope);
    return {t, (a * t + b) * t + c, -slope * inv, inv};
  }
  throw UnknownModelClass("generate_scene: unknown class " + s.class_id);
}

}  // namespace

PointSet generate_scene(const SceneSpec& spec) {
  if (spec.outlier_count < 0) throw ConfigError("generate_scene: negative outlier count");
  if (spec.box[2] <= spec.box[0] || spec.box[3] <= spec.box[1])
    throw ConfigError("generate_scene: empty bounding box");

  PointSet out;
  int label = 0;
  for (const auto& s : spec.structures) {
    ++label;
    if (s.count < 0) throw ConfigError("generate_scene: negative point count");
    if (s.noise_sigma < 0.0) throw ConfigError("generate_scene: negative noise sigma");
    Rng rng(derive_seed(spec.seed, 1, static_cast<std::uint64_t>(label)));
    for (int k = 0; k < s.count; ++k) {
      const double t = rng.uniform(s.t_lo, s.t_hi);
      const CurvePoint cp = curve_point(s, t);
      const double d = s.noise_sigma > 0.0 ? rng.normal(0.0, s.noise_sigma) : 0.0;
      Eigen::VectorXd p(2);
      p << cp.x + d * cp.nx, cp.y + d * cp.ny;
      out.points.push_back(std::move(p));
      out.gt_labels.push_back(label);
    }
  }
  Rng rng(derive_seed(spec.seed, 2, 0));
  for (int k = 0; k < spec.outlier_count; ++k) {
    Eigen::VectorXd p(2);
    p << rng.uniform(spec.box[0], spec.box[2]), rng.uniform(spec.box[1], spec.box[3]);
    out.points.push_back(std::move(p));
    out.gt_labels.push_back(0);
  }
  return out;
}

namespace {

int outliers_for_rate(double rate, int inliers) {
  if (rate <= 0.0) return 0;
  if (rate >= 1.0) throw ConfigError("outlier rate must be below 1");
  return static_cast<int>(std::lround(rate / (1.0 - rate) * inliers));
}

void canonical_line(double& nx, double& ny, double& c) {
  const double norm = std::hypot(nx, ny);
  nx /= norm;
  ny /= norm;
  c /= norm;
  if (ny < 0.0 || (ny == 0.0 && nx < 0.0)) {
    nx = -nx;
    ny = -ny;
    c = -c;
  }
}

/// Line structure through two endpoints, extent covering the segment.
SceneStructure line_segment(double x0, double y0, double x1, double y1,
                            int count, double sigma) {
  double nx = -(y1 - y0), ny = x1 - x0;
  double c = nx * x0 + ny * y0;
  canonical_line(nx, ny, c);
  const double dx = -ny, dy = nx;
  const double ax = c * nx, ay = c * ny;
  const double t0 = dx * (x0 - ax) + dy * (y0 - ay);
  const double t1 = dx * (x1 - ax) + dy * (y1 - ay);
  SceneStructure s;
  s.class_id = "line";
  s.params = {nx, ny, c};
  s.t_lo = std::min(t0, t1);
  s.t_hi = std::max(t0, t1);
  s.count = count;
  s.noise_sigma = sigma;
  return s;
}

}  // namespace

SceneSpec star5_scene(std::uint64_t seed, double noise_sigma, double outlier_rate,
                      int points_per_line) {
  SceneSpec spec;
  spec.seed = seed;
  const double cx = 0.5, cy = 0.5, half = 0.45;
  for (int k = 0; k < 5; ++k) {
    const double theta = 2.0 * M_PI * k / 5.0;
    const double dx = std::cos(theta), dy = std::sin(theta);
    spec.structures.push_back(line_segment(cx - half * dx, cy - half * dy,
                                           cx + half * dx, cy + half * dy,
                                           points_per_line, noise_sigma));
  }
  spec.outlier_count = outliers_for_rate(outlier_rate, 5 * points_per_line);
  return spec;
}

SceneSpec circles4_scene(std::uint64_t seed, double noise_sigma, double outlier_rate,
                         int points_per_circle) {
  SceneSpec spec;
  spec.seed = seed;
  const double geom[4][3] = {{0.27, 0.27, 0.16},
                             {0.73, 0.30, 0.14},
                             {0.30, 0.74, 0.15},
                             {0.71, 0.70, 0.16}};
  for (const auto& g : geom) {
    SceneStructure s;
    s.class_id = "circle";
    s.params = {g[0], g[1], g[2]};
    s.t_lo = 0.0;
    s.t_hi = 2.0 * M_PI;
    s.count = points_per_circle;
    s.noise_sigma = noise_sigma;
    spec.structures.push_back(std::move(s));
  }
  spec.outlier_count = outliers_for_rate(outlier_rate, 4 * points_per_circle);
  return spec;
}

SceneSpec mixed_conics_scene(std::uint64_t seed, double noise_sigma,
                             double outlier_rate, int points_per_structure) {
  SceneSpec spec;
  spec.seed = seed;
  spec.structures.push_back(line_segment(0.05, 0.08, 0.95, 0.28,
                                         points_per_structure, noise_sigma));
  spec.structures.push_back(line_segment(0.05, 0.95, 0.95, 0.75,
                                         points_per_structure, noise_sigma));
  SceneStructure circle;
  circle.class_id = "circle";
  circle.params = {0.28, 0.52, 0.17};
  circle.t_lo = 0.0;
  circle.t_hi = 2.0 * M_PI;
  circle.count = points_per_structure;
  circle.noise_sigma = noise_sigma;
  spec.structures.push_back(std::move(circle));
  // opens upward from its vertex at (0.72, 0.40)
  const double a = 2.5, vx = 0.72, vy = 0.40;
  SceneStructure parab;
  parab.class_id = "parabola";
  parab.params = {a, -2.0 * a * vx, a * vx * vx + vy};
  parab.t_lo = 0.50;
  parab.t_hi = 0.94;
  parab.count = points_per_structure;
  parab.noise_sigma = noise_sigma;
  spec.structures.push_back(std::move(parab));
  spec.outlier_count = outliers_for_rate(outlier_rate, 4 * points_per_structure);
  return spec;
}

SceneSpec preset_scene(const std::string& name, std::uint64_t seed) {
  if (name == "star5") return star5_scene(seed);
  if (name == "circles4") return circles4_scene(seed);
  if (name == "mixed_conics") return mixed_conics_scene(seed);
  throw ConfigError("unknown preset: " + name);
}

// ---------------------------------------------------------------------------
// pipeline
// ---------------------------------------------------------------------------

namespace {

Segmentation run_clustering(const PointSet& data,
                            std::span<const ModelClassSpec> classes,
                            const PreferenceMatrix& prefs,
                            std::span<const Hypothesis> hyps,
                            const PipelineConfig& config) {
  const GricConfig gric{config.lambda1, config.lambda2,
                        config.sigma > 0.0 ? config.sigma : prefs.epsilon / 2.0};
  MultilinkOptions opts;
  opts.min_structure_size = config.min_structure_size;
  opts.keep_merge_log = config.keep_merge_log;
  opts.refine_final = config.refine_final;
  if (config.algorithm == "multilink")
    return multilink(data, classes, prefs, hyps, gric, opts);
  if (config.algorithm == "tlinkage")
    return tlinkage_baseline(data, prefs, hyps, opts);
  throw ConfigError("unknown algorithm: " + config.algorithm);
}

SamplerConfig sampler_config(const PipelineConfig& config, std::size_t n_classes) {
  SamplerConfig s;
  s.per_class_counts.assign(n_classes, config.hyps_per_class);
  s.seed = config.seed;
  s.localized = config.localized;
  s.locality_sigma = config.locality_sigma;
  s.validation_k = config.validation_k;
  s.validation_gamma = config.validation_gamma;
  return s;
}

}  // namespace

PipelineResult run_pipeline(const PointSet& data, const PipelineConfig& config) {
  if (config.epsilon_auto) {
    const auto [lo, hi] = *config.epsilon_auto;
    EpsilonEstimate est =
        estimate_epsilon(data, config, lo, hi, config.epsilon_budget);
    PipelineConfig fixed = config;
    fixed.epsilon_auto.reset();
    fixed.epsilon = est.epsilon;
    PipelineResult res = run_pipeline(data, fixed);
    res.epsilon_warning = est.no_valid_segmentation;
    return res;
  }

  if (config.epsilon <= 0.0) throw ConfigError("run_pipeline: epsilon must be positive");
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<ModelClassSpec> classes = classes_from_ids(config.class_ids);
  const SamplerConfig scfg = sampler_config(config, classes.size());
  std::vector<Hypothesis> pool = sample_hypotheses(data, classes, scfg);
  const int raw = static_cast<int>(pool.size());
  if (config.validate)
    pool = validate_hypotheses(pool, data, classes, config.epsilon, scfg);
  if (pool.empty())
    throw EmptyHypothesisPool("run_pipeline: validation removed every hypothesis");
  const PreferenceMatrix prefs =
      build_preferences(data, pool, classes, config.epsilon);

  PipelineResult res;
  res.hyp_time_s = seconds_since(t0);
  res.epsilon = config.epsilon;
  res.pool_raw = raw;
  res.pool_validated = static_cast<int>(pool.size());
  res.pool_hash = pool_hash(pool);
  const auto t1 = std::chrono::steady_clock::now();
  res.seg = run_clustering(data, classes, prefs, pool, config);
  res.cluster_time_s = seconds_since(t1);
  return res;
}

// ---------------------------------------------------------------------------
// silhouette-based epsilon estimation
// ---------------------------------------------------------------------------

double silhouette_score(const Segmentation& seg, const PreferenceMatrix& prefs) {
  const int s = static_cast<int>(seg.structures.size());
  if (s < 2) return -kInf;
  double total = 0.0;
  int count = 0;
  for (int si = 0; si < s; ++si) {
    const auto& own = seg.structures[si].members;
    for (int i : own) {
      double a = 0.0;
      if (own.size() > 1) {
        for (int j : own)
          if (j != i) a += tanimoto_row_distance(prefs, i, j);
        a /= static_cast<double>(own.size() - 1);
      }
      double b = kInf;
      for (int sj = 0; sj < s; ++sj) {
        if (sj == si) continue;
        double m = 0.0;
        for (int j : seg.structures[sj].members)
          m += tanimoto_row_distance(prefs, i, j);
        b = std::min(b, m / static_cast<double>(seg.structures[sj].members.size()));
      }
      const double den = std::max(a, b);
      total += den > 0.0 ? (b - a) / den : 0.0;
      ++count;
    }
  }
  return count > 0 ? total / count : -kInf;
}

EpsilonEstimate estimate_epsilon(const PointSet& data, const PipelineConfig& config,
                                 double eps_lo, double eps_hi, int budget) {
  if (!(eps_lo > 0.0) || eps_hi < eps_lo)
    throw ConfigError("estimate_epsilon: invalid search interval");
  if (budget < 2 && eps_hi > eps_lo)
    throw ConfigError("estimate_epsilon: budget must be at least 2");

  std::vector<double> grid;
  if (eps_hi == eps_lo) {
    grid.push_back(eps_lo);
  } else {
    const double ratio = eps_hi / eps_lo;
    for (int i = 0; i < budget; ++i)
      grid.push_back(eps_lo * std::pow(ratio, static_cast<double>(i) / (budget - 1)));
  }

  const std::vector<ModelClassSpec> classes = classes_from_ids(config.class_ids);
  const SamplerConfig scfg = sampler_config(config, classes.size());
  const std::vector<Hypothesis> raw = sample_hypotheses(data, classes, scfg);

  EpsilonEstimate est;
  int best = -1, most_structs = -1, most_structs_at = 0;
  for (int gi = 0; gi < static_cast<int>(grid.size()); ++gi) {
    const double eps = grid[gi];
    EpsilonGridPoint gp;
    gp.epsilon = eps;
    gp.silhouette = -kInf;
    try {
      std::vector<Hypothesis> pool =
          config.validate ? validate_hypotheses(raw, data, classes, eps, scfg) : raw;
      if (!pool.empty()) {
        const PreferenceMatrix prefs = build_preferences(data, pool, classes, eps);
        PipelineConfig at = config;
        at.epsilon_auto.reset();
        at.epsilon = eps;
        const Segmentation seg = run_clustering(data, classes, prefs, pool, at);
        gp.n_structures = static_cast<int>(seg.structures.size());
        if (gp.n_structures >= 2) gp.silhouette = silhouette_score(seg, prefs);
      }
    } catch (const Error&) {
      gp.n_structures = 0;
    }
    if (gp.n_structures > most_structs) {
      most_structs = gp.n_structures;
      most_structs_at = gi;
    }
    if (gp.silhouette > -kInf &&
        (best < 0 || gp.silhouette > est.grid[best].silhouette))
      best = gi;
    est.grid.push_back(gp);
  }

  if (best >= 0) {
    est.epsilon = est.grid[best].epsilon;
  } else {
    est.no_valid_segmentation = true;
    est.epsilon = est.grid[most_structs_at].epsilon;
  }
  return est;
}

// ---------------------------------------------------------------------------
// sweeps
// ---------------------------------------------------------------------------

double median_of(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

namespace {
double quantile_sorted(const std::vector<double>& v, double q) {
  const double idx = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(idx);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = idx - static_cast<double>(lo);
  return v[lo] * (1.0 - frac) + v[hi] * frac;
}
}  // namespace

double iqr_of(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  return quantile_sorted(v, 0.75) - quantile_sorted(v, 0.25);
}

namespace {

double preset_noise_sigma(const std::string& preset) {
  return preset == "mixed_conics" ? 0.01 : 0.0075;
}

SceneSpec sweep_scene(const SweepConfig& config, double setting, std::uint64_t seed) {
  const bool rate_sweep = config.variable == SweepVariable::OutlierRate;
  if (config.preset == "star5")
    return rate_sweep ? star5_scene(seed, 0.0075, setting) : star5_scene(seed);
  if (config.preset == "circles4")
    return rate_sweep ? circles4_scene(seed, 0.0075, setting) : circles4_scene(seed);
  if (config.preset == "mixed_conics")
    return rate_sweep ? mixed_conics_scene(seed, 0.01, setting)
                      : mixed_conics_scene(seed);
  throw ConfigError("unknown preset: " + config.preset);
}

}  // namespace

SweepResult sweep(const SweepConfig& config) {
  if (config.grid.empty()) throw ConfigError("sweep: empty grid");
  if (config.seeds.empty()) throw ConfigError("sweep: empty seed list");
  if (config.algorithms.empty()) throw ConfigError("sweep: no algorithms");

  const double sigma_scene = preset_noise_sigma(config.preset);
  SweepResult result;
  for (const double setting : config.grid) {
    for (const std::uint64_t seed : config.seeds) {
      PipelineConfig cfg = config.base;
      cfg.seed = seed;
      switch (config.variable) {
        case SweepVariable::EpsilonFactor:
          cfg.epsilon = setting * sigma_scene;
          break;
        case SweepVariable::OutlierRate:
          cfg.epsilon = config.epsilon_factor * sigma_scene;
          break;
        case SweepVariable::HypothesisCount:
          cfg.epsilon = config.epsilon_factor * sigma_scene;
          cfg.hyps_per_class = static_cast<int>(setting);
          break;
      }
      cfg.epsilon_auto.reset();

      // one shared pool per cell: every algorithm sees identical hypotheses
      PointSet scene;
      std::vector<ModelClassSpec> classes;
      std::vector<Hypothesis> pool;
      PreferenceMatrix prefs;
      double hyp_time = 0.0;
      std::uint64_t phash = 0;
      std::string cell_error;
      try {
        scene = generate_scene(sweep_scene(config, setting, seed));
        const auto t0 = std::chrono::steady_clock::now();
        classes = classes_from_ids(cfg.class_ids);
        const SamplerConfig scfg = sampler_config(cfg, classes.size());
        pool = sample_hypotheses(scene, classes, scfg);
        if (cfg.validate)
          pool = validate_hypotheses(pool, scene, classes, cfg.epsilon, scfg);
        if (pool.empty())
          throw EmptyHypothesisPool("sweep: validation removed every hypothesis");
        prefs = build_preferences(scene, pool, classes, cfg.epsilon);
        hyp_time = seconds_since(t0);
        phash = pool_hash(pool);
      } catch (const Error& e) {
        cell_error = e.what();
      }

      for (const auto& algorithm : config.algorithms) {
        SweepRun run;
        run.setting = setting;
        run.seed = seed;
        run.algorithm = algorithm;
        run.hyp_time_s = hyp_time;
        run.pool_hash = phash;
        if (!cell_error.empty()) {
          run.error = cell_error;
          result.runs.push_back(std::move(run));
          continue;
        }
        try {
          PipelineConfig acfg = cfg;
          acfg.algorithm = algorithm;
          const auto t1 = std::chrono::steady_clock::now();
          const Segmentation seg =
              run_clustering(scene, classes, prefs, pool, acfg);
          run.cluster_time_s = seconds_since(t1);
          run.me = misclassification_error(seg, scene.gt_labels).me;
        } catch (const Error& e) {
          run.error = e.what();
        }
        result.runs.push_back(std::move(run));
      }
    }
  }

  for (const double setting : config.grid) {
    for (const auto& algorithm : config.algorithms) {
      SweepCell cell;
      cell.setting = setting;
      cell.algorithm = algorithm;
      std::vector<double> mes;
      double hyp_sum = 0.0, cl_sum = 0.0;
      for (const auto& run : result.runs) {
        if (run.setting != setting || run.algorithm != algorithm) continue;
        if (!run.error.empty()) {
          ++cell.n_failed;
          continue;
        }
        mes.push_back(run.me);
        hyp_sum += run.hyp_time_s;
        cl_sum += run.cluster_time_s;
        ++cell.n_ok;
      }
      if (cell.n_ok > 0) {
        cell.median_me = median_of(mes);
        cell.iqr_me = iqr_of(mes);
        cell.min_me = *std::min_element(mes.begin(), mes.end());
        cell.max_me = *std::max_element(mes.begin(), mes.end());
        cell.mean_hyp_time_s = hyp_sum / cell.n_ok;
        cell.mean_cluster_time_s = cl_sum / cell.n_ok;
      }
      result.cells.push_back(std::move(cell));
    }
  }
  return result;
}

}  // namespace mlink
