#include "mlink/geometry.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mlink {

namespace {

double coord_scale(const PointSet& data, std::span<const int> idx) {
  double s = 1.0;
  for (int i : idx) s = std::max(s, data.points[i].lpNorm<Eigen::Infinity>());
  return s;
}

void require_size(std::span<const int> idx, int need, const char* what) {
  if (static_cast<int>(idx.size()) < need)
    throw InsufficientData(std::string(what) + ": needs at least " +
                           std::to_string(need) + " points");
}

ModelInstance make_line(double nx, double ny, double c) {
  const double norm = std::hypot(nx, ny);
  nx /= norm;
  ny /= norm;
  c /= norm;
  if (ny < 0.0 || (ny == 0.0 && nx < 0.0)) {
    nx = -nx;
    ny = -ny;
    c = -c;
  }
  ModelInstance m;
  m.class_id = "line";
  m.params = Eigen::Vector3d(nx, ny, c);
  return m;
}

// ---------------------------------------------------------------------------
// line: zero set n . x = c
// ---------------------------------------------------------------------------

ModelInstance line_fit_minimal(const PointSet& data, std::span<const int> idx) {
  require_size(idx, 2, "line_fit_minimal");
  const auto& p0 = data.points[idx[0]];
  const auto& p1 = data.points[idx[1]];
  const double dx = p1[0] - p0[0];
  const double dy = p1[1] - p0[1];
  if (std::hypot(dx, dy) <= 1e-12 * coord_scale(data, idx))
    throw DegenerateSample("line: coincident sample points");
  // normal is the segment direction rotated by 90 degrees
  const double nx = -dy;
  const double ny = dx;
  const double mx = 0.5 * (p0[0] + p1[0]);
  const double my = 0.5 * (p0[1] + p1[1]);
  return make_line(nx, ny, nx * mx + ny * my);
}

ModelInstance line_fit_cluster(const PointSet& data, std::span<const int> idx) {
  require_size(idx, 2, "line_fit_cluster");
  double mx = 0.0, my = 0.0;
  for (int i : idx) {
    mx += data.points[i][0];
    my += data.points[i][1];
  }
  const double n = static_cast<double>(idx.size());
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (int i : idx) {
    const double u = data.points[i][0] - mx;
    const double v = data.points[i][1] - my;
    sxx += u * u;
    sxy += u * v;
    syy += v * v;
  }
  const double scale = coord_scale(data, idx);
  if (sxx + syy <= n * (1e-14 * scale) * (1e-14 * scale))
    throw DegenerateCluster("line: all points coincident");
  // total least squares: normal = eigenvector of the smallest scatter eigenvalue
  Eigen::Matrix2d scatter;
  scatter << sxx, sxy, sxy, syy;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(scatter);
  const Eigen::Vector2d normal = eig.eigenvectors().col(0);
  return make_line(normal[0], normal[1], normal[0] * mx + normal[1] * my);
}

double line_residual(const ModelInstance& m, const Point& p) {
  return std::abs(m.params[0] * p[0] + m.params[1] * p[1] - m.params[2]);
}

// ---------------------------------------------------------------------------
// circle
// ---------------------------------------------------------------------------

ModelInstance make_circle(double cx, double cy, double r) {
  ModelInstance m;
  m.class_id = "circle";
  m.params = Eigen::Vector3d(cx, cy, r);
  return m;
}

ModelInstance circle_fit_minimal(const PointSet& data, std::span<const int> idx) {
  require_size(idx, 3, "circle_fit_minimal");
  const auto& p0 = data.points[idx[0]];
  const auto& p1 = data.points[idx[1]];
  const auto& p2 = data.points[idx[2]];
  const double ax = p1[0] - p0[0], ay = p1[1] - p0[1];
  const double bx = p2[0] - p0[0], by = p2[1] - p0[1];
  const double cross = ax * by - ay * bx;
  if (std::abs(cross) <= 1e-12 * std::hypot(ax, ay) * std::hypot(bx, by))
    throw DegenerateSample("circle: collinear sample points");
  // intersection of the two perpendicular bisectors
  const double a2 = ax * ax + ay * ay;
  const double b2 = bx * bx + by * by;
  const double ux = (by * a2 - ay * b2) / (2.0 * cross);
  const double uy = (ax * b2 - bx * a2) / (2.0 * cross);
  const double cx = p0[0] + ux;
  const double cy = p0[1] + uy;
  return make_circle(cx, cy, std::hypot(ux, uy));
}

// Taubin algebraic fit (G. Taubin, IEEE PAMI 1991), computed from the
// centered moments with Newton's method on the characteristic polynomial
// started at zero, following Chernov's classic formulation.
ModelInstance circle_fit_cluster(const PointSet& data, std::span<const int> idx) {
  require_size(idx, 3, "circle_fit_cluster");
  const double n = static_cast<double>(idx.size());
  double mean_x = 0.0, mean_y = 0.0;
  for (int i : idx) {
    mean_x += data.points[i][0];
    mean_y += data.points[i][1];
  }
  mean_x /= n;
  mean_y /= n;

  double mxx = 0, myy = 0, mxy = 0, mxz = 0, myz = 0, mzz = 0;
  for (int i : idx) {
    const double xi = data.points[i][0] - mean_x;
    const double yi = data.points[i][1] - mean_y;
    const double zi = xi * xi + yi * yi;
    mxx += xi * xi;
    myy += yi * yi;
    mxy += xi * yi;
    mxz += xi * zi;
    myz += yi * zi;
    mzz += zi * zi;
  }
  mxx /= n;
  myy /= n;
  mxy /= n;
  mxz /= n;
  myz /= n;
  mzz /= n;

  {
    // collinear clusters have no finite fitted circle
    const double tr = mxx + myy;
    const double det = mxx * myy - mxy * mxy;
    const double disc = std::sqrt(std::max(0.0, tr * tr - 4.0 * det));
    const double lam_min = 0.5 * (tr - disc);
    const double lam_max = 0.5 * (tr + disc);
    if (lam_max <= 0.0 || lam_min <= 1e-18 * lam_max)
      throw DegenerateCluster("circle: collinear cluster");
  }

  const double mz = mxx + myy;
  const double cov_xy = mxx * myy - mxy * mxy;
  const double var_z = mzz - mz * mz;
  const double a3 = 4.0 * mz;
  const double a2 = -3.0 * mz * mz - mzz;
  const double a1 = var_z * mz + 4.0 * cov_xy * mz - mxz * mxz - myz * myz;
  const double a0 = mxz * (mxz * myy - myz * mxy) +
                    myz * (myz * mxx - mxz * mxy) - var_z * cov_xy;
  const double a22 = a2 + a2;
  const double a33 = a3 + a3 + a3;

  double x = 0.0, y = a0;
  for (int iter = 0; iter < 99; ++iter) {
    const double dy = a1 + x * (a22 + a33 * x);
    const double xnew = x - y / dy;
    if (!std::isfinite(xnew) || xnew == x) break;
    const double ynew = a0 + xnew * (a1 + xnew * (a2 + xnew * a3));
    if (std::abs(ynew) >= std::abs(y)) break;
    x = xnew;
    y = ynew;
  }

  const double det = x * x - x * mz + cov_xy;
  const double ucx = (mxz * (myy - x) - myz * mxy) / det / 2.0;
  const double ucy = (myz * (mxx - x) - mxz * mxy) / det / 2.0;
  const double r = std::sqrt(ucx * ucx + ucy * ucy + mz);
  const double cx = ucx + mean_x;
  const double cy = ucy + mean_y;
  if (!std::isfinite(cx) || !std::isfinite(cy) || !std::isfinite(r) || r <= 0.0 ||
      r > 1e12 * coord_scale(data, idx))
    throw DegenerateCluster("circle: fit did not yield a finite circle");
  return make_circle(cx, cy, r);
}

double circle_residual(const ModelInstance& m, const Point& p) {
  const double dx = p[0] - m.params[0];
  const double dy = p[1] - m.params[1];
  return std::abs(std::hypot(dx, dy) - m.params[2]);
}

// ---------------------------------------------------------------------------
// parabola: y = a x^2 + b x + c, axis-aligned
// ---------------------------------------------------------------------------

ModelInstance make_parabola(double a, double b, double c) {
  ModelInstance m;
  m.class_id = "parabola";
  m.params = Eigen::Vector3d(a, b, c);
  return m;
}

// The collinear limit a -> 0 leaves the class; the cutoff compares the
// quadratic term's contribution over the x-span against the fp noise floor.
bool parabola_flat(double a, double span_x, double y_scale) {
  return std::abs(a) * span_x * span_x <= 1e-9 * std::max(1.0, y_scale);
}

ModelInstance parabola_fit_minimal(const PointSet& data, std::span<const int> idx) {
  require_size(idx, 3, "parabola_fit_minimal");
  const double x0 = data.points[idx[0]][0], y0 = data.points[idx[0]][1];
  const double x1 = data.points[idx[1]][0], y1 = data.points[idx[1]][1];
  const double x2 = data.points[idx[2]][0], y2 = data.points[idx[2]][1];
  const double span = std::max({std::abs(x1 - x0), std::abs(x2 - x0),
                                std::abs(x2 - x1)});
  const double tol = 1e-12 * std::max(1.0, span);
  if (std::abs(x1 - x0) <= tol || std::abs(x2 - x0) <= tol ||
      std::abs(x2 - x1) <= tol)
    throw DegenerateSample("parabola: repeated abscissae");
  // Newton divided differences
  const double d01 = (y1 - y0) / (x1 - x0);
  const double d12 = (y2 - y1) / (x2 - x1);
  const double a = (d12 - d01) / (x2 - x0);
  const double y_scale = std::max({std::abs(y0), std::abs(y1), std::abs(y2)});
  if (parabola_flat(a, span, y_scale))
    throw DegenerateSample("parabola: collinear sample points");
  const double b = d01 - a * (x0 + x1);
  const double c = y0 - x0 * (a * x0 + b);
  return make_parabola(a, b, c);
}

ModelInstance parabola_fit_cluster(const PointSet& data, std::span<const int> idx) {
  require_size(idx, 3, "parabola_fit_cluster");
  const int n = static_cast<int>(idx.size());
  double mean_x = 0.0;
  double min_x = std::numeric_limits<double>::infinity();
  double max_x = -min_x;
  double y_scale = 0.0;
  for (int i : idx) {
    const double x = data.points[i][0];
    mean_x += x;
    min_x = std::min(min_x, x);
    max_x = std::max(max_x, x);
    y_scale = std::max(y_scale, std::abs(data.points[i][1]));
  }
  mean_x /= n;
  const double span = max_x - min_x;
  if (span <= 1e-12 * coord_scale(data, idx))
    throw DegenerateCluster("parabola: degenerate x-span");

  // linear least squares on vertical residuals, x centered for conditioning
  Eigen::MatrixXd v(n, 3);
  Eigen::VectorXd rhs(n);
  for (int k = 0; k < n; ++k) {
    const double u = data.points[idx[k]][0] - mean_x;
    v(k, 0) = u * u;
    v(k, 1) = u;
    v(k, 2) = 1.0;
    rhs[k] = data.points[idx[k]][1];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(v);
  if (qr.rank() < 3)
    throw DegenerateCluster("parabola: rank-deficient design");
  const Eigen::Vector3d beta = qr.solve(rhs);
  const double a = beta[0];
  if (parabola_flat(a, span, y_scale))
    throw DegenerateCluster("parabola: collinear cluster");
  const double b = beta[1] - 2.0 * a * mean_x;
  const double c = a * mean_x * mean_x - beta[1] * mean_x + beta[2];
  return make_parabola(a, b, c);
}

double parabola_point_dist_sq(double a, double b, double c, double px,
                              double py, double t) {
  const double dy = a * t * t + b * t + c - py;
  const double dx = t - px;
  return dx * dx + dy * dy;
}

double parabola_residual(const ModelInstance& m, const Point& p) {
  const double a = m.params[0], b = m.params[1], c = m.params[2];
  const double px = p[0], py = p[1];
  // stationarity of |x - p|^2 over the curve (t, a t^2 + b t + c):
  //   2 a^2 t^3 + 3 a b t^2 + (b^2 + 2 a (c - py) + 1) t + b (c - py) - px = 0
  double roots[3];
  const int nr = solve_cubic_real(2.0 * a * a, 3.0 * a * b,
                                  b * b + 2.0 * a * (c - py) + 1.0,
                                  b * (c - py) - px, roots);
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < nr; ++k)
    best = std::min(best, parabola_point_dist_sq(a, b, c, px, py, roots[k]));
  return std::sqrt(best);
}

}  // namespace

int solve_cubic_real(double c3, double c2, double c1, double c0,
                     double roots[3]) {
  // depressed form s^3 + ps + q with t = s - c2/(3 c3)
  const double inv = 1.0 / c3;
  const double a2 = c2 * inv, a1 = c1 * inv, a0 = c0 * inv;
  const double shift = a2 / 3.0;
  const double p = a1 - a2 * a2 / 3.0;
  const double q = a0 - a2 * a1 / 3.0 + 2.0 * a2 * a2 * a2 / 27.0;
  const double disc = 0.25 * q * q + p * p * p / 27.0;

  int n = 0;
  if (disc > 0.0) {
    const double sd = std::sqrt(disc);
    const double u = std::cbrt(-0.5 * q + sd);
    const double v = std::cbrt(-0.5 * q - sd);
    roots[n++] = u + v - shift;
  } else if (p == 0.0 && q == 0.0) {
    roots[n++] = -shift;
  } else {
    const double m = 2.0 * std::sqrt(-p / 3.0);
    const double arg = std::clamp(3.0 * q / (p * m), -1.0, 1.0);
    const double phi = std::acos(arg) / 3.0;
    for (int k = 0; k < 3; ++k)
      roots[n++] = m * std::cos(phi - 2.0 * M_PI * k / 3.0) - shift;
  }
  // a couple of Newton steps tighten roots computed through cancellations
  for (int k = 0; k < n; ++k) {
    double t = roots[k];
    for (int it = 0; it < 2; ++it) {
      const double f = ((c3 * t + c2) * t + c1) * t + c0;
      const double df = (3.0 * c3 * t + 2.0 * c2) * t + c1;
      if (df != 0.0 && std::isfinite(f / df)) t -= f / df;
    }
    roots[k] = t;
  }
  return n;
}

const ModelClassSpec& line_class() {
  static const ModelClassSpec spec{
      .class_id = "line",
      .ambient_dim = 2,
      .manifold_dim = 1,
      .param_count = 2,
      .min_sample_size = 2,
      .fit_minimal = line_fit_minimal,
      .fit_cluster = line_fit_cluster,
      .residual = line_residual,
  };
  return spec;
}

const ModelClassSpec& circle_class() {
  static const ModelClassSpec spec{
      .class_id = "circle",
      .ambient_dim = 2,
      .manifold_dim = 1,
      .param_count = 3,
      .min_sample_size = 3,
      .fit_minimal = circle_fit_minimal,
      .fit_cluster = circle_fit_cluster,
      .residual = circle_residual,
  };
  return spec;
}

const ModelClassSpec& parabola_class() {
  static const ModelClassSpec spec{
      .class_id = "parabola",
      .ambient_dim = 2,
      .manifold_dim = 1,
      .param_count = 3,
      .min_sample_size = 3,
      .fit_minimal = parabola_fit_minimal,
      .fit_cluster = parabola_fit_cluster,
      .residual = parabola_residual,
  };
  return spec;
}

std::vector<ModelClassSpec> classes_from_ids(std::span<const std::string> ids) {
  std::vector<ModelClassSpec> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    if (id == "line")
      out.push_back(line_class());
    else if (id == "circle")
      out.push_back(circle_class());
    else if (id == "parabola")
      out.push_back(parabola_class());
    else
      throw UnknownModelClass("unknown model class: " + id);
  }
  return out;
}

const ModelClassSpec& find_class(std::span<const ModelClassSpec> classes,
                                 std::string_view class_id) {
  for (const auto& c : classes)
    if (c.class_id == class_id) return c;
  throw UnknownModelClass("class not registered: " + std::string(class_id));
}

namespace {
PointSet to_point_set(std::span<const Point> pts) {
  PointSet ps;
  ps.points.assign(pts.begin(), pts.end());
  return ps;
}

std::vector<int> iota_indices(std::size_t n) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}
}  // namespace

ModelInstance fit_minimal(const ModelClassSpec& cls, std::span<const Point> sample) {
  const PointSet ps = to_point_set(sample);
  return cls.fit_minimal(ps, iota_indices(sample.size()));
}

ModelInstance fit_cluster(const ModelClassSpec& cls, std::span<const Point> pts) {
  const PointSet ps = to_point_set(pts);
  return cls.fit_cluster(ps, iota_indices(pts.size()));
}

double residual(const ModelInstance& model, const Point& p) {
  if (model.class_id == "line") return line_residual(model, p);
  if (model.class_id == "circle") return circle_residual(model, p);
  if (model.class_id == "parabola") return parabola_residual(model, p);
  throw UnknownModelClass("residual: unknown class " + model.class_id);
}

namespace {

double residual_sum_sq(const ModelClassSpec& cls, const ModelInstance& m,
                       const PointSet& data, std::span<const int> members) {
  double s = 0.0;
  for (int i : members) {
    const double e = cls.residual(m, data.points[i]);
    s += e * e;
  }
  return s;
}

ModelInstance refine_circle(const ModelInstance& init, const PointSet& data,
                            std::span<const int> members) {
  Eigen::Vector3d p = init.params;  // (cx, cy, r)
  for (int iter = 0; iter < 30; ++iter) {
    Eigen::Matrix3d jtj = Eigen::Matrix3d::Zero();
    Eigen::Vector3d jtr = Eigen::Vector3d::Zero();
    for (int i : members) {
      const double dx = data.points[i][0] - p[0];
      const double dy = data.points[i][1] - p[1];
      const double d = std::hypot(dx, dy);
      if (d <= 1e-300) continue;
      const double r = d - p[2];
      const Eigen::Vector3d j(-dx / d, -dy / d, -1.0);
      jtj += j * j.transpose();
      jtr += j * r;
    }
    const Eigen::Vector3d step = jtj.ldlt().solve(-jtr);
    if (!step.allFinite()) break;
    p += step;
    if (step.lpNorm<Eigen::Infinity>() < 1e-14 * std::max(1.0, p[2])) break;
  }
  if (!p.allFinite() || p[2] <= 0.0) return init;
  ModelInstance out = init;
  out.params = p;
  return out;
}

ModelInstance refine_parabola(const ModelInstance& init, const PointSet& data,
                              std::span<const int> members) {
  const auto& cls = parabola_class();
  Eigen::Vector3d p = init.params;
  auto signed_dists = [&](const Eigen::Vector3d& q, Eigen::VectorXd& out) {
    ModelInstance m = init;
    m.params = q;
    for (std::size_t k = 0; k < members.size(); ++k) {
      const auto& pt = data.points[members[k]];
      const double d = parabola_residual(m, pt);
      const double above = pt[1] - (q[0] * pt[0] * pt[0] + q[1] * pt[0] + q[2]);
      out[static_cast<int>(k)] = above >= 0.0 ? d : -d;
    }
  };
  const int n = static_cast<int>(members.size());
  Eigen::VectorXd r0(n), rp(n), rm(n);
  for (int iter = 0; iter < 30; ++iter) {
    signed_dists(p, r0);
    Eigen::MatrixXd jac(n, 3);
    for (int c = 0; c < 3; ++c) {
      const double h = 1e-6 * std::max(1.0, std::abs(p[c]));
      Eigen::Vector3d qp = p, qm = p;
      qp[c] += h;
      qm[c] -= h;
      signed_dists(qp, rp);
      signed_dists(qm, rm);
      jac.col(c) = (rp - rm) / (2.0 * h);
    }
    const Eigen::Vector3d step =
        (jac.transpose() * jac).ldlt().solve(-jac.transpose() * r0);
    if (!step.allFinite()) break;
    const Eigen::Vector3d cand = p + step;
    ModelInstance mc = init;
    mc.params = cand;
    ModelInstance mp = init;
    mp.params = p;
    if (cand[0] == 0.0 ||
        residual_sum_sq(cls, mc, data, members) >
            residual_sum_sq(cls, mp, data, members))
      break;
    p = cand;
    if (step.lpNorm<Eigen::Infinity>() < 1e-14) break;
  }
  if (!p.allFinite() || p[0] == 0.0) return init;
  ModelInstance out = init;
  out.params = p;
  return out;
}

}  // namespace

ModelInstance refine_geometric(const ModelClassSpec& cls, const ModelInstance& init,
                               const PointSet& data, std::span<const int> members) {
  if (cls.class_id == "line") return init;
  ModelInstance refined = init;
  if (cls.class_id == "circle") refined = refine_circle(init, data, members);
  if (cls.class_id == "parabola") refined = refine_parabola(init, data, members);
  if (residual_sum_sq(cls, refined, data, members) <=
      residual_sum_sq(cls, init, data, members))
    return refined;
  return init;
}

}  // namespace mlink
