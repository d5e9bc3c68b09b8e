#include "dbh/cross_section.hpp"

#include "dbh/random.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

namespace dbh {

namespace {

constexpr double kPi = std::numbers::pi;

Vec2 centroid(const Points2& pts) { return pts.rowwise().mean(); }

}  // namespace

std::string_view to_string(CurveKind kind) {
  switch (kind) {
    case CurveKind::ellipse: return "ellipse";
    case CurveKind::bspline: return "bspline";
    case CurveKind::fourier: return "fourier";
  }
  return "unknown";
}

CurveKind parse_curve_kind(std::string_view name) {
  for (const auto k : kAllCurveKinds) {
    if (to_string(k) == name) return k;
  }
  throw ParseError("unknown curve method '" + std::string(name) + "'");
}

InsufficientBandError::InsufficientBandError(Index count, Index required)
    : FitError("insufficient band: " + std::to_string(count) + " points, need at least " +
               std::to_string(required)),
      count_(count) {}

int minimum_support(CurveKind kind, const RansacOptions& opts) {
  switch (kind) {
    case CurveKind::ellipse: return 6;
    case CurveKind::bspline: return opts.spline_ctrl;
    case CurveKind::fourier: return 2 * opts.fourier_degree + 1;
  }
  return 6;
}

// ---------------------------------------------------------------------------
// Axis, band, projection
// ---------------------------------------------------------------------------

Vec3 estimate_trunk_axis(const TrunkSegment& segment, const PointCloud& cloud,
                         const GroundPlane& plane) {
  const Vec3 up = plane.normal.normalized();
  if (segment.indices.size() < 10) return up;
  const Points3 pts = gather(cloud.points, segment.indices);
  const Vec3 mean = pts.rowwise().mean();
  const Points3 centered = pts.colwise() - mean;
  const Mat3 cov = centered * centered.transpose() / static_cast<double>(pts.cols());
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  if (eig.info() != Eigen::Success) return up;
  const Vec3 lambda = eig.eigenvalues();  // ascending
  if (!(lambda[2] > 0) || lambda[2] <= lambda[1] * (1.0 + 1e-6)) return up;
  Vec3 axis = eig.eigenvectors().col(2).normalized();
  if (axis.dot(up) < 0) axis = -axis;
  if (axis.dot(up) < std::cos(kPi / 4)) return up;
  return axis;
}

IndexList extract_band(const TrunkSegment& segment, const PointCloud& cloud,
                       const GroundPlane& plane, double low, double high, Index min_support) {
  if (!(low < high)) throw PreconditionError("band low must be below band high");
  IndexList band;
  for (const Index i : segment.indices) {
    const double h = signed_height(cloud.points.col(i), plane);
    if (h >= low && h <= high) band.push_back(i);
  }
  if (static_cast<Index>(band.size()) < min_support)
    throw InsufficientBandError(static_cast<Index>(band.size()), min_support);
  return band;
}

CrossSection2D project_to_plane(const Points3& points, const Vec3& axis, const Vec3& origin) {
  CrossSection2D section;
  section.origin = origin;
  section.axis = axis.normalized();
  std::tie(section.e1, section.e2) = orthonormal_frame(section.axis);
  Eigen::Matrix<double, 2, 3> basis;
  basis.row(0) = section.e1.transpose();
  basis.row(1) = section.e2.transpose();
  section.samples = basis * (points.colwise() - origin);
  return section;
}

// ---------------------------------------------------------------------------
// Ellipse
// ---------------------------------------------------------------------------

Ellipse conic_to_ellipse(const Eigen::Matrix<double, 6, 1>& conic) {
  const double A = conic[0], B = conic[1], C = conic[2], D = conic[3], E = conic[4], F = conic[5];
  const double disc = 4 * A * C - B * B;
  if (!(disc > 0)) throw FitError("conic is not an ellipse");
  Eigen::Matrix2d Q;
  Q << A, B / 2, B / 2, C;
  // Gradient of the conic vanishes at the center: 2 Q c = -(D, E).
  const Vec2 c = (2.0 * Q).inverse() * Vec2(-D, -E);
  const double f0 = F + 0.5 * (D * c.x() + E * c.y());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(Q);
  const Vec2 lambda = eig.eigenvalues();
  const double s0 = -f0 / lambda[0], s1 = -f0 / lambda[1];
  if (!(s0 > 0) || !(s1 > 0) || !std::isfinite(s0) || !std::isfinite(s1))
    throw FitError("conic is an imaginary or degenerate ellipse");
  Ellipse e;
  e.center = c;
  int major = s0 >= s1 ? 0 : 1;
  e.a = std::sqrt(std::max(s0, s1));
  e.b = std::sqrt(std::min(s0, s1));
  const Vec2 dir = eig.eigenvectors().col(major);
  double theta = std::atan2(dir.y(), dir.x());
  if (theta < 0) theta += kPi;
  if (theta >= kPi) theta -= kPi;
  if (e.a - e.b <= 1e-12 * e.a) theta = 0;
  e.theta = theta;
  return e;
}

Ellipse fit_ellipse_lsq(const Points2& points) {
  const Index n = points.cols();
  if (n < 6) throw FitError("ellipse fit needs at least 6 points");
  const Vec2 mean = centroid(points);
  const Points2 centered = points.colwise() - mean;
  const Eigen::Matrix2d cov = centered * centered.transpose() / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> ceig(cov);
  if (!(ceig.eigenvalues()[1] > 0) || ceig.eigenvalues()[0] <= 1e-12 * ceig.eigenvalues()[1])
    throw FitError("ellipse fit: points are collinear");
  const double scale = std::sqrt(cov.trace() / 2.0);
  const Points2 q = centered / scale;

  Eigen::MatrixX3d D1(n, 3), D2(n, 3);
  for (Index i = 0; i < n; ++i) {
    const double x = q(0, i), y = q(1, i);
    D1.row(i) << x * x, x * y, y * y;
    D2.row(i) << x, y, 1.0;
  }
  const Mat3 S1 = D1.transpose() * D1;
  const Mat3 S2 = D1.transpose() * D2;
  const Mat3 S3 = D2.transpose() * D2;
  const Eigen::FullPivLU<Mat3> s3lu(S3);
  if (!s3lu.isInvertible()) throw FitError("ellipse fit: singular scatter matrix");
  const Mat3 T = -s3lu.solve(S2.transpose());
  const Mat3 M = S1 + S2 * T;
  Mat3 Mc;
  Mc.row(0) = M.row(2) / 2.0;
  Mc.row(1) = -M.row(1);
  Mc.row(2) = M.row(0) / 2.0;

  Eigen::EigenSolver<Mat3> eig(Mc);
  if (eig.info() != Eigen::Success) throw FitError("ellipse fit: eigen decomposition failed");
  int best = -1;
  double best_abs = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 3; ++k) {
    const auto v = eig.eigenvectors().col(k);
    if (std::abs(eig.eigenvalues()[k].imag()) > 1e-9 * (1 + std::abs(eig.eigenvalues()[k].real())))
      continue;
    const Vec3 a = v.real();
    const double cond = 4 * a[0] * a[2] - a[1] * a[1];
    if (cond > 0 && std::abs(eig.eigenvalues()[k].real()) < best_abs) {
      best = k;
      best_abs = std::abs(eig.eigenvalues()[k].real());
    }
  }
  if (best < 0) throw FitError("ellipse fit: no elliptical solution");
  const Vec3 a1 = eig.eigenvectors().col(best).real();
  const Vec3 a2 = T * a1;

  // Undo the scaling: x' = X / scale with X relative to the centroid.
  Eigen::Matrix<double, 6, 1> conic;
  const double s2 = scale * scale;
  conic << a1[0] / s2, a1[1] / s2, a1[2] / s2, a2[0] / scale, a2[1] / scale, a2[2];
  Ellipse e = conic_to_ellipse(conic);
  e.center += mean;
  return e;
}

// ---------------------------------------------------------------------------
// Periodic B-spline
// ---------------------------------------------------------------------------

BSpline fit_periodic_bspline(const Points2& boundary, int n_ctrl) {
  if (n_ctrl < 4) throw PreconditionError("periodic cubic spline needs at least 4 control points");
  const Index m = boundary.cols();
  if (m < n_ctrl) throw FitError("spline fit: boundary has fewer points than control points");

  std::vector<double> cum(static_cast<std::size_t>(m) + 1, 0.0);
  for (Index j = 0; j < m; ++j) {
    const Index next = (j + 1) % m;
    cum[static_cast<std::size_t>(j) + 1] =
        cum[static_cast<std::size_t>(j)] + (boundary.col(next) - boundary.col(j)).norm();
  }
  const double total = cum.back();
  if (!(total > 1e-12)) throw FitError("spline fit: boundary points are coincident");

  BSpline spline;
  spline.control.setZero(2, n_ctrl);  // locate() only needs the size
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, n_ctrl);
  for (Index j = 0; j < m; ++j) {
    const double u = cum[static_cast<std::size_t>(j)] / total;
    const auto [k, s] = spline.locate(u);
    double w[4], dw[4], ddw[4];
    BSpline::basis(s, w, dw, ddw);
    for (int i = 0; i < 4; ++i) A(j, (k + i) % n_ctrl) += w[i];
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  if (qr.rank() < n_ctrl) throw FitError("spline fit: rank-deficient least-squares system");
  const Eigen::MatrixX2d ctrl = qr.solve(boundary.transpose());
  spline.control = ctrl.transpose();
  if (!spline.control.allFinite()) throw FitError("spline fit: non-finite control points");
  return spline;
}

// ---------------------------------------------------------------------------
// Fourier
// ---------------------------------------------------------------------------

Vec2 circle_center_lsq(const Points2& points) {
  const Index n = points.cols();
  if (n < 3) throw FitError("circle fit: need at least 3 points");
  const Vec2 mean = centroid(points);
  Eigen::MatrixX3d A(n, 3);
  Eigen::VectorXd b(n);
  for (Index j = 0; j < n; ++j) {
    const Vec2 q = points.col(j) - mean;
    A.row(j) << q.x(), q.y(), 1.0;
    b(j) = q.squaredNorm();
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixX3d> qr(A);
  if (qr.rank() < 3) throw FitError("circle fit: points are collinear");
  const Eigen::Vector3d x = qr.solve(b);
  if (!x.allFinite()) throw FitError("circle fit: points are collinear");
  return mean + 0.5 * x.head<2>();
}

Fourier fit_fourier(const Points2& points, const Vec2& center, int degree) {
  if (degree < 1) throw PreconditionError("Fourier degree must be at least 1");
  const Index n = points.cols();
  const int unknowns = 2 * degree + 1;
  if (n < unknowns) throw FitError("Fourier fit: too few points for the requested degree");

  Eigen::VectorXd t(n), r(n);
  for (Index j = 0; j < n; ++j) {
    const Vec2 d = points.col(j) - center;
    r[j] = d.norm();
    if (!(r[j] > 1e-12)) throw FitError("Fourier fit: point coincides with the polar center");
    t[j] = std::atan2(d.y(), d.x());
  }

  std::vector<double> sorted(t.data(), t.data() + n);
  std::sort(sorted.begin(), sorted.end());
  double max_gap = sorted.front() + 2 * kPi - sorted.back();
  for (std::size_t k = 1; k < sorted.size(); ++k) max_gap = std::max(max_gap, sorted[k] - sorted[k - 1]);
  if (2 * kPi - max_gap < 5.0 * kPi / 180.0)
    throw FitError("Fourier fit: angular support is concentrated in a 5 degree sector");

  Eigen::MatrixXd A(n, unknowns);
  for (Index j = 0; j < n; ++j) {
    A(j, 0) = 1.0;
    for (int i = 1; i <= degree; ++i) {
      A(j, 2 * i - 1) = std::cos(i * t[j]);
      A(j, 2 * i) = std::sin(i * t[j]);
    }
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  if (qr.rank() < unknowns) throw FitError("Fourier fit: ill-conditioned angular sampling");
  const Eigen::VectorXd x = qr.solve(r);

  Fourier f;
  f.center = center;
  f.a0 = x[0];
  f.a.resize(degree);
  f.b.resize(degree);
  for (int i = 1; i <= degree; ++i) {
    f.a[i - 1] = x[2 * i - 1];
    f.b[i - 1] = x[2 * i];
  }
  if (!x.allFinite() || !(f.min_radius(1024) > 0))
    throw FitError("Fourier fit: radius is not positive everywhere");
  return f;
}

// ---------------------------------------------------------------------------
// RANSAC
// ---------------------------------------------------------------------------

CurveModel fit_model(const Points2& points, CurveKind kind, const RansacOptions& opts) {
  switch (kind) {
    case CurveKind::ellipse: return fit_ellipse_lsq(points);
    case CurveKind::fourier: {
      const Vec2 center = opts.fourier_circle_center ? circle_center_lsq(points) : centroid(points);
      return fit_fourier(points, center, opts.fourier_degree);
    }
    case CurveKind::bspline: {
      const AlphaRegion region = connected_alpha_region(points, default_alpha(points, opts.alpha_scale));
      return fit_periodic_bspline(closed_alpha_boundary(gather(points, region.members), region.alpha),
                                  opts.spline_ctrl);
    }
  }
  throw PreconditionError("unknown curve kind");
}

namespace {

IndexList collect_inliers(const CurveModel& model, const Points2& pts, double tol) {
  return std::visit(
      [&](const auto& curve) {
        const CurveSampler sampler(curve);
        IndexList inliers;
        for (Index i = 0; i < pts.cols(); ++i) {
          if (sampler.distance(pts.col(i)) <= tol) inliers.push_back(i);
        }
        return inliers;
      },
      model);
}

}  // namespace

CurveFit ransac_fit(const CrossSection2D& section, CurveKind kind, const RansacOptions& opts,
                    std::uint64_t seed) {
  if (opts.sample_size < 1 || opts.iterations < 1 || !(opts.inlier_tol > 0))
    throw PreconditionError("invalid RANSAC options");
  const Points2& pts = section.samples;
  const Index n = pts.cols();
  const Index min_support = minimum_support(kind, opts);
  if (n < min_support)
    throw FitError(std::string(to_string(kind)) + " fit: section has " + std::to_string(n) +
                   " points, need " + std::to_string(min_support));

  // Sections smaller than the sample size are fitted whole; every
  // iteration would then be identical.
  const Index sample = std::min<Index>(opts.sample_size, n);
  const int iterations = sample == n ? 1 : opts.iterations;

  Rng rng(seed);
  IndexList perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});

  std::optional<CurveModel> best_model;
  IndexList best_inliers;
  std::map<std::string, int> failures;

  for (int it = 0; it < iterations; ++it) {
    for (Index k = 0; k < sample; ++k) {
      const auto j = k + static_cast<Index>(uniform_index(rng, static_cast<std::uint64_t>(n - k)));
      std::swap(perm[static_cast<std::size_t>(k)], perm[static_cast<std::size_t>(j)]);
    }
    IndexList chosen(perm.begin(), perm.begin() + sample);
    std::sort(chosen.begin(), chosen.end());
    try {
      CurveModel model = fit_model(gather(pts, chosen), kind, opts);
      IndexList inliers = collect_inliers(model, pts, opts.inlier_tol);
      if (!best_model || inliers.size() > best_inliers.size()) {
        best_model = std::move(model);
        best_inliers = std::move(inliers);
      }
    } catch (const FitError& e) {
      ++failures[e.what()];
    }
  }

  if (!best_model) {
    std::ostringstream msg;
    msg << to_string(kind) << " fit failed in every RANSAC iteration:";
    for (const auto& [cause, count] : failures) msg << " [" << count << "x] " << cause << ';';
    throw FitError(msg.str());
  }
  if (best_inliers.empty()) throw FitError(std::string(to_string(kind)) + " fit: no inliers");

  CurveFit fit;
  fit.kind = kind;
  fit.model = *best_model;
  fit.inliers = best_inliers;
  if (static_cast<Index>(best_inliers.size()) >= min_support) {
    try {
      CurveModel refit = fit_model(gather(pts, best_inliers), kind, opts);
      IndexList inliers = collect_inliers(refit, pts, opts.inlier_tol);
      if (!inliers.empty()) {
        fit.model = std::move(refit);
        fit.inliers = std::move(inliers);
      }
    } catch (const FitError&) {
      // keep the winning sample model
    }
  }
  fit.perimeter = curve_perimeter(fit.model);
  if (!(fit.perimeter > 0) || !std::isfinite(fit.perimeter))
    throw FitError(std::string(to_string(kind)) + " fit: non-positive perimeter");
  return fit;
}

// ---------------------------------------------------------------------------
// Per-segment composition
// ---------------------------------------------------------------------------

SegmentFit fit_all_methods(const TrunkSegment& segment, const PointCloud& cloud,
                           const GroundPlane& plane, const FitOptions& opts, std::uint64_t seed) {
  SegmentFit result;
  result.segment_id = segment.id;
  int min_support = std::numeric_limits<int>::max();
  for (const auto k : kAllCurveKinds) min_support = std::min(min_support, minimum_support(k, opts.ransac));

  IndexList band;
  try {
    band = extract_band(segment, cloud, plane, opts.band_low, opts.band_high, min_support);
  } catch (const InsufficientBandError& e) {
    result.band_points = e.count();
    result.error = e.what();
    return result;
  }
  result.band_points = static_cast<Index>(band.size());

  const Vec3 axis = segment.axis ? *segment.axis : estimate_trunk_axis(segment, cloud, plane);
  const Points3 band_pts = gather(cloud.points, band);
  const Vec3 origin = band_pts.rowwise().mean();
  const CrossSection2D section = project_to_plane(band_pts, axis, origin);

  for (std::size_t m = 0; m < std::size(kAllCurveKinds); ++m) {
    const CurveKind kind = kAllCurveKinds[m];
    MethodOutcome outcome;
    outcome.method = kind;
    try {
      const auto stream = stream_seed(seed, {static_cast<std::uint64_t>(segment.id), m});
      const CurveFit fit = ransac_fit(section, kind, opts.ransac, stream);
      DBHEstimate est;
      est.segment_id = segment.id;
      est.method = kind;
      est.dbh = estimate_dbh(fit);
      est.inlier_ratio = static_cast<double>(fit.inliers.size()) / static_cast<double>(section.size());
      est.band_points = section.size();
      est.position = origin;
      outcome.estimate = est;
    } catch (const Error& e) {
      outcome.error = e.what();
    }
    result.methods.push_back(std::move(outcome));
  }
  return result;
}

}  // namespace dbh
