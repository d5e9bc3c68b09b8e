// Breast-height cross-section extraction and RANSAC-wrapped closed-curve
// fitting (ellipse, periodic cubic B-spline, truncated Fourier series).

#ifndef DBH_CROSS_SECTION_HPP
#define DBH_CROSS_SECTION_HPP

#include "dbh/core.hpp"
#include "dbh/curves.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dbh {

enum class CurveKind { ellipse, bspline, fourier };

inline constexpr CurveKind kAllCurveKinds[] = {CurveKind::ellipse, CurveKind::bspline,
                                               CurveKind::fourier};

[[nodiscard]] std::string_view to_string(CurveKind kind);
/// Throws ParseError on unknown names.
[[nodiscard]] CurveKind parse_curve_kind(std::string_view name);

/// Band points expressed in a plane orthogonal to the trunk axis.
struct CrossSection2D {
  Vec3 origin = Vec3::Zero();
  Vec3 axis = Vec3::UnitZ();
  Vec3 e1 = Vec3::UnitX();
  Vec3 e2 = Vec3::UnitY();
  Points2 samples;

  [[nodiscard]] Index size() const { return samples.cols(); }
};

struct CurveFit {
  CurveKind kind = CurveKind::fourier;
  CurveModel model;
  IndexList inliers;  // column indices into the section samples
  double perimeter = 0.0;
};

struct DBHEstimate {
  int segment_id = 0;
  CurveKind method = CurveKind::fourier;
  double dbh = 0.0;  // meters
  double inlier_ratio = 0.0;
  Index band_points = 0;
  Vec3 position = Vec3::Zero();  // band centroid
};

/// Result of one method on one segment; exactly one of estimate / error is set.
struct MethodOutcome {
  CurveKind method = CurveKind::fourier;
  std::optional<DBHEstimate> estimate;
  std::string error;
};

struct SegmentFit {
  int segment_id = 0;
  Index band_points = 0;
  std::vector<MethodOutcome> methods;  // empty when `error` is set
  std::string error;
};

struct RansacOptions {
  int sample_size = 50;
  double inlier_tol = 0.05;
  int iterations = 100;
  int fourier_degree = 2;
  bool fourier_circle_center = true;  // polar center: LSQ circle center, else centroid
  int spline_ctrl = 12;
  double alpha_scale = 3.0;  // alpha = scale * median nearest-neighbour spacing
};

struct FitOptions {
  double band_low = 1.22;
  double band_high = 1.52;
  RansacOptions ransac;
};

/// The band had fewer points than any model can be fitted to.
class InsufficientBandError : public FitError {
 public:
  InsufficientBandError(Index count, Index required);
  [[nodiscard]] Index count() const noexcept { return count_; }

 private:
  Index count_;
};

/// Minimum number of section points each model needs.
[[nodiscard]] int minimum_support(CurveKind kind, const RansacOptions& opts);

/// Principal direction of the segment, oriented up; ground normal when the
/// segment is degenerate or tilts more than 45 degrees.
[[nodiscard]] Vec3 estimate_trunk_axis(const TrunkSegment& segment, const PointCloud& cloud,
                                       const GroundPlane& plane);

/// Segment indices with signed height in [low, high] (inclusive).
[[nodiscard]] IndexList extract_band(const TrunkSegment& segment, const PointCloud& cloud,
                                     const GroundPlane& plane, double low = 1.22,
                                     double high = 1.52, Index min_support = 5);

/// Projects points onto the plane through origin orthogonal to axis.
[[nodiscard]] CrossSection2D project_to_plane(const Points3& points, const Vec3& axis,
                                              const Vec3& origin);

/// Direct least-squares ellipse fit with the 4ac - b^2 = 1 constraint,
/// solved through the reduced 3x3 eigenproblem on normalized coordinates.
[[nodiscard]] Ellipse fit_ellipse_lsq(const Points2& points);

/// Converts conic coefficients (A x^2 + B xy + C y^2 + D x + E y + F = 0)
/// to center / semi-axes / rotation. Throws FitError for non-ellipses.
[[nodiscard]] Ellipse conic_to_ellipse(const Eigen::Matrix<double, 6, 1>& conic);

/// Outer boundary of the alpha-shape as a closed counterclockwise polyline
/// (first point not repeated at the end).
[[nodiscard]] Points2 alpha_shape_boundary(const Points2& points, double alpha);

/// scale x median nearest-neighbour distance of the points.
[[nodiscard]] double default_alpha(const Points2& points, double scale = 3.0);

struct AlphaRegion {
  double alpha = 0.0;
  IndexList members;  // ascending point indices of the dominant component
};

/// Smallest alpha >= min_alpha at which one connected component of the
/// union of radius-alpha disks holds at least `coverage` of the points,
/// together with that component.
[[nodiscard]] AlphaRegion connected_alpha_region(const Points2& points, double min_alpha,
                                                 double coverage = 0.9);

/// Alpha-shape boundary that visits no vertex twice, growing alpha by 25%
/// per step (at most max_growth steps) until the loop closes on itself.
[[nodiscard]] Points2 closed_alpha_boundary(const Points2& points, double alpha, int max_growth = 40);

/// Least-squares closed uniform cubic B-spline through a closed polyline,
/// chord-length parameterized.
[[nodiscard]] BSpline fit_periodic_bspline(const Points2& boundary, int n_ctrl = 12);

/// Center of the algebraic (Kasa) least-squares circle through the points.
/// Throws FitError when the points are collinear or fewer than three.
[[nodiscard]] Vec2 circle_center_lsq(const Points2& points);

/// Linear least-squares polar Fourier fit about `center`.
[[nodiscard]] Fourier fit_fourier(const Points2& points, const Vec2& center, int degree = 2);

/// Fits one model kind to all given points (no robustness). The Fourier
/// polar center is the least-squares circle center (or the centroid when
/// fourier_circle_center is off); the spline runs through the alpha-shape.
[[nodiscard]] CurveModel fit_model(const Points2& points, CurveKind kind, const RansacOptions& opts);

[[nodiscard]] CurveFit ransac_fit(const CrossSection2D& section, CurveKind kind,
                                  const RansacOptions& opts, std::uint64_t seed);

[[nodiscard]] inline double estimate_dbh(const CurveFit& fit) {
  return fit.perimeter / std::numbers::pi;
}

/// Band extraction, projection and all three RANSAC fits for one segment.
/// Never throws for per-method failures; they are recorded in the outcome.
[[nodiscard]] SegmentFit fit_all_methods(const TrunkSegment& segment, const PointCloud& cloud,
                                         const GroundPlane& plane, const FitOptions& opts,
                                         std::uint64_t seed);

}  // namespace dbh

#endif  // DBH_CROSS_SECTION_HPP
