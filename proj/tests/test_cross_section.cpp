#include "dbh/cross_section.hpp"
#include "dbh/random.hpp"
#include "dbh/synthetic.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <Eigen/Geometry>

#include <numbers>

using namespace dbh;

namespace {

constexpr double kPi = std::numbers::pi;

Points2 circle(int n, double r, const Vec2& c = Vec2::Zero(), double t0 = 0.0, double span = 2 * kPi) {
  Points2 p(2, n);
  const bool closed = span >= 2 * kPi;
  for (int i = 0; i < n; ++i) {
    const double t = t0 + span * i / (closed ? n : n - 1);
    p.col(i) = c + r * Vec2(std::cos(t), std::sin(t));
  }
  return p;
}

Points2 fourier_points(const Fourier& f, int n) {
  Points2 p(2, n);
  for (int i = 0; i < n; ++i) p.col(i) = f.point(2 * kPi * i / n);
  return p;
}

Fourier make_fourier(double a0, double a1, double a2, double b1, double b2, const Vec2& c = Vec2::Zero()) {
  Fourier f;
  f.center = c;
  f.a0 = a0;
  f.a = Eigen::Vector2d(a1, a2);
  f.b = Eigen::Vector2d(b1, b2);
  return f;
}

CrossSection2D section_of(const Points2& p) {
  CrossSection2D s;
  s.samples = p;
  return s;
}

PointCloud cloud_of(const Points3& p) {
  PointCloud c;
  c.points = p;
  return c;
}

TrunkSegment all_of(const PointCloud& c) {
  TrunkSegment s;
  for (Index i = 0; i < c.size(); ++i) s.indices.push_back(i);
  return s;
}

double angle_deg(const Vec3& a, const Vec3& b) {
  return std::acos(std::clamp(std::abs(a.normalized().dot(b.normalized())), 0.0, 1.0)) * 180.0 / kPi;
}

Eigen::Matrix2d rot2(double a) {
  Eigen::Matrix2d R;
  R << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
  return R;
}

}  // namespace

TEST_SUITE("cross_section") {
  TEST_CASE("curve kind names") {
    for (const CurveKind k : kAllCurveKinds) CHECK(parse_curve_kind(to_string(k)) == k);
    CHECK_THROWS_AS((void)parse_curve_kind("circle"), ParseError);
  }

  TEST_CASE("estimate_trunk_axis") {
    SyntheticTrunkSpec spec;
    spec.a0 = 0.2;
    spec.height = 3.0;
    spec.sigma = 0.003;
    const PointCloud upright = cloud_of(generate_trunk(spec));
    CHECK(angle_deg(estimate_trunk_axis(all_of(upright), upright, GroundPlane{}), Vec3::UnitZ()) < 2.0);

    spec.axis = Vec3(std::sin(20 * kPi / 180), 0, std::cos(20 * kPi / 180));
    const PointCloud tilted = cloud_of(generate_trunk(spec));
    const Vec3 axis = estimate_trunk_axis(all_of(tilted), tilted, GroundPlane{});
    CHECK(angle_deg(axis, spec.axis) < 2.0);
    CHECK(axis.z() > 0);

    Rng rng(1);
    Points3 disk(3, 200);
    for (Index i = 0; i < 200; ++i) disk.col(i) = Vec3(uniform(rng, -1, 1), uniform(rng, -1, 1), 1.3);
    const PointCloud flat = cloud_of(disk);
    GroundPlane g;
    g.normal = Vec3(0.1, 0, 1).normalized();
    CHECK((estimate_trunk_axis(all_of(flat), flat, g) - g.normal).norm() < 1e-12);
  }

  TEST_CASE("extract_band") {
    Points3 p = Points3::Zero(3, 5);
    p.row(2) << 1.0, 1.3, 1.5, 1.6, 1.22;
    const PointCloud c = cloud_of(p);
    CHECK(extract_band(all_of(c), c, GroundPlane{}, 1.22, 1.52, 1) == IndexList{1, 2, 4});
    Points3 low = Points3::Zero(3, 10);
    low.row(2).setConstant(1.0);
    const PointCloud lc = cloud_of(low);
    CHECK_THROWS_AS((void)extract_band(all_of(lc), lc, GroundPlane{}), InsufficientBandError);
  }

  TEST_CASE("project_to_plane") {
    Points3 ring(3, 64);
    for (int i = 0; i < 64; ++i) ring.col(i) = Vec3(0.3 * std::cos(i * 0.1), 0.3 * std::sin(i * 0.1), 1.3);
    const CrossSection2D s = project_to_plane(ring, Vec3::UnitZ(), Vec3(0, 0, 1.3));
    for (Index i = 0; i < s.size(); ++i) CHECK(s.samples.col(i).norm() == doctest::Approx(0.3));

    Points3 one(3, 1);
    one.col(0) = Vec3(1, 2, 3);
    CHECK(project_to_plane(one, Vec3(0, 1, 1), Vec3(1, 2, 3)).samples.col(0).norm() < 1e-15);

    // Tilted ring projected along its own axis keeps its true radius.
    const Vec3 axis = Vec3(0.3, 0.1, 1.0).normalized();
    const auto [u, v] = orthonormal_frame(axis);
    Points3 tilted(3, 50);
    for (int i = 0; i < 50; ++i) tilted.col(i) = Vec3(2, 1, 1.3) + 0.25 * (std::cos(i * 0.2) * u + std::sin(i * 0.2) * v);
    const CrossSection2D t = project_to_plane(tilted, axis, Vec3(2, 1, 1.3));
    for (Index i = 0; i < t.size(); ++i) CHECK(t.samples.col(i).norm() == doctest::Approx(0.25).epsilon(1e-12));
  }

  TEST_CASE("fit_ellipse_lsq") {
    const Ellipse c = fit_ellipse_lsq(circle(100, 0.25, Vec2(0.1, -0.2)));
    CHECK(c.a == doctest::Approx(0.25).epsilon(1e-6));
    CHECK(c.b == doctest::Approx(0.25).epsilon(1e-6));
    CHECK((c.center - Vec2(0.1, -0.2)).norm() < 1e-6);

    Points2 e(2, 80);
    for (int i = 0; i < 80; ++i) e.col(i) = Vec2(0.4 * std::cos(i * 2 * kPi / 80), 0.2 * std::sin(i * 2 * kPi / 80));
    const Ellipse f = fit_ellipse_lsq(e);
    CHECK(f.a == doctest::Approx(0.4).epsilon(1e-6));
    CHECK(f.b == doctest::Approx(0.2).epsilon(1e-6));
    CHECK(std::min(f.theta, kPi - f.theta) < 1e-6);

    Points2 line(2, 6);
    for (int i = 0; i < 6; ++i) line.col(i) = Vec2(i, 2.0 * i);
    CHECK_THROWS_AS((void)fit_ellipse_lsq(line), FitError);
  }

  TEST_CASE("conic_to_ellipse rejects hyperbolas") {
    Eigen::Matrix<double, 6, 1> hyperbola;
    hyperbola << 1, 0, -1, 0, 0, -1;
    CHECK_THROWS_AS((void)conic_to_ellipse(hyperbola), FitError);
  }

  TEST_CASE("alpha shapes") {
    Points2 tri(2, 3);
    tri << 0, 1, 0, 0, 0, 1;
    const Points2 b = alpha_shape_boundary(tri, 10.0);
    CHECK(b.cols() == 3);

    const Points2 ring = circle(500, 1.0);
    const double spacing = 2 * kPi / 500;
    const Points2 loop = alpha_shape_boundary(ring, 2 * spacing);
    CHECK(loop.cols() == 500);
    double area = 0;  // shoelace; positive for counterclockwise
    for (Index i = 0; i < loop.cols(); ++i) {
      const Vec2 p = loop.col(i), q = loop.col((i + 1) % loop.cols());
      area += p.x() * q.y() - q.x() * p.y();
    }
    CHECK(area > 0);

    CHECK_THROWS_AS((void)alpha_shape_boundary(ring, 0.1 * spacing), FitError);
    CHECK(default_alpha(ring) == doctest::Approx(3 * 2 * std::sin(kPi / 500)).epsilon(1e-9));
  }

  TEST_CASE("connected_alpha_region ignores stray points") {
    Points2 p(2, 110);
    p.leftCols(100) = circle(100, 0.3);
    for (int i = 0; i < 10; ++i) p.col(100 + i) = Vec2(2.0 + i, 5.0);
    const AlphaRegion r = connected_alpha_region(p, 0.01);
    CHECK(r.members.size() == 100);
    CHECK(r.alpha < 0.1);
    const Points2 loop = closed_alpha_boundary(gather(p, r.members), r.alpha);
    CHECK(loop.cols() == 100);
  }

  TEST_CASE("fit_periodic_bspline") {
    const BSpline s = fit_periodic_bspline(circle(200, 0.3), 12);
    double worst = 0;
    for (int i = 0; i < 2000; ++i) worst = std::max(worst, std::abs(s.point(i / 2000.0).norm() - 0.3));
    CHECK(worst < 1e-3);
    CHECK((s.point(0.0) - s.point(1.0)).norm() < 1e-12);
    CHECK(curve_perimeter(s) == doctest::Approx(2 * kPi * 0.3).epsilon(1e-3));
    CHECK_THROWS_AS((void)fit_periodic_bspline(Points2::Ones(2, 30), 12), FitError);
  }

  TEST_CASE("fit_fourier") {
    const Fourier unit = fit_fourier(circle(90, 1.0, Vec2(3, 4)), Vec2(3, 4));
    CHECK(unit.a0 == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(unit.a.norm() < 1e-9);
    CHECK(unit.b.norm() < 1e-9);

    const Fourier truth = make_fourier(0.3, 0.0, 0.03, 0.0, 0.0);
    const Fourier rec = fit_fourier(fourier_points(truth, 100), Vec2::Zero());
    CHECK(rec.a0 == doctest::Approx(0.3).epsilon(1e-6));
    CHECK(std::abs(rec.a(1) - 0.03) < 1e-6);
    CHECK(std::abs(rec.a(0)) < 1e-6);

    const Points2 half = circle(100, 0.25, Vec2::Zero(), 0.0, kPi);
    CHECK(fit_fourier(half, circle_center_lsq(half)).a0 == doctest::Approx(0.25).epsilon(0.02));

    Points2 sector(2, 20);
    for (int i = 0; i < 20; ++i) sector.col(i) = (1.0 + 0.01 * i) * Vec2(std::cos(i * 0.001), std::sin(i * 0.001));
    CHECK_THROWS_AS((void)fit_fourier(sector, Vec2::Zero()), FitError);
    Points2 at_center = circle(20, 1.0);
    at_center.col(3).setZero();
    CHECK_THROWS_AS((void)fit_fourier(at_center, Vec2::Zero()), FitError);
  }

  TEST_CASE("circle_center_lsq") {
    const Points2 arc = circle(40, 0.4, Vec2(-1, 2), 0.3, 1.5);
    CHECK((circle_center_lsq(arc) - Vec2(-1, 2)).norm() < 1e-9);
    Points2 line(2, 5);
    for (int i = 0; i < 5; ++i) line.col(i) = Vec2(i, i);
    CHECK_THROWS_AS((void)circle_center_lsq(line), FitError);
  }

  TEST_CASE("curve_perimeter against the Simpson oracle") {
    Ellipse unit;
    CHECK(curve_perimeter(unit) == doctest::Approx(2 * kPi).epsilon(1e-9));
    Ellipse e;
    e.a = 2;
    e.b = 1;
    CHECK(std::abs(curve_perimeter(e) - 9.688448) < 1e-4);
    CHECK(std::abs(curve_perimeter(e) - oracle::ellipse_perimeter(2, 1)) < 1e-4);

    SyntheticTrunkSpec spec;
    spec.a0 = 1.0;
    spec.a = Eigen::Vector2d(0.0, 0.1);
    CHECK(std::abs(curve_perimeter(spec.profile()) - oracle_perimeter(spec)) < 1e-4);
  }

  TEST_CASE("point_curve_distance") {
    const Fourier c = make_fourier(1.0, 0, 0, 0, 0);
    CHECK(point_curve_distance(Vec2(std::cos(0.7), std::sin(0.7)), c) <= 1e-4);
    CHECK(point_curve_distance(Vec2(0, 1.05), c) == doctest::Approx(0.05).epsilon(1e-4));
    const Fourier small = make_fourier(0.3, 0, 0, 0, 0, Vec2(1, 1));
    CHECK(std::abs(point_curve_distance(Vec2(1, 1), small) - 0.3) < 1e-4);
    Ellipse e;
    e.a = 0.4;
    e.b = 0.2;
    CHECK(point_curve_distance(Vec2(0, 0.5), e) == doctest::Approx(0.3).epsilon(1e-6));
  }

  TEST_CASE("ransac_fit") {
    SUBCASE("clean circle") {
      const CurveFit f = ransac_fit(section_of(circle(500, 0.25)), CurveKind::fourier, RansacOptions{}, 1);
      CHECK(f.inliers.size() == 500);
      CHECK(std::abs(estimate_dbh(f) - 0.5) < 1e-3);
    }
    SUBCASE("contaminated circle") {
      Rng rng(9);
      Points2 p(2, 714);
      p.leftCols(500) = circle(500, 0.25);
      for (Index i = 500; i < 714; ++i) p.col(i) = Vec2(uniform(rng, -0.3, 0.3), uniform(rng, -0.3, 0.3));
      const RansacOptions opts;
      const CurveFit f = ransac_fit(section_of(p), CurveKind::fourier, opts, 2);
      CHECK(std::abs(estimate_dbh(f) - 0.5) / 0.5 < 0.02);
      // Outliers well outside the tolerance band are rejected.
      int far = 0, kept = 0;
      for (Index i = 500; i < 714; ++i) {
        if (std::abs(p.col(i).norm() - 0.25) <= opts.inlier_tol + 0.01) continue;
        ++far;
        kept += std::find(f.inliers.begin(), f.inliers.end(), i) != f.inliers.end();
      }
      CHECK(far > 50);
      CHECK(kept == 0);
    }
    SUBCASE("small sections use every point") {
      const CurveFit f = ransac_fit(section_of(circle(40, 0.2)), CurveKind::ellipse, RansacOptions{}, 3);
      CHECK(f.inliers.size() == 40);
      CHECK(estimate_dbh(f) == doctest::Approx(0.4).epsilon(1e-6));
    }
    SUBCASE("bit reproducible") {
      Rng rng(4);
      Points2 p = circle(300, 0.3);
      for (Index i = 0; i < p.cols(); ++i) p.col(i) += 0.01 * Vec2(standard_normal(rng), standard_normal(rng));
      for (const CurveKind k : kAllCurveKinds) {
        const CurveFit a = ransac_fit(section_of(p), k, RansacOptions{}, 77);
        const CurveFit b = ransac_fit(section_of(p), k, RansacOptions{}, 77);
        CHECK(a.perimeter == b.perimeter);
        CHECK(a.inliers == b.inliers);
      }
    }
    SUBCASE("too few points") {
      CHECK_THROWS_AS((void)ransac_fit(section_of(circle(4, 0.2)), CurveKind::fourier, RansacOptions{}, 1), FitError);
    }
  }

  TEST_CASE("estimate_dbh divides the perimeter by pi") {
    CurveFit f;
    f.perimeter = 2 * kPi * 0.25;
    CHECK(estimate_dbh(f) == doctest::Approx(0.5));
    f.perimeter = 9.688448;
    CHECK(std::abs(estimate_dbh(f) - 3.0840) < 1e-3);
  }

  TEST_CASE("rigid and scale equivariance of every model") {
    Rng rng(12);
    const Fourier shape = make_fourier(0.3, 0.01, 0.02, -0.01, 0.015);
    Points2 base = fourier_points(shape, 400);
    for (Index i = 0; i < base.cols(); ++i) base.col(i) += 0.002 * Vec2(standard_normal(rng), standard_normal(rng));
    for (const CurveKind k : kAllCurveKinds) {
      const double p0 = curve_perimeter(fit_model(base, k, RansacOptions{}));
      for (int trial = 0; trial < 5; ++trial) {
        const Eigen::Matrix2d R = rot2(uniform(rng, 0, 2 * kPi));
        const Vec2 t(uniform(rng, -10, 10), uniform(rng, -10, 10));
        const Points2 moved = (R * base).colwise() + t;
        CHECK(std::abs(curve_perimeter(fit_model(moved, k, RansacOptions{})) - p0) < 1e-6);
      }
      const double s = 2.5;
      RansacOptions scaled_opts;
      CHECK(curve_perimeter(fit_model(s * base, k, scaled_opts)) == doctest::Approx(s * p0).epsilon(1e-6));
    }
  }

  TEST_CASE("fitted Fourier curves keep a positive radius") {
    Rng rng(13);
    for (int trial = 0; trial < 20; ++trial) {
      const double a0 = uniform(rng, 0.1, 0.5);
      const Fourier truth = make_fourier(a0, uniform(rng, -0.1, 0.1) * a0, uniform(rng, -0.1, 0.1) * a0,
                                         uniform(rng, -0.1, 0.1) * a0, uniform(rng, -0.1, 0.1) * a0);
      Points2 p = fourier_points(truth, 200);
      for (Index i = 0; i < p.cols(); ++i) p.col(i) += 0.005 * Vec2(standard_normal(rng), standard_normal(rng));
      const CurveFit f = ransac_fit(section_of(p), CurveKind::fourier, RansacOptions{}, static_cast<std::uint64_t>(trial));
      CHECK(std::get<Fourier>(f.model).min_radius() > 0);
    }
  }

  TEST_CASE("fit_all_methods") {
    SyntheticTrunkSpec spec;
    spec.a0 = 0.2;
    spec.height = 2.0;
    spec.sigma = 0.002;
    const PointCloud c = cloud_of(generate_trunk(spec));
    TrunkSegment seg = all_of(c);
    seg.id = 4;
    const SegmentFit fit = fit_all_methods(seg, c, GroundPlane{}, FitOptions{}, 5);
    CHECK(fit.error.empty());
    REQUIRE(fit.methods.size() == 3);
    for (const auto& m : fit.methods) {
      REQUIRE(m.estimate.has_value());
      CHECK(m.estimate->segment_id == 4);
      CHECK(std::abs(m.estimate->dbh - 0.4) / 0.4 < 0.02);
      CHECK(std::abs(m.estimate->position.z() - 1.37) < 0.02);
    }

    Points3 four(3, 4);
    four << 0.1, 0, -0.1, 0, 0, 0.1, 0, -0.1, 1.3, 1.3, 1.3, 1.3;
    const PointCloud tiny = cloud_of(four);
    const SegmentFit bad = fit_all_methods(all_of(tiny), tiny, GroundPlane{}, FitOptions{}, 5);
    CHECK_FALSE(bad.error.empty());
    CHECK(bad.methods.empty());
    CHECK(bad.band_points == 4);
  }
}
