// Closed planar curve models used for cross-section fitting, with the
// shared arc-length quadrature and point-to-curve distance.
//
// Every model exposes the same parametric interface:
//   period()            parameter period (2*pi for polar models, 1 for splines)
//   point(t), d1(t), d2(t)  position and first/second derivative in t
// so the perimeter and distance code below is model-agnostic.

#ifndef DBH_CURVES_HPP
#define DBH_CURVES_HPP

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <variant>
#include <vector>

namespace dbh {

template <typename Scalar>
using Vec2T = Eigen::Matrix<Scalar, 2, 1>;

// ---------------------------------------------------------------------------
// Ellipse
// ---------------------------------------------------------------------------

/// Center, semi-axes a >= b > 0, and rotation theta in [0, pi) of the major axis.
template <typename Scalar>
struct EllipseParams {
  Vec2T<Scalar> center = Vec2T<Scalar>::Zero();
  Scalar a = 1;
  Scalar b = 1;
  Scalar theta = 0;

  [[nodiscard]] static constexpr Scalar period() { return 2 * std::numbers::pi_v<Scalar>; }

  [[nodiscard]] Vec2T<Scalar> point(Scalar t) const {
    return center + rotate(Vec2T<Scalar>(a * std::cos(t), b * std::sin(t)));
  }
  [[nodiscard]] Vec2T<Scalar> d1(Scalar t) const {
    return rotate(Vec2T<Scalar>(-a * std::sin(t), b * std::cos(t)));
  }
  [[nodiscard]] Vec2T<Scalar> d2(Scalar t) const {
    return rotate(Vec2T<Scalar>(-a * std::cos(t), -b * std::sin(t)));
  }

 private:
  [[nodiscard]] Vec2T<Scalar> rotate(const Vec2T<Scalar>& v) const {
    const Scalar c = std::cos(theta), s = std::sin(theta);
    return {c * v.x() - s * v.y(), s * v.x() + c * v.y()};
  }
};

// ---------------------------------------------------------------------------
// Truncated Fourier series in polar form
// ---------------------------------------------------------------------------

/// r(t) = a0 + sum_i a_i cos(i t) + b_i sin(i t), i = 1..degree, about `center`.
template <typename Scalar>
struct FourierCurve {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Vec2T<Scalar> center = Vec2T<Scalar>::Zero();
  Scalar a0 = 1;
  Vector a;  // cosine coefficients a_1..a_K
  Vector b;  // sine coefficients b_1..b_K

  [[nodiscard]] static constexpr Scalar period() { return 2 * std::numbers::pi_v<Scalar>; }
  [[nodiscard]] int degree() const { return static_cast<int>(a.size()); }

  [[nodiscard]] Scalar radius(Scalar t) const {
    Scalar r = a0;
    for (int i = 0; i < degree(); ++i) {
      const Scalar k = Scalar(i + 1);
      r += a[i] * std::cos(k * t) + b[i] * std::sin(k * t);
    }
    return r;
  }
  [[nodiscard]] Scalar radius_d1(Scalar t) const {
    Scalar r = 0;
    for (int i = 0; i < degree(); ++i) {
      const Scalar k = Scalar(i + 1);
      r += k * (-a[i] * std::sin(k * t) + b[i] * std::cos(k * t));
    }
    return r;
  }
  [[nodiscard]] Scalar radius_d2(Scalar t) const {
    Scalar r = 0;
    for (int i = 0; i < degree(); ++i) {
      const Scalar k = Scalar(i + 1);
      r -= k * k * (a[i] * std::cos(k * t) + b[i] * std::sin(k * t));
    }
    return r;
  }

  [[nodiscard]] Vec2T<Scalar> point(Scalar t) const {
    return center + radius(t) * Vec2T<Scalar>(std::cos(t), std::sin(t));
  }
  [[nodiscard]] Vec2T<Scalar> d1(Scalar t) const {
    const Vec2T<Scalar> u(std::cos(t), std::sin(t)), w(-std::sin(t), std::cos(t));
    return radius_d1(t) * u + radius(t) * w;
  }
  [[nodiscard]] Vec2T<Scalar> d2(Scalar t) const {
    const Vec2T<Scalar> u(std::cos(t), std::sin(t)), w(-std::sin(t), std::cos(t));
    const Scalar r = radius(t), r1 = radius_d1(t), r2 = radius_d2(t);
    return (r2 - r) * u + 2 * r1 * w;
  }

  /// Minimum of r(t) over a uniform grid of `samples` parameters.
  [[nodiscard]] Scalar min_radius(int samples = 1024) const {
    Scalar m = std::numeric_limits<Scalar>::infinity();
    for (int k = 0; k < samples; ++k) m = std::min(m, radius(period() * Scalar(k) / Scalar(samples)));
    return m;
  }
};

// ---------------------------------------------------------------------------
// Closed uniform cubic B-spline
// ---------------------------------------------------------------------------

/// Periodic cubic B-spline on the parameter interval [0, 1) with uniform knots.
template <typename Scalar>
struct PeriodicBSpline {
  Eigen::Matrix<Scalar, 2, Eigen::Dynamic> control;

  [[nodiscard]] static constexpr Scalar period() { return Scalar(1); }
  [[nodiscard]] int size() const { return static_cast<int>(control.cols()); }

  /// Uniform cubic basis weights (and derivatives in the local parameter).
  static void basis(Scalar s, Scalar w[4], Scalar dw[4], Scalar ddw[4]) {
    const Scalar s2 = s * s, s3 = s2 * s, m = 1 - s;
    w[0] = m * m * m / 6;
    w[1] = (3 * s3 - 6 * s2 + 4) / 6;
    w[2] = (-3 * s3 + 3 * s2 + 3 * s + 1) / 6;
    w[3] = s3 / 6;
    dw[0] = -m * m / 2;
    dw[1] = (3 * s2 - 4 * s) / 2;
    dw[2] = (-3 * s2 + 2 * s + 1) / 2;
    dw[3] = s2 / 2;
    ddw[0] = m;
    ddw[1] = 3 * s - 2;
    ddw[2] = -3 * s + 1;
    ddw[3] = s;
  }

  /// Span index (first control point) and local parameter for global t.
  [[nodiscard]] std::pair<int, Scalar> locate(Scalar t) const {
    const int n = size();
    Scalar u = t - std::floor(t);
    Scalar s = u * Scalar(n);
    int k = static_cast<int>(std::floor(s));
    Scalar local = s - Scalar(k);
    if (k >= n) {  // u rounded up to 1
      k = 0;
      local = 0;
    }
    return {k, local};
  }

  [[nodiscard]] Vec2T<Scalar> point(Scalar t) const { return eval(t, 0); }
  [[nodiscard]] Vec2T<Scalar> d1(Scalar t) const { return eval(t, 1); }
  [[nodiscard]] Vec2T<Scalar> d2(Scalar t) const { return eval(t, 2); }

 private:
  [[nodiscard]] Vec2T<Scalar> eval(Scalar t, int order) const {
    const int n = size();
    const auto [k, s] = locate(t);
    Scalar w[4], dw[4], ddw[4];
    basis(s, w, dw, ddw);
    const Scalar* weights = order == 0 ? w : (order == 1 ? dw : ddw);
    const Scalar chain = order == 0 ? Scalar(1) : (order == 1 ? Scalar(n) : Scalar(n) * Scalar(n));
    Vec2T<Scalar> p = Vec2T<Scalar>::Zero();
    for (int j = 0; j < 4; ++j) p += weights[j] * control.col((k + j) % n);
    return chain * p;
  }
};

using Ellipse = EllipseParams<double>;
using Fourier = FourierCurve<double>;
using BSpline = PeriodicBSpline<double>;
using CurveModel = std::variant<Ellipse, BSpline, Fourier>;

// ---------------------------------------------------------------------------
// Arc length and distance
// ---------------------------------------------------------------------------

inline constexpr int kPerimeterSamples = 4096;
inline constexpr int kDistanceSegments = 1024;

/// Arc length by the composite trapezoid rule over `samples` uniform parameters.
///
/// For a periodic integrand the end points coincide, so the rule reduces to
/// an equal-weight sum.
template <typename Curve>
[[nodiscard]] auto curve_perimeter(const Curve& curve, int samples = kPerimeterSamples) {
  using Scalar = decltype(curve.period());
  const Scalar h = curve.period() / Scalar(samples);
  Scalar sum = 0;
  for (int k = 0; k < samples; ++k) sum += curve.d1(h * Scalar(k)).norm();
  return sum * h;
}

[[nodiscard]] inline double curve_perimeter(const CurveModel& model, int samples = kPerimeterSamples) {
  return std::visit([samples](const auto& c) { return curve_perimeter(c, samples); }, model);
}

/// Dense polyline sampling of a curve for repeated distance queries.
template <typename Curve>
class CurveSampler {
 public:
  using Scalar = double;

  explicit CurveSampler(const Curve& curve, int segments = kDistanceSegments)
      : curve_(curve), step_(curve.period() / segments) {
    xs_.resize(static_cast<std::size_t>(segments) + 1);
    ys_.resize(xs_.size());
    for (int k = 0; k <= segments; ++k) {
      const Vec2T<Scalar> p = curve.point(step_ * k);
      xs_[static_cast<std::size_t>(k)] = p.x();
      ys_[static_cast<std::size_t>(k)] = p.y();
    }
  }

  /// Distance to the curve: nearest polyline segment, then one Newton step
  /// on that segment's parameter for (C(t) - p) . C'(t) = 0.
  [[nodiscard]] Scalar distance(const Vec2T<Scalar>& p) const {
    const std::size_t segs = xs_.size() - 1;
    Scalar best = std::numeric_limits<Scalar>::infinity();
    std::size_t best_seg = 0;
    Scalar best_s = 0;
    for (std::size_t k = 0; k < segs; ++k) {
      const Scalar ax = xs_[k], ay = ys_[k];
      const Scalar dx = xs_[k + 1] - ax, dy = ys_[k + 1] - ay;
      const Scalar px = p.x() - ax, py = p.y() - ay;
      const Scalar len2 = dx * dx + dy * dy;
      Scalar s = len2 > 0 ? (px * dx + py * dy) / len2 : 0;
      s = std::clamp(s, Scalar(0), Scalar(1));
      const Scalar ex = px - s * dx, ey = py - s * dy;
      const Scalar d2 = ex * ex + ey * ey;
      if (d2 < best) {
        best = d2;
        best_seg = k;
        best_s = s;
      }
    }
    const Scalar polyline = std::sqrt(best);
    const Scalar t0 = step_ * (Scalar(best_seg) + best_s);
    const Vec2T<Scalar> c = curve_.point(t0) - p;
    const Vec2T<Scalar> c1 = curve_.d1(t0);
    const Vec2T<Scalar> c2 = curve_.d2(t0);
    const Scalar g = c.dot(c1);
    const Scalar dg = c1.squaredNorm() + c.dot(c2);
    if (!(dg > 0)) return polyline;
    const Scalar t1 = t0 - g / dg;
    if (!std::isfinite(t1) || std::abs(t1 - t0) > step_) return polyline;
    return (curve_.point(t1) - p).norm();
  }

  [[nodiscard]] const Curve& curve() const { return curve_; }

 private:
  Curve curve_;
  Scalar step_;
  std::vector<Scalar> xs_, ys_;
};

template <typename Curve>
[[nodiscard]] double point_curve_distance(const Vec2T<double>& p, const Curve& curve) {
  return CurveSampler<Curve>(curve).distance(p);
}

[[nodiscard]] inline double point_curve_distance(const Vec2T<double>& p, const CurveModel& model) {
  return std::visit([&p](const auto& c) { return point_curve_distance(p, c); }, model);
}

}  // namespace dbh

#endif  // DBH_CURVES_HPP
