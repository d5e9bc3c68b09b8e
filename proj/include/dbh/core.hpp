// Core domain types shared by every stage of the DBH pipeline.
//
// All lengths are meters. The world frame is right-handed with no fixed up
// axis; "up" always comes from an estimated GroundPlane.

#ifndef DBH_CORE_HPP
#define DBH_CORE_HPP

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dbh {

using Index = Eigen::Index;
using IndexList = std::vector<Index>;

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Points2 = Eigen::Matrix2Xd;
using Points3 = Eigen::Matrix3Xd;
using Colors = Eigen::Matrix<std::uint8_t, 3, Eigen::Dynamic>;

template <typename Scalar>
using Point3T = Eigen::Matrix<Scalar, 3, 1>;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or unsupported input file.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A model could not be fitted to the given data.
class FitError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition was violated by the caller.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// Positions with optional per-point normals and colors.
///
/// Optional arrays, when non-empty, have exactly one column per point.
struct PointCloud {
  Points3 points;
  Points3 normals;  // empty when absent
  Colors colors;    // empty when absent

  [[nodiscard]] Index size() const noexcept { return points.cols(); }
  [[nodiscard]] bool empty() const noexcept { return points.cols() == 0; }
  [[nodiscard]] bool has_normals() const noexcept { return normals.cols() != 0; }
  [[nodiscard]] bool has_colors() const noexcept { return colors.cols() != 0; }

  /// Throws PreconditionError if any invariant is broken.
  void validate() const;
};

/// Camera pose (R, t): camera-frame direction d maps to world as R d + t.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
};

/// Binary equirectangular mask, row-major, H rows by W columns.
class EquirectMask {
 public:
  EquirectMask() = default;
  EquirectMask(int width, int height);

  [[nodiscard]] int width() const noexcept { return width_; }
  [[nodiscard]] int height() const noexcept { return height_; }

  [[nodiscard]] bool at(int u, int v) const {
    return cells_[static_cast<std::size_t>(v) * width_ + u] != 0;
  }
  void set(int u, int v, bool value) {
    cells_[static_cast<std::size_t>(v) * width_ + u] = value ? 1 : 0;
  }
  [[nodiscard]] std::size_t count() const;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> cells_;
};

struct PoseView {
  std::string frame_id;
  Pose pose;
  EquirectMask mask;
};

/// Plane { x : normal . x = offset } with normal pointing "up".
struct GroundPlane {
  Vec3 normal = Vec3::UnitZ();
  double offset = 0.0;
};

struct TrunkSegment {
  int id = 0;
  IndexList indices;
  std::optional<Vec3> axis;
};

/// x -> scale * rotation * x + translation
struct SimilarityTransform {
  double scale = 1.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  [[nodiscard]] static SimilarityTransform identity() { return {}; }
  [[nodiscard]] SimilarityTransform inverse() const;
};

// ---------------------------------------------------------------------------
// Elementary geometry
// ---------------------------------------------------------------------------

/// Signed distance above the plane; positive on the "up" side.
template <typename Derived>
[[nodiscard]] inline double signed_height(const Eigen::MatrixBase<Derived>& p,
                                          const GroundPlane& plane) {
  return plane.normal.dot(p) - plane.offset;
}

template <typename Derived>
[[nodiscard]] inline Vec3 apply_similarity(const SimilarityTransform& T,
                                           const Eigen::MatrixBase<Derived>& p) {
  return T.scale * (T.rotation * p) + T.translation;
}

/// Column-wise transform of a whole point matrix.
[[nodiscard]] Points3 apply_similarity(const SimilarityTransform& T, const Points3& points);

/// True when R is orthonormal with det +1 within tol.
[[nodiscard]] bool is_rotation(const Mat3& R, double tol = 1e-9);

/// Nearest rotation in the Frobenius sense (SVD projection). Does not fix reflections.
[[nodiscard]] Mat3 orthonormalize(const Mat3& R);

/// Deterministic orthonormal basis (e1, e2) of the plane orthogonal to axis.
///
/// e1 is the normalized rejection from axis of the canonical basis vector
/// least aligned with it (lowest index on ties); e2 = axis x e1.
[[nodiscard]] std::pair<Vec3, Vec3> orthonormal_frame(const Vec3& axis);

/// Gathers the given columns into a new matrix.
template <typename Scalar, int Rows>
[[nodiscard]] Eigen::Matrix<Scalar, Rows, Eigen::Dynamic> gather(
    const Eigen::Matrix<Scalar, Rows, Eigen::Dynamic>& points, const IndexList& idx) {
  Eigen::Matrix<Scalar, Rows, Eigen::Dynamic> out(points.rows(), static_cast<Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out.col(static_cast<Index>(i)) = points.col(idx[i]);
  return out;
}

}  // namespace dbh

#endif  // DBH_CORE_HPP
