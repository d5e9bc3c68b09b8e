#include "dbh/core.hpp"
#include "dbh/random.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace dbh {

void PointCloud::validate() const {
  if (!points.allFinite()) throw PreconditionError("point cloud contains non-finite coordinates");
  if (has_normals()) {
    if (normals.cols() != points.cols())
      throw PreconditionError("normals length differs from point count");
    for (Index i = 0; i < normals.cols(); ++i) {
      if (std::abs(normals.col(i).norm() - 1.0) > 1e-6)
        throw PreconditionError("normal " + std::to_string(i) + " is not unit length");
    }
  }
  if (has_colors() && colors.cols() != points.cols())
    throw PreconditionError("colors length differs from point count");
}

EquirectMask::EquirectMask(int width, int height) : width_(width), height_(height) {
  if (width < 2 || height < 2) throw PreconditionError("mask dimensions must be at least 2x2");
  cells_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0);
}

std::size_t EquirectMask::count() const {
  return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), std::uint8_t{1}));
}

SimilarityTransform SimilarityTransform::inverse() const {
  SimilarityTransform inv;
  inv.scale = 1.0 / scale;
  inv.rotation = rotation.transpose();
  inv.translation = -inv.scale * (inv.rotation * translation);
  return inv;
}

Points3 apply_similarity(const SimilarityTransform& T, const Points3& points) {
  Points3 out = T.scale * (T.rotation * points);
  out.colwise() += T.translation;
  return out;
}

bool is_rotation(const Mat3& R, double tol) {
  if (!R.allFinite()) return false;
  const double ortho = (R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tol && std::abs(R.determinant() - 1.0) <= tol;
}

Mat3 orthonormalize(const Mat3& R) {
  Eigen::JacobiSVD<Mat3> svd(R, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().transpose();
}

std::pair<Vec3, Vec3> orthonormal_frame(const Vec3& axis) {
  const Vec3 a = axis.normalized();
  int best = 0;
  for (int k = 1; k < 3; ++k) {
    if (std::abs(a[k]) < std::abs(a[best])) best = k;
  }
  const Vec3 e = Vec3::Unit(best);
  const Vec3 e1 = (e - e.dot(a) * a).normalized();
  const Vec3 e2 = a.cross(e1);
  return {e1, e2};
}

double standard_normal(Rng& rng) {
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace dbh
