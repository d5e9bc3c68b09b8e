#include "dbh/projection.hpp"

#include "dbh/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace dbh {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr Index kBlock = 4096;
}  // namespace

Pixel direction_to_pixel(const Vec3& d, int height, int width, bool flip_v) {
  if (height < 2 || width < 2) throw PreconditionError("image dimensions must be at least 2x2");
  if (std::abs(d.norm() - 1.0) > 1e-6) throw PreconditionError("direction is not unit length");
  const double lon = std::atan2(d.x(), d.z());
  const double lat = std::asin(std::clamp(d.y(), -1.0, 1.0));
  const int u = static_cast<int>(std::floor((lon / (2 * kPi) + 0.5) * width));
  int v = static_cast<int>(std::floor((lat / kPi + 0.5) * height));
  Pixel px{std::clamp(u, 0, width - 1), std::clamp(v, 0, height - 1)};
  if (flip_v) px.v = height - 1 - px.v;
  return px;
}

Vec3 pixel_center_direction(Pixel px, int height, int width, bool flip_v) {
  const int v = flip_v ? height - 1 - px.v : px.v;
  const double lon = ((px.u + 0.5) / width - 0.5) * 2 * kPi;
  const double lat = ((v + 0.5) / height - 0.5) * kPi;
  return {std::cos(lat) * std::sin(lon), std::sin(lat), std::cos(lat) * std::cos(lon)};
}

std::optional<Pixel> project_point(const Vec3& p, const Pose& pose, int height, int width,
                                   bool flip_v) {
  const Vec3 diff = p - pose.translation;
  const double dist = diff.norm();
  if (dist < 1e-6) return std::nullopt;
  const Vec3 d = pose.rotation.transpose() * diff / dist;
  return direction_to_pixel(d.normalized(), height, width, flip_v);
}

LabelCount accumulate_labels(const PointCloud& cloud, std::span<const PoseView> views,
                             const ProjectionOptions& opts) {
  const Index n = cloud.size();
  LabelCount counts(static_cast<std::size_t>(n), 0);
  if (views.empty() || n == 0) return counts;
  // Blocks of points are independent; each block sums over every view in
  // order, so the result does not depend on scheduling.
  const std::size_t blocks = static_cast<std::size_t>((n + kBlock - 1) / kBlock);
  parallel_for(blocks, opts.workers, [&](std::size_t b) {
    const Index begin = static_cast<Index>(b) * kBlock;
    const Index end = std::min(n, begin + kBlock);
    for (const PoseView& view : views) {
      const int h = view.mask.height(), w = view.mask.width();
      for (Index i = begin; i < end; ++i) {
        const auto px = project_point(cloud.points.col(i), view.pose, h, w, opts.flip_v);
        if (px && view.mask.at(px->u, px->v)) ++counts[static_cast<std::size_t>(i)];
      }
    }
  });
  return counts;
}

IndexList trunk_candidates(const LabelCount& labels, std::uint32_t min_count) {
  if (min_count < 1) throw PreconditionError("min_count must be at least 1");
  IndexList out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= min_count) out.push_back(static_cast<Index>(i));
  }
  return out;
}

}  // namespace dbh
