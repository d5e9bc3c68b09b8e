// Equirectangular projection of cloud points into trunk masks and per-point
// label voting.
//
// Camera frame: z forward, x right, y down. Longitude atan2(x, z) spans the
// image columns left to right, latitude asin(y) spans rows top to bottom.

#ifndef DBH_PROJECTION_HPP
#define DBH_PROJECTION_HPP

#include "dbh/core.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace dbh {

struct Pixel {
  int u = 0;
  int v = 0;
  friend bool operator==(const Pixel&, const Pixel&) = default;
};

/// Per-point count of views whose mask marks the point as trunk.
using LabelCount = std::vector<std::uint32_t>;

struct ProjectionOptions {
  bool flip_v = false;  // rows run bottom to top when set
  int workers = 1;
};

/// Maps a unit camera-frame direction to its pixel; clamps at the image edges.
[[nodiscard]] Pixel direction_to_pixel(const Vec3& d, int height, int width, bool flip_v = false);

/// Unit direction through the center of pixel (u, v); inverse of direction_to_pixel.
[[nodiscard]] Vec3 pixel_center_direction(Pixel px, int height, int width, bool flip_v = false);

/// Pixel of world point p seen from `pose`; std::nullopt when p is at the camera.
[[nodiscard]] std::optional<Pixel> project_point(const Vec3& p, const Pose& pose, int height,
                                                 int width, bool flip_v = false);

[[nodiscard]] LabelCount accumulate_labels(const PointCloud& cloud, std::span<const PoseView> views,
                                           const ProjectionOptions& opts = {});

[[nodiscard]] IndexList trunk_candidates(const LabelCount& labels, std::uint32_t min_count = 1);

}  // namespace dbh

#endif  // DBH_PROJECTION_HPP
