// Readers and writers for every on-disk artifact of the pipeline.
//
//   point clouds   PLY (ascii / binary_little_endian) or whitespace XYZ text
//   poses          text: frame_id tx ty tz r00 r01 r02 r10 r11 r12 r20 r21 r22
//   masks          binary PGM (P5, maxval 255); value >= 128 is trunk
//   trajectories   text: "x y z" or "t x y z" per line
//   references     CSV: id,dbh_cm[,x,y,z]
//   reports        JSON with stable key order; DBH in centimeters
//
// Malformed input raises ParseError with the file and line or byte offset.

#ifndef DBH_IO_HPP
#define DBH_IO_HPP

#include "dbh/core.hpp"
#include "dbh/cross_section.hpp"
#include "dbh/metrics.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace dbh {

namespace fs = std::filesystem;

struct Trajectory {
  Points3 positions;
  std::vector<double> timestamps;  // empty, or one per position, increasing

  [[nodiscard]] Index size() const { return positions.cols(); }
};

struct Reference {
  std::string id;
  double dbh = 0.0;  // meters
  std::optional<Vec3> position;
};

enum class PlyEncoding { ascii, binary };

[[nodiscard]] PointCloud load_point_cloud(const fs::path& path);
void write_ply(const PointCloud& cloud, const fs::path& path, PlyEncoding encoding = PlyEncoding::binary);
void write_xyz(const PointCloud& cloud, const fs::path& path);

[[nodiscard]] std::vector<std::pair<std::string, Pose>> load_poses(const fs::path& path);
void write_poses(std::span<const std::pair<std::string, Pose>> poses, const fs::path& path);

[[nodiscard]] EquirectMask load_mask(const fs::path& path);
void write_mask(const EquirectMask& mask, const fs::path& path);

[[nodiscard]] Trajectory load_trajectory(const fs::path& path);
void write_trajectory(const Trajectory& trajectory, const fs::path& path);

[[nodiscard]] std::vector<Reference> load_references(const fs::path& path);
void write_references(std::span<const Reference> references, const fs::path& path);

/// Per-tree records plus, when given, one metrics block per method.
void write_report(std::span<const DBHEstimate> estimates,
                  const std::map<CurveKind, MetricsReport>& metrics, const fs::path& path);
[[nodiscard]] std::vector<DBHEstimate> load_report(const fs::path& path);

/// Serialized report text; write_report writes exactly this.
[[nodiscard]] std::string report_json(std::span<const DBHEstimate> estimates,
                                      const std::map<CurveKind, MetricsReport>& metrics);

void write_segments(std::span<const TrunkSegment> segments, Index cloud_size, const fs::path& path);
[[nodiscard]] std::vector<TrunkSegment> load_segments(const fs::path& path);

/// Binary PLY with trunk points recolored red, plus a sidecar JSON
/// (`<stem>.dbh.json`) mapping segment id to DBH per method.
void write_inspection_scene(const PointCloud& cloud, std::span<const TrunkSegment> segments,
                            std::span<const DBHEstimate> estimates, const fs::path& path);

[[nodiscard]] fs::path inspection_sidecar_path(const fs::path& scene_path);

}  // namespace dbh

#endif  // DBH_IO_HPP
