// Synthetic trunks and scenes with analytically known ground truth.
//
// Trunk cross-sections are polar Fourier curves about the trunk axis. True
// DBH is the arc length of the full curve (composite Simpson, 2^20 panels)
// divided by pi, computed independently of the production quadrature.

#ifndef DBH_SYNTHETIC_HPP
#define DBH_SYNTHETIC_HPP

#include "dbh/core.hpp"
#include "dbh/curves.hpp"
#include "dbh/io.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace dbh {

/// Azimuth interval [start, end] in radians, measured in the trunk's
/// orthonormal_frame(axis); end may exceed 2 pi to wrap around.
struct AzimuthInterval {
  double start = 0.0;
  double end = 2.0 * std::numbers::pi;
};

struct SyntheticTrunkSpec {
  double a0 = 0.25;
  Eigen::Vector2d a = Eigen::Vector2d::Zero();  // a1, a2
  Eigen::Vector2d b = Eigen::Vector2d::Zero();  // b1, b2
  Vec3 base = Vec3::Zero();
  Vec3 axis = Vec3::UnitZ();
  double height = 5.0;
  double sigma = 0.0;                     // radial Gaussian noise, meters
  std::vector<AzimuthInterval> coverage;  // empty means the full circumference
  double density = 2000.0;                // points per square meter
  std::uint64_t seed = 1;

  /// The cross-section profile centered at the origin.
  [[nodiscard]] Fourier profile() const;
  /// Throws PreconditionError when a0 <= 0, r(t) is not positive, the trunk
  /// does not reach breast height, or a coverage interval is malformed.
  void validate() const;
};

struct SyntheticTrunk {
  SyntheticTrunkSpec spec;
  double true_dbh = 0.0;  // meters
  IndexList indices;      // into SyntheticScene::cloud
};

struct SceneSpec {
  std::vector<SyntheticTrunkSpec> trunks;
  double ground_extent = 12.0;   // side of the square ground patch, centered at the origin
  double ground_density = 50.0;  // points per square meter
  double ground_sigma = 0.005;
  double outlier_fraction = 0.0;  // fraction of the final cloud
  int views = 8;
  int mask_width = 1024;
  int mask_height = 512;
  double camera_radius = 0.0;  // 0 places the ring just inside the ground patch
  double camera_height = 1.6;
  int trajectory_samples = 64;
  std::uint64_t seed = 7;

  void validate() const;
};

struct SyntheticScene {
  PointCloud cloud;
  GroundPlane plane;
  std::vector<SyntheticTrunk> trunks;
  std::vector<PoseView> views;
  Trajectory trajectory;
};

/// Arc length of the spec's full profile, composite Simpson with 2^20 panels.
[[nodiscard]] double oracle_perimeter(const SyntheticTrunkSpec& spec);
/// Arc length of the profile over [t0, t1] by composite Simpson.
[[nodiscard]] double oracle_arc_length(const Fourier& profile, double t0, double t1,
                                       int panels = 1 << 20);

/// Surface points sampled uniformly by area over the covered azimuths.
[[nodiscard]] Points3 generate_trunk(const SyntheticTrunkSpec& spec);

[[nodiscard]] SyntheticScene generate_scene(const SceneSpec& spec);

/// Applies T to every position, then adds isotropic Gaussian noise.
[[nodiscard]] Trajectory perturb_trajectory(const Trajectory& trajectory,
                                            const SimilarityTransform& T, double sigma,
                                            std::uint64_t seed);

[[nodiscard]] std::vector<std::string> scene_presets();
/// Throws PreconditionError for unknown names.
[[nodiscard]] SceneSpec scene_preset(const std::string& name, std::uint64_t seed);
/// JSON scene description; see README for the schema.
[[nodiscard]] SceneSpec load_scene_spec(const std::filesystem::path& path);

/// Writes cloud.ply, poses.txt, masks/<frame>.pgm, trajectory.txt,
/// references.csv and truth_segments.json into `dir`.
void write_scene(const SyntheticScene& scene, const std::filesystem::path& dir);

}  // namespace dbh

#endif  // DBH_SYNTHETIC_HPP
