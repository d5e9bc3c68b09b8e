// Trunk segmentation: ground removal, normal filtering, density clustering,
// Otsu size filtering, cluster expansion, and label transfer between clouds.

#ifndef DBH_SEGMENTATION_HPP
#define DBH_SEGMENTATION_HPP

#include "dbh/config.hpp"
#include "dbh/core.hpp"
#include "dbh/projection.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace dbh {

/// Per-point cluster label; -1 is noise, clusters are 0..count-1.
struct ClusterLabeling {
  std::vector<int> labels;
  int count = 0;

  [[nodiscard]] std::vector<Index> sizes() const;
};

struct NormalField {
  Points3 normals;
  std::vector<std::uint8_t> valid;  // 0 where the neighbourhood is degenerate
};

/// RANSAC plane from 3-point samples, refit to its inliers by PCA, normal
/// oriented toward the majority of the non-inlier points.
[[nodiscard]] GroundPlane fit_ground_plane_ransac(const Points3& points, double dist_thresh,
                                                  int iterations, std::uint64_t seed);

/// Indices (from `subset`, or all points when empty) with signed height > clearance.
[[nodiscard]] IndexList remove_near_ground(const Points3& points, const GroundPlane& plane,
                                           double clearance, const IndexList& subset = {});

/// Smallest-eigenvalue direction of each point's k-neighbourhood covariance.
[[nodiscard]] NormalField estimate_normals(const Points3& points, int k_neighbors, int workers = 1);

/// Keeps indices whose normal is within max_tilt_deg of horizontal.
[[nodiscard]] IndexList filter_by_normal(const IndexList& indices, const NormalField& normals,
                                         const GroundPlane& plane, double max_tilt_deg = 45.0);

/// Density clustering; neighbourhoods include the point itself. Clusters are
/// seeded in index order and grown breadth-first, so a border point joins
/// the first cluster that reaches it.
[[nodiscard]] ClusterLabeling dbscan(const Points3& points, double eps, int min_pts);

/// Otsu's threshold over a 256-bin histogram spanning [min, max]; returns the
/// bin edge maximizing between-class variance, lowest edge on ties.
[[nodiscard]] double otsu_threshold(std::span<const double> values);

struct SizeFilterOptions {
  bool log_sizes = false;      // threshold log(size) instead of size
  double min_gap_ratio = 0.0;  // keep every cluster unless smallest kept >= ratio x largest dropped
};

/// Cluster ids whose size is at least the Otsu threshold of all sizes. A
/// single cluster, equal sizes, or a split whose size gap is below
/// `opts.min_gap_ratio` retain every cluster.
[[nodiscard]] std::vector<int> filter_clusters_by_size(const ClusterLabeling& labeling,
                                                       const SizeFilterOptions& opts = {});

/// Grows segments by fixed-radius adjacency into eligible, unassigned points.
[[nodiscard]] std::vector<TrunkSegment> expand_clusters(std::vector<TrunkSegment> segments,
                                                        const Points3& points,
                                                        const std::vector<std::uint8_t>& eligible,
                                                        double radius, int max_passes);

/// Least-squares similarity (or rigid, when with_scale is false) mapping
/// source onto target, by SVD of the centered cross-covariance.
[[nodiscard]] SimilarityTransform procrustes_align(const Points3& source, const Points3& target,
                                                   bool with_scale = true);

/// Segments expressed on the target cloud. `target_to_source` aligns the
/// target cloud into the source frame.
[[nodiscard]] std::vector<TrunkSegment> transfer_labels(const std::vector<TrunkSegment>& segments,
                                                        const Points3& source_points,
                                                        const Points3& target_points,
                                                        const SimilarityTransform& target_to_source,
                                                        double radius = 0.2);

struct SegmentationResult {
  std::vector<TrunkSegment> segments;  // ids in descending size order
  GroundPlane plane;
  std::string diagnostic;
  // Point counts surviving each stage.
  Index candidates = 0;
  Index above_ground = 0;
  Index normal_filtered = 0;
  int clusters = 0;
  int retained_clusters = 0;
};

/// Seed of the ground-plane RANSAC stream derived from the config seed.
[[nodiscard]] std::uint64_t ground_seed(const PipelineConfig& config);

[[nodiscard]] SegmentationResult segment_trunks(const PointCloud& cloud,
                                                std::span<const PoseView> views,
                                                const PipelineConfig& config, int workers = 1);

}  // namespace dbh

#endif  // DBH_SEGMENTATION_HPP
