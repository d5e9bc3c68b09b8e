#ifndef DBH_CONFIG_HPP
#define DBH_CONFIG_HPP

#include "dbh/cross_section.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace dbh {

/// Every tunable of the pipeline. Serialized as flat `key = value` lines.
struct PipelineConfig {
  std::uint64_t seed = 42;

  // projection labeling
  std::uint32_t min_label_count = 1;
  bool flip_v = false;

  // ground plane and normal filtering
  double ground_dist_thresh = 0.05;
  int ground_iterations = 500;
  double ground_clearance = 0.30;
  int normal_k = 16;
  double max_tilt_deg = 45.0;

  // clustering and expansion
  double dbscan_eps = 0.10;
  int dbscan_min_pts = 20;
  bool size_filter_log = true;
  double size_filter_min_gap_ratio = 4.0;
  double expand_radius = 0.10;
  int expand_max_passes = 10;

  // label transfer
  double transfer_radius = 0.20;
  bool rigid_only = false;

  // cross-section fitting
  double band_low = 1.22;
  double band_high = 1.52;
  int ransac_sample_size = 50;
  double ransac_inlier_tol = 0.05;
  int ransac_iterations = 100;
  int fourier_degree = 2;
  bool fourier_circle_center = true;
  int spline_ctrl = 12;
  double alpha_scale = 3.0;

  /// Throws PreconditionError naming the offending key.
  void validate() const;

  /// Sets one key from its textual value; throws ParseError on unknown keys
  /// or malformed values.
  void set(const std::string& key, const std::string& value);

  /// All keys with their current values, in declaration order.
  [[nodiscard]] std::vector<std::pair<std::string, std::string>> to_key_values() const;

  [[nodiscard]] FitOptions fit_options() const;
};

/// Defaults overridden by the file's `key = value` lines ('#' starts a comment).
[[nodiscard]] PipelineConfig load_config(const std::filesystem::path& path);
void write_config(const PipelineConfig& config, const std::filesystem::path& path);

}  // namespace dbh

#endif  // DBH_CONFIG_HPP
