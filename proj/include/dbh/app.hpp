// Batch orchestration behind the `dbh` command-line tool.
//
// Each cmd_* function returns a process exit code:
//   0  success
//   1  input or usage error
//   2  the run completed but produced no estimates / segments

#ifndef DBH_APP_HPP
#define DBH_APP_HPP

#include "dbh/config.hpp"
#include "dbh/cross_section.hpp"
#include "dbh/segmentation.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace dbh {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 1;
inline constexpr int kExitEmpty = 2;

/// Config file (optional) overlaid with command-line settings.
struct ConfigSource {
  fs::path file;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint32_t> min_label_count;
  std::vector<std::pair<std::string, std::string>> overrides;  // key, value

  [[nodiscard]] PipelineConfig resolve() const;
};

/// Fits every segment with all three methods, in parallel over segments.
[[nodiscard]] std::vector<SegmentFit> fit_segments(std::span<const TrunkSegment> segments,
                                                   const PointCloud& cloud, const GroundPlane& plane,
                                                   const PipelineConfig& config, int workers);

/// Successful estimates in segment order, then method order.
[[nodiscard]] std::vector<DBHEstimate> collect_estimates(std::span<const SegmentFit> fits);

struct PipelineRun {
  SegmentationResult segmentation;
  std::vector<SegmentFit> fits;
};

[[nodiscard]] PipelineRun run_pipeline(const PointCloud& cloud, std::span<const PoseView> views,
                                       const PipelineConfig& config, int workers);

struct EstimateOptions {
  fs::path cloud;
  fs::path poses;
  fs::path masks;  // directory holding <frame_id>.pgm
  fs::path output;
  ConfigSource config;
  int workers = 0;
};

struct TransferOptions {
  fs::path segments;  // segments.json written by estimate
  fs::path source_cloud;
  fs::path source_trajectory;
  fs::path target_trajectory;
  fs::path target_cloud;
  fs::path output;
  ConfigSource config;
  int workers = 0;
};

struct SynthOptions {
  std::string preset;
  fs::path spec;  // used when preset is empty
  std::optional<std::uint64_t> seed;
  fs::path output;
};

struct EvalOptions {
  fs::path report;
  fs::path references;
  std::optional<double> match_radius;  // join by position instead of id
  fs::path output;                     // optional JSON with the joined records and metrics
};

int cmd_estimate(const EstimateOptions& opts, std::ostream& out, std::ostream& err);
int cmd_transfer(const TransferOptions& opts, std::ostream& out, std::ostream& err);
int cmd_synth(const SynthOptions& opts, std::ostream& out, std::ostream& err);
int cmd_eval(const EvalOptions& opts, std::ostream& out, std::ostream& err);

}  // namespace dbh

#endif  // DBH_APP_HPP
