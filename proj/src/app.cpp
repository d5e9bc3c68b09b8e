#include "dbh/app.hpp"

#include "dbh/io.hpp"
#include "dbh/metrics.hpp"
#include "dbh/parallel.hpp"
#include "dbh/synthetic.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>

namespace dbh {

using json = nlohmann::ordered_json;

namespace {

using Clock = std::chrono::steady_clock;

class StageTimer {
 public:
  void start(std::string name) {
    name_ = std::move(name);
    begin_ = Clock::now();
  }
  void stop() {
    const double ms = std::chrono::duration<double, std::milli>(Clock::now() - begin_).count();
    timings_[name_] = ms;
  }
  [[nodiscard]] const json& timings() const { return timings_; }

 private:
  std::string name_;
  Clock::time_point begin_;
  json timings_ = json::object();
};

json config_json(const PipelineConfig& config) {
  json j = json::object();
  for (const auto& [k, v] : config.to_key_values()) j[k] = v;
  return j;
}

json segment_json(const TrunkSegment& segment, const SegmentFit& fit) {
  json j;
  j["id"] = segment.id;
  j["points"] = segment.indices.size();
  j["band_points"] = fit.band_points;
  if (!fit.error.empty()) {
    j["error"] = fit.error;
    return j;
  }
  json methods = json::array();
  for (const auto& m : fit.methods) {
    json jm;
    jm["method"] = std::string(to_string(m.method));
    if (m.estimate) {
      jm["dbh_cm"] = std::round(m.estimate->dbh * 1e6) / 1e4;
      jm["inlier_ratio"] = std::round(m.estimate->inlier_ratio * 1e6) / 1e6;
    } else {
      jm["error"] = m.error;
    }
    methods.push_back(jm);
  }
  j["methods"] = methods;
  return j;
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json manifest_base(const std::string& command, const PipelineConfig& config) {
  json m;
  m["tool"] = "dbh";
  m["version"] = DBH_VERSION;
  m["command"] = command;
  m["seed"] = config.seed;
  m["config"] = config_json(config);
  return m;
}

std::vector<PoseView> load_views(const fs::path& poses_path, const fs::path& masks_dir) {
  std::vector<PoseView> views;
  for (auto& [id, pose] : load_poses(poses_path)) {
    PoseView view;
    view.frame_id = id;
    view.pose = pose;
    view.mask = load_mask(masks_dir / (id + ".pgm"));
    views.push_back(std::move(view));
  }
  return views;
}

/// Writes report, segments, inspection scene and manifest; returns the exit code.
int write_outputs(const fs::path& dir, json manifest, const PointCloud& cloud,
                  std::span<const TrunkSegment> segments, std::span<const SegmentFit> fits,
                  StageTimer& timer, std::ostream& out, std::ostream& err) {
  fs::create_directories(dir);
  const auto estimates = collect_estimates(fits);
  json segs = json::array();
  for (std::size_t s = 0; s < segments.size(); ++s) segs.push_back(segment_json(segments[s], fits[s]));
  manifest["segments"] = segs;
  manifest["estimates"] = estimates.size();

  timer.start("write");
  write_segments(segments, cloud.size(), dir / "segments.json");
  write_inspection_scene(cloud, segments, estimates, dir / "scene.ply");
  if (!estimates.empty()) write_report(estimates, {}, dir / "report.json");
  else fs::remove(dir / "report.json");
  write_json(manifest, dir / "manifest.json");
  timer.stop();
  write_json(timer.timings(), dir / "timing.json");

  for (std::size_t s = 0; s < segments.size(); ++s) {
    const auto& fit = fits[s];
    out << "segment " << segments[s].id << ": " << segments[s].indices.size() << " points, "
        << fit.band_points << " in band";
    if (!fit.error.empty()) {
      out << " (" << fit.error << ")\n";
      continue;
    }
    for (const auto& m : fit.methods) {
      char buf[64];
      if (m.estimate) std::snprintf(buf, sizeof buf, " %s=%.2fcm", std::string(to_string(m.method)).c_str(), m.estimate->dbh * 100);
      else std::snprintf(buf, sizeof buf, " %s=failed", std::string(to_string(m.method)).c_str());
      out << buf;
    }
    out << '\n';
  }
  if (estimates.empty()) {
    err << "no DBH estimates were produced";
    if (manifest.contains("segmentation") && manifest["segmentation"].contains("diagnostic") &&
        !manifest["segmentation"]["diagnostic"].get<std::string>().empty())
      err << ": " << manifest["segmentation"]["diagnostic"].get<std::string>();
    err << '\n';
    return kExitEmpty;
  }
  out << estimates.size() << " estimates written to " << (dir / "report.json").string() << '\n';
  return kExitOk;
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInputError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInputError;
  }
}

}  // namespace

PipelineConfig ConfigSource::resolve() const {
  PipelineConfig config = file.empty() ? PipelineConfig{} : load_config(file);
  for (const auto& [key, value] : overrides) config.set(key, value);
  if (seed) config.seed = *seed;
  if (min_label_count) config.min_label_count = *min_label_count;
  config.validate();
  return config;
}

std::vector<SegmentFit> fit_segments(std::span<const TrunkSegment> segments, const PointCloud& cloud,
                                     const GroundPlane& plane, const PipelineConfig& config, int workers) {
  std::vector<SegmentFit> fits(segments.size());
  const FitOptions opts = config.fit_options();
  parallel_for(segments.size(), workers, [&](std::size_t s) {
    fits[s] = fit_all_methods(segments[s], cloud, plane, opts, config.seed);
  });
  return fits;
}

std::vector<DBHEstimate> collect_estimates(std::span<const SegmentFit> fits) {
  std::vector<DBHEstimate> out;
  for (const auto& f : fits)
    for (const auto& m : f.methods)
      if (m.estimate) out.push_back(*m.estimate);
  return out;
}

PipelineRun run_pipeline(const PointCloud& cloud, std::span<const PoseView> views, const PipelineConfig& config,
                         int workers) {
  PipelineRun run;
  run.segmentation = segment_trunks(cloud, views, config, workers);
  run.fits = fit_segments(run.segmentation.segments, cloud, run.segmentation.plane, config, workers);
  return run;
}

// ---------------------------------------------------------------------------
// estimate
// ---------------------------------------------------------------------------

int cmd_estimate(const EstimateOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    StageTimer timer;
    const PipelineConfig config = opts.config.resolve();

    timer.start("load");
    const PointCloud cloud = load_point_cloud(opts.cloud);
    cloud.validate();
    const auto views = load_views(opts.poses, opts.masks);
    timer.stop();

    timer.start("segmentation");
    const SegmentationResult seg = segment_trunks(cloud, views, config, opts.workers);
    timer.stop();

    timer.start("fitting");
    const auto fits = fit_segments(seg.segments, cloud, seg.plane, config, opts.workers);
    timer.stop();

    json manifest = manifest_base("estimate", config);
    manifest["inputs"] = {{"cloud", opts.cloud.string()},
                          {"poses", opts.poses.string()},
                          {"masks", opts.masks.string()},
                          {"config", opts.config.file.string()}};
    manifest["cloud_points"] = cloud.size();
    manifest["views"] = views.size();
    json s;
    s["candidates"] = seg.candidates;
    s["above_ground"] = seg.above_ground;
    s["normal_filtered"] = seg.normal_filtered;
    s["clusters"] = seg.clusters;
    s["retained_clusters"] = seg.retained_clusters;
    s["ground_normal"] = {seg.plane.normal.x(), seg.plane.normal.y(), seg.plane.normal.z()};
    s["ground_offset"] = seg.plane.offset;
    s["diagnostic"] = seg.diagnostic;
    manifest["segmentation"] = s;
    return write_outputs(opts.output, std::move(manifest), cloud, seg.segments, fits, timer, out, err);
  });
}

// ---------------------------------------------------------------------------
// transfer
// ---------------------------------------------------------------------------

int cmd_transfer(const TransferOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    StageTimer timer;
    const PipelineConfig config = opts.config.resolve();

    timer.start("load");
    const auto segments = load_segments(opts.segments);
    const PointCloud source = load_point_cloud(opts.source_cloud);
    const PointCloud target = load_point_cloud(opts.target_cloud);
    const Trajectory src_traj = load_trajectory(opts.source_trajectory);
    const Trajectory tgt_traj = load_trajectory(opts.target_trajectory);
    timer.stop();

    if (src_traj.size() != tgt_traj.size())
      throw PreconditionError("trajectory lengths differ: " + std::to_string(src_traj.size()) + " vs " +
                              std::to_string(tgt_traj.size()));
    for (const auto& s : segments)
      for (const Index i : s.indices)
        if (i < 0 || i >= source.size())
          throw PreconditionError("segment " + std::to_string(s.id) + " indexes outside the source cloud");

    timer.start("alignment");
    const SimilarityTransform T = procrustes_align(tgt_traj.positions, src_traj.positions, !config.rigid_only);
    timer.stop();

    json manifest = manifest_base("transfer", config);
    manifest["inputs"] = {{"segments", opts.segments.string()},
                          {"source_cloud", opts.source_cloud.string()},
                          {"source_trajectory", opts.source_trajectory.string()},
                          {"target_trajectory", opts.target_trajectory.string()},
                          {"target_cloud", opts.target_cloud.string()},
                          {"config", opts.config.file.string()}};
    json jt;
    jt["scale"] = T.scale;
    jt["rotation"] = json::array();
    for (int r = 0; r < 3; ++r) jt["rotation"].push_back({T.rotation(r, 0), T.rotation(r, 1), T.rotation(r, 2)});
    jt["translation"] = {T.translation.x(), T.translation.y(), T.translation.z()};
    manifest["target_to_source"] = jt;
    manifest["fit_frame"] = "source";

    if (segments.empty()) {
      err << "segments file holds no segments\n";
      fs::create_directories(opts.output);
      manifest["segments"] = json::array();
      manifest["estimates"] = 0;
      write_json(manifest, opts.output / "manifest.json");
      return kExitEmpty;
    }

    timer.start("transfer");
    const auto transferred = transfer_labels(segments, source.points, target.points, T, config.transfer_radius);
    timer.stop();

    timer.start("fitting");
    PointCloud aligned = target;
    aligned.points = apply_similarity(T, target.points);
    aligned.normals.resize(3, 0);
    const GroundPlane plane =
        fit_ground_plane_ransac(aligned.points, config.ground_dist_thresh, config.ground_iterations, ground_seed(config));
    const auto fits = fit_segments(transferred, aligned, plane, config, opts.workers);
    timer.stop();

    manifest["cloud_points"] = target.size();
    if (transferred.empty()) {
      err << "no target points were labeled\n";
    }
    return write_outputs(opts.output, std::move(manifest), target, transferred, fits, timer, out, err);
  });
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

int cmd_synth(const SynthOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    SceneSpec spec;
    if (!opts.preset.empty()) {
      spec = scene_preset(opts.preset, opts.seed.value_or(7));
    } else if (!opts.spec.empty()) {
      spec = load_scene_spec(opts.spec);
      if (opts.seed) spec.seed = *opts.seed;
    } else {
      throw PreconditionError("either a preset or a spec file is required");
    }
    const SyntheticScene scene = generate_scene(spec);
    write_scene(scene, opts.output);
    out << "wrote " << scene.cloud.size() << " points, " << scene.trunks.size() << " trunks, "
        << scene.views.size() << " views to " << opts.output.string() << '\n';
    for (std::size_t k = 0; k < scene.trunks.size(); ++k) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "  tree_%zu: true DBH %.2f cm, %zu points\n", k, scene.trunks[k].true_dbh * 100,
                    scene.trunks[k].indices.size());
      out << buf;
    }
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

int cmd_eval(const EvalOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto estimates = load_report(opts.report);
    const auto refs = load_references(opts.references);
    if (opts.match_radius && !(*opts.match_radius > 0)) throw PreconditionError("--match-radius must be positive");

    std::map<CurveKind, std::vector<EvalRecord>> records;
    std::map<CurveKind, std::vector<DBHEstimate>> joined;
    std::size_t unmatched = 0;
    for (const CurveKind kind : kAllCurveKinds) {
      // One estimate per reference: the nearest when joining by position.
      std::map<std::size_t, std::pair<double, const DBHEstimate*>> best;
      for (const auto& e : estimates) {
        if (e.method != kind) continue;
        std::optional<std::size_t> hit;
        double dist = 0;
        for (std::size_t r = 0; r < refs.size(); ++r) {
          if (opts.match_radius) {
            if (!refs[r].position) continue;
            const double d = (*refs[r].position - e.position).norm();
            if (d <= *opts.match_radius && (!hit || d < dist)) {
              hit = r;
              dist = d;
            }
          } else if (refs[r].id == std::to_string(e.segment_id)) {
            hit = r;
            break;
          }
        }
        if (!hit) {
          ++unmatched;
          continue;
        }
        auto it = best.find(*hit);
        if (it == best.end() || dist < it->second.first) best[*hit] = {dist, &e};
      }
      for (const auto& [r, match] : best) {
        records[kind].push_back(EvalRecord{refs[r].id, match.second->dbh, refs[r].dbh});
        joined[kind].push_back(*match.second);
      }
    }

    std::size_t total = 0;
    for (const auto& [kind, recs] : records) total += recs.size();
    if (total == 0) {
      err << "error: no estimate could be joined with a reference\n";
      return kExitInputError;
    }
    if (unmatched > 0) err << "warning: " << unmatched << " estimate(s) had no matching reference\n";
    for (const CurveKind kind : kAllCurveKinds) {
      const auto n = records.count(kind) ? records[kind].size() : 0;
      if (n < refs.size())
        err << "warning: " << to_string(kind) << ": " << refs.size() - n << " reference(s) without an estimate\n";
    }

    std::map<CurveKind, MetricsReport> metrics;
    for (const auto& [kind, recs] : records) metrics[kind] = compute_metrics(recs);

    char line[160];
    std::snprintf(line, sizeof line, "%-8s %5s %16s %10s %8s %8s\n", "method", "n", "median_bias_cm", "mad_cm",
                  "rcv_pct", "r2");
    out << line;
    for (const auto& [kind, m] : metrics) {
      char r2[16];
      if (m.r_squared_defined) std::snprintf(r2, sizeof r2, "%.3f", m.r_squared);
      else std::snprintf(r2, sizeof r2, "n/a");
      std::snprintf(line, sizeof line, "%-8s %5zu %16.2f %10.2f %8.2f %8s\n", std::string(to_string(kind)).c_str(),
                    m.count, m.median_bias, m.mad, m.rcv, r2);
      out << line;
    }

    if (!opts.output.empty()) {
      std::vector<DBHEstimate> all;
      for (const auto& [kind, es] : joined) all.insert(all.end(), es.begin(), es.end());
      write_report(all, metrics, opts.output);
    }
    return kExitOk;
  });
}

}  // namespace dbh
