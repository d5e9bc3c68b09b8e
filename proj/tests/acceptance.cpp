// Acceptance checks 1-12. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include "dbh/app.hpp"
#include "dbh/cross_section.hpp"
#include "dbh/io.hpp"
#include "dbh/metrics.hpp"
#include "dbh/projection.hpp"
#include "dbh/random.hpp"
#include "dbh/segmentation.hpp"
#include "dbh/synthetic.hpp"
#include "oracles.hpp"

#include <Eigen/Geometry>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>

using namespace dbh;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::uint64_t kSeedBase = 20240917;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path scratch_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("dbh_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// One upright trunk; returns per-method DBH (meters, NaN on failure) from
/// the full band -> section -> RANSAC path.
std::map<CurveKind, double> fit_trunk(const SyntheticTrunkSpec& spec, std::uint64_t seed) {
  PointCloud cloud;
  cloud.points = generate_trunk(spec);
  TrunkSegment seg;
  seg.id = 0;
  seg.axis = Vec3::UnitZ();
  for (Index i = 0; i < cloud.size(); ++i) seg.indices.push_back(i);
  const SegmentFit fit = fit_all_methods(seg, cloud, GroundPlane{}, FitOptions{}, seed);
  std::map<CurveKind, double> out;
  for (const CurveKind k : kAllCurveKinds) out[k] = std::numeric_limits<double>::quiet_NaN();
  for (const auto& m : fit.methods)
    if (m.estimate) out[m.method] = m.estimate->dbh;
  return out;
}

/// The committed spec set for criteria 2 and 3.
std::vector<SyntheticTrunkSpec> random_specs() {
  std::vector<SyntheticTrunkSpec> specs;
  for (std::uint64_t k = 0; k < 50; ++k) {
    Rng rng(stream_seed(kSeedBase, {2, k}));
    SyntheticTrunkSpec s;
    s.a0 = uniform(rng, 0.075, 0.61);
    for (int i = 0; i < 2; ++i) {
      s.a[i] = uniform(rng, -0.15, 0.15) * s.a0;
      s.b[i] = uniform(rng, -0.15, 0.15) * s.a0;
    }
    s.height = 2.0;
    s.sigma = 0.005;
    s.density = 2000.0;
    s.seed = stream_seed(kSeedBase, {20, k});
    specs.push_back(s);
  }
  return specs;
}

// ---------------------------------------------------------------------------

Outcome criterion1() {
  SyntheticTrunkSpec spec;
  spec.a0 = 0.25;
  spec.height = 2.0;
  spec.density = 1000.0 / (2 * kPi * 0.25 * 0.30);  // 1000 points expected in the band
  PointCloud cloud;
  cloud.points = generate_trunk(spec);
  TrunkSegment seg;
  for (Index i = 0; i < cloud.size(); ++i) seg.indices.push_back(i);
  const IndexList band = extract_band(seg, cloud, GroundPlane{});
  const CrossSection2D section = project_to_plane(gather(cloud.points, band), Vec3::UnitZ(), Vec3::Zero());

  bool ok = true;
  std::string detail = fmt("%zu band points;", band.size());
  for (const CurveKind k : kAllCurveKinds) {
    const auto t0 = std::chrono::steady_clock::now();
    const CurveFit fit = ransac_fit(section, k, RansacOptions{}, stream_seed(kSeedBase, {1}));
    const double secs = seconds_since(t0);
    const double dbh = estimate_dbh(fit);
    const double tol = k == CurveKind::bspline ? 0.005 : 0.001;
    ok = ok && std::fabs(dbh - 0.5) <= tol && secs < 1.0;
    detail += fmt(" %s %.4f m (%.2f s)", std::string(to_string(k)).c_str(), dbh, secs);
  }
  return {ok, detail};
}

Outcome criterion2() {
  std::vector<double> rel;
  int failures = 0;
  for (const auto& spec : random_specs()) {
    const double truth = oracle_perimeter(spec) / kPi;
    const double est = fit_trunk(spec, spec.seed)[CurveKind::fourier];
    if (std::isnan(est)) ++failures;
    else rel.push_back(std::fabs(est - truth) / truth);
  }
  const double med = rel.empty() ? 1.0 : oracle::median(rel);
  return {failures == 0 && med <= 0.02,
          fmt("fourier median |rel err| %.3f%% over %zu specs (%d failed fits)", 100 * med, rel.size(), failures)};
}

Outcome criterion3() {
  std::map<CurveKind, std::vector<double>> abs_rel, signed_rel;
  std::map<CurveKind, int> failures;
  std::uint64_t k = 0;
  for (auto spec : random_specs()) {
    Rng rng(stream_seed(kSeedBase, {3, k++}));
    const double start = uniform(rng, 0.0, 2 * kPi);
    spec.coverage = {AzimuthInterval{start, start + kPi}};
    const double truth = oracle_perimeter(spec) / kPi;
    for (const auto& [kind, est] : fit_trunk(spec, spec.seed)) {
      if (std::isnan(est)) {
        ++failures[kind];
        continue;
      }
      abs_rel[kind].push_back(std::fabs(est - truth) / truth);
      signed_rel[kind].push_back((est - truth) / truth);
    }
  }
  auto med = [](const std::vector<double>& v) { return v.empty() ? 1e9 : oracle::median(v); };
  const double f = med(abs_rel[CurveKind::fourier]);
  const double e = med(abs_rel[CurveKind::ellipse]);
  const double s = med(abs_rel[CurveKind::bspline]);
  const double bias = med(signed_rel[CurveKind::fourier]);
  const bool ok = f <= e && f <= s && bias <= 0;
  return {ok, fmt("median |rel err| fourier %.2f%%, ellipse %.2f%%, bspline %.2f%%; fourier median signed %.2f%%"
                  " (failed fits e/s/f %d/%d/%d)",
                  100 * f, 100 * e, 100 * s, 100 * bias, failures[CurveKind::ellipse], failures[CurveKind::bspline],
                  failures[CurveKind::fourier])};
}

Outcome criterion4() {
  // 30% outliers, uniform in the 0.6 m box around a 0.25 m circle. Judged
  // literally: every seed must exclude >= 95% of all injected outliers. The
  // detail line also reports how many outliers fall inside the inlier band of
  // the true circle and the exclusion rate among the remaining ones.
  const RansacOptions opts;
  bool ok = true;
  double worst_dbh = 0, worst_all = 1, worst_beyond = 1, worst_margin = 1, max_in_band = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng rng(stream_seed(kSeedBase, {4, s}));
    const int n_circle = 500;
    const int n_out = static_cast<int>(std::lround(n_circle * 0.3 / 0.7));
    CrossSection2D section;
    section.samples.resize(2, n_circle + n_out);
    for (int i = 0; i < n_circle; ++i) {
      const double t = uniform(rng, 0, 2 * kPi);
      const double r = 0.25 + 0.002 * standard_normal(rng);
      section.samples.col(i) = Vec2(r * std::cos(t), r * std::sin(t));
    }
    for (int i = 0; i < n_out; ++i)
      section.samples.col(n_circle + i) = Vec2(uniform(rng, -0.3, 0.3), uniform(rng, -0.3, 0.3));

    const CurveFit fit = ransac_fit(section, CurveKind::fourier, opts, stream_seed(kSeedBase, {40, s}));
    const double dbh_err = std::fabs(estimate_dbh(fit) - 0.5) / 0.5;
    const std::set<Index> inl(fit.inliers.begin(), fit.inliers.end());
    int kept = 0, in_band = 0, beyond = 0, beyond_kept = 0, margin = 0, margin_kept = 0;
    for (int i = 0; i < n_out; ++i) {
      const Index idx = n_circle + i;
      const bool in = inl.count(idx) > 0;
      const double d = std::fabs(section.samples.col(idx).norm() - 0.25);
      kept += in;
      if (d <= opts.inlier_tol) ++in_band;
      else {
        ++beyond;
        beyond_kept += in;
      }
      if (d > opts.inlier_tol + 0.01) {
        ++margin;
        margin_kept += in;
      }
    }
    const double all = 1.0 - double(kept) / n_out;
    worst_dbh = std::max(worst_dbh, dbh_err);
    worst_all = std::min(worst_all, all);
    worst_beyond = std::min(worst_beyond, beyond ? 1.0 - double(beyond_kept) / beyond : 1.0);
    worst_margin = std::min(worst_margin, margin ? 1.0 - double(margin_kept) / margin : 1.0);
    max_in_band = std::max(max_in_band, double(in_band) / n_out);
    ok = ok && dbh_err <= 0.02 && all >= 0.95;
  }
  return {ok, fmt("20 seeds: worst DBH err %.2f%%; worst exclusion of injected outliers %.1f%% (up to %.1f%% of "
                  "them lie within inlier_tol of the true circle); exclusion beyond tol %.1f%%, beyond tol+1 cm %.1f%%",
                  100 * worst_dbh, 100 * worst_all, 100 * max_in_band, 100 * worst_beyond, 100 * worst_margin)};
}

Outcome criterion5() {
  auto close = [](double a, double b) { return std::fabs(a - b) <= 1e-12 * std::max(1.0, std::fabs(b)); };
  int mismatches = 0;
  for (std::uint64_t s = 0; s < 1000; ++s) {
    Rng rng(stream_seed(kSeedBase, {5, s}));
    const int n = 3 + static_cast<int>(uniform_index(rng, 60));
    std::vector<EvalRecord> recs;
    std::vector<oracle::Pair> pairs;
    for (int i = 0; i < n; ++i) {
      const double y = uniform(rng, 0.1, 1.2);
      const double e = y * (1 + 0.1 * standard_normal(rng)) + (uniform01(rng) < 0.05 ? 0.5 : 0.0);
      recs.push_back({std::to_string(i), e, y});
      pairs.push_back({e, y});
    }
    bool ok = close(median_bias(recs), oracle::median_bias_cm(pairs)) && close(mad(recs), oracle::mad_cm(pairs)) &&
              close(rcv(recs), oracle::rcv_pct(pairs)) && close(r_squared(recs), oracle::r_squared(pairs));
    const auto rel = relative_errors(recs);
    const auto rel_o = oracle::relative_errors(pairs);
    for (std::size_t i = 0; i < rel.size(); ++i) ok = ok && close(rel[i], rel_o[i]);
    const auto box = tukey_box(rel);
    const auto box_o = oracle::tukey(rel_o);
    ok = ok && close(box.median, box_o.median) && close(box.q1, box_o.q1) && close(box.q3, box_o.q3) &&
         close(box.whisker_low, box_o.lo) && close(box.whisker_high, box_o.hi) &&
         box.outliers.size() == box_o.outliers.size();
    mismatches += !ok;
  }
  // Worked example: errors 0, 2, 4 cm; references with median 10 cm.
  const std::vector<EvalRecord> worked = {{"a", 0.08, 0.08}, {"b", 0.12, 0.10}, {"c", 0.16, 0.12}};
  const bool worked_ok = std::fabs(median_bias(worked) - 2.0) < 1e-9 && std::fabs(mad(worked) - 2.0) < 1e-9 &&
                         std::fabs(rcv(worked) - 20.0) < 1e-9;
  return {mismatches == 0 && worked_ok,
          fmt("%d/1000 record sets mismatched; worked example bias %.3f cm, MAD %.3f cm, rCV %.3f%%", mismatches,
              median_bias(worked), mad(worked), rcv(worked))};
}

Outcome criterion6() {
  int mismatches = 0;
  for (std::uint64_t s = 0; s < 200; ++s) {
    Rng rng(stream_seed(kSeedBase, {6, s}));
    const int n = 2 + static_cast<int>(uniform_index(rng, 40));
    std::vector<double> v;
    do {
      v.clear();
      for (int i = 0; i < n; ++i) {
        const bool big = uniform01(rng) < 0.3;
        v.push_back(static_cast<double>(big ? 200 + uniform_index(rng, 2000) : 1 + uniform_index(rng, 60)));
      }
    } while (*std::min_element(v.begin(), v.end()) == *std::max_element(v.begin(), v.end()));
    const double lib = otsu_threshold(v);
    const double ref = oracle::otsu(v);
    mismatches += std::fabs(lib - ref) > 1e-12 * std::max(1.0, std::fabs(ref));
  }
  return {mismatches == 0, fmt("%d/200 multisets disagree with exhaustive search", mismatches)};
}

Outcome criterion7() {
  int mismatches = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    Rng rng(stream_seed(kSeedBase, {7, s}));
    const int n = 20 + static_cast<int>(uniform_index(rng, 481));
    const int blobs = 1 + static_cast<int>(uniform_index(rng, 5));
    std::vector<Vec3> centers;
    for (int b = 0; b < blobs; ++b) centers.emplace_back(uniform(rng, 0, 3), uniform(rng, 0, 3), uniform(rng, 0, 3));
    Points3 pts(3, n);
    for (int i = 0; i < n; ++i) {
      if (uniform01(rng) < 0.2) {
        pts.col(i) = Vec3(uniform(rng, 0, 3), uniform(rng, 0, 3), uniform(rng, 0, 3));
      } else {
        const Vec3& c = centers[uniform_index(rng, static_cast<std::uint64_t>(blobs))];
        pts.col(i) = c + 0.15 * Vec3(standard_normal(rng), standard_normal(rng), standard_normal(rng));
      }
    }
    const double eps = uniform(rng, 0.05, 0.3);
    const int min_pts = 1 + static_cast<int>(uniform_index(rng, 10));
    const ClusterLabeling lib = dbscan(pts, eps, min_pts);
    mismatches += !oracle::same_partition(lib.labels, oracle::dbscan(pts, eps, min_pts));
  }
  return {mismatches == 0, fmt("%d/100 instances differ from the O(n^2) reference", mismatches)};
}

SimilarityTransform random_similarity(Rng& rng) {
  const Eigen::Quaterniond q(standard_normal(rng), standard_normal(rng), standard_normal(rng), standard_normal(rng));
  SimilarityTransform T;
  T.rotation = q.normalized().toRotationMatrix();
  T.scale = uniform(rng, 0.5, 2.0);
  T.translation = Vec3(uniform(rng, -20, 20), uniform(rng, -20, 20), uniform(rng, -5, 5));
  return T;
}

Outcome criterion8() {
  double worst_s = 0, worst_r = 0, worst_t = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    Rng rng(stream_seed(kSeedBase, {8, s}));
    Trajectory traj;
    const int n = 10 + static_cast<int>(uniform_index(rng, 90));
    traj.positions.resize(3, n);
    for (int i = 0; i < n; ++i) traj.positions.col(i) = Vec3(uniform(rng, -5, 5), uniform(rng, -5, 5), uniform(rng, -1, 1));
    const SimilarityTransform T = random_similarity(rng);
    const Trajectory moved = perturb_trajectory(traj, T, 0.0, s);
    const SimilarityTransform R = procrustes_align(traj.positions, moved.positions);
    worst_s = std::max(worst_s, std::fabs(R.scale - T.scale) / T.scale);
    worst_r = std::max(worst_r, (R.rotation - T.rotation).norm());
    worst_t = std::max(worst_t, (R.translation - T.translation).norm() / std::max(1.0, T.translation.norm()));
  }
  const bool exact_ok = worst_s <= 1e-6 && worst_r <= 1e-6 && worst_t <= 1e-6;

  double nworst_s = 0, nworst_deg = 0, nworst_t = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    Rng rng(stream_seed(kSeedBase, {80, s}));
    Trajectory traj;
    const int n = 200;
    traj.positions.resize(3, n);
    for (int i = 0; i < n; ++i) {  // a 10 m meandering walk centered near the origin
      const double u = double(i) / (n - 1);
      traj.positions.col(i) = Vec3(10.0 * u - 5.0, 1.5 * std::sin(3 * kPi * u), 1.5 + 0.3 * std::cos(5 * kPi * u));
    }
    SimilarityTransform T = random_similarity(rng);
    T.translation /= 10.0;
    const Trajectory moved = perturb_trajectory(traj, T, 0.01, stream_seed(kSeedBase, {81, s}));
    const SimilarityTransform R = procrustes_align(traj.positions, moved.positions);
    const double cosang = std::clamp(((R.rotation.transpose() * T.rotation).trace() - 1.0) / 2.0, -1.0, 1.0);
    nworst_s = std::max(nworst_s, std::fabs(R.scale - T.scale) / T.scale);
    nworst_deg = std::max(nworst_deg, std::acos(cosang) * 180.0 / kPi);
    nworst_t = std::max(nworst_t, (R.translation - T.translation).norm());
  }
  const bool noisy_ok = nworst_s <= 0.005 && nworst_deg <= 0.5 && nworst_t <= 0.02;
  return {exact_ok && noisy_ok,
          fmt("noiseless worst rel scale %.1e, rot %.1e, trans %.1e; 1 cm noise worst %.3f%% / %.3f deg / %.2f cm",
              worst_s, worst_r, worst_t, 100 * nworst_s, nworst_deg, 100 * nworst_t)};
}

Outcome criterion9() {
  Rng rng(stream_seed(kSeedBase, {9}));
  std::vector<Vec3> dirs = {Vec3(0, 1, 0),  Vec3(0, -1, 0), Vec3(0, 0, -1), Vec3(-1e-12, 0, -1).normalized(),
                            Vec3(1e-12, 0, -1).normalized(), Vec3(0, 0, 1),  Vec3(1, 0, 0), Vec3(-1, 0, 0)};
  while (dirs.size() < 10000) {
    const Vec3 g(standard_normal(rng), standard_normal(rng), standard_normal(rng));
    if (g.norm() > 1e-9) dirs.push_back(g.normalized());
  }
  int misses = 0;
  for (const int flip : {0, 1}) {
    for (const auto& [H, W] : {std::pair{512, 1024}, std::pair{101, 203}}) {
      for (const Vec3& d : dirs) {
        const Pixel p = direction_to_pixel(d, H, W, flip);
        const Pixel q = direction_to_pixel(pixel_center_direction(p, H, W, flip), H, W, flip);
        misses += !(p == q);
      }
    }
  }
  return {misses == 0, fmt("%d misses over %zu directions x 4 image layouts (poles and antimeridian included)", misses,
                           dirs.size())};
}

// --- end-to-end criteria share one on-disk scene -----------------------------

struct FieldRun {
  bool ran = false;
  SyntheticScene scene;
  fs::path scene_dir, out_dir;
  int exit_code = -1;
  double seconds = 0;
};

FieldRun& field_run() {
  static FieldRun run = [] {
    FieldRun r;
    r.scene = generate_scene(scene_preset("five-trunks", 7));
    r.scene_dir = scratch_dir() / "scene";
    r.out_dir = scratch_dir() / "estimate_w1";
    write_scene(r.scene, r.scene_dir);
    EstimateOptions opts;
    opts.cloud = r.scene_dir / "cloud.ply";
    opts.poses = r.scene_dir / "poses.txt";
    opts.masks = r.scene_dir / "masks";
    opts.output = r.out_dir;
    opts.workers = 1;
    std::ostringstream out, err;
    const auto t0 = std::chrono::steady_clock::now();
    r.exit_code = cmd_estimate(opts, out, err);
    r.seconds = seconds_since(t0);
    r.ran = true;
    return r;
  }();
  return run;
}

/// Nearest true trunk to each estimate position, by horizontal distance to the axis.
std::size_t nearest_trunk(const SyntheticScene& scene, const Vec3& p) {
  std::size_t best = 0;
  double bd = 1e300;
  for (std::size_t k = 0; k < scene.trunks.size(); ++k) {
    const double d = (p - scene.trunks[k].spec.base).head<2>().norm();
    if (d < bd) {
      bd = d;
      best = k;
    }
  }
  return best;
}

Outcome criterion10() {
  FieldRun& run = field_run();
  if (run.exit_code != 0) return {false, fmt("cmd_estimate exited with %d", run.exit_code)};
  const auto segments = load_segments(run.out_dir / "segments.json");
  const auto estimates = load_report(run.out_dir / "report.json");
  const auto& scene = run.scene;

  double worst_recall = 1, worst_precision = 1;
  std::set<std::size_t> matched;
  for (const auto& seg : segments) {
    const std::set<Index> s(seg.indices.begin(), seg.indices.end());
    std::size_t best_k = 0;
    double best_recall = -1, best_precision = 0;
    for (std::size_t k = 0; k < scene.trunks.size(); ++k) {
      std::size_t truth = 0, hit = 0;
      for (const Index i : scene.trunks[k].indices) {
        if (signed_height(scene.cloud.points.col(i), scene.plane) <= PipelineConfig{}.ground_clearance) continue;
        ++truth;
        hit += s.count(i);
      }
      const double recall = truth ? double(hit) / truth : 0;
      if (recall > best_recall) {
        best_recall = recall;
        best_k = k;
        best_precision = s.empty() ? 0 : double(hit) / s.size();
      }
    }
    matched.insert(best_k);
    worst_recall = std::min(worst_recall, best_recall);
    worst_precision = std::min(worst_precision, best_precision);
  }

  std::vector<double> rel;
  for (const auto& e : estimates) {
    if (e.method != CurveKind::fourier) continue;
    const auto& t = scene.trunks[nearest_trunk(scene, e.position)];
    rel.push_back(std::fabs(e.dbh - t.true_dbh) / t.true_dbh);
  }
  const double med = rel.empty() ? 1.0 : oracle::median(rel);
  const bool ok = segments.size() == 5 && matched.size() == 5 && worst_recall >= 0.95 && rel.size() == 5 &&
                  med <= 0.03 && run.seconds <= 60;
  return {ok, fmt("%zu segments, worst overlap %.1f%% (precision %.1f%%), fourier median |rel err| %.2f%%, %.1f s",
                  segments.size(), 100 * worst_recall, 100 * worst_precision, 100 * med, run.seconds)};
}

Outcome criterion11() {
  FieldRun& run = field_run();
  if (run.exit_code != 0) return {false, "estimate run failed"};
  const auto& scene = run.scene;

  SimilarityTransform S;
  S.scale = 1.25;
  S.rotation = Eigen::AngleAxisd(0.7, Vec3(0.1, 0.2, 1.0).normalized()).toRotationMatrix();
  S.translation = Vec3(120.0, -40.0, 3.0);
  PointCloud target = scene.cloud;
  target.points = apply_similarity(S, scene.cloud.points);
  const Trajectory target_traj = perturb_trajectory(scene.trajectory, S, 0.0, 0);
  const fs::path dir = scratch_dir() / "lidar";
  fs::create_directories(dir);
  write_ply(target, dir / "cloud.ply");
  write_trajectory(target_traj, dir / "trajectory.txt");

  TransferOptions opts;
  opts.segments = run.out_dir / "segments.json";
  opts.source_cloud = run.scene_dir / "cloud.ply";
  opts.source_trajectory = run.scene_dir / "trajectory.txt";
  opts.target_trajectory = dir / "trajectory.txt";
  opts.target_cloud = dir / "cloud.ply";
  opts.output = scratch_dir() / "transfer";
  opts.workers = 1;
  std::ostringstream out, err;
  const int code = cmd_transfer(opts, out, err);
  if (code != 0) return {false, fmt("cmd_transfer exited with %d: %s", code, err.str().c_str())};

  std::map<int, double> original, transferred;
  for (const auto& e : load_report(run.out_dir / "report.json"))
    if (e.method == CurveKind::fourier) original[e.segment_id] = e.dbh;
  for (const auto& e : load_report(opts.output / "report.json"))
    if (e.method == CurveKind::fourier) transferred[e.segment_id] = e.dbh;
  double worst = 0;
  bool complete = original.size() == transferred.size();
  for (const auto& [id, d] : original) {
    if (!transferred.count(id)) {
      complete = false;
      continue;
    }
    worst = std::max(worst, std::fabs(transferred[id] - d) / d);
  }
  return {complete && worst <= 0.01,
          fmt("%zu/%zu segments transferred, worst fourier DBH change %.3f%%", transferred.size(), original.size(),
              100 * worst)};
}

Outcome criterion12() {
  FieldRun& run = field_run();
  if (run.exit_code != 0) return {false, "estimate run failed"};
  EstimateOptions opts;
  opts.cloud = run.scene_dir / "cloud.ply";
  opts.poses = run.scene_dir / "poses.txt";
  opts.masks = run.scene_dir / "masks";
  opts.output = scratch_dir() / "estimate_w4";
  opts.workers = 4;
  std::ostringstream out, err;
  const int code = cmd_estimate(opts, out, err);
  const bool report_same = slurp(run.out_dir / "report.json") == slurp(opts.output / "report.json");
  const bool manifest_same = slurp(run.out_dir / "manifest.json") == slurp(opts.output / "manifest.json");
  const bool segments_same = slurp(run.out_dir / "segments.json") == slurp(opts.output / "segments.json");
  return {code == 0 && report_same && segments_same,
          fmt("workers 1 vs 4: report %s, segments %s, manifest %s", report_same ? "identical" : "DIFFERENT",
              segments_same ? "identical" : "DIFFERENT", manifest_same ? "identical" : "DIFFERENT")};
}

}  // namespace

int main(int argc, char** argv) {
  // Usage: dbh_acceptance [--expect-fail N]... [N]...
  // Plain numbers select a subset. With --expect-fail the exit status is 0
  // exactly when the failing set equals the expected set.
  std::set<std::size_t> only, expected;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--expect-fail" && i + 1 < argc) expected.insert(std::stoul(argv[++i]));
    else only.insert(std::stoul(arg));
  }
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"circle identity", criterion1},
      {"fourier shape recovery", criterion2},
      {"partial-observability ordering", criterion3},
      {"RANSAC robustness", criterion4},
      {"metric-formula equivalence", criterion5},
      {"Otsu equivalence", criterion6},
      {"DBSCAN equivalence", criterion7},
      {"Procrustes recovery", criterion8},
      {"projection round trip", criterion9},
      {"end-to-end synthetic field test", criterion10},
      {"label-transfer equivalence", criterion11},
      {"determinism across worker counts", criterion12},
  };
  std::set<std::size_t> failed;
  std::size_t ran = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!only.empty() && !only.count(i + 1)) continue;
    ++ran;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) failed.insert(i + 1);
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << (i + 1) << " (" << criteria[i].first
              << "): " << o.detail << std::endl;
  }
  fs::remove_all(scratch_dir());
  std::cout << (ran - failed.size()) << "/" << ran << " acceptance criteria passed" << std::endl;
  if (expected.empty()) return failed.empty() ? 0 : 1;
  std::set<std::size_t> expected_ran;
  for (const auto c : expected)
    if (only.empty() || only.count(c)) expected_ran.insert(c);
  for (const auto c : expected_ran)
    std::cout << "criterion " << c << (failed.count(c) ? " failed as expected" : " passed but was expected to fail")
              << std::endl;
  return failed == expected_ran ? 0 : 1;
}
