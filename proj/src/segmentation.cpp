#include "dbh/segmentation.hpp"

#include "dbh/kdtree.hpp"
#include "dbh/parallel.hpp"
#include "dbh/random.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <numeric>

namespace dbh {

std::vector<Index> ClusterLabeling::sizes() const {
  std::vector<Index> out(static_cast<std::size_t>(count), 0);
  for (const int l : labels) {
    if (l >= 0) ++out[static_cast<std::size_t>(l)];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ground plane
// ---------------------------------------------------------------------------

namespace {

Index count_within(const Points3& points, const Vec3& normal, double offset, double thresh) {
  const Eigen::ArrayXd dist = ((normal.transpose() * points).array() - offset).abs().transpose();
  return (dist <= thresh).count();
}

}  // namespace

GroundPlane fit_ground_plane_ransac(const Points3& points, double dist_thresh, int iterations,
                                    std::uint64_t seed) {
  if (!(dist_thresh > 0)) throw PreconditionError("ground plane: dist_thresh must be positive");
  const Index n = points.cols();
  if (n < 3) throw FitError("ground plane: need at least 3 points");

  const double extent = (points.rowwise().maxCoeff() - points.rowwise().minCoeff()).norm();
  Rng rng(seed);
  Vec3 best_normal = Vec3::Zero();
  double best_offset = 0;
  Index best_count = -1;
  for (int it = 0; it < iterations; ++it) {
    const auto i = static_cast<Index>(uniform_index(rng, static_cast<std::uint64_t>(n)));
    auto j = static_cast<Index>(uniform_index(rng, static_cast<std::uint64_t>(n - 1)));
    if (j >= i) ++j;
    auto k = static_cast<Index>(uniform_index(rng, static_cast<std::uint64_t>(n - 2)));
    if (k >= std::min(i, j)) ++k;
    if (k >= std::max(i, j)) ++k;
    const Vec3 a = points.col(i), b = points.col(j), c = points.col(k);
    const Vec3 cross = (b - a).cross(c - a);
    const double len = cross.norm();
    if (!(len > 1e-12 * extent * extent) || !std::isfinite(len)) continue;
    const Vec3 normal = cross / len;
    const double offset = normal.dot(a);
    const Index count = count_within(points, normal, offset, dist_thresh);
    if (count > best_count) {
      best_count = count;
      best_normal = normal;
      best_offset = offset;
    }
  }
  if (best_count < 0) throw FitError("ground plane: every RANSAC sample was degenerate (collinear)");

  GroundPlane plane{best_normal, best_offset};
  IndexList inliers;
  for (Index i = 0; i < n; ++i) {
    if (std::abs(signed_height(points.col(i), plane)) <= dist_thresh) inliers.push_back(i);
  }
  if (inliers.size() >= 3) {
    const Points3 in = gather(points, inliers);
    const Vec3 mean = in.rowwise().mean();
    const Points3 centered = in.colwise() - mean;
    Eigen::SelfAdjointEigenSolver<Mat3> eig(centered * centered.transpose());
    if (eig.info() == Eigen::Success && eig.eigenvalues()[1] > 0) {
      plane.normal = eig.eigenvectors().col(0).normalized();
      plane.offset = plane.normal.dot(mean);
    }
  }

  Index above = 0, below = 0;
  for (Index i = 0; i < n; ++i) {
    const double h = signed_height(points.col(i), plane);
    if (h > dist_thresh) ++above;
    else if (h < -dist_thresh) ++below;
  }
  bool flip = below > above;
  if (above == below) {
    Index k = 0;
    plane.normal.cwiseAbs().maxCoeff(&k);
    flip = plane.normal[k] < 0;
  }
  if (flip) {
    plane.normal = -plane.normal;
    plane.offset = -plane.offset;
  }
  return plane;
}

IndexList remove_near_ground(const Points3& points, const GroundPlane& plane, double clearance,
                             const IndexList& subset) {
  if (!(clearance > 0)) throw PreconditionError("clearance must be positive");
  IndexList out;
  auto consider = [&](Index i) {
    if (signed_height(points.col(i), plane) > clearance) out.push_back(i);
  };
  if (subset.empty()) {
    for (Index i = 0; i < points.cols(); ++i) consider(i);
  } else {
    for (const Index i : subset) consider(i);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Normals
// ---------------------------------------------------------------------------

NormalField estimate_normals(const Points3& points, int k_neighbors, int workers) {
  const Index n = points.cols();
  if (k_neighbors < 3 || n <= k_neighbors)
    throw PreconditionError("estimate_normals: need cloud size > k_neighbors >= 3");
  const KdTree3 tree(points);
  NormalField field;
  field.normals = Points3::Zero(3, n);
  field.valid.assign(static_cast<std::size_t>(n), 0);
  constexpr Index kBlock = 1024;
  const auto blocks = static_cast<std::size_t>((n + kBlock - 1) / kBlock);
  parallel_for(blocks, workers, [&](std::size_t b) {
    const Index begin = static_cast<Index>(b) * kBlock, end = std::min(n, begin + kBlock);
    for (Index i = begin; i < end; ++i) {
      const auto nbrs = tree.knn(points.col(i), k_neighbors);
      Vec3 mean = Vec3::Zero();
      for (const auto& [d2, j] : nbrs) mean += points.col(j);
      mean /= static_cast<double>(nbrs.size());
      Mat3 cov = Mat3::Zero();
      for (const auto& [d2, j] : nbrs) {
        const Vec3 d = points.col(j) - mean;
        cov.noalias() += d * d.transpose();
      }
      Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
      const Vec3 lambda = eig.eigenvalues();
      if (eig.info() != Eigen::Success || !(lambda[2] > 0) || lambda[1] <= 1e-12 * lambda[2]) continue;
      field.normals.col(i) = eig.eigenvectors().col(0).normalized();
      field.valid[static_cast<std::size_t>(i)] = 1;
    }
  });
  return field;
}

IndexList filter_by_normal(const IndexList& indices, const NormalField& normals,
                           const GroundPlane& plane, double max_tilt_deg) {
  const double limit = std::sin(max_tilt_deg * std::numbers::pi / 180.0);
  IndexList out;
  for (const Index i : indices) {
    if (!normals.valid[static_cast<std::size_t>(i)]) continue;
    if (std::abs(normals.normals.col(i).dot(plane.normal)) <= limit) out.push_back(i);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Clustering
// ---------------------------------------------------------------------------

ClusterLabeling dbscan(const Points3& points, double eps, int min_pts) {
  if (!(eps > 0) || min_pts < 1) throw PreconditionError("dbscan: eps > 0 and min_pts >= 1 required");
  const Index n = points.cols();
  constexpr int kUnassigned = -2;
  ClusterLabeling out;
  out.labels.assign(static_cast<std::size_t>(n), kUnassigned);
  if (n == 0) return out;

  const KdTree3 tree(points);
  std::vector<std::uint8_t> core(static_cast<std::size_t>(n), 0);
  std::vector<Index> nbrs;
  for (Index i = 0; i < n; ++i) {
    tree.radius_search(points.col(i), eps, nbrs);
    core[static_cast<std::size_t>(i)] = static_cast<Index>(nbrs.size()) >= min_pts;
  }

  std::deque<Index> queue;
  for (Index seed = 0; seed < n; ++seed) {
    if (!core[static_cast<std::size_t>(seed)] || out.labels[static_cast<std::size_t>(seed)] != kUnassigned)
      continue;
    const int label = out.count++;
    out.labels[static_cast<std::size_t>(seed)] = label;
    queue.push_back(seed);
    while (!queue.empty()) {
      const Index p = queue.front();
      queue.pop_front();
      tree.radius_search(points.col(p), eps, nbrs);
      for (const Index q : nbrs) {
        auto& lq = out.labels[static_cast<std::size_t>(q)];
        if (lq != kUnassigned) continue;
        lq = label;
        if (core[static_cast<std::size_t>(q)]) queue.push_back(q);
      }
    }
  }
  for (auto& l : out.labels) {
    if (l == kUnassigned) l = -1;
  }
  return out;
}

double otsu_threshold(std::span<const double> values) {
  constexpr int kBins = 256;
  if (values.size() < 2) throw PreconditionError("otsu: need at least two values");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  if (!(hi > lo)) throw PreconditionError("otsu: all values are identical");
  const double width = (hi - lo) / kBins;

  std::array<double, kBins> hist{};
  for (const double v : values) {
    const int bin = std::min(kBins - 1, static_cast<int>(std::floor((v - lo) / width)));
    hist[static_cast<std::size_t>(bin)] += 1.0;
  }
  const double total = static_cast<double>(values.size());
  double sum_all = 0;
  for (int i = 0; i < kBins; ++i) sum_all += hist[static_cast<std::size_t>(i)] * (lo + (i + 0.5) * width);

  std::array<double, kBins> between{};
  double w0 = 0, sum0 = 0, best = 0;
  for (int k = 1; k < kBins; ++k) {
    w0 += hist[static_cast<std::size_t>(k - 1)];
    sum0 += hist[static_cast<std::size_t>(k - 1)] * (lo + (k - 0.5) * width);
    const double w1 = total - w0;
    if (w0 <= 0 || w1 <= 0) continue;
    const double mu0 = sum0 / w0, mu1 = (sum_all - sum0) / w1;
    between[static_cast<std::size_t>(k)] = (w0 / total) * (w1 / total) * (mu0 - mu1) * (mu0 - mu1);
    best = std::max(best, between[static_cast<std::size_t>(k)]);
  }
  // Equal partitions give equal variances up to rounding; treat those as ties.
  for (int k = 1; k < kBins; ++k) {
    if (between[static_cast<std::size_t>(k)] >= best * (1.0 - 1e-12)) return lo + k * width;
  }
  return lo + width;
}

std::vector<int> filter_clusters_by_size(const ClusterLabeling& labeling, const SizeFilterOptions& opts) {
  const auto sizes = labeling.sizes();
  std::vector<int> all(static_cast<std::size_t>(labeling.count));
  std::iota(all.begin(), all.end(), 0);
  if (labeling.count <= 1) return all;
  std::vector<double> values(sizes.begin(), sizes.end());
  if (std::all_of(values.begin(), values.end(), [&](double v) { return v == values.front(); }))
    return all;
  std::vector<double> scored = values;
  if (opts.log_sizes)
    for (double& v : scored) v = std::log(v);
  const double threshold = otsu_threshold(scored);
  std::vector<int> kept;
  double smallest_kept = std::numeric_limits<double>::infinity(), largest_dropped = 0;
  for (int c = 0; c < labeling.count; ++c) {
    const auto uc = static_cast<std::size_t>(c);
    if (scored[uc] >= threshold) {
      kept.push_back(c);
      smallest_kept = std::min(smallest_kept, values[uc]);
    } else {
      largest_dropped = std::max(largest_dropped, values[uc]);
    }
  }
  if (smallest_kept < opts.min_gap_ratio * largest_dropped) return all;
  return kept;
}

std::vector<TrunkSegment> expand_clusters(std::vector<TrunkSegment> segments, const Points3& points,
                                          const std::vector<std::uint8_t>& eligible, double radius,
                                          int max_passes) {
  if (!(radius > 0)) throw PreconditionError("expansion radius must be positive");
  const Index n = points.cols();
  std::vector<int> owner(static_cast<std::size_t>(n), -1);  // position in `segments`
  std::vector<IndexList> frontier(segments.size());
  for (std::size_t s = 0; s < segments.size(); ++s) {
    for (const Index i : segments[s].indices) owner[static_cast<std::size_t>(i)] = static_cast<int>(s);
    frontier[s] = segments[s].indices;
    std::sort(frontier[s].begin(), frontier[s].end());
  }
  if (segments.empty()) return segments;

  const KdTree3 tree(points);
  std::vector<Index> nbrs;
  for (int pass = 0; pass < max_passes; ++pass) {
    // candidate -> (squared distance to nearest member, segment position)
    std::vector<std::pair<Index, std::pair<double, int>>> claims;
    std::vector<std::pair<double, int>> best(static_cast<std::size_t>(n),
                                             {std::numeric_limits<double>::infinity(), -1});
    IndexList touched;
    for (std::size_t s = 0; s < segments.size(); ++s) {
      for (const Index f : frontier[s]) {
        tree.radius_search(points.col(f), radius, nbrs);
        for (const Index q : nbrs) {
          const auto uq = static_cast<std::size_t>(q);
          if (owner[uq] != -1 || !eligible[uq]) continue;
          const double d2 = (points.col(q) - points.col(f)).squaredNorm();
          auto& b = best[uq];
          if (b.second < 0) touched.push_back(q);
          const bool closer = d2 < b.first;
          const bool tie_lower =
              d2 == b.first && b.second >= 0 && segments[s].id < segments[static_cast<std::size_t>(b.second)].id;
          if (closer || tie_lower) b = {d2, static_cast<int>(s)};
        }
      }
    }
    if (touched.empty()) break;
    for (auto& f : frontier) f.clear();
    std::sort(touched.begin(), touched.end());
    for (const Index q : touched) {
      const int s = best[static_cast<std::size_t>(q)].second;
      owner[static_cast<std::size_t>(q)] = s;
      segments[static_cast<std::size_t>(s)].indices.push_back(q);
      frontier[static_cast<std::size_t>(s)].push_back(q);
    }
  }
  for (auto& seg : segments) std::sort(seg.indices.begin(), seg.indices.end());
  return segments;
}

// ---------------------------------------------------------------------------
// Alignment and label transfer
// ---------------------------------------------------------------------------

SimilarityTransform procrustes_align(const Points3& source, const Points3& target, bool with_scale) {
  const Index n = source.cols();
  if (n != target.cols()) throw PreconditionError("procrustes: trajectories differ in length");
  if (n < 3) throw PreconditionError("procrustes: need at least 3 corresponding points");

  const Vec3 mu_s = source.rowwise().mean(), mu_t = target.rowwise().mean();
  const Points3 xs = source.colwise() - mu_s, xt = target.colwise() - mu_t;
  const Mat3 sigma = xt * xs.transpose() / static_cast<double>(n);
  const double var_s = xs.squaredNorm() / static_cast<double>(n);

  Eigen::JacobiSVD<Mat3> svd(sigma, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 d = svd.singularValues();
  if (!(d[0] > 0) || d[1] <= 1e-12 * d[0])
    throw FitError("procrustes: degenerate configuration (collinear points); rotation is not unique");

  Vec3 s = Vec3::Ones();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0) s[2] = -1;
  SimilarityTransform T;
  T.rotation = svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
  T.scale = with_scale ? d.dot(s) / var_s : 1.0;
  T.translation = mu_t - T.scale * T.rotation * mu_s;
  return T;
}

std::vector<TrunkSegment> transfer_labels(const std::vector<TrunkSegment>& segments,
                                          const Points3& source_points, const Points3& target_points,
                                          const SimilarityTransform& target_to_source, double radius) {
  if (!(radius > 0)) throw PreconditionError("transfer radius must be positive");
  std::vector<TrunkSegment> out;
  if (segments.empty() || target_points.cols() == 0) return out;

  const Points3 aligned = apply_similarity(target_to_source, target_points);
  const KdTree3 tree(aligned);
  const auto n = static_cast<std::size_t>(aligned.cols());
  std::vector<std::pair<double, int>> best(n, {std::numeric_limits<double>::infinity(), -1});
  std::vector<Index> nbrs;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    for (const Index i : segments[s].indices) {
      const Vec3 p = source_points.col(i);
      tree.radius_search(p, radius, nbrs);
      for (const Index j : nbrs) {
        const double d2 = (aligned.col(j) - p).squaredNorm();
        auto& b = best[static_cast<std::size_t>(j)];
        const bool tie_lower =
            d2 == b.first && b.second >= 0 && segments[s].id < segments[static_cast<std::size_t>(b.second)].id;
        if (d2 < b.first || tie_lower) b = {d2, static_cast<int>(s)};
      }
    }
  }
  std::vector<TrunkSegment> result(segments.size());
  for (std::size_t s = 0; s < segments.size(); ++s) result[s].id = segments[s].id;
  for (std::size_t j = 0; j < n; ++j) {
    if (best[j].second >= 0) result[static_cast<std::size_t>(best[j].second)].indices.push_back(static_cast<Index>(j));
  }
  for (auto& seg : result) {
    if (!seg.indices.empty()) out.push_back(std::move(seg));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Composition
// ---------------------------------------------------------------------------

std::uint64_t ground_seed(const PipelineConfig& config) {
  return stream_seed(config.seed, {0x67726f756e64ULL});
}

SegmentationResult segment_trunks(const PointCloud& cloud, std::span<const PoseView> views,
                                  const PipelineConfig& config, int workers) {
  config.validate();
  SegmentationResult result;
  const Points3& pts = cloud.points;

  ProjectionOptions popts;
  popts.flip_v = config.flip_v;
  popts.workers = workers;
  const LabelCount labels = accumulate_labels(cloud, views, popts);
  const IndexList candidates = trunk_candidates(labels, config.min_label_count);
  result.candidates = static_cast<Index>(candidates.size());
  if (candidates.empty()) {
    result.diagnostic = "no point received a trunk label from any mask";
    return result;
  }

  result.plane = fit_ground_plane_ransac(pts, config.ground_dist_thresh, config.ground_iterations,
                                         ground_seed(config));

  // Everything above the clearance is the "remaining cloud" used for normals
  // and as the pool for expansion.
  const IndexList remaining = remove_near_ground(pts, result.plane, config.ground_clearance);
  std::vector<Index> position(static_cast<std::size_t>(cloud.size()), -1);
  for (std::size_t k = 0; k < remaining.size(); ++k) position[static_cast<std::size_t>(remaining[k])] = static_cast<Index>(k);

  IndexList above;  // positions into `remaining`
  for (const Index i : candidates) {
    if (position[static_cast<std::size_t>(i)] >= 0) above.push_back(position[static_cast<std::size_t>(i)]);
  }
  result.above_ground = static_cast<Index>(above.size());
  if (above.empty() || static_cast<Index>(remaining.size()) <= config.normal_k) {
    result.diagnostic = "no trunk candidates above the ground clearance";
    return result;
  }

  const Points3 remaining_pts = gather(pts, remaining);
  const NormalField normals = estimate_normals(remaining_pts, config.normal_k, workers);
  const IndexList filtered = filter_by_normal(above, normals, result.plane, config.max_tilt_deg);
  result.normal_filtered = static_cast<Index>(filtered.size());
  if (filtered.empty()) {
    result.diagnostic = "no trunk candidates survived normal filtering";
    return result;
  }

  const ClusterLabeling labeling = dbscan(gather(remaining_pts, filtered), config.dbscan_eps,
                                          config.dbscan_min_pts);
  result.clusters = labeling.count;
  const std::vector<int> kept = filter_clusters_by_size(
      labeling, SizeFilterOptions{config.size_filter_log, config.size_filter_min_gap_ratio});
  result.retained_clusters = static_cast<int>(kept.size());
  if (kept.empty()) {
    result.diagnostic = "no clusters survived density clustering";
    return result;
  }

  std::vector<TrunkSegment> segments(kept.size());
  std::vector<int> slot(static_cast<std::size_t>(labeling.count), -1);
  for (std::size_t s = 0; s < kept.size(); ++s) {
    slot[static_cast<std::size_t>(kept[s])] = static_cast<int>(s);
    segments[s].id = static_cast<int>(s);
  }
  for (std::size_t k = 0; k < filtered.size(); ++k) {
    const int s = slot[static_cast<std::size_t>(std::max(labeling.labels[k], 0))];
    if (labeling.labels[k] < 0 || s < 0) continue;
    segments[static_cast<std::size_t>(s)].indices.push_back(remaining[static_cast<std::size_t>(filtered[k])]);
  }

  std::vector<std::uint8_t> eligible(static_cast<std::size_t>(cloud.size()), 0);
  for (const Index i : remaining) eligible[static_cast<std::size_t>(i)] = 1;
  segments = expand_clusters(std::move(segments), pts, eligible, config.expand_radius,
                             config.expand_max_passes);

  std::stable_sort(segments.begin(), segments.end(), [](const TrunkSegment& a, const TrunkSegment& b) {
    if (a.indices.size() != b.indices.size()) return a.indices.size() > b.indices.size();
    return a.indices.front() < b.indices.front();
  });
  for (std::size_t s = 0; s < segments.size(); ++s) segments[s].id = static_cast<int>(s);
  result.segments = std::move(segments);
  return result;
}

}  // namespace dbh
