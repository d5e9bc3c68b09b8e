#include "dbh/synthetic.hpp"

#include "dbh/projection.hpp"
#include "dbh/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>

namespace dbh {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kBreastHeight = 1.37;

double profile_speed(const Fourier& f, double t) {
  const double r = f.radius(t), dr = f.radius_d1(t);
  return std::sqrt(r * r + dr * dr);
}

std::vector<AzimuthInterval> covered(const SyntheticTrunkSpec& spec) {
  if (spec.coverage.empty()) return {AzimuthInterval{}};
  return spec.coverage;
}

std::string frame_name(int i) {
  std::string s = std::to_string(i);
  return "frame_" + std::string(s.size() < 3 ? 3 - s.size() : 0, '0') + s;
}

Pose ring_pose(double angle, double radius, double height) {
  const Vec3 position(radius * std::cos(angle), radius * std::sin(angle), height);
  const Vec3 forward = Vec3(-std::cos(angle), -std::sin(angle), 0.0);
  const Vec3 down(0.0, 0.0, -1.0);
  Pose pose;
  pose.rotation.col(0) = down.cross(forward);
  pose.rotation.col(1) = down;
  pose.rotation.col(2) = forward;
  pose.translation = position;
  return pose;
}

Vec3 read_vec3(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw ParseError("expected a 3-element array");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

}  // namespace

Fourier SyntheticTrunkSpec::profile() const {
  Fourier f;
  f.a0 = a0;
  f.a = a;
  f.b = b;
  return f;
}

void SyntheticTrunkSpec::validate() const {
  if (!(a0 > 0)) throw PreconditionError("trunk spec: a0 must be positive");
  if (!(profile().min_radius(1024) > 0)) throw PreconditionError("trunk spec: r(t) must stay positive");
  if (!(height > 1.52)) throw PreconditionError("trunk spec: height must exceed 1.52 m");
  if (!(axis.norm() > 0)) throw PreconditionError("trunk spec: axis must be non-zero");
  if (!(density > 0)) throw PreconditionError("trunk spec: density must be positive");
  if (!(sigma >= 0)) throw PreconditionError("trunk spec: sigma must be non-negative");
  for (const auto& c : coverage) {
    if (!(c.end > c.start) || c.end - c.start > kTwoPi + 1e-12)
      throw PreconditionError("trunk spec: coverage interval must satisfy start < end <= start + 2 pi");
  }
}

void SceneSpec::validate() const {
  for (const auto& t : trunks) t.validate();
  if (!(ground_extent > 0) || !(ground_density >= 0) || !(ground_sigma >= 0))
    throw PreconditionError("scene spec: invalid ground parameters");
  if (!(outlier_fraction >= 0 && outlier_fraction < 1))
    throw PreconditionError("scene spec: outlier_fraction must lie in [0, 1)");
  if (views < 1) throw PreconditionError("scene spec: at least one view is required");
  if (mask_width < 2 || mask_height < 2) throw PreconditionError("scene spec: mask must be at least 2x2");
  if (trajectory_samples < 3) throw PreconditionError("scene spec: trajectory needs at least 3 samples");
}

double oracle_arc_length(const Fourier& profile, double t0, double t1, int panels) {
  if (panels < 2) panels = 2;
  if (panels % 2) ++panels;
  const double h = (t1 - t0) / panels;
  double sum = profile_speed(profile, t0) + profile_speed(profile, t1);
  for (int k = 1; k < panels; ++k) sum += (k % 2 ? 4.0 : 2.0) * profile_speed(profile, t0 + k * h);
  return sum * h / 3.0;
}

double oracle_perimeter(const SyntheticTrunkSpec& spec) {
  spec.validate();
  return oracle_arc_length(spec.profile(), 0.0, kTwoPi);
}

Points3 generate_trunk(const SyntheticTrunkSpec& spec) {
  spec.validate();
  const Fourier profile = spec.profile();
  const Vec3 axis = spec.axis.normalized();
  const auto [e1, e2] = orthonormal_frame(axis);
  const auto intervals = covered(spec);

  std::vector<double> lengths, max_speed;
  double total = 0;
  for (const auto& c : intervals) {
    lengths.push_back(oracle_arc_length(profile, c.start, c.end, 1 << 14));
    total += lengths.back();
    double m = 0;
    for (int k = 0; k <= 4096; ++k) m = std::max(m, profile_speed(profile, c.start + (c.end - c.start) * k / 4096.0));
    max_speed.push_back(1.01 * m);
  }
  const auto n = static_cast<Index>(std::llround(total * spec.height * spec.density));

  Rng rng(stream_seed(spec.seed, {0x7472756e6bULL}));
  Points3 out(3, n);
  for (Index i = 0; i < n; ++i) {
    double pick = uniform01(rng) * total;
    std::size_t k = 0;
    while (k + 1 < intervals.size() && pick >= lengths[k]) pick -= lengths[k++];
    const auto& c = intervals[k];
    double t;
    do {
      t = uniform(rng, c.start, c.end);
    } while (uniform01(rng) * max_speed[k] > profile_speed(profile, t));
    const double h = uniform(rng, 0.0, spec.height);
    double r = profile.radius(t);
    if (spec.sigma > 0) r += spec.sigma * standard_normal(rng);
    out.col(i) = spec.base + h * axis + r * (std::cos(t) * e1 + std::sin(t) * e2);
  }
  return out;
}

SyntheticScene generate_scene(const SceneSpec& spec) {
  spec.validate();
  SyntheticScene scene;
  scene.plane = GroundPlane{Vec3::UnitZ(), 0.0};

  std::vector<Vec3> pts;
  std::vector<std::array<std::uint8_t, 3>> colors;

  Rng ground_rng(stream_seed(spec.seed, {0x67726f756e64ULL}));
  const double half = 0.5 * spec.ground_extent;
  const auto n_ground = static_cast<Index>(std::llround(spec.ground_extent * spec.ground_extent * spec.ground_density));
  for (Index i = 0; i < n_ground; ++i) {
    const double x = uniform(ground_rng, -half, half);
    const double y = uniform(ground_rng, -half, half);
    const double z = spec.ground_sigma > 0 ? spec.ground_sigma * standard_normal(ground_rng) : 0.0;
    pts.emplace_back(x, y, z);
    colors.push_back({110, 90, 60});
  }

  double top = 2.0;
  for (const auto& t : spec.trunks) {
    SyntheticTrunk trunk;
    trunk.spec = t;
    trunk.true_dbh = oracle_perimeter(t) / std::numbers::pi;
    const Points3 surface = generate_trunk(t);
    for (Index i = 0; i < surface.cols(); ++i) {
      trunk.indices.push_back(static_cast<Index>(pts.size()));
      pts.push_back(surface.col(i));
      colors.push_back({150, 120, 100});
    }
    top = std::max(top, (t.base + t.height * t.axis.normalized()).z());
    scene.trunks.push_back(std::move(trunk));
  }

  const auto n_in = static_cast<double>(pts.size());
  const auto n_out = static_cast<Index>(std::llround(n_in * spec.outlier_fraction / (1.0 - spec.outlier_fraction)));
  Rng outlier_rng(stream_seed(spec.seed, {0x6f75746c696572ULL}));
  for (Index i = 0; i < n_out; ++i) {
    const double x = uniform(outlier_rng, -half, half);
    const double y = uniform(outlier_rng, -half, half);
    const double z = uniform(outlier_rng, 0.0, top);
    pts.emplace_back(x, y, z);
    colors.push_back({128, 128, 128});
  }

  scene.cloud.points.resize(3, static_cast<Index>(pts.size()));
  scene.cloud.colors.resize(3, static_cast<Index>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) {
    scene.cloud.points.col(static_cast<Index>(i)) = pts[i];
    for (int c = 0; c < 3; ++c) scene.cloud.colors(c, static_cast<Index>(i)) = colors[i][static_cast<std::size_t>(c)];
  }

  const double ring = spec.camera_radius > 0 ? spec.camera_radius : 0.45 * spec.ground_extent;
  const int W = spec.mask_width, H = spec.mask_height;
  for (int v = 0; v < spec.views; ++v) {
    PoseView view;
    view.frame_id = frame_name(v);
    view.pose = ring_pose(kTwoPi * (v + 0.5) / spec.views, ring, spec.camera_height);
    view.mask = EquirectMask(W, H);
    for (const auto& trunk : scene.trunks) {
      for (const Index i : trunk.indices) {
        const auto px = project_point(scene.cloud.points.col(i), view.pose, H, W);
        if (!px) continue;
        for (int dv = -1; dv <= 1; ++dv)
          for (int du = -1; du <= 1; ++du)
            view.mask.set(std::clamp(px->u + du, 0, W - 1), std::clamp(px->v + dv, 0, H - 1), true);
      }
    }
    scene.views.push_back(std::move(view));
  }

  const int m = spec.trajectory_samples;
  scene.trajectory.positions.resize(3, m);
  for (int k = 0; k < m; ++k) {
    const double a = kTwoPi * k / m;
    scene.trajectory.positions.col(k) =
        Vec3(ring * std::cos(a), ring * std::sin(a), spec.camera_height + 0.1 * std::sin(3 * a));
    scene.trajectory.timestamps.push_back(0.5 * k);
  }
  return scene;
}

Trajectory perturb_trajectory(const Trajectory& trajectory, const SimilarityTransform& T, double sigma,
                              std::uint64_t seed) {
  if (!is_rotation(T.rotation, 1e-9) || !(T.scale > 0))
    throw PreconditionError("perturb_trajectory: invalid similarity transform");
  Trajectory out = trajectory;
  out.positions = apply_similarity(T, trajectory.positions);
  if (sigma > 0) {
    Rng rng(stream_seed(seed, {0x74726aULL}));
    for (Index i = 0; i < out.positions.cols(); ++i)
      for (int k = 0; k < 3; ++k) out.positions(k, i) += sigma * standard_normal(rng);
  }
  return out;
}

std::vector<std::string> scene_presets() { return {"two-trunks", "partial-180", "five-trunks"}; }

SceneSpec scene_preset(const std::string& name, std::uint64_t seed) {
  SceneSpec scene;
  scene.seed = seed;
  auto trunk = [&](double a0, Vec3 base, std::uint64_t id) {
    SyntheticTrunkSpec t;
    t.a0 = a0;
    t.base = base;
    t.height = 6.0;
    t.sigma = 0.003;
    t.density = 1500.0;
    t.seed = stream_seed(seed, {id});
    return t;
  };
  if (name == "two-trunks") {
    scene.ground_extent = 12.0;
    scene.outlier_fraction = 0.05;
    scene.trunks.push_back(trunk(0.20, Vec3(-2.5, 0.0, 0.0), 1));
    scene.trunks.push_back(trunk(0.30, Vec3(2.5, 0.0, 0.0), 2));
    scene.trunks[1].a = Eigen::Vector2d(0.0, 0.015);
  } else if (name == "partial-180") {
    scene.ground_extent = 10.0;
    auto t = trunk(0.30, Vec3::Zero(), 1);
    t.coverage = {AzimuthInterval{-0.5 * std::numbers::pi, 0.5 * std::numbers::pi}};
    scene.trunks.push_back(t);
  } else if (name == "five-trunks") {
    scene.ground_extent = 14.0;
    scene.outlier_fraction = 0.20;
    const double dbh_cm[] = {15.0, 40.0, 65.0, 90.0, 120.0};
    for (int k = 0; k < 5; ++k) {
      const double angle = kTwoPi * k / 5.0;
      auto t = trunk(dbh_cm[k] / 200.0, Vec3(3.0 * std::cos(angle), 3.0 * std::sin(angle), 0.0),
                     static_cast<std::uint64_t>(k + 1));
      t.a = Eigen::Vector2d(0.02, 0.04) * t.a0;
      t.b = Eigen::Vector2d(-0.01, 0.03) * t.a0;
      scene.trunks.push_back(t);
    }
  } else {
    throw PreconditionError("unknown preset '" + name + "'");
  }
  return scene;
}

SceneSpec load_scene_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  SceneSpec scene;
  try {
    const auto j = nlohmann::json::parse(in);
    scene.seed = j.value("seed", scene.seed);
    scene.ground_extent = j.value("ground_extent", scene.ground_extent);
    scene.ground_density = j.value("ground_density", scene.ground_density);
    scene.ground_sigma = j.value("ground_sigma", scene.ground_sigma);
    scene.outlier_fraction = j.value("outlier_fraction", scene.outlier_fraction);
    scene.views = j.value("views", scene.views);
    scene.mask_width = j.value("mask_width", scene.mask_width);
    scene.mask_height = j.value("mask_height", scene.mask_height);
    scene.camera_radius = j.value("camera_radius", scene.camera_radius);
    scene.camera_height = j.value("camera_height", scene.camera_height);
    scene.trajectory_samples = j.value("trajectory_samples", scene.trajectory_samples);
    std::uint64_t id = 0;
    for (const auto& jt : j.at("trunks")) {
      SyntheticTrunkSpec t;
      t.a0 = jt.at("a0").get<double>();
      if (jt.contains("a")) t.a = Eigen::Vector2d(jt["a"].at(0).get<double>(), jt["a"].at(1).get<double>());
      if (jt.contains("b")) t.b = Eigen::Vector2d(jt["b"].at(0).get<double>(), jt["b"].at(1).get<double>());
      if (jt.contains("base")) t.base = read_vec3(jt["base"]);
      if (jt.contains("axis")) t.axis = read_vec3(jt["axis"]);
      t.height = jt.value("height", t.height);
      t.sigma = jt.value("sigma", t.sigma);
      t.density = jt.value("density", t.density);
      t.seed = jt.value("seed", stream_seed(scene.seed, {++id}));
      if (jt.contains("coverage_deg")) {
        for (const auto& c : jt["coverage_deg"]) {
          t.coverage.push_back(AzimuthInterval{c.at(0).get<double>() * std::numbers::pi / 180.0,
                                               c.at(1).get<double>() * std::numbers::pi / 180.0});
        }
      }
      scene.trunks.push_back(t);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  scene.validate();
  return scene;
}

void write_scene(const SyntheticScene& scene, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "masks");
  write_ply(scene.cloud, dir / "cloud.ply", PlyEncoding::binary);

  std::vector<std::pair<std::string, Pose>> poses;
  for (const auto& view : scene.views) {
    poses.emplace_back(view.frame_id, view.pose);
    write_mask(view.mask, dir / "masks" / (view.frame_id + ".pgm"));
  }
  write_poses(poses, dir / "poses.txt");
  write_trajectory(scene.trajectory, dir / "trajectory.txt");

  std::vector<Reference> refs;
  std::vector<TrunkSegment> truth;
  for (std::size_t k = 0; k < scene.trunks.size(); ++k) {
    const auto& t = scene.trunks[k];
    refs.push_back(Reference{"tree_" + std::to_string(k), t.true_dbh,
                             t.spec.base + kBreastHeight * t.spec.axis.normalized()});
    truth.push_back(TrunkSegment{static_cast<int>(k), t.indices, std::nullopt});
  }
  write_references(refs, dir / "references.csv");
  write_segments(truth, scene.cloud.size(), dir / "truth_segments.json");
}

}  // namespace dbh
