#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "json.hpp"
#include "pcdistill/geometry.hpp"
#include "pcdistill/rng.hpp"
#include "pcdistill/tensor.hpp"

namespace pcdistill {

// ---------------------------------------------------------------------------
// Scenes
// ---------------------------------------------------------------------------

struct ObjectSpec {
  enum class Kind { Box, Sphere };
  Kind kind = Kind::Box;
  Vec3 center{};
  // Boxes: half extents per axis. Spheres: half.x is the radius.
  Vec3 half{};
  int class_id = 1;
};

// Class 0 is the ground; objects draw ids from [1, num_classes). Object kind
// and size are tied to the class id so the classes are geometrically
// distinguishable, not just by teacher feature.
struct SceneConfig {
  int num_classes = 5;
  int num_objects = 8;
  double min_radius = 3.5;
  double max_radius = 13.0;
  double ground_noise = 0.02;  // sigma_g, meters
  double base_size = 0.55;

  nlohmann::json to_json() const {
    return {{"num_classes", num_classes}, {"num_objects", num_objects},
            {"min_radius", min_radius},   {"max_radius", max_radius},
            {"ground_noise", ground_noise}, {"base_size", base_size}};
  }
  static SceneConfig from_json(const nlohmann::json& j) {
    SceneConfig c;
    c.num_classes = j.at("num_classes");
    c.num_objects = j.at("num_objects");
    c.min_radius = j.at("min_radius");
    c.max_radius = j.at("max_radius");
    c.ground_noise = j.at("ground_noise");
    c.base_size = j.at("base_size");
    return c;
  }
};

struct Scene {
  std::vector<ObjectSpec> objects;
  double ground_noise = 0.0;
  int num_classes = 2;
  std::uint64_t seed = 0;
};

inline Scene generate_scene(std::uint64_t seed, const SceneConfig& cfg) {
  if (cfg.num_classes < 2) throw std::invalid_argument("generate_scene: need at least 2 classes");
  if (cfg.num_objects < 1) throw std::invalid_argument("generate_scene: need at least 1 object");
  if (cfg.min_radius <= 0.0 || cfg.max_radius <= cfg.min_radius)
    throw std::invalid_argument("generate_scene: bad radius range");
  Rng rng = Rng::derive(seed, {0x5ce7e});
  Scene scene;
  scene.ground_noise = cfg.ground_noise;
  scene.num_classes = cfg.num_classes;
  scene.seed = seed;
  const int object_classes = cfg.num_classes - 1;
  for (int i = 0; i < cfg.num_objects; ++i) {
    ObjectSpec obj;
    // The first pass over the object classes is round-robin so small scenes
    // still cover every class; the rest is random.
    obj.class_id = i < object_classes ? 1 + i : 1 + static_cast<int>(rng.uniform_index(object_classes));
    obj.kind = (obj.class_id % 2 == 1) ? ObjectSpec::Kind::Box : ObjectSpec::Kind::Sphere;
    const double angle = rng.uniform(-3.14159265358979, 3.14159265358979);
    const double radius = rng.uniform(cfg.min_radius, cfg.max_radius);
    const double size = cfg.base_size * (0.8 + 0.35 * obj.class_id) * rng.uniform(0.85, 1.15);
    if (obj.kind == ObjectSpec::Kind::Box) {
      obj.half = {size * rng.uniform(0.8, 1.4), size * rng.uniform(0.8, 1.4), size};
    } else {
      obj.half = {size, size, size};
    }
    obj.center = {radius * std::cos(angle), radius * std::sin(angle), obj.half.z};
    scene.objects.push_back(obj);
  }
  return scene;
}

// ---------------------------------------------------------------------------
// Ray casting
// ---------------------------------------------------------------------------

struct RayHit {
  double t = 0.0;
  int class_id = 0;
};

inline std::optional<double> ray_sphere(const Vec3& origin, const Vec3& dir, const Vec3& center,
                                        double radius) {
  const Vec3 oc = origin - center;
  const double b = oc.dot(dir);
  const double c = oc.squared_norm() - radius * radius;
  const double disc = b * b - c;
  if (disc < 0.0) return std::nullopt;
  const double sq = std::sqrt(disc);
  double t = -b - sq;
  if (t <= 1e-9) t = -b + sq;
  if (t <= 1e-9) return std::nullopt;
  return t;
}

inline std::optional<double> ray_aabb(const Vec3& origin, const Vec3& dir, const Vec3& lo,
                                      const Vec3& hi) {
  double tmin = 0.0, tmax = std::numeric_limits<double>::infinity();
  const double o[3] = {origin.x, origin.y, origin.z};
  const double d[3] = {dir.x, dir.y, dir.z};
  const double l[3] = {lo.x, lo.y, lo.z};
  const double h[3] = {hi.x, hi.y, hi.z};
  for (int i = 0; i < 3; ++i) {
    if (std::abs(d[i]) < 1e-15) {
      if (o[i] < l[i] || o[i] > h[i]) return std::nullopt;
      continue;
    }
    double t0 = (l[i] - o[i]) / d[i];
    double t1 = (h[i] - o[i]) / d[i];
    if (t0 > t1) std::swap(t0, t1);
    tmin = std::max(tmin, t0);
    tmax = std::min(tmax, t1);
    if (tmin > tmax) return std::nullopt;
  }
  if (tmin <= 1e-9) return std::nullopt;
  return tmin;
}

// Nearest hit among ground plane (z = 0, class 0) and scene objects.
inline std::optional<RayHit> cast_ray(const Scene& scene, const Vec3& origin, const Vec3& dir,
                                      double max_range) {
  std::optional<RayHit> best;
  if (dir.z < -1e-12) {
    const double t = -origin.z / dir.z;
    if (t > 1e-9 && t <= max_range) best = RayHit{t, 0};
  }
  for (const ObjectSpec& obj : scene.objects) {
    std::optional<double> t;
    if (obj.kind == ObjectSpec::Kind::Sphere) {
      t = ray_sphere(origin, dir, obj.center, obj.half.x);
    } else {
      t = ray_aabb(origin, dir, obj.center - obj.half, obj.center + obj.half);
    }
    if (t && *t <= max_range && (!best || *t < best->t)) best = RayHit{*t, obj.class_id};
  }
  return best;
}

// ---------------------------------------------------------------------------
// LiDAR simulation
// ---------------------------------------------------------------------------

struct LidarConfig {
  int azimuth_steps = 96;
  int elevation_steps = 16;
  double elevation_min = -0.42;  // radians
  double elevation_max = 0.06;
  double max_range = 28.0;
  double sensor_height = 1.8;
  double intensity_noise = 0.05;

  nlohmann::json to_json() const {
    return {{"azimuth_steps", azimuth_steps},   {"elevation_steps", elevation_steps},
            {"elevation_min", elevation_min},   {"elevation_max", elevation_max},
            {"max_range", max_range},           {"sensor_height", sensor_height},
            {"intensity_noise", intensity_noise}};
  }
  static LidarConfig from_json(const nlohmann::json& j) {
    LidarConfig c;
    c.azimuth_steps = j.at("azimuth_steps");
    c.elevation_steps = j.at("elevation_steps");
    c.elevation_min = j.at("elevation_min");
    c.elevation_max = j.at("elevation_max");
    c.max_range = j.at("max_range");
    c.sensor_height = j.at("sensor_height");
    c.intensity_noise = j.at("intensity_noise");
    return c;
  }
};

// Intensity carries a class signal plus noise so the reconstruction head has
// learnable structure without being a clean label channel.
inline double class_intensity(int class_id, int num_classes, double noise, Rng& rng) {
  const double base = 0.2 * static_cast<double>(class_id) / num_classes + 0.1;
  return std::clamp(base + noise * rng.normal(), 0.0, 1.0);
}

// Casts an azimuth x elevation ray grid from the sensor. The returned cloud is
// expressed in the frame that `pose` maps into world coordinates; the sensor
// sits at sensor_origin within that frame.
inline PointCloud simulate_lidar(const Scene& scene, const Mat4& pose, const LidarConfig& cfg,
                                 Rng& rng) {
  if (cfg.azimuth_steps < 1 || cfg.elevation_steps < 1 || cfg.max_range <= 0.0)
    throw std::invalid_argument("simulate_lidar: bad ray grid");
  const Mat4 inv_pose = pose.inverse_rigid();
  const Vec3 sensor_local{0.0, 0.0, cfg.sensor_height};
  const Vec3 sensor_world = pose.apply_point(sensor_local);
  PointCloud out;
  out.sensor_origin = sensor_local;
  for (int ia = 0; ia < cfg.azimuth_steps; ++ia) {
    const double az = 2.0 * 3.14159265358979323846 * ia / cfg.azimuth_steps;
    for (int ie = 0; ie < cfg.elevation_steps; ++ie) {
      const double el = cfg.elevation_steps == 1
                            ? cfg.elevation_min
                            : cfg.elevation_min + (cfg.elevation_max - cfg.elevation_min) * ie /
                                                      (cfg.elevation_steps - 1);
      const Vec3 dir{std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)};
      const auto hit = cast_ray(scene, sensor_world, dir, cfg.max_range);
      if (!hit) continue;
      Vec3 p_world = sensor_world + dir * hit->t;
      if (hit->class_id == 0 && scene.ground_noise > 0.0)
        p_world.z += scene.ground_noise * rng.normal();
      const Vec3 p = inv_pose.apply_point(p_world);
      const double intensity =
          class_intensity(hit->class_id, scene.num_classes, cfg.intensity_noise, rng);
      out.points.push_back({p.x, p.y, p.z, intensity});
      out.labels.push_back(hit->class_id);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Teacher features
// ---------------------------------------------------------------------------

// Stand-in for a frozen image backbone: each patch reports the unit-normalized
// prototype of the dominant class it sees, perturbed by semantic noise. Row
// `num_classes` of the prototype table is the background prototype.
struct FeatureConfig {
  int feature_dim = 16;       // D_v
  double noise = 0.1;         // sigma_t
  std::uint64_t prototype_seed = 1234;
  int num_classes = 5;
  double max_prototype_cos = 0.55;

  nlohmann::json to_json() const {
    return {{"feature_dim", feature_dim},
            {"noise", noise},
            {"prototype_seed", prototype_seed},
            {"num_classes", num_classes},
            {"max_prototype_cos", max_prototype_cos}};
  }
  static FeatureConfig from_json(const nlohmann::json& j) {
    FeatureConfig c;
    c.feature_dim = j.at("feature_dim");
    c.noise = j.at("noise");
    c.prototype_seed = j.at("prototype_seed");
    c.num_classes = j.at("num_classes");
    c.max_prototype_cos = j.at("max_prototype_cos");
    return c;
  }
};

// (num_classes + 1) x D_v unit rows. Random directions are re-drawn until the
// worst pairwise |cos| is below the configured bound, which keeps classes
// confusable but not degenerate.
inline Tensor class_prototypes(const FeatureConfig& cfg) {
  const int rows = cfg.num_classes + 1;
  for (std::uint64_t attempt = 0;; ++attempt) {
    Rng rng = Rng::derive(cfg.prototype_seed, {0x9e070, attempt});
    Tensor protos = Tensor::zeros({static_cast<std::size_t>(rows),
                                   static_cast<std::size_t>(cfg.feature_dim)});
    for (int r = 0; r < rows; ++r) {
      double norm_sq = 0.0;
      for (int c = 0; c < cfg.feature_dim; ++c) {
        const double v = rng.normal();
        protos.at(r, c) = v;
        norm_sq += v * v;
      }
      const double inv = 1.0 / std::sqrt(norm_sq);
      for (int c = 0; c < cfg.feature_dim; ++c) protos.at(r, c) *= inv;
    }
    double worst = 0.0;
    for (int a = 0; a < rows; ++a)
      for (int b = a + 1; b < rows; ++b) {
        double dot = 0.0;
        for (int c = 0; c < cfg.feature_dim; ++c) dot += protos.at(a, c) * protos.at(b, c);
        worst = std::max(worst, std::abs(dot));
      }
    if (worst <= cfg.max_prototype_cos) return protos;
    if (attempt > 1000) throw std::runtime_error("class_prototypes: rejection did not converge");
  }
}

// Per-patch teacher features for one camera: (patch_rows * patch_cols) x D_v,
// row index = patch_row * patch_cols + patch_col, every row unit norm.
inline Tensor render_teacher(const Scene& scene, const CalibratedCamera& cam, const Mat4& pose,
                             const FeatureConfig& cfg, Rng& rng) {
  cam.validate();
  const Tensor protos = class_prototypes(cfg);
  const int rows = cam.patch_rows(), cols = cam.patch_cols(), s = cam.patch_stride;
  const Mat4 cam_to_local = cam.extrinsics.inverse_rigid();
  const Vec3 cam_center_world = pose.apply_point(cam_to_local.translation_part());
  const Mat3 rot_world = pose.rotation() * cam_to_local.rotation();
  const double fx = cam.intrinsics.at(0, 0), fy = cam.intrinsics.at(1, 1);
  const double cx = cam.intrinsics.at(0, 2), cy = cam.intrinsics.at(1, 2);
  const double skew = cam.intrinsics.at(0, 1);

  Tensor out = Tensor::zeros({static_cast<std::size_t>(rows) * cols,
                              static_cast<std::size_t>(cfg.feature_dim)});
  std::vector<int> votes(static_cast<std::size_t>(cfg.num_classes) + 1);
  for (int pr = 0; pr < rows; ++pr) {
    for (int pc = 0; pc < cols; ++pc) {
      std::fill(votes.begin(), votes.end(), 0);
      for (int dy = 0; dy < s; ++dy) {
        for (int dx = 0; dx < s; ++dx) {
          const double u = pc * s + dx + 0.5;
          const double v = pr * s + dy + 0.5;
          const double yc = (v - cy) / fy;
          const double xc = ((u - cx) - skew * yc) / fx;
          const Vec3 dir = rot_world.apply(Vec3{xc, yc, 1.0}).normalized();
          const auto hit = cast_ray(scene, cam_center_world, dir, 1e6);
          const int cls = hit ? hit->class_id : cfg.num_classes;  // background
          votes[static_cast<std::size_t>(cls)]++;
        }
      }
      int best_class = 0;
      for (int c = 1; c <= cfg.num_classes; ++c)
        if (votes[static_cast<std::size_t>(c)] > votes[static_cast<std::size_t>(best_class)])
          best_class = c;
      const std::size_t row = static_cast<std::size_t>(pr) * cols + pc;
      double norm_sq = 0.0;
      for (int c = 0; c < cfg.feature_dim; ++c) {
        const double v = protos.at(best_class, static_cast<std::size_t>(c)) + cfg.noise * rng.normal();
        out.at(row, static_cast<std::size_t>(c)) = v;
        norm_sq += v * v;
      }
      const double inv = 1.0 / std::sqrt(norm_sq);
      for (int c = 0; c < cfg.feature_dim; ++c) out.at(row, static_cast<std::size_t>(c)) *= inv;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Frames and datasets
// ---------------------------------------------------------------------------

struct TeacherFeatureMap {
  std::vector<Tensor> per_camera;  // aligned with Frame::cameras by index
};

enum class Split : std::uint8_t { Train = 0, Val = 1 };

struct Frame {
  PointCloud cloud;
  std::vector<CalibratedCamera> cameras;
  TeacherFeatureMap teacher;
  Mat4 pose = Mat4::identity();  // local frame -> shared world frame
  std::uint64_t frame_id = 0;
  Split split = Split::Train;
};

struct CameraRigConfig {
  int image_size = 64;  // H = W
  int patch_stride = 4;
  double focal = 40.0;

  nlohmann::json to_json() const {
    return {{"image_size", image_size}, {"patch_stride", patch_stride}, {"focal", focal}};
  }
  static CameraRigConfig from_json(const nlohmann::json& j) {
    CameraRigConfig c;
    c.image_size = j.at("image_size");
    c.patch_stride = j.at("patch_stride");
    c.focal = j.at("focal");
    return c;
  }
};

// Two cameras: one looking along +x ("front"), one along +y ("left"), both at
// sensor height. Camera frame convention: x right, y down, z forward.
inline std::vector<CalibratedCamera> make_camera_rig(const CameraRigConfig& rig,
                                                     double sensor_height) {
  CalibratedCamera base;
  base.image_height = rig.image_size;
  base.image_width = rig.image_size;
  base.patch_stride = rig.patch_stride;
  base.intrinsics = Mat3::identity();
  base.intrinsics.at(0, 0) = rig.focal;
  base.intrinsics.at(1, 1) = rig.focal;
  base.intrinsics.at(0, 2) = rig.image_size / 2.0;
  base.intrinsics.at(1, 2) = rig.image_size / 2.0;

  const Vec3 center{0.0, 0.0, sensor_height};
  Mat3 front_rot;
  front_rot.m = {0, -1, 0, 0, 0, -1, 1, 0, 0};
  Mat3 left_rot;
  left_rot.m = {1, 0, 0, 0, 0, -1, 0, 1, 0};

  std::vector<CalibratedCamera> cams(2, base);
  cams[0].extrinsics = Mat4::from_rt(front_rot, front_rot.apply(center) * -1.0);
  cams[1].extrinsics = Mat4::from_rt(left_rot, left_rot.apply(center) * -1.0);
  for (const auto& c : cams) c.validate();
  return cams;
}

struct DatasetConfig {
  SceneConfig scene;
  LidarConfig lidar;
  FeatureConfig features;
  CameraRigConfig rig;
  int num_scenes = 20;
  int frames_per_scene = 8;
  int train_scenes = 15;
  double pose_step = 0.04;  // per-frame sensor translation along +x, meters

  int total_frames() const { return num_scenes * frames_per_scene; }

  nlohmann::json to_json() const {
    return {{"scene", scene.to_json()},
            {"lidar", lidar.to_json()},
            {"features", features.to_json()},
            {"rig", rig.to_json()},
            {"num_scenes", num_scenes},
            {"frames_per_scene", frames_per_scene},
            {"train_scenes", train_scenes},
            {"pose_step", pose_step}};
  }
  static DatasetConfig from_json(const nlohmann::json& j) {
    DatasetConfig c;
    c.scene = SceneConfig::from_json(j.at("scene"));
    c.lidar = LidarConfig::from_json(j.at("lidar"));
    c.features = FeatureConfig::from_json(j.at("features"));
    c.rig = CameraRigConfig::from_json(j.at("rig"));
    c.num_scenes = j.at("num_scenes");
    c.frames_per_scene = j.at("frames_per_scene");
    c.train_scenes = j.at("train_scenes");
    c.pose_step = j.at("pose_step");
    return c;
  }
};

inline Frame generate_frame(std::uint64_t seed, const DatasetConfig& cfg, int scene_index,
                            int frame_in_scene) {
  const Scene scene = generate_scene(mix_seed(seed, {0xa11ce, static_cast<std::uint64_t>(scene_index)}),
                                     cfg.scene);
  Frame frame;
  const double offset =
      (frame_in_scene - (cfg.frames_per_scene - 1) / 2.0) * cfg.pose_step;
  frame.pose = Mat4::translation({offset, 0.0, 0.0});
  Rng lidar_rng = Rng::derive(seed, {0x11da5, static_cast<std::uint64_t>(scene_index),
                                     static_cast<std::uint64_t>(frame_in_scene)});
  frame.cloud = simulate_lidar(scene, frame.pose, cfg.lidar, lidar_rng);
  frame.cameras = make_camera_rig(cfg.rig, cfg.lidar.sensor_height);
  FeatureConfig feat = cfg.features;
  feat.num_classes = cfg.scene.num_classes;
  for (std::size_t c = 0; c < frame.cameras.size(); ++c) {
    Rng teacher_rng = Rng::derive(seed, {0x7eac4, static_cast<std::uint64_t>(scene_index),
                                         static_cast<std::uint64_t>(frame_in_scene), c});
    frame.teacher.per_camera.push_back(
        render_teacher(scene, frame.cameras[c], frame.pose, feat, teacher_rng));
  }
  frame.frame_id = static_cast<std::uint64_t>(scene_index) * cfg.frames_per_scene + frame_in_scene;
  frame.split = scene_index < cfg.train_scenes ? Split::Train : Split::Val;
  return frame;
}

inline std::vector<Frame> generate_dataset(std::uint64_t seed, const DatasetConfig& cfg) {
  if (cfg.num_scenes < 1 || cfg.frames_per_scene < 1 || cfg.train_scenes >= cfg.num_scenes)
    throw std::invalid_argument("generate_dataset: bad scene/frame counts");
  std::vector<Frame> frames;
  frames.reserve(static_cast<std::size_t>(cfg.total_frames()));
  for (int s = 0; s < cfg.num_scenes; ++s)
    for (int t = 0; t < cfg.frames_per_scene; ++t) frames.push_back(generate_frame(seed, cfg, s, t));
  return frames;
}

}  // namespace pcdistill
