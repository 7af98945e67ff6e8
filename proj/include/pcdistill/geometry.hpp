#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

namespace pcdistill {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double squared_norm() const { return dot(*this); }
  double norm() const { return std::sqrt(squared_norm()); }
  Vec3 normalized() const {
    const double n = norm();
    return {x / n, y / n, z / n};
  }
  bool finite() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
  }
};

struct Mat3 {
  // Row-major.
  std::array<double, 9> m{};

  static Mat3 identity() {
    Mat3 r;
    r.m = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    return r;
  }

  double& at(int r, int c) { return m[static_cast<std::size_t>(r * 3 + c)]; }
  double at(int r, int c) const { return m[static_cast<std::size_t>(r * 3 + c)]; }

  Vec3 apply(const Vec3& v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
            m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
  }

  Mat3 transposed() const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r.at(i, j) = at(j, i);
    return r;
  }

  Mat3 operator*(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double s = 0.0;
        for (int k = 0; k < 3; ++k) s += at(i, k) * o.at(k, j);
        r.at(i, j) = s;
      }
    return r;
  }

  double det() const {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
  }

  static Mat3 rotation_z(double yaw) {
    const double c = std::cos(yaw), s = std::sin(yaw);
    Mat3 r = identity();
    r.at(0, 0) = c;
    r.at(0, 1) = -s;
    r.at(1, 0) = s;
    r.at(1, 1) = c;
    return r;
  }
};

// 4x4 homogeneous transform, row-major. Used for rigid transforms only.
struct Mat4 {
  std::array<double, 16> m{};

  static Mat4 identity() {
    Mat4 r;
    r.m = {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};
    return r;
  }

  static Mat4 from_rt(const Mat3& rot, const Vec3& t) {
    Mat4 r = identity();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r.at(i, j) = rot.at(i, j);
    r.at(0, 3) = t.x;
    r.at(1, 3) = t.y;
    r.at(2, 3) = t.z;
    return r;
  }

  static Mat4 translation(const Vec3& t) { return from_rt(Mat3::identity(), t); }

  double& at(int r, int c) { return m[static_cast<std::size_t>(r * 4 + c)]; }
  double at(int r, int c) const { return m[static_cast<std::size_t>(r * 4 + c)]; }

  Mat3 rotation() const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r.at(i, j) = at(i, j);
    return r;
  }

  Vec3 translation_part() const { return {at(0, 3), at(1, 3), at(2, 3)}; }

  Vec3 apply_point(const Vec3& p) const {
    const Mat3 r = rotation();
    return r.apply(p) + translation_part();
  }

  Mat4 operator*(const Mat4& o) const {
    Mat4 r;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        double s = 0.0;
        for (int k = 0; k < 4; ++k) s += at(i, k) * o.at(k, j);
        r.at(i, j) = s;
      }
    return r;
  }

  bool is_rigid(double tol = 1e-9) const {
    if (at(3, 0) != 0.0 || at(3, 1) != 0.0 || at(3, 2) != 0.0 || at(3, 3) != 1.0) return false;
    const Mat3 r = rotation();
    const Mat3 rtr = r.transposed() * r;
    const Mat3 eye = Mat3::identity();
    for (int i = 0; i < 9; ++i)
      if (std::abs(rtr.m[static_cast<std::size_t>(i)] - eye.m[static_cast<std::size_t>(i)]) > tol)
        return false;
    return std::abs(r.det() - 1.0) <= tol;
  }

  // Valid for rigid transforms only.
  Mat4 inverse_rigid() const {
    const Mat3 rt = rotation().transposed();
    const Vec3 t = translation_part();
    return from_rt(rt, rt.apply(t) * -1.0);
  }
};

// Pinhole camera calibrated against the LiDAR frame. Intrinsics map
// camera-frame metric coordinates to pixels; extrinsics map LiDAR frame to
// camera frame. The teacher feature grid is (H/S) x (W/S).
struct CalibratedCamera {
  Mat3 intrinsics = Mat3::identity();
  Mat4 extrinsics = Mat4::identity();
  int image_height = 0;
  int image_width = 0;
  int patch_stride = 1;

  int patch_rows() const { return image_height / patch_stride; }
  int patch_cols() const { return image_width / patch_stride; }

  void validate() const {
    if (image_height <= 0 || image_width <= 0 || patch_stride <= 0)
      throw std::invalid_argument("camera: non-positive image size or stride");
    if (image_height % patch_stride != 0 || image_width % patch_stride != 0)
      throw std::invalid_argument("camera: image size not divisible by patch stride");
    if (intrinsics.at(1, 0) != 0.0 || intrinsics.at(2, 0) != 0.0 || intrinsics.at(2, 1) != 0.0 ||
        intrinsics.at(2, 2) != 1.0)
      throw std::invalid_argument("camera: intrinsics must be upper-triangular with unit w row");
    if (intrinsics.at(0, 0) <= 0.0 || intrinsics.at(1, 1) <= 0.0)
      throw std::invalid_argument("camera: focal lengths must be positive");
    if (!extrinsics.is_rigid())
      throw std::invalid_argument("camera: extrinsics must be rigid");
  }
};

// N x 4 point table (x, y, z, intensity), meters, intensity in [0, 1].
// labels is empty when the cloud is unlabeled. sensor_origin is expressed in
// the same frame as the points.
struct PointCloud {
  std::vector<std::array<double, 4>> points;
  std::vector<int> labels;
  Vec3 sensor_origin{};

  std::size_t size() const { return points.size(); }
  bool has_labels() const { return !labels.empty(); }
  Vec3 xyz(std::size_t i) const { return {points[i][0], points[i][1], points[i][2]}; }
  double intensity(std::size_t i) const { return points[i][3]; }
};

struct PixelCorrespondence {
  std::size_t point_index = 0;
  double u = 0.0;
  double v = 0.0;
  int patch_row = 0;
  int patch_col = 0;
  std::size_t camera_index = 0;
};

struct Projection {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;
};

// Points at or behind the image plane are excluded rather than divided by ~0.
inline constexpr double kDepthEpsilon = 1e-6;

// Extrinsics, then intrinsics, then perspective divide. Absent result when the
// point is behind the camera or lands outside the half-open pixel domain
// [0, W) x [0, H).
inline std::optional<Projection> project_point(const Vec3& p, const CalibratedCamera& cam) {
  const Vec3 pc = cam.extrinsics.apply_point(p);
  if (pc.z <= kDepthEpsilon) return std::nullopt;
  const Vec3 uvw = cam.intrinsics.apply(pc);
  const double u = uvw.x / pc.z;
  const double v = uvw.y / pc.z;
  if (!(u >= 0.0 && u < static_cast<double>(cam.image_width))) return std::nullopt;
  if (!(v >= 0.0 && v < static_cast<double>(cam.image_height))) return std::nullopt;
  return Projection{u, v, pc.z};
}

// Inverse of project_point for in-frustum results.
inline Vec3 unproject_pixel(double u, double v, double depth, const CalibratedCamera& cam) {
  const double fx = cam.intrinsics.at(0, 0);
  const double fy = cam.intrinsics.at(1, 1);
  const double skew = cam.intrinsics.at(0, 1);
  const double cx = cam.intrinsics.at(0, 2);
  const double cy = cam.intrinsics.at(1, 2);
  const double yc = (v - cy) * depth / fy;
  const double xc = ((u - cx) * depth - skew * yc) / fx;
  const Vec3 pc{xc, yc, depth};
  return cam.extrinsics.inverse_rigid().apply_point(pc);
}

// One correspondence per (visible point, camera). Deterministic order:
// cameras outer, points inner.
inline std::vector<PixelCorrespondence> build_correspondences(
    const PointCloud& pc, const std::vector<CalibratedCamera>& cams) {
  if (cams.empty()) throw std::invalid_argument("build_correspondences: no cameras");
  std::vector<PixelCorrespondence> out;
  for (std::size_t c = 0; c < cams.size(); ++c) {
    const CalibratedCamera& cam = cams[c];
    const int s = cam.patch_stride;
    for (std::size_t i = 0; i < pc.size(); ++i) {
      const auto proj = project_point(pc.xyz(i), cam);
      if (!proj) continue;
      PixelCorrespondence pcor;
      pcor.point_index = i;
      pcor.u = proj->u;
      pcor.v = proj->v;
      pcor.patch_row = static_cast<int>(std::floor(proj->v / s));
      pcor.patch_col = static_cast<int>(std::floor(proj->u / s));
      pcor.camera_index = c;
      out.push_back(pcor);
    }
  }
  return out;
}

inline PointCloud transform_cloud(const PointCloud& pc, const Mat4& t) {
  if (!t.is_rigid()) throw std::invalid_argument("transform_cloud: transform is not rigid");
  PointCloud out = pc;
  for (std::size_t i = 0; i < pc.size(); ++i) {
    const Vec3 q = t.apply_point(pc.xyz(i));
    out.points[i][0] = q.x;
    out.points[i][1] = q.y;
    out.points[i][2] = q.z;
  }
  out.sensor_origin = t.apply_point(pc.sensor_origin);
  return out;
}

}  // namespace pcdistill
